"""Structural model: analytic agreement, pairing, balance, round-trips."""

import json
import math

import numpy as np
import pytest

from geofair import scm
from geofair.errors import DomainError, FormatError

from oracles import warped_roll_np


def test_structural_map_origin():
    assert np.array_equal(scm.structural_map(0.0, 0.0, 0), np.zeros(3))


def test_structural_map_attribute_scales_radius():
    # w = 1 + 0.5 a: the attribute widens the spiral by half
    x0 = scm.structural_map(1.0, 0.0, 0)
    x1 = scm.structural_map(1.0, 0.0, 1)
    assert abs(x1[0] / x0[0] - 1.5) < 1e-15
    assert abs(x1[1] / x0[1] - 1.5) < 1e-15


def test_structural_map_hand_value_at_pi():
    x = scm.structural_map(math.pi, 0.0, 1)
    assert abs(x[0] - (-1.5 * math.pi)) < 1e-12
    assert abs(x[1]) < 1e-12
    assert x[2] == 0.0


def test_structural_map_matches_independent_evaluator():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(1000):
        u = rng.uniform(0, scm.U_MAX)
        v = rng.uniform(0, 1)
        a = int(rng.integers(0, 2))
        ours = scm.structural_map(u, v, a)
        ref = warped_roll_np(u, v, a, height_scale=scm.HEIGHT_SCALE)
        worst = max(worst, np.abs(ours - ref).max())
    assert worst < 1e-12


def test_structural_map_domain_errors():
    with pytest.raises(DomainError):
        scm.structural_map(-0.1, 0.5, 0)
    with pytest.raises(DomainError):
        scm.structural_map(scm.U_MAX + 1e-6, 0.5, 0)
    with pytest.raises(DomainError):
        scm.structural_map(1.0, 1.5, 0)
    with pytest.raises(DomainError):
        scm.structural_map(1.0, 0.5, 2)


def test_sample_dataset_deterministic():
    a = scm.sample_dataset(200, seed=5)
    b = scm.sample_dataset(200, seed=5)
    for ra, rb in zip(a.all_records(), b.all_records()):
        assert ra.u == rb.u and ra.v == rb.v and ra.a == rb.a
        assert np.array_equal(ra.x, rb.x)
        assert np.array_equal(ra.x_cf, rb.x_cf)


def test_sample_dataset_minimum_size():
    with pytest.raises(ValueError):
        scm.sample_dataset(9, seed=0)


def test_counterfactual_involution_bit_exact():
    ds = scm.sample_dataset(100, seed=3)
    for r in ds.all_records():
        again = scm.structural_map(r.u, r.v, 1 - (1 - r.a))
        assert np.array_equal(again, r.x)
        flipped = scm.structural_map(r.u, r.v, 1 - r.a)
        assert np.array_equal(flipped, r.x_cf)


def test_records_regenerate_bit_exactly():
    ds = scm.sample_dataset(50, seed=9)
    for r in ds.all_records():
        assert np.array_equal(scm.structural_map(r.u, r.v, r.a), r.x)


def test_label_depends_on_u_only():
    ds = scm.sample_dataset(500, seed=1)
    for r in ds.all_records():
        assert r.y == int(r.u > ds.label_threshold)


def test_splits_disjoint_and_sized():
    ds = scm.sample_dataset(1000, seed=2)
    assert sum(ds.sizes) == 1000
    assert ds.sizes == (700, 150, 150)


def test_attribute_balance_per_split():
    ds = scm.sample_dataset(1001, seed=4)
    for part in (ds.train, ds.validation, ds.test):
        ones = sum(r.a for r in part)
        assert abs(ones - (len(part) - ones)) <= 1


def test_class_balance_near_half():
    ds = scm.sample_dataset(1000, seed=6)
    ys = [r.y for r in ds.all_records()]
    assert abs(np.mean(ys) - 0.5) < 0.05


def test_label_attribute_independence():
    ds = scm.sample_dataset(1000, seed=8)
    ys = np.array([r.y for r in ds.all_records()], dtype=float)
    az = np.array([r.a for r in ds.all_records()], dtype=float)
    corr = np.corrcoef(ys, az)[0, 1]
    assert abs(corr) < 0.1


def test_counterfactual_gap_is_material():
    ds = scm.sample_dataset(120, seed=10)
    recs = ds.all_records()[:100]
    gaps = [np.linalg.norm(r.x - r.x_cf) for r in recs]
    assert np.mean(gaps) > 1.0
    # the gap closes as the radius pinches to a point
    small_u = min(recs, key=lambda r: r.u)
    assert np.linalg.norm(small_u.x - small_u.x_cf) < 0.5 * small_u.u + 1e-12


def test_export_import_roundtrip(tmp_path):
    ds = scm.sample_dataset(60, seed=12)
    path = tmp_path / "dataset.csv"
    scm.export_dataset(ds, path)
    back = scm.import_dataset(path)
    assert back.seed == ds.seed and back.n == ds.n
    assert back.sizes == ds.sizes
    for ra, rb in zip(ds.all_records(), back.all_records()):
        assert abs(ra.u - rb.u) < 1e-15
        assert abs(ra.v - rb.v) < 1e-15
        assert ra.a == rb.a and ra.y == rb.y
        assert np.abs(ra.x - rb.x).max() < 1e-15
        assert np.abs(ra.x_cf - rb.x_cf).max() < 1e-15


def test_export_row_count_and_header(tmp_path):
    ds = scm.sample_dataset(40, seed=13)
    path = tmp_path / "dataset.csv"
    scm.export_dataset(ds, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 41
    assert lines[0] == "u,v,a,y,x1,x2,x3,xcf1,xcf2,xcf3"


def test_export_metadata_matches(tmp_path):
    ds = scm.sample_dataset(40, seed=14)
    path = tmp_path / "dataset.csv"
    scm.export_dataset(ds, path)
    meta = json.loads((tmp_path / "dataset.csv.meta.json").read_text())
    assert meta["seed"] == 14
    assert meta["n"] == 40
    assert meta["format"] == "geofair-dataset/1"


def test_import_rejects_unknown_version(tmp_path):
    ds = scm.sample_dataset(40, seed=15)
    path = tmp_path / "dataset.csv"
    scm.export_dataset(ds, path)
    meta_path = tmp_path / "dataset.csv.meta.json"
    meta_path.write_text(meta_path.read_text().replace("/1", "/2"))
    with pytest.raises(FormatError):
        scm.import_dataset(path)
