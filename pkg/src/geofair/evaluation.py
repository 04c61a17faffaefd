"""Model evaluation and the two-model comparison experiment.

The four report metrics: classification accuracy and reconstruction MSE
(utility), plus the test-set means of the factual-vs-counterfactual metric
and curvature discrepancies (invariance). Geometry is always evaluated in
exact mode; stencils are a training-time device.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import net
from .derivatives import DiffMode, jacobian_hessian_batch
from .errors import ShapeError
from .losses import LossWeights
from .scm import records_arrays, sample_dataset, export_dataset
from .training import Trainer, config_digest, write_training_log

REPORT_FORMAT = "geofair-report/1"
TABLE_FORMAT = "geofair-table/1"
LATENTS_HEADER = "u,v,a,y,z1,z2,zcf1,zcf2"


@dataclass
class MetricReport:
    model: str
    accuracy: float
    mse: float
    metric_error: float
    curvature_error: float
    n_test: int
    config_digest: str

    def to_doc(self):
        return {
            "format": REPORT_FORMAT,
            "model": self.model,
            "accuracy": self.accuracy,
            "mse": self.mse,
            "metric_error": self.metric_error,
            "curvature_error": self.curvature_error,
            "n_test": self.n_test,
            "config_digest": self.config_digest,
        }

    def to_json(self):
        return json.dumps(self.to_doc(), sort_keys=True)

    @classmethod
    def from_doc(cls, doc):
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"unsupported report format {doc.get('format')!r}")
        return cls(
            model=doc["model"],
            accuracy=float(doc["accuracy"]),
            mse=float(doc["mse"]),
            metric_error=float(doc["metric_error"]),
            curvature_error=float(doc["curvature_error"]),
            n_test=int(doc["n_test"]),
            config_digest=doc["config_digest"],
        )


def _as_bundle(checkpoint):
    if isinstance(checkpoint, net.ModelBundle):
        return checkpoint
    return net.load_checkpoint(checkpoint)


def _batch_geometry(bundle, Z):
    stack = net.build_stack(bundle.decoder.spec, bundle.decoder.values)
    J, H = jacobian_hessian_batch(stack, Z, DiffMode.exact())
    G = np.swapaxes(J, 1, 2) @ J
    return G, H


def evaluate(checkpoint, test_records, model_tag="model", digest=""):
    """MetricReport over a test split; deterministic for fixed inputs."""
    bundle = _as_bundle(checkpoint)
    if not test_records:
        raise ValueError("empty test split")
    _, _, _, y, x, x_cf = records_arrays(test_records)
    if x.shape[1] != bundle.d_x:
        raise ShapeError("checkpoint and dataset feature widths disagree")
    z = net.encode(bundle, x)
    z_cf = net.encode(bundle, x_cf)
    p = net.predict(bundle, z)
    accuracy = float(np.mean((p >= 0.5).astype(np.int64) == y))
    x_hat = net.decode(bundle, z)
    mse = float(np.mean(np.sum((x - x_hat) ** 2, axis=1)))
    G, H = _batch_geometry(bundle, z)
    Gc, Hc = _batch_geometry(bundle, z_cf)
    metric_error = float(
        np.mean(np.sqrt(np.sum((G - Gc) ** 2, axis=(1, 2))))
    )
    curvature_error = float(
        np.mean(np.sum(np.sqrt(np.sum((H - Hc) ** 2, axis=(2, 3))), axis=1))
    )
    return MetricReport(
        model=model_tag,
        accuracy=accuracy,
        mse=mse,
        metric_error=metric_error,
        curvature_error=curvature_error,
        n_test=len(test_records),
        config_digest=digest,
    )


def dump_latents(checkpoint, test_records, path):
    """CSV of intrinsic coordinates and factual/counterfactual latents."""
    bundle = _as_bundle(checkpoint)
    u, v, a, y, x, x_cf = records_arrays(test_records)
    z = net.encode(bundle, x)
    z_cf = net.encode(bundle, x_cf)
    lines = [LATENTS_HEADER]
    for i in range(len(test_records)):
        lines.append(
            ",".join(
                [repr(float(u[i])), repr(float(v[i])), str(int(a[i])), str(int(y[i]))]
                + [repr(float(c)) for c in z[i]]
                + [repr(float(c)) for c in z_cf[i]]
            )
        )
    net.write_atomic(path, "\n".join(lines) + "\n")
    return path


def render_table_text(reports):
    """Aligned text table mirroring the comparison columns."""
    header = ("model", "acc", "mse", "metric_err", "curv_err")
    rows = [header]
    for r in reports:
        rows.append(
            (
                r.model,
                f"{r.accuracy:.4f}",
                f"{r.mse:.4f}",
                f"{r.metric_error:.4f}",
                f"{r.curvature_error:.4f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    baseline: MetricReport
    regularized: MetricReport
    out_dir: str


def run_experiment(exp_config, out_dir):
    """Train baseline and geometry-regularized models on one dataset.

    Both models start from identical seeded parameters; artifacts are
    written as soon as each stage completes, so an aborted training leaves
    the earlier stages on disk.
    """
    os.makedirs(out_dir, exist_ok=True)
    dataset = sample_dataset(exp_config.n, exp_config.seed, exp_config.label_threshold)
    export_dataset(dataset, os.path.join(out_dir, "dataset.csv"))

    cmf_config = exp_config.train
    base_config = replace(cmf_config, weights=LossWeights.baseline())
    reports = []
    for tag, config in (("baseline", base_config), ("geofair", cmf_config)):
        bundle = exp_config.make_bundle()
        trainer = Trainer(config, dataset, bundle)
        trainer.run()
        best = trainer.best_bundle()
        net.save_checkpoint(best, os.path.join(out_dir, f"{tag}_checkpoint.json"))
        write_training_log(trainer.log, os.path.join(out_dir, f"{tag}_log.csv"))
        dump_latents(best, dataset.test, os.path.join(out_dir, f"{tag}_latents.csv"))
        report = evaluate(best, dataset.test, tag, config_digest(config))
        net.write_atomic(
            os.path.join(out_dir, f"{tag}_report.json"), report.to_json()
        )
        reports.append(report)

    table = {
        "format": TABLE_FORMAT,
        "rows": [r.to_doc() for r in reports],
    }
    net.write_atomic(os.path.join(out_dir, "table.json"), json.dumps(table, sort_keys=True))
    net.write_atomic(os.path.join(out_dir, "table.txt"), render_table_text(reports))
    return ExperimentResult(
        baseline=reports[0], regularized=reports[1], out_dir=os.fspath(out_dir)
    )
