// Chart assembly: latent scatter panels and training-loss curves.
// Renderers never transform the numbers beyond the affine screen mapping;
// the returned metadata lets tests check counts without decoding pixels.

import { basename } from "node:path";
import { CsvError, CsvTable, LATENTS_HEADER, LOG_HEADER, numericColumn, requireHeader } from "./csv.js";
import {
    BLACK,
    Color,
    GREY,
    GROUP_COLORS,
    LIGHT_GREY,
    Raster,
    WHITE,
    ramp,
    textWidth,
} from "./raster.js";

export type ColorKey = "a" | "u";

export interface PanelInput {
    table: CsvTable;
    title: string;
}

export interface ScatterMetadata {
    panels: number;
    pointsPerPanel: number[];
    legendEntries: string[];
    width: number;
    height: number;
}

export interface LossMetadata {
    series: string[];
    pointsPerSeries: number;
    width: number;
    height: number;
}

const PANEL_SIZE = 360;
const MARGIN = 34;
const LEGEND_HEIGHT = 26;

interface Bounds {
    lo: number;
    hi: number;
}

function bounds(values: number[]): Bounds {
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    if (lo === hi) {
        lo -= 1;
        hi += 1;
    }
    const pad = 0.06 * (hi - lo);
    return { lo: lo - pad, hi: hi + pad };
}

function toPixel(value: number, b: Bounds, lowPx: number, highPx: number): number {
    const t = (value - b.lo) / (b.hi - b.lo);
    return Math.round(lowPx + t * (highPx - lowPx));
}

export function renderLatents(
    inputs: PanelInput[],
    colorKey: ColorKey,
): { raster: Raster; meta: ScatterMetadata } {
    if (inputs.length === 0) {
        throw new CsvError("no input files given");
    }
    for (const input of inputs) {
        requireHeader(input.table, LATENTS_HEADER);
        if (input.table.rows.length === 0) {
            throw new CsvError(`no data rows in ${input.title}`);
        }
    }
    const width = MARGIN + inputs.length * (PANEL_SIZE + MARGIN);
    const height = PANEL_SIZE + 2 * MARGIN + LEGEND_HEIGHT;
    const raster = new Raster(width, height, WHITE);
    const legendEntries =
        colorKey === "a" ? ["a=0", "a=1"] : ["u low", "u high"];

    const pointsPerPanel: number[] = [];
    inputs.forEach((input, panel) => {
        const z1 = numericColumn(input.table, "z1");
        const z2 = numericColumn(input.table, "z2");
        const keyValues = numericColumn(input.table, colorKey);
        const x0 = MARGIN + panel * (PANEL_SIZE + MARGIN);
        const y0 = MARGIN;
        raster.strokeRect(x0 - 1, y0 - 1, PANEL_SIZE + 2, PANEL_SIZE + 2, GREY);
        raster.text(x0, y0 - 12, input.title.slice(0, 40), BLACK);

        const bx = bounds(z1);
        const by = bounds(z2);
        let uLo = 0;
        let uSpan = 1;
        if (colorKey === "u") {
            uLo = Math.min(...keyValues);
            uSpan = Math.max(...keyValues) - uLo || 1;
        }
        for (let i = 0; i < z1.length; i++) {
            const px = toPixel(z1[i], bx, x0 + 2, x0 + PANEL_SIZE - 3);
            const py = toPixel(z2[i], by, y0 + PANEL_SIZE - 3, y0 + 2);
            const color: Color =
                colorKey === "a"
                    ? GROUP_COLORS[keyValues[i] === 0 ? 0 : 1]
                    : ramp((keyValues[i] - uLo) / uSpan);
            raster.disc(px, py, 2, color);
        }
        pointsPerPanel.push(z1.length);
    });

    // legend strip along the bottom
    let lx = MARGIN;
    const ly = height - LEGEND_HEIGHT + 4;
    legendEntries.forEach((entry, i) => {
        const swatch: Color =
            colorKey === "a" ? GROUP_COLORS[i] : ramp(i === 0 ? 0 : 1);
        raster.fillRect(lx, ly, 10, 10, swatch);
        raster.text(lx + 14, ly + 1, entry, BLACK);
        lx += 14 + textWidth(entry) + 18;
    });

    return {
        raster,
        meta: {
            panels: inputs.length,
            pointsPerPanel,
            legendEntries,
            width,
            height,
        },
    };
}

const SERIES_COLORS: Color[] = [
    [0, 0, 0, 255],
    [31, 119, 180, 255],
    [255, 127, 14, 255],
    [44, 160, 44, 255],
    [214, 39, 40, 255],
    [148, 103, 189, 255],
];

export function renderTrainingLog(table: CsvTable): { raster: Raster; meta: LossMetadata } {
    requireHeader(table, LOG_HEADER);
    if (table.rows.length === 0) {
        throw new CsvError("training log has no rows");
    }
    const steps = numericColumn(table, "step");
    const series = LOG_HEADER.slice(1);
    const width = 640;
    const height = 400;
    const raster = new Raster(width, height, WHITE);
    const x0 = 50;
    const y0 = 16;
    const plotW = width - x0 - 16;
    const plotH = height - y0 - 70;
    raster.strokeRect(x0 - 1, y0 - 1, plotW + 2, plotH + 2, GREY);

    const bx = bounds(steps);
    const all: number[] = [];
    for (const name of series) {
        all.push(...numericColumn(table, name));
    }
    const by = bounds(all);

    // horizontal reference line at zero when visible
    if (by.lo < 0 && by.hi > 0) {
        const zy = toPixel(0, by, y0 + plotH - 1, y0);
        raster.line(x0, zy, x0 + plotW - 1, zy, LIGHT_GREY);
    }

    series.forEach((name, si) => {
        const values = numericColumn(table, name);
        const color = SERIES_COLORS[si % SERIES_COLORS.length];
        let prev: [number, number] | null = null;
        for (let i = 0; i < steps.length; i++) {
            const px = toPixel(steps[i], bx, x0, x0 + plotW - 1);
            const py = toPixel(values[i], by, y0 + plotH - 1, y0);
            if (prev) {
                raster.line(prev[0], prev[1], px, py, color);
            }
            raster.disc(px, py, 1, color);
            prev = [px, py];
        }
    });

    // legend rows under the plot
    let lx = x0;
    let ly = y0 + plotH + 12;
    series.forEach((name, si) => {
        const w = 14 + textWidth(name) + 16;
        if (lx + w > width - 8) {
            lx = x0;
            ly += 12;
        }
        raster.fillRect(lx, ly + 2, 10, 4, SERIES_COLORS[si % SERIES_COLORS.length]);
        raster.text(lx + 14, ly, name, BLACK);
        lx += w;
    });
    raster.text(x0, height - 14, `steps ${steps[0]} to ${steps[steps.length - 1]}`, GREY);

    return {
        raster,
        meta: {
            series,
            pointsPerSeries: steps.length,
            width,
            height,
        },
    };
}

export function panelTitle(path: string): string {
    return basename(path).replace(/\.csv$/i, "");
}
