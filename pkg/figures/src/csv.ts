// Lossless CSV handling: cells are kept as their original strings so the
// echo mode can reproduce the input byte for byte, while typed accessors
// parse on demand and report the offending row on failure.

import { readFileSync } from "node:fs";

export interface CsvTable {
    header: string[];
    rows: string[][];
    /** line terminators as they appeared, one per line (last may be "") */
    terminators: string[];
    raw: string;
}

export class CsvError extends Error {
    constructor(message: string, public readonly row?: number) {
        super(row === undefined ? message : `${message} (row ${row})`);
    }
}

export function parseCsv(text: string): CsvTable {
    const pieces = text.split(/(\r?\n)/);
    const lines: string[] = [];
    const terminators: string[] = [];
    for (let i = 0; i < pieces.length; i += 2) {
        lines.push(pieces[i]);
        terminators.push(pieces[i + 1] ?? "");
    }
    // a trailing newline leaves one empty phantom line; drop it but keep
    // the terminator bookkeeping consistent for the echo path
    if (lines.length > 1 && lines[lines.length - 1] === "" && terminators[terminators.length - 1] === "") {
        lines.pop();
        terminators.pop();
    }
    if (lines.length === 0 || lines[0] === "") {
        throw new CsvError("empty CSV: no header line");
    }
    const header = lines[0].split(",");
    const rows: string[][] = [];
    for (let i = 1; i < lines.length; i++) {
        const cells = lines[i].split(",");
        if (cells.length !== header.length) {
            throw new CsvError(
                `expected ${header.length} fields, found ${cells.length}`,
                i + 1,
            );
        }
        rows.push(cells);
    }
    return { header, rows, terminators, raw: text };
}

export function readCsv(path: string): CsvTable {
    return parseCsv(readFileSync(path, "utf8"));
}

/** Rebuild the file text from the parsed cells; byte-identical by design. */
export function echoCsv(table: CsvTable): string {
    const lines = [table.header.join(",")];
    for (const row of table.rows) {
        lines.push(row.join(","));
    }
    let out = "";
    for (let i = 0; i < lines.length; i++) {
        out += lines[i] + (table.terminators[i] ?? "");
    }
    return out;
}

export function requireHeader(table: CsvTable, expected: string[]): void {
    for (const column of expected) {
        if (!table.header.includes(column)) {
            throw new CsvError(`missing column '${column}'`);
        }
    }
    if (table.header.length !== expected.length || expected.some((c, i) => table.header[i] !== c)) {
        throw new CsvError(
            `unexpected header '${table.header.join(",")}' (wanted '${expected.join(",")}')`,
        );
    }
}

export function numericColumn(table: CsvTable, name: string): number[] {
    const index = table.header.indexOf(name);
    if (index < 0) {
        throw new CsvError(`missing column '${name}'`);
    }
    return table.rows.map((cells, i) => {
        const value = Number(cells[index]);
        if (!Number.isFinite(value)) {
            throw new CsvError(`non-numeric value '${cells[index]}' in column '${name}'`, i + 2);
        }
        return value;
    });
}

export const LATENTS_HEADER = ["u", "v", "a", "y", "z1", "z2", "zcf1", "zcf2"];
export const LOG_HEADER = [
    "step",
    "total",
    "recon_mse",
    "cls_bce",
    "align",
    "geo_metric",
    "geo_curvature",
];
