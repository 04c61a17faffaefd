#!/usr/bin/env node
// figures: render geofair CSV exports as PNG images.
//
//   figures latents --in a.csv [--in b.csv] --color a|u --out fig.png
//   figures log --in train.csv --out loss.png
//   figures echo --in file.csv            (reprint parsed CSV byte-exactly)

import { existsSync, writeFileSync } from "node:fs";
import { stdout } from "node:process";
import { CsvError, echoCsv, readCsv } from "./csv.js";
import { panelTitle, renderLatents, renderTrainingLog, ColorKey } from "./charts.js";
import { encodePng } from "./png.js";

interface Args {
    inputs: string[];
    out?: string;
    color: ColorKey;
}

function usage(): string {
    return [
        "usage:",
        "  figures latents --in latents.csv [--in other.csv] [--color a|u] --out fig.png",
        "  figures log --in train_log.csv --out loss.png",
        "  figures echo --in file.csv",
    ].join("\n");
}

function parseArgs(argv: string[]): Args {
    const args: Args = { inputs: [], color: "a" };
    for (let i = 0; i < argv.length; i++) {
        const flag = argv[i];
        if (flag === "--in") {
            args.inputs.push(requireValue(argv, ++i, "--in"));
        } else if (flag === "--out") {
            args.out = requireValue(argv, ++i, "--out");
        } else if (flag === "--color") {
            const value = requireValue(argv, ++i, "--color");
            if (value !== "a" && value !== "u") {
                throw new CsvError(`--color must be 'a' or 'u', got '${value}'`);
            }
            args.color = value;
        } else {
            throw new CsvError(`unknown flag '${flag}'`);
        }
    }
    if (args.inputs.length === 0) {
        throw new CsvError("at least one --in file is required");
    }
    return args;
}

function requireValue(argv: string[], i: number, flag: string): string {
    if (i >= argv.length) {
        throw new CsvError(`missing value for ${flag}`);
    }
    return argv[i];
}

function loadTables(paths: string[]) {
    return paths.map((p) => {
        if (!existsSync(p)) {
            throw new CsvError(`input file not found: ${p}`);
        }
        return { table: readCsv(p), title: panelTitle(p) };
    });
}

export function run(argv: string[]): number {
    const [command, ...rest] = argv;
    try {
        if (command === "latents") {
            const args = parseArgs(rest);
            if (!args.out) throw new CsvError("--out is required");
            const inputs = loadTables(args.inputs);
            const { raster, meta } = renderLatents(inputs, args.color);
            writeFileSync(args.out, encodePng(meta.width, meta.height, raster.data));
            console.log(
                `wrote ${args.out}: ${meta.panels} panel(s), ` +
                    `${meta.pointsPerPanel.join("/")} points, legend [${meta.legendEntries.join(", ")}]`,
            );
            return 0;
        }
        if (command === "log") {
            const args = parseArgs(rest);
            if (!args.out) throw new CsvError("--out is required");
            if (args.inputs.length !== 1) {
                throw new CsvError("log takes exactly one --in file");
            }
            const [input] = loadTables(args.inputs);
            const { raster, meta } = renderTrainingLog(input.table);
            writeFileSync(args.out, encodePng(meta.width, meta.height, raster.data));
            console.log(
                `wrote ${args.out}: ${meta.series.length} series, ${meta.pointsPerSeries} points each`,
            );
            return 0;
        }
        if (command === "echo") {
            const args = parseArgs(rest);
            if (args.inputs.length !== 1) {
                throw new CsvError("echo takes exactly one --in file");
            }
            const [input] = loadTables(args.inputs);
            stdout.write(echoCsv(input.table));
            return 0;
        }
        console.error(usage());
        return 2;
    } catch (err) {
        if (err instanceof CsvError) {
            console.error(`error: ${err.message}`);
            return 1;
        }
        throw err;
    }
}

const invokedDirectly =
    process.argv[1] !== undefined &&
    import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
    process.exit(run(process.argv.slice(2)));
}
