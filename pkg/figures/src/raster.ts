// Tiny software rasterizer: RGBA canvas with rectangles, discs, lines and
// a 5x7 bitmap font (rendered uppercase). Everything is integer pixel
// math, so identical draw calls produce identical bytes.

export type Color = [number, number, number, number];

export const WHITE: Color = [255, 255, 255, 255];
export const BLACK: Color = [0, 0, 0, 255];
export const GREY: Color = [130, 130, 130, 255];
export const LIGHT_GREY: Color = [220, 220, 220, 255];
export const GROUP_COLORS: Color[] = [
    [31, 119, 180, 255], // a = 0
    [214, 39, 40, 255], // a = 1
];

export class Raster {
    readonly data: Uint8Array;

    constructor(readonly width: number, readonly height: number, fill: Color = WHITE) {
        this.data = new Uint8Array(width * height * 4);
        this.fillRect(0, 0, width, height, fill);
    }

    set(x: number, y: number, c: Color): void {
        if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
        const i = (y * this.width + x) * 4;
        this.data[i] = c[0];
        this.data[i + 1] = c[1];
        this.data[i + 2] = c[2];
        this.data[i + 3] = c[3];
    }

    fillRect(x: number, y: number, w: number, h: number, c: Color): void {
        for (let yy = y; yy < y + h; yy++) {
            for (let xx = x; xx < x + w; xx++) {
                this.set(xx, yy, c);
            }
        }
    }

    strokeRect(x: number, y: number, w: number, h: number, c: Color): void {
        for (let xx = x; xx < x + w; xx++) {
            this.set(xx, y, c);
            this.set(xx, y + h - 1, c);
        }
        for (let yy = y; yy < y + h; yy++) {
            this.set(x, yy, c);
            this.set(x + w - 1, yy, c);
        }
    }

    disc(cx: number, cy: number, r: number, c: Color): void {
        for (let dy = -r; dy <= r; dy++) {
            for (let dx = -r; dx <= r; dx++) {
                if (dx * dx + dy * dy <= r * r) {
                    this.set(cx + dx, cy + dy, c);
                }
            }
        }
    }

    line(x0: number, y0: number, x1: number, y1: number, c: Color): void {
        // Bresenham
        let dx = Math.abs(x1 - x0);
        let dy = -Math.abs(y1 - y0);
        const sx = x0 < x1 ? 1 : -1;
        const sy = y0 < y1 ? 1 : -1;
        let err = dx + dy;
        for (;;) {
            this.set(x0, y0, c);
            if (x0 === x1 && y0 === y1) break;
            const e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    text(x: number, y: number, s: string, c: Color, scale = 1): void {
        let cx = x;
        for (const ch of s.toUpperCase()) {
            const glyph = FONT[ch] ?? FONT["?"];
            for (let row = 0; row < 7; row++) {
                for (let col = 0; col < 5; col++) {
                    if (glyph[row][col] === "#") {
                        this.fillRect(cx + col * scale, y + row * scale, scale, scale, c);
                    }
                }
            }
            cx += 6 * scale;
        }
    }
}

export function textWidth(s: string, scale = 1): number {
    return s.length * 6 * scale;
}

/** Blue-to-yellow ramp for continuous color keys. */
export function ramp(t: number): Color {
    const clamped = Math.min(1, Math.max(0, t));
    return [
        Math.round(40 + 215 * clamped),
        Math.round(60 + 170 * clamped),
        Math.round(180 - 140 * clamped),
        255,
    ];
}

const FONT: Record<string, string[]> = {
    A: [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    B: ["####.", "#...#", "####.", "#...#", "#...#", "#...#", "####."],
    C: [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    D: ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
    E: ["#####", "#....", "####.", "#....", "#....", "#....", "#####"],
    F: ["#####", "#....", "####.", "#....", "#....", "#....", "#...."],
    G: [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."],
    H: ["#...#", "#...#", "#####", "#...#", "#...#", "#...#", "#...#"],
    I: [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    J: ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    K: ["#...#", "#..#.", "###..", "#.#..", "#..#.", "#...#", "#...#"],
    L: ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    M: ["#...#", "##.##", "#.#.#", "#...#", "#...#", "#...#", "#...#"],
    N: ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"],
    O: [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    P: ["####.", "#...#", "####.", "#....", "#....", "#....", "#...."],
    Q: [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    R: ["####.", "#...#", "####.", "#.#..", "#..#.", "#...#", "#...#"],
    S: [".####", "#....", ".###.", "....#", "....#", "....#", "####."],
    T: ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    U: ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    V: ["#...#", "#...#", "#...#", "#...#", ".#.#.", ".#.#.", "..#.."],
    W: ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"],
    X: ["#...#", ".#.#.", "..#..", "..#..", ".#.#.", "#...#", "#...#"],
    Y: ["#...#", ".#.#.", "..#..", "..#..", "..#..", "..#..", "..#.."],
    Z: ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
    "0": [".###.", "#..##", "#.#.#", "##..#", "#...#", "#...#", ".###."],
    "1": ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    "2": [".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"],
    "3": [".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."],
    "4": ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    "5": ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    "6": [".###.", "#....", "####.", "#...#", "#...#", "#...#", ".###."],
    "7": ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    "8": [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    "9": [".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."],
    "=": [".....", "#####", ".....", "#####", ".....", ".....", "....."],
    "-": [".....", ".....", ".....", "#####", ".....", ".....", "....."],
    "_": [".....", ".....", ".....", ".....", ".....", ".....", "#####"],
    ".": [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."],
    ",": [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."],
    ":": [".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."],
    "/": ["....#", "...#.", "..#..", "..#..", ".#...", "#....", "#...."],
    "(": ["..#..", ".#...", ".#...", ".#...", ".#...", ".#...", "..#.."],
    ")": ["..#..", "...#.", "...#.", "...#.", "...#.", "...#.", "..#.."],
    " ": [".....", ".....", ".....", ".....", ".....", ".....", "....."],
    "?": [".###.", "#...#", "....#", "..##.", "..#..", ".....", "..#.."],
};
