/* tslint:disable */
/* eslint-disable */

/**
 * A small 2D scene fitted once, then re-rendered under codebooks of any size.
 */
export class SplatDemo {
    free(): void;
    [Symbol.dispose](): void;
    count(): number;
    height(): number;
    /**
     * Renders a random `truth`-Gaussian target and fits `gaussians` Gaussians to it.
     */
    constructor(size: number, truth: number, gaussians: number, iterations: number, seed: bigint);
    /**
     * PSNR of the most recent render against the target.
     */
    psnr(): number;
    /**
     * RGBA pixels with color, scale and angle each snapped to `k` centroids.
     * `k = 0` renders the unquantized scene.
     */
    render_quantized(k: number): Uint8Array;
    target_rgba(): Uint8Array;
    width(): number;
}

/**
 * Absmax quantization of one random channel at 4, 8 and 16 bits.
 *
 * Returns `len` original values followed by the three reconstructions, then
 * for each width the largest observed error and the bound `scale / (2^(b-1) - 1)`.
 */
export function absmax_errors(len: number, seed: bigint): Float32Array;

/**
 * k-means on `n` points drawn around a few random centers in the unit square.
 *
 * Returns `[x, y, cluster]` per point, then `[x, y]` per centroid.
 */
export function kmeans_scatter(n: number, k: number, iterations: number, seed: bigint): Float32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_splatdemo_free: (a: number, b: number) => void;
    readonly absmax_errors: (a: number, b: bigint) => [number, number];
    readonly kmeans_scatter: (a: number, b: number, c: number, d: bigint) => [number, number];
    readonly splatdemo_count: (a: number) => number;
    readonly splatdemo_height: (a: number) => number;
    readonly splatdemo_new: (a: number, b: number, c: number, d: number, e: bigint) => number;
    readonly splatdemo_psnr: (a: number) => number;
    readonly splatdemo_render_quantized: (a: number, b: number) => [number, number];
    readonly splatdemo_target_rgba: (a: number) => [number, number];
    readonly splatdemo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
