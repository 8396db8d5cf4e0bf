/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_splatdemo_free: (a: number, b: number) => void;
export const absmax_errors: (a: number, b: bigint) => [number, number];
export const kmeans_scatter: (a: number, b: number, c: number, d: bigint) => [number, number];
export const splatdemo_count: (a: number) => number;
export const splatdemo_height: (a: number) => number;
export const splatdemo_new: (a: number, b: number, c: number, d: number, e: bigint) => number;
export const splatdemo_psnr: (a: number) => number;
export const splatdemo_render_quantized: (a: number, b: number) => [number, number];
export const splatdemo_target_rgba: (a: number) => [number, number];
export const splatdemo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
