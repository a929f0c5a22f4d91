/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const aloha_sweep: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const csma_policy: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const detection_radius: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
