/* tslint:disable */
/* eslint-disable */

/**
 * Normalized ALOHA throughput of the heuristic policy for `M = 1..=m_max`.
 */
export function aloha_sweep(n: number, rho: number, q: number, m_max: number, seed: bigint): string;

/**
 * Optimal and heuristic CSMA sensing policies for `m` users sensing `s` channels each.
 */
export function csma_policy(n: number, s: number, rho: number, m: number, seed: bigint): string;

/**
 * Detection radius meeting the collision budget for `M = 1..=m_max`.
 */
export function detection_radius(n: number, rho: number, q: number, xi: number, lambda: number, radius: number, m_max: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly aloha_sweep: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly csma_policy: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly detection_radius: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
