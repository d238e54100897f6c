/* tslint:disable */
/* eslint-disable */

/**
 * Hardened code, positional value and length loss of one code/mask pair.
 *
 * `soft` holds generator outputs in [-1, 1], `mask` masker outputs in
 * [0, 1], both as comma or space separated lists.
 */
export function explore_code(soft: string, mask: string, base: number): string;

/**
 * Shortest valid encoding for a small labeled set.
 *
 * `labels` is either comma separated (`cat,cat,dog`) or, without commas,
 * one label per character (`AABB`). At most eight samples.
 */
export function oracle(labels: string): string;

/**
 * Trains `demo_config(seed, epochs)` and reports accuracy, the loss curve
 * and the learned codes.
 */
export function train_demo(seed: bigint, epochs: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explore_code: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly oracle: (a: number, b: number) => [number, number];
    readonly train_demo: (a: bigint, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
