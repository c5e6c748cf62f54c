/* tslint:disable */
/* eslint-disable */

/**
 * Closed-loop simulation advanced one sample at a time.
 */
export class LaneChangeDemo {
    free(): void;
    [Symbol.dispose](): void;
    finished(): boolean;
    constructor(scenario_toml: string);
    road(s_from: number, s_to: number): string;
    step(): string;
    summary(): string;
}

export function coordination(gap: number, dv: number, q: number, rho: number, per_stage: boolean): string;

export function default_scenario(): string;

export function rollout(v0: number, ax: number, delta_deg: number, curvature: number, steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lanechangedemo_free: (a: number, b: number) => void;
    readonly coordination: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly default_scenario: () => [number, number];
    readonly lanechangedemo_finished: (a: number) => number;
    readonly lanechangedemo_new: (a: number, b: number) => [number, number, number];
    readonly lanechangedemo_road: (a: number, b: number, c: number) => [number, number, number, number];
    readonly lanechangedemo_step: (a: number) => [number, number, number, number];
    readonly lanechangedemo_summary: (a: number) => [number, number, number, number];
    readonly rollout: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
