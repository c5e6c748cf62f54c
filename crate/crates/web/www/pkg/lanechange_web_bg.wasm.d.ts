/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lanechangedemo_free: (a: number, b: number) => void;
export const coordination: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const default_scenario: () => [number, number];
export const lanechangedemo_finished: (a: number) => number;
export const lanechangedemo_new: (a: number, b: number) => [number, number, number];
export const lanechangedemo_road: (a: number, b: number, c: number) => [number, number, number, number];
export const lanechangedemo_step: (a: number) => [number, number, number, number];
export const lanechangedemo_summary: (a: number) => [number, number, number, number];
export const rollout: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
