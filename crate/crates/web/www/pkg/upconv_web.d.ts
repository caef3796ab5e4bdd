/* tslint:disable */
/* eslint-disable */

export class ConvolutionView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    input(): Float32Array;
    output(): Float32Array;
    reference(): Float32Array;
    readonly blocks: number;
    readonly max_error: number;
    readonly partitions: number;
}

export class FeedbackView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    conditioned_db(): Float32Array;
    mic_db(): Float32Array;
    source_db(): Float32Array;
}

/**
 * Flattened `[block_size, budget_ms, partitions, ...]` triples.
 */
export function budget_demo(filter_s: number, sample_rate: number): Float64Array;

export function convolve_demo(block_size: number, filter_ms: number, rt60_ms: number, seed: number): ConvolutionView;

export function feedback_demo(loop_gain: number, estimate_scale: number, blocks: number, seed: number): FeedbackView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_convolutionview_free: (a: number, b: number) => void;
    readonly __wbg_feedbackview_free: (a: number, b: number) => void;
    readonly budget_demo: (a: number, b: number) => [number, number];
    readonly convolutionview_blocks: (a: number) => number;
    readonly convolutionview_input: (a: number) => [number, number];
    readonly convolutionview_max_error: (a: number) => number;
    readonly convolutionview_output: (a: number) => [number, number];
    readonly convolutionview_partitions: (a: number) => number;
    readonly convolutionview_reference: (a: number) => [number, number];
    readonly convolve_demo: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly feedback_demo: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly feedbackview_conditioned_db: (a: number) => [number, number];
    readonly feedbackview_mic_db: (a: number) => [number, number];
    readonly feedbackview_source_db: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
