/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_convolutionview_free: (a: number, b: number) => void;
export const __wbg_feedbackview_free: (a: number, b: number) => void;
export const budget_demo: (a: number, b: number) => [number, number];
export const convolutionview_blocks: (a: number) => number;
export const convolutionview_input: (a: number) => [number, number];
export const convolutionview_max_error: (a: number) => number;
export const convolutionview_output: (a: number) => [number, number];
export const convolutionview_partitions: (a: number) => number;
export const convolutionview_reference: (a: number) => [number, number];
export const convolve_demo: (a: number, b: number, c: number, d: number) => [number, number, number];
export const feedback_demo: (a: number, b: number, c: number, d: number) => [number, number, number];
export const feedbackview_conditioned_db: (a: number) => [number, number];
export const feedbackview_mic_db: (a: number) => [number, number];
export const feedbackview_source_db: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
