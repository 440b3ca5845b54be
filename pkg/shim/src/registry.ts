export type ModelKind = "sentence_embed" | "token_embed" | "generate" | "score";

export interface ModelRegistryEntry {
  model_id: string;
  kind: ModelKind;
  dim?: number;
  /** Generation models refuse prompts longer than this many tokens. */
  prompt_token_limit?: number;
}

/**
 * Models served in deterministic mode. Dims mirror the usual sizes of the
 * multilingual embedding families each id stands for, so client-side code
 * exercises realistic shapes.
 */
export const REGISTRY: ModelRegistryEntry[] = [
  { model_id: "use", kind: "sentence_embed", dim: 512 },
  { model_id: "labse", kind: "sentence_embed", dim: 768 },
  { model_id: "laser", kind: "sentence_embed", dim: 1024 },
  { model_id: "mbert", kind: "token_embed", dim: 768 },
  { model_id: "aps", kind: "score" },
  { model_id: "echo", kind: "generate", prompt_token_limit: 8192 },
];

export function findModel(modelId: string, kind?: ModelKind): ModelRegistryEntry | undefined {
  const entry = REGISTRY.find((m) => m.model_id === modelId);
  if (entry === undefined) return undefined;
  if (kind !== undefined && entry.kind !== kind) return undefined;
  return entry;
}
