import { createHash } from "node:crypto";

import { tokenize, truncateTokens } from "./tokenize";

/**
 * Deterministic model substitutes: embeddings, logits, and completions
 * are pure functions of their inputs, derived from SHA-256. Identical
 * request bodies always produce identical responses, which is what the
 * integration smoke tests rely on.
 */

const SEPARATOR = "\x1f";

function hashDigest(parts: string[], counter: number): Buffer {
  const hash = createHash("sha256");
  hash.update(parts.join(SEPARATOR) + SEPARATOR + String(counter), "utf8");
  return hash.digest();
}

function hashFloats(parts: string[], count: number): number[] {
  const values: number[] = [];
  let counter = 0;
  while (values.length < count) {
    const digest = hashDigest(parts, counter);
    for (let offset = 0; offset + 8 <= digest.length && values.length < count; offset += 8) {
      const hi = digest.readUInt32BE(offset);
      const lo = digest.readUInt32BE(offset + 4);
      values.push((hi * 2 ** 32 + lo) / 2 ** 63 - 1.0);
    }
    counter += 1;
  }
  return values;
}

function unitNormalize(vector: number[]): number[] {
  const norm = Math.sqrt(vector.reduce((acc, x) => acc + x * x, 0));
  if (norm === 0) {
    const basis = vector.slice();
    basis[0] = 1.0;
    return basis;
  }
  return vector.map((x) => x / norm);
}

export function sentenceVector(modelId: string, text: string, dim: number): number[] {
  return unitNormalize(hashFloats(["sentence", modelId, text], dim));
}

export function tokenVectors(
  modelId: string,
  text: string,
  dim: number,
): { tokens: string[]; vectors: number[][] } {
  const tokens = tokenize(text).map((t) => t.text.toLowerCase());
  const vectors = tokens.map((tok) => unitNormalize(hashFloats(["token", modelId, tok], dim)));
  return { tokens, vectors };
}

/** Relevance logit in [0, 1) from a stable hash of the pair. */
export function scoreLogit(question: string, passage: string): number {
  const digest = hashDigest(["score", question, passage], 0);
  const hi = digest.readUInt32BE(0);
  const lo = digest.readUInt32BE(4);
  return (hi * 2 ** 32 + lo) / 2 ** 64;
}

const CONTEXT_START = "##Context\n";
const CONTEXT_END = "\n##Answer";

export class PromptFormatError extends Error {}

/**
 * Echo completion: return the context slice of the QA prompt, truncated
 * to the requested budget. Deterministic at any temperature; the seed is
 * accepted for wire compatibility and ignored.
 */
export function echoCompletion(prompt: string, maxNewTokens: number): string {
  const start = prompt.indexOf(CONTEXT_START);
  if (start < 0) throw new PromptFormatError("prompt is missing the context header");
  const from = start + CONTEXT_START.length;
  const end = prompt.indexOf(CONTEXT_END, from);
  if (end < 0) throw new PromptFormatError("prompt is missing the answer header");
  return truncateTokens(prompt.slice(from, end), maxNewTokens);
}

export function promptTokenCount(prompt: string): number {
  return tokenize(prompt).length;
}
