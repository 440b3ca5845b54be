export interface WordToken {
  text: string;
  start: number;
  end: number;
}

const WORD_RUN = /[\p{L}\p{M}\p{N}]+/gu;

/**
 * Word tokens as maximal runs of letters, combining marks, and digits.
 * Combining marks are included so Indic words are never split at matras.
 */
export function tokenize(text: string): WordToken[] {
  const tokens: WordToken[] = [];
  for (const match of text.matchAll(WORD_RUN)) {
    tokens.push({
      text: match[0],
      start: match.index ?? 0,
      end: (match.index ?? 0) + match[0].length,
    });
  }
  return tokens;
}

/** Cut `text` after at most `maxTokens` word tokens, at a token boundary. */
export function truncateTokens(text: string, maxTokens: number): string {
  const tokens = tokenize(text);
  if (tokens.length <= maxTokens) return text;
  return text.slice(0, tokens[maxTokens - 1].end);
}
