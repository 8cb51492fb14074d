/** Pre-tagging of exact surface matches.
 *
 * Tokens of the generated report whose lowercase surface form also occurs
 * anywhere in the reference are pre-tagged "identical"; the annotator
 * resolves the remaining tokens into paraphrased/additional by hand. Runs of
 * adjacent matching tokens merge into one span to keep the tag list short.
 */

import type { TokenSpan } from "./types.js";

export interface MarkedSpan {
  start: number;
  end: number;
}

export function identicalSpans(
  generatedTokens: TokenSpan[],
  referenceTokens: TokenSpan[],
): MarkedSpan[] {
  const vocabulary = new Set(referenceTokens.map((token) => token.text));
  const spans: MarkedSpan[] = [];
  let current: MarkedSpan | null = null;
  for (const token of generatedTokens) {
    if (!vocabulary.has(token.text)) {
      current = null;
      continue;
    }
    if (current !== null) {
      current.end = token.end;
    } else {
      current = { start: token.start, end: token.end };
      spans.push(current);
    }
  }
  return spans;
}

/** Fraction of generated tokens covered by the identical pre-tags. */
export function coverage(generatedTokens: TokenSpan[], spans: MarkedSpan[]): number {
  if (generatedTokens.length === 0) {
    return 0;
  }
  let covered = 0;
  for (const token of generatedTokens) {
    if (spans.some((span) => span.start <= token.start && token.start < span.end)) {
      covered += 1;
    }
  }
  return covered / generatedTokens.length;
}
