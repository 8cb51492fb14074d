/** Expand the served taxonomy into a flat tagging palette.
 *
 * Sectioned categories fan out into one entry per section, so every taxonomy
 * leaf is reachable from the palette (no orphan categories).
 */

import type { ErrorTypeData, Taxonomy } from "./types.js";

export interface PaletteEntry {
  id: string;
  label: string;
  errorClass: string;
  errorType: ErrorTypeData;
  /** Omissions are selected in the reference pane; everything else in the generated pane. */
  pane: "generated" | "reference";
}

export function buildPalette(taxonomy: Taxonomy): PaletteEntry[] {
  const entries: PaletteEntry[] = [];
  for (const errorType of taxonomy.error_types) {
    const pane = errorType.category === "omission" ? "reference" : "generated";
    if (!errorType.requires_section) {
      entries.push({
        id: errorType.category,
        label: errorType.label,
        errorClass: errorType.class,
        errorType: { category: errorType.category },
        pane,
      });
      continue;
    }
    for (const section of errorType.sections ?? []) {
      entries.push({
        id: `${errorType.category}:${section}`,
        label: `${errorType.label} in ${section}`,
        errorClass: errorType.class,
        errorType: { category: errorType.category, section },
        pane,
      });
    }
  }
  return entries;
}
