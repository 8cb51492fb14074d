/** Annotator UI wiring.
 *
 * Two read-only panes (generated report left, human reference right) with
 * SOAP sections visually separated; select text and click a palette button
 * to tag an error span, or a word-category button to tag identical /
 * paraphrased / additional words. Omission entries are selected in the
 * reference pane. A relevance panel records one vote per category for the
 * rater named once per session. Save POSTs the document to the serve API
 * and surfaces validation violations inline.
 */

import { ApiClient, NotFoundError, ValidationRejected, WriteConflict } from "./api.js";
import { coverage, identicalSpans } from "./automark.js";
import { buildPalette, type PaletteEntry } from "./palette.js";
import { segmentText, type Highlight } from "./render.js";
import { SessionState } from "./session.js";
import type { SessionRef, Taxonomy } from "./types.js";

const api = new ApiClient("");
let taxonomy: Taxonomy;
let palette: PaletteEntry[] = [];
let session: SessionState | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function banner(message: string, kind: "info" | "error" = "info"): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message;
  box.className = message ? `banner ${kind}` : "banner hidden";
}

function setDirtyIndicator(): void {
  el<HTMLButtonElement>("save").disabled = !(session && session.isDirty);
  el<HTMLSpanElement>("dirty").textContent = session && session.isDirty ? "unsaved changes" : "";
}

/** Character offset of a DOM point inside a pane built from segment spans. */
function offsetInPane(pane: HTMLElement, node: Node, offsetInNode: number): number {
  let total = 0;
  const walker = document.createTreeWalker(pane, NodeFilter.SHOW_TEXT);
  for (let current = walker.nextNode(); current; current = walker.nextNode()) {
    if (current === node) {
      return total + offsetInNode;
    }
    total += current.textContent?.length ?? 0;
  }
  return total;
}

function selectedSpan(paneId: string): [number, number] | null {
  const pane = el<HTMLDivElement>(paneId);
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) {
    return null;
  }
  const range = selection.getRangeAt(0);
  if (!pane.contains(range.startContainer) || !pane.contains(range.endContainer)) {
    return null;
  }
  const start = offsetInPane(pane, range.startContainer, range.startOffset);
  const end = offsetInPane(pane, range.endContainer, range.endOffset);
  return start < end ? [start, end] : null;
}

function renderPane(paneId: string, text: string, highlights: Highlight[]): void {
  const pane = el<HTMLDivElement>(paneId);
  pane.textContent = "";
  for (const segment of segmentText(text, highlights)) {
    const span = document.createElement("span");
    span.textContent = segment.text;
    if (segment.classes.length > 0) {
      span.className = segment.classes.join(" ");
    }
    if (segment.titles.length > 0) {
      span.title = segment.titles.join("; ");
    }
    pane.appendChild(span);
  }
}

function highlightsFor(pane: "generated" | "reference"): Highlight[] {
  if (!session) {
    return [];
  }
  const highlights: Highlight[] = [];
  const text = pane === "generated" ? session.generatedText : session.referenceText;
  const pattern = /^(S|O|A|P):/gm;
  for (const match of text.matchAll(pattern)) {
    highlights.push({
      start: match.index ?? 0,
      end: (match.index ?? 0) + match[0].length,
      cssClass: "section-marker",
    });
  }
  if (pane === "generated") {
    for (const tag of session.wordTags) {
      highlights.push({
        start: tag.span[0],
        end: tag.span[1],
        cssClass: `word-${tag.category}`,
        title: tag.category,
      });
    }
  }
  for (const annotation of session.annotations) {
    if (!annotation.span) {
      continue;
    }
    const inReference = annotation.error_type.category === "omission";
    if ((pane === "reference") !== inReference) {
      continue;
    }
    const label = annotation.error_type.section
      ? `${annotation.error_type.category} in ${annotation.error_type.section}`
      : annotation.error_type.category;
    highlights.push({
      start: annotation.span[0],
      end: annotation.span[1],
      cssClass: `error-${annotation.error_type.category}`,
      title: `${label} (${annotation.dedup_key})`,
    });
  }
  return highlights;
}

function refresh(): void {
  if (!session) {
    return;
  }
  renderPane("generated-pane", session.generatedText, highlightsFor("generated"));
  renderPane("reference-pane", session.referenceText, highlightsFor("reference"));
  const list = el<HTMLUListElement>("annotation-list");
  list.textContent = "";
  session.annotations.forEach((annotation, index) => {
    const item = document.createElement("li");
    const where = annotation.span ? ` [${annotation.span[0]}, ${annotation.span[1]})` : "";
    item.textContent =
      `${annotation.error_type.category}` +
      (annotation.error_type.section ? `/${annotation.error_type.section}` : "") +
      `${where} - ${annotation.dedup_key}`;
    const remove = document.createElement("button");
    remove.textContent = "x";
    remove.addEventListener("click", () => {
      session?.removeAnnotation(index);
      refresh();
    });
    item.appendChild(remove);
    list.appendChild(item);
  });
  setDirtyIndicator();
}

function tagError(entry: PaletteEntry): void {
  if (!session) {
    return;
  }
  const paneId = entry.pane === "reference" ? "reference-pane" : "generated-pane";
  const span = selectedSpan(paneId);
  if (!span) {
    banner(`select text in the ${entry.pane} pane first`, "error");
    return;
  }
  const dedupKey = window.prompt(
    "Short name for this error (reruns of the same error share one name):",
  );
  if (!dedupKey) {
    return;
  }
  const note = entry.errorType.category === "omission"
    ? window.prompt("What is missing (kind)?") ?? ""
    : "";
  const errorType = { ...entry.errorType };
  if (note && errorType.category === "omission") {
    errorType.kind = note;
  }
  session.addAnnotation(errorType, dedupKey, span, note);
  banner("");
  refresh();
}

function tagWords(category: string): void {
  if (!session) {
    return;
  }
  const span = selectedSpan("generated-pane");
  if (!span) {
    banner("select text in the generated pane first", "error");
    return;
  }
  try {
    session.addWordTag(span, category);
    banner("");
  } catch (error) {
    banner(String(error), "error");
  }
  refresh();
}

async function autoMark(): Promise<void> {
  if (!session) {
    return;
  }
  const [generatedTokens, referenceTokens] = await Promise.all([
    api.tokenize(session.generatedText),
    api.tokenize(session.referenceText),
  ]);
  session.clearWordTags();
  const spans = identicalSpans(generatedTokens, referenceTokens);
  for (const span of spans) {
    session.addWordTag([span.start, span.end], "identical");
  }
  const fraction = coverage(generatedTokens, spans);
  banner(`pre-tagged ${(fraction * 100).toFixed(0)}% of generated tokens as identical`);
  refresh();
}

function renderVotePanel(): void {
  const table = el<HTMLTableElement>("vote-table");
  table.textContent = "";
  for (const category of taxonomy.relevance_categories) {
    const row = table.insertRow();
    row.insertCell().textContent = category;
    for (const vote of taxonomy.vote_values) {
      const cell = row.insertCell();
      const button = document.createElement("button");
      button.textContent = vote;
      button.addEventListener("click", () => {
        const raterId = el<HTMLInputElement>("rater-id").value.trim();
        if (!session) {
          return;
        }
        if (!raterId) {
          banner("enter a rater id first", "error");
          return;
        }
        session.setVote(category, raterId, vote);
        banner(`${raterId}: ${category} -> ${vote}`);
        setDirtyIndicator();
      });
      cell.appendChild(button);
    }
  }
}

function renderPalette(): void {
  const box = el<HTMLDivElement>("palette");
  box.textContent = "";
  for (const entry of palette) {
    const button = document.createElement("button");
    button.textContent = entry.label;
    button.className = `palette-${entry.errorClass.toLowerCase()}`;
    button.addEventListener("click", () => tagError(entry));
    box.appendChild(button);
  }
  const words = el<HTMLDivElement>("word-buttons");
  words.textContent = "";
  for (const category of taxonomy.word_categories) {
    const button = document.createElement("button");
    button.textContent = category;
    button.className = `word-${category}`;
    button.addEventListener("click", () => tagWords(category));
    words.appendChild(button);
  }
}

async function loadSession(ref: SessionRef): Promise<void> {
  try {
    const data = await api.session(ref.consultation_id, ref.run_index);
    session = new SessionState(data);
    el<HTMLSpanElement>("session-title").textContent =
      `${data.consultation_id} / run ${data.run_index} (${data.variant_id})`;
    banner("");
    refresh();
  } catch (error) {
    if (error instanceof NotFoundError) {
      banner(`session ${ref.consultation_id}#${ref.run_index} not found`, "error");
    } else {
      banner(String(error), "error");
    }
  }
}

async function save(): Promise<void> {
  if (!session) {
    return;
  }
  try {
    const result = await api.saveAnnotations(session.toDocument());
    session.markSaved();
    banner(`saved to ${result.path ?? "server"}`);
  } catch (error) {
    if (error instanceof ValidationRejected) {
      banner(`rejected: ${error.violations.join("; ")}`, "error");
    } else if (error instanceof WriteConflict) {
      banner(`conflict: ${error.message}`, "error");
    } else {
      banner(String(error), "error");
    }
  }
  setDirtyIndicator();
}

async function init(): Promise<void> {
  taxonomy = await api.taxonomy();
  palette = buildPalette(taxonomy);
  renderPalette();
  renderVotePanel();
  const sessions = await api.sessions();
  const select = el<HTMLSelectElement>("session-select");
  for (const ref of sessions) {
    const option = document.createElement("option");
    option.value = `${ref.consultation_id}:${ref.run_index}`;
    option.textContent = `${ref.consultation_id} / run ${ref.run_index}`;
    select.appendChild(option);
  }
  select.addEventListener("change", () => {
    const [consultationId, runIndex] = select.value.split(":");
    void loadSession({
      consultation_id: consultationId,
      run_index: Number(runIndex),
      variant_id: "",
    });
  });
  el<HTMLButtonElement>("save").addEventListener("click", () => void save());
  el<HTMLButtonElement>("auto-mark").addEventListener("click", () => void autoMark());
  if (sessions.length > 0) {
    select.value = `${sessions[0].consultation_id}:${sessions[0].run_index}`;
    await loadSession(sessions[0]);
  } else {
    banner("no sessions in ledger", "error");
  }
}

if (typeof document !== "undefined" && document.getElementById("banner")) {
  void init();
}
