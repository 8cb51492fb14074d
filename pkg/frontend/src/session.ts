/** Working state of one annotation session: document building, dirty flag.
 *
 * The session owns exactly one (consultation, run) pair. Report texts are
 * never mutated, so character offsets stay valid across save/load cycles;
 * serialization is stable, so saving twice without edits produces identical
 * payload bytes.
 */

import type {
  AnnotationData,
  AnnotationDocument,
  ErrorTypeData,
  SessionData,
  VoteData,
  WordTagData,
} from "./types.js";

export class SessionState {
  readonly consultationId: string;
  readonly runIndex: number;
  readonly generatedText: string;
  readonly referenceText: string;
  annotations: AnnotationData[] = [];
  wordTags: WordTagData[] = [];
  votes: VoteData[] = [];
  private dirty = false;

  constructor(data: SessionData) {
    this.consultationId = data.consultation_id;
    this.runIndex = data.run_index;
    this.generatedText = data.generated_text;
    this.referenceText = data.reference_text;
    if (data.annotations) {
      this.annotations = [...data.annotations.annotations];
      this.wordTags = [...data.annotations.word_tags];
      this.votes = [...data.annotations.votes];
    }
  }

  get isDirty(): boolean {
    return this.dirty;
  }

  addAnnotation(
    errorType: ErrorTypeData,
    dedupKey: string,
    span: [number, number] | null,
    note = "",
  ): AnnotationData {
    const annotation: AnnotationData = {
      consultation_id: this.consultationId,
      error_type: errorType,
      dedup_key: dedupKey,
      // Omissions anchor to the reference report, not to this run.
      run_index: errorType.category === "omission" ? null : this.runIndex,
      span,
      note,
    };
    this.annotations.push(annotation);
    this.dirty = true;
    return annotation;
  }

  removeAnnotation(index: number): void {
    this.annotations.splice(index, 1);
    this.dirty = true;
  }

  /** Add a word tag; rejects overlap with existing tags. */
  addWordTag(span: [number, number], category: string): WordTagData {
    const [start, end] = span;
    if (start >= end) {
      throw new Error(`empty span [${start}, ${end})`);
    }
    for (const tag of this.wordTags) {
      if (start < tag.span[1] && tag.span[0] < end) {
        throw new Error(`span [${start}, ${end}) overlaps [${tag.span[0]}, ${tag.span[1]})`);
      }
    }
    const wordTag: WordTagData = {
      consultation_id: this.consultationId,
      run_index: this.runIndex,
      span,
      category,
    };
    this.wordTags.push(wordTag);
    this.dirty = true;
    return wordTag;
  }

  clearWordTags(): void {
    if (this.wordTags.length > 0) {
      this.wordTags = [];
      this.dirty = true;
    }
  }

  setVote(category: string, raterId: string, vote: string): void {
    this.votes = this.votes.filter(
      (existing) => !(existing.category === category && existing.rater_id === raterId),
    );
    this.votes.push({ category, rater_id: raterId, vote });
    this.dirty = true;
  }

  toDocument(): AnnotationDocument {
    return {
      schema_version: 1,
      consultation_id: this.consultationId,
      run_index: this.runIndex,
      annotations: [...this.annotations],
      word_tags: [...this.wordTags].sort((a, b) => a.span[0] - b.span[0]),
      votes: [...this.votes],
    };
  }

  markSaved(): void {
    this.dirty = false;
  }
}
