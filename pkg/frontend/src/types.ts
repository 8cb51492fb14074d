/** Wire types shared with the soapbench serve API. */

export interface TokenSpan {
  start: number;
  end: number;
  text: string;
}

export interface ErrorTypeData {
  category: string;
  section?: string;
  kind?: string;
}

export interface AnnotationData {
  consultation_id: string;
  error_type: ErrorTypeData;
  dedup_key: string;
  run_index: number | null;
  span: [number, number] | null;
  note: string;
}

export interface WordTagData {
  consultation_id: string;
  run_index: number;
  span: [number, number];
  category: string;
}

export interface VoteData {
  category: string;
  rater_id: string;
  vote: string;
}

export interface AnnotationDocument {
  schema_version: number;
  consultation_id: string;
  run_index: number;
  annotations: AnnotationData[];
  word_tags: WordTagData[];
  votes: VoteData[];
}

export interface SessionData {
  consultation_id: string;
  run_index: number;
  variant_id: string;
  generated_text: string;
  reference_text: string;
  annotations: AnnotationDocument | null;
}

export interface SessionRef {
  consultation_id: string;
  run_index: number;
  variant_id: string;
}

export interface TaxonomyErrorType {
  category: string;
  class: string;
  label: string;
  requires_section: boolean;
  sections?: string[];
  kinds?: string[];
}

export interface Taxonomy {
  sections: string[];
  error_types: TaxonomyErrorType[];
  word_categories: string[];
  vote_values: string[];
  relevance_categories: string[];
}

export interface SaveResult {
  ok: boolean;
  violations: string[];
  path?: string;
  error?: string;
}
