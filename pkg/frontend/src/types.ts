export type Label = 'ungrammatical' | 'ambiguous' | 'grammatical';

export const LABELS: Label[] = ['ungrammatical', 'ambiguous', 'grammatical'];

export const ERROR_CATEGORIES = [
  'subject',
  'object',
  'verb',
  'possessive',
  'plural',
  'sv_agreement',
  'tense_aspect',
  'determiner',
  'preposition',
  'auxiliary',
  'present_progressive',
  'other',
] as const;

export type ErrorCategory = (typeof ERROR_CATEGORIES)[number];

export interface ContextTurn {
  role: string;
  text: string;
}

export interface ItemView {
  item_id: string;
  chunk_id: string;
  position: number;
  transcript_id: string;
  target_text: string;
  context: ContextTurn[];
  context_default_turns: number;
}

export interface ChunkInfo {
  chunk_id: string;
  partial: boolean;
  n_items: number;
}

export interface AgreementSnapshot {
  alpha: number | null;
  kappa_mean: number | null;
  kappa_sd: number | null;
  n_complete_items: number;
}

export interface Progress {
  n_items: number;
  n_resolved: number;
  queue_length: number;
  per_annotator: Record<string, number>;
  queue_policy: string;
  quorum: number;
}

export interface AdjudicationItem extends ItemView {
  labels: Record<string, { label: Label; categories: ErrorCategory[] }>;
}
