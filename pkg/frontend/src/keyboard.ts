import type { LabelingSession } from './session';
import { ERROR_CATEGORIES } from './types';

export const LABEL_KEYS: Record<string, 'ungrammatical' | 'ambiguous' | 'grammatical'> = {
  '1': 'ungrammatical',
  '2': 'ambiguous',
  '3': 'grammatical',
};

// a..l toggle the 12 categories in display order (shown next to each box)
export const CATEGORY_KEYS: Record<string, (typeof ERROR_CATEGORIES)[number]> =
  Object.fromEntries(
    ERROR_CATEGORIES.map((category, i) => [String.fromCharCode(97 + i), category]),
  ) as Record<string, (typeof ERROR_CATEGORIES)[number]>;

/**
 * Global key handling for the labeling flow. Everything is reachable
 * without a pointer: 1/2/3 pick the label, a..l toggle error categories
 * while the ungrammatical panel is open, Enter submits and advances.
 */
export function handleKey(session: LabelingSession, event: KeyboardEvent): boolean {
  const target = event.target as HTMLElement | null;
  if (target && (target.tagName === 'INPUT' || target.tagName === 'TEXTAREA')) {
    return false;
  }
  const key = event.key.toLowerCase();
  if (key in LABEL_KEYS) {
    session.selectLabel(LABEL_KEYS[key]);
    return true;
  }
  if (key in CATEGORY_KEYS && session.categoryPanelOpen) {
    session.toggleCategory(CATEGORY_KEYS[key]);
    return true;
  }
  if (key === 'enter') {
    void session.submit();
    return true;
  }
  return false;
}

export function attachKeyboard(session: LabelingSession, root: Document): () => void {
  const listener = (event: KeyboardEvent) => {
    if (handleKey(session, event)) event.preventDefault();
  };
  root.addEventListener('keydown', listener);
  return () => root.removeEventListener('keydown', listener);
}
