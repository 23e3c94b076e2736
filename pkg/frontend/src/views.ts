import { CATEGORY_KEYS } from './keyboard';
import type { LabelingSession } from './session';
import type { AdjudicationItem, ItemView, Label } from './types';
import { ERROR_CATEGORIES, LABELS } from './types';

const LABEL_TITLES: Record<Label, string> = {
  ungrammatical: '1 · ungrammatical',
  ambiguous: '2 · ambiguous',
  grammatical: '3 · grammatical',
};

export const GUIDELINE_NOTES: Record<Label, string> = {
  ungrammatical:
    'At least one grammatical error, judging the utterance together with the ' +
    'conversation before it (never after it). Tag every error category that applies.',
  ambiguous:
    'Cannot be decided from the transcript alone (e.g. would need the visual ' +
    'scene or the child’s intent), or grammaticality does not really apply: ' +
    'onomatopoeia, songs and counting, invented words, common spoken shortenings.',
  grammatical:
    'No errors. Valid elliptical answers to a question, repetitions and ' +
    'self-corrections, exclamations, and greetings all count as grammatical.',
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderContext(doc: Document, item: ItemView, showAll: boolean): HTMLElement {
  const box = el(doc, 'div', 'context');
  const turns = showAll
    ? item.context
    : item.context.slice(-item.context_default_turns);
  if (item.context.length > turns.length) {
    const more = el(
      doc, 'button', 'show-more',
      `show ${item.context.length - turns.length} earlier turns`,
    );
    more.dataset.action = 'show-all-context';
    box.appendChild(more);
  }
  for (const turn of turns) {
    const row = el(doc, 'div', `turn turn-${turn.role}`);
    row.appendChild(el(doc, 'span', 'speaker', turn.role === 'child' ? 'CHI' : 'CAR'));
    row.appendChild(el(doc, 'span', 'text', turn.text));
    box.appendChild(row);
  }
  return box;
}

/** Current item with context above the highlighted target, plus controls. */
export function renderLabeling(
  doc: Document,
  root: HTMLElement,
  session: LabelingSession,
  showAllContext: boolean,
): void {
  root.textContent = '';
  const item = session.current;
  const head = el(doc, 'div', 'progress-line');
  head.appendChild(
    el(doc, 'span', undefined, `${session.submittedCount} done · ${session.remaining} left`),
  );
  root.appendChild(head);

  if (!item) {
    root.appendChild(el(doc, 'p', 'all-done', 'Chunk complete. Thank you!'));
    return;
  }

  root.appendChild(renderContext(doc, item, showAllContext));

  const target = el(doc, 'div', 'target');
  target.appendChild(el(doc, 'span', 'speaker', 'CHI'));
  target.appendChild(el(doc, 'span', 'text', item.target_text));
  root.appendChild(target);

  const selection = session.currentSelection;
  const labelBar = el(doc, 'div', 'label-bar');
  for (const label of LABELS) {
    const button = el(doc, 'button', `label-btn label-${label}`, LABEL_TITLES[label]);
    button.dataset.label = label;
    if (selection.label === label) button.classList.add('selected');
    labelBar.appendChild(button);
  }
  root.appendChild(labelBar);

  const panel = el(doc, 'div', 'category-panel');
  panel.id = 'category-panel';
  if (!session.categoryPanelOpen) panel.classList.add('hidden');
  const keyFor = new Map(Object.entries(CATEGORY_KEYS).map(([k, c]) => [c, k]));
  for (const category of ERROR_CATEGORIES) {
    const row = el(doc, 'label', 'category-row');
    const box = doc.createElement('input');
    box.type = 'checkbox';
    box.dataset.category = category;
    box.checked = selection.categories.has(category);
    row.appendChild(box);
    row.appendChild(el(doc, 'span', 'key-hint', keyFor.get(category) ?? ''));
    row.appendChild(el(doc, 'span', undefined, category));
    panel.appendChild(row);
  }
  root.appendChild(panel);

  const submit = el(doc, 'button', 'submit-btn', 'Enter · submit');
  submit.dataset.action = 'submit';
  submit.disabled = selection.label === null;
  root.appendChild(submit);
}

export function renderGuidelines(doc: Document): HTMLElement {
  const box = el(doc, 'aside', 'guidelines');
  box.appendChild(el(doc, 'h2', undefined, 'Labels'));
  for (const label of LABELS) {
    box.appendChild(el(doc, 'h3', `guide-${label}`, LABEL_TITLES[label]));
    box.appendChild(el(doc, 'p', undefined, GUIDELINE_NOTES[label]));
  }
  box.appendChild(
    el(doc, 'p', 'guide-keys', 'Keys: 1/2/3 label · a–l toggle categories · Enter submit'),
  );
  return box;
}

export function renderBanner(doc: Document, root: HTMLElement, message: string | null): void {
  let banner = root.querySelector<HTMLElement>('.banner');
  if (!message) {
    banner?.remove();
    return;
  }
  if (!banner) {
    banner = el(doc, 'div', 'banner');
    root.prepend(banner);
  }
  banner.textContent = message;
}

export function renderAdjudication(
  doc: Document,
  root: HTMLElement,
  items: AdjudicationItem[],
): void {
  root.textContent = '';
  if (items.length === 0) {
    root.appendChild(el(doc, 'p', 'queue-empty', 'Adjudication queue is empty.'));
    return;
  }
  for (const item of items) {
    const card = el(doc, 'div', 'adjudication-card');
    card.dataset.itemId = item.item_id;
    card.appendChild(renderContext(doc, item, false));
    const target = el(doc, 'div', 'target');
    target.appendChild(el(doc, 'span', 'text', item.target_text));
    card.appendChild(target);
    const votes = el(doc, 'div', 'votes');
    for (const [annotator, vote] of Object.entries(item.labels)) {
      const cell = el(doc, 'div', 'vote');
      cell.appendChild(el(doc, 'span', 'annotator', annotator));
      cell.appendChild(el(doc, 'span', `vote-${vote.label}`, vote.label));
      if (vote.categories.length) {
        cell.appendChild(el(doc, 'span', 'vote-cats', vote.categories.join(', ')));
      }
      votes.appendChild(cell);
    }
    card.appendChild(votes);
    const bar = el(doc, 'div', 'resolve-bar');
    for (const label of LABELS) {
      const button = el(doc, 'button', 'resolve-btn', `resolve ${label}`);
      button.dataset.resolveLabel = label;
      button.dataset.itemId = item.item_id;
      bar.appendChild(button);
    }
    card.appendChild(bar);
    root.appendChild(card);
  }
}
