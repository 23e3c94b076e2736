import { ApiError, postAnnotation } from './api';
import type { ErrorCategory, ItemView, Label } from './types';

export interface Selection {
  label: Label | null;
  categories: Set<ErrorCategory>;
}

export type SessionEvent =
  | { kind: 'render' }
  | { kind: 'done' }
  | { kind: 'error'; message: string; transient: boolean };

/**
 * Labeling state for one annotator working through one chunk.
 *
 * Submission is optimistic: the UI advances immediately and rolls the item
 * back (selection intact) if the server rejects it; network failures
 * re-queue the item locally at the end of the session.
 */
export class LabelingSession {
  private queue: ItemView[];
  private selection: Selection = { label: null, categories: new Set() };
  private submitted = 0;
  private listeners: ((event: SessionEvent) => void)[] = [];

  constructor(
    readonly annotator: string,
    items: ItemView[],
  ) {
    this.queue = [...items];
  }

  onEvent(listener: (event: SessionEvent) => void): void {
    this.listeners.push(listener);
  }

  private emit(event: SessionEvent): void {
    for (const listener of this.listeners) listener(event);
  }

  get current(): ItemView | null {
    return this.queue[0] ?? null;
  }

  get remaining(): number {
    return this.queue.length;
  }

  get submittedCount(): number {
    return this.submitted;
  }

  get currentSelection(): Selection {
    return {
      label: this.selection.label,
      categories: new Set(this.selection.categories),
    };
  }

  /** The category panel is only meaningful for ungrammatical selections. */
  get categoryPanelOpen(): boolean {
    return this.selection.label === 'ungrammatical';
  }

  selectLabel(label: Label): void {
    this.selection.label = label;
    if (label !== 'ungrammatical') {
      this.selection.categories.clear();
    }
    this.emit({ kind: 'render' });
  }

  toggleCategory(category: ErrorCategory): void {
    if (!this.categoryPanelOpen) return;
    if (this.selection.categories.has(category)) {
      this.selection.categories.delete(category);
    } else {
      this.selection.categories.add(category);
    }
    this.emit({ kind: 'render' });
  }

  async submit(): Promise<void> {
    const item = this.current;
    const { label } = this.selection;
    if (!item || label === null) return;
    const payload = {
      annotator: this.annotator,
      item_id: item.item_id,
      label,
      categories: [...this.selection.categories].sort(),
    };
    // optimistic: advance first, restore on failure
    const saved: Selection = {
      label: this.selection.label,
      categories: new Set(this.selection.categories),
    };
    this.queue.shift();
    this.selection = { label: null, categories: new Set() };
    this.emit({ kind: 'render' });
    try {
      await postAnnotation(payload);
      this.submitted += 1;
      if (this.queue.length === 0) this.emit({ kind: 'done' });
      else this.emit({ kind: 'render' });
    } catch (err) {
      if (err instanceof ApiError) {
        // server rejected: put the item back with its selection intact
        this.queue.unshift(item);
        this.selection = saved;
        this.emit({ kind: 'error', message: err.message, transient: false });
      } else {
        // network failure: re-queue locally and move on
        this.queue.push(item);
        this.emit({
          kind: 'error',
          message: 'network error; item re-queued',
          transient: true,
        });
      }
    }
  }
}
