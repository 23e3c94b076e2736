import {
  fetchAdjudicationQueue,
  fetchChunks,
  fetchItems,
  postAdjudication,
} from './api';
import { pollDashboard, renderDashboard } from './dashboard';
import { attachKeyboard } from './keyboard';
import { LabelingSession } from './session';
import type { ErrorCategory, Label } from './types';
import {
  renderAdjudication,
  renderBanner,
  renderGuidelines,
  renderLabeling,
} from './views';

const POLL_MS = 3000;

interface AppState {
  session: LabelingSession | null;
  showAllContext: boolean;
}

export interface AppHandle {
  dispose(): void;
}

const noopHandle: AppHandle = { dispose: () => undefined };

export async function initApp(doc: Document): Promise<AppHandle> {
  const app = doc.getElementById('app');
  if (!app) return noopHandle;
  const state: AppState = { session: null, showAllContext: false };
  const controller = new AbortController();
  const listen = (
    target: EventTarget,
    type: string,
    handler: (event: Event) => void,
  ) => target.addEventListener(type, handler, { signal: controller.signal });

  const work = doc.getElementById('work')!;
  const dashboard = doc.getElementById('dashboard')!;
  const adjudication = doc.getElementById('adjudication')!;
  const aside = doc.getElementById('aside')!;
  aside.appendChild(renderGuidelines(doc));

  const nameInput = doc.getElementById('annotator-name') as HTMLInputElement;
  const chunkSelect = doc.getElementById('chunk-select') as HTMLSelectElement;
  const startButton = doc.getElementById('start') as HTMLButtonElement;
  nameInput.value = localStorage.getItem('gramscope-annotator') ?? '';

  const chunks = await fetchChunks();
  for (const chunk of chunks) {
    const option = doc.createElement('option');
    option.value = chunk.chunk_id;
    option.textContent = `${chunk.chunk_id} (${chunk.n_items}${chunk.partial ? ', partial' : ''})`;
    chunkSelect.appendChild(option);
  }

  const rerender = () => {
    if (state.session) {
      renderLabeling(doc, work, state.session, state.showAllContext);
    }
  };

  let detachKeyboard: (() => void) | null = null;
  listen(startButton, 'click', async () => {
    const annotator = nameInput.value.trim();
    if (!annotator) {
      renderBanner(doc, app, 'enter an annotator name first');
      return;
    }
    localStorage.setItem('gramscope-annotator', annotator);
    const { items } = await fetchItems(annotator, chunkSelect.value);
    const session = new LabelingSession(annotator, items);
    session.onEvent((event) => {
      if (event.kind === 'error') {
        renderBanner(doc, app, event.message);
        if (event.transient) setTimeout(() => renderBanner(doc, app, null), 4000);
      } else {
        renderBanner(doc, app, null);
      }
      rerender();
    });
    state.session = session;
    state.showAllContext = false;
    detachKeyboard?.();
    detachKeyboard = attachKeyboard(session, doc);
    rerender();
  });

  // pointer fallbacks mirror the keyboard bindings
  listen(work, 'click', (event) => {
    const target = event.target as HTMLElement;
    const session = state.session;
    if (!session) return;
    if (target.dataset.label) {
      session.selectLabel(target.dataset.label as Label);
    } else if (target.dataset.action === 'submit') {
      void session.submit();
    } else if (target.dataset.action === 'show-all-context') {
      state.showAllContext = true;
      rerender();
    } else if (target instanceof HTMLInputElement && target.dataset.category) {
      session.toggleCategory(target.dataset.category as ErrorCategory);
    }
  });

  async function refreshAdjudication(): Promise<void> {
    try {
      const queue = await fetchAdjudicationQueue();
      renderAdjudication(doc, adjudication, queue.items);
    } catch {
      // leave the panel as-is when the service is briefly unavailable
    }
  }

  listen(adjudication, 'click', async (event) => {
    const target = event.target as HTMLElement;
    const label = target.dataset.resolveLabel as Label | undefined;
    const itemId = target.dataset.itemId;
    if (!label || !itemId) return;
    try {
      await postAdjudication({ item_id: itemId, label, categories: [] });
      await refreshAdjudication();
    } catch (err) {
      renderBanner(doc, app, `adjudication failed: ${String(err)}`);
    }
  });

  async function tick(): Promise<void> {
    renderDashboard(doc, dashboard, await pollDashboard());
    await refreshAdjudication();
  }
  await tick();
  const poller = setInterval(() => void tick(), POLL_MS);

  return {
    dispose() {
      controller.abort();
      clearInterval(poller);
      detachKeyboard?.();
    },
  };
}

if (typeof window !== 'undefined' && !('__vitest__' in globalThis)) {
  window.addEventListener('DOMContentLoaded', () => void initApp(document));
}
