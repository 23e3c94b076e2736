import { ApiError, fetchAgreement, fetchProgress } from './api';
import type { AgreementSnapshot, Progress } from './types';

export interface DashboardState {
  agreement: AgreementSnapshot | null;
  agreementUnavailable: string | null;
  progress: Progress | null;
}

/** One poll of the agreement and progress endpoints. */
export async function pollDashboard(): Promise<DashboardState> {
  const state: DashboardState = {
    agreement: null,
    agreementUnavailable: null,
    progress: null,
  };
  try {
    state.progress = await fetchProgress();
  } catch {
    state.progress = null;
  }
  try {
    state.agreement = await fetchAgreement();
  } catch (err) {
    state.agreementUnavailable =
      err instanceof ApiError && err.status === 409 ? 'insufficient data' : 'unavailable';
  }
  return state;
}

export function renderDashboard(doc: Document, root: HTMLElement, state: DashboardState): void {
  root.textContent = '';
  const alpha = doc.createElement('div');
  alpha.className = 'metric metric-alpha';
  if (state.agreement && state.agreement.alpha !== null) {
    alpha.textContent = `α ${state.agreement.alpha.toFixed(2)} over ${state.agreement.n_complete_items} items`;
  } else {
    alpha.textContent = `α ${state.agreementUnavailable ?? 'n/a'}`;
  }
  root.appendChild(alpha);

  const progress = doc.createElement('div');
  progress.className = 'metric metric-progress';
  if (state.progress) {
    const total = state.progress.n_items;
    const per = Object.entries(state.progress.per_annotator)
      .map(([name, n]) => `${name} ${n}/${total}`)
      .join(' · ');
    progress.textContent = per || `progress 0/${total}`;
    const queue = doc.createElement('div');
    queue.className = 'metric metric-queue';
    queue.textContent = `${state.progress.queue_length} awaiting adjudication (${state.progress.queue_policy})`;
    root.appendChild(queue);
  } else {
    progress.textContent = 'progress unavailable';
  }
  root.appendChild(progress);
}
