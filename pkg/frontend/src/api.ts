import type {
  AdjudicationItem,
  AgreementSnapshot,
  ChunkInfo,
  ErrorCategory,
  ItemView,
  Label,
  Progress,
} from './types';

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export async function fetchChunks(): Promise<ChunkInfo[]> {
  return request<ChunkInfo[]>('/api/chunks');
}

export async function fetchItems(
  annotator: string,
  chunk: string,
): Promise<{ chunk_id: string; partial: boolean; items: ItemView[] }> {
  const params = new URLSearchParams({ annotator, chunk });
  return request(`/api/items?${params}`);
}

export async function postAnnotation(body: {
  annotator: string;
  item_id: string;
  label: Label;
  categories: ErrorCategory[];
}): Promise<{ event_id: number }> {
  return request('/api/annotations', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(body),
  });
}

export async function fetchAgreement(): Promise<AgreementSnapshot> {
  return request('/api/agreement');
}

export async function fetchProgress(): Promise<Progress> {
  return request('/api/progress');
}

export async function fetchAdjudicationQueue(): Promise<{
  policy: string;
  items: AdjudicationItem[];
}> {
  return request('/api/adjudication');
}

export async function postAdjudication(body: {
  item_id: string;
  label: Label;
  categories: ErrorCategory[];
}): Promise<{ event_id: number }> {
  return request('/api/adjudication', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(body),
  });
}
