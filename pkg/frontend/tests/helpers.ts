import type { ItemView } from '../src/types';

export function makeItems(n: number, chunk = 'chunk-0000'): ItemView[] {
  return Array.from({ length: n }, (_, i) => ({
    item_id: `syn-0000:${i * 2 + 1}`,
    chunk_id: chunk,
    position: i,
    transcript_id: 'syn-0000',
    target_text: `target utterance ${i}`,
    context: [
      { role: 'caregiver', text: `question ${i}` },
      { role: 'child', text: `earlier answer ${i}` },
    ],
    context_default_turns: 8,
  }));
}

export interface RecordedPost {
  url: string;
  body: Record<string, unknown>;
}

export interface MockServer {
  fetch: typeof fetch;
  posts: RecordedPost[];
  failNextAnnotationWith: (status: number, detail: string) => void;
  failNextAnnotationWithNetworkError: () => void;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

/** In-memory stand-in for the annotation service API. */
export function mockServer(items: ItemView[]): MockServer {
  const posts: RecordedPost[] = [];
  let plannedFailure: { status: number; detail: string } | null = null;
  let plannedNetworkError = false;
  let eventId = 0;

  const handler = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? 'GET';
    if (url.startsWith('/api/chunks')) {
      return json([{ chunk_id: 'chunk-0000', partial: false, n_items: items.length }]);
    }
    if (url.startsWith('/api/items')) {
      return json({ chunk_id: 'chunk-0000', partial: false, items });
    }
    if (url.startsWith('/api/annotations') && method === 'POST') {
      if (plannedNetworkError) {
        plannedNetworkError = false;
        throw new TypeError('fetch failed');
      }
      if (plannedFailure) {
        const failure = plannedFailure;
        plannedFailure = null;
        return json({ detail: failure.detail }, failure.status);
      }
      posts.push({ url, body: JSON.parse(String(init?.body)) });
      eventId += 1;
      return json({ event_id: eventId }, 201);
    }
    if (url.startsWith('/api/agreement')) {
      return json({ detail: `0 items at quorum; need at least 2` }, 409);
    }
    if (url.startsWith('/api/progress')) {
      return json({
        n_items: items.length,
        n_resolved: 0,
        queue_length: 0,
        per_annotator: {},
        queue_policy: 'majority',
        quorum: 3,
      });
    }
    if (url.startsWith('/api/adjudication') && method === 'GET') {
      return json({ policy: 'majority', items: [] });
    }
    if (url.startsWith('/api/adjudication') && method === 'POST') {
      posts.push({ url, body: JSON.parse(String(init?.body)) });
      eventId += 1;
      return json({ event_id: eventId }, 201);
    }
    return json({ detail: `unhandled ${method} ${url}` }, 500);
  }) as typeof fetch;

  return {
    fetch: handler,
    posts,
    failNextAnnotationWith: (status, detail) => {
      plannedFailure = { status, detail };
    },
    failNextAnnotationWithNetworkError: () => {
      plannedNetworkError = true;
    },
  };
}

export const flush = (): Promise<void> => new Promise((resolve) => setTimeout(resolve, 0));
