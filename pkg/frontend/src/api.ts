// Thin typed client over the service's REST + SSE contract. SSE is read via
// fetch streaming so the same code runs in browsers and in node-based tests.

import type {
  FeatureCollection,
  FlowMatrixPayload,
  RankedRoute,
  ResolutionState,
  Snapshot,
  TransferShares,
} from "./types.js";

export interface SseSubscription {
  close(): void;
  done: Promise<void>;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const message = (body as { message?: string }).message ?? response.statusText;
      throw new Error(`${response.status}: ${message}`);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string }> {
    return this.json("/health");
  }

  zones(count: number): Promise<FeatureCollection> {
    return this.json(`/zones?count=${count}`);
  }

  rankRoutes(weights: string, filters?: string): Promise<{ routes: RankedRoute[] }> {
    const query = new URLSearchParams({ weights });
    if (filters) query.set("filters", filters);
    return this.json(`/routes?${query}`);
  }

  matrix(routeId: string, bin: "hourly" | "weekday"): Promise<FlowMatrixPayload> {
    return this.json(`/routes/${encodeURIComponent(routeId)}/matrix?bin=${bin}`);
  }

  transferShares(routeId: string, stopId: string): Promise<TransferShares> {
    return this.json(
      `/routes/${encodeURIComponent(routeId)}/transfers/${encodeURIComponent(stopId)}`,
    );
  }

  createSearchSession(payload: unknown): Promise<{ session_id: string; snapshot: Snapshot }> {
    return this.post("/search/sessions", payload);
  }

  control(sessionId: string, action: "pause" | "resume" | "stop"): Promise<unknown> {
    return this.post(`/search/sessions/${sessionId}/control`, { action });
  }

  editStations(sessionId: string, add: string[], remove: string[]): Promise<unknown> {
    return this.post(`/search/sessions/${sessionId}/stations`, { add, remove });
  }

  sessionGraph(sessionId: string): Promise<FeatureCollection> {
    return this.json(`/search/sessions/${sessionId}/graph`);
  }

  createResolutionSession(payload: {
    search_session_id: string;
    beta?: number;
    weights?: Record<string, number>;
  }): Promise<{ session_id: string; state: ResolutionState }> {
    return this.post("/resolve/sessions", payload);
  }

  resolutionState(sessionId: string): Promise<ResolutionState> {
    return this.json(`/resolve/sessions/${sessionId}`);
  }

  resolve(sessionId: string, conflictIndex: number, clusterId: string): Promise<ResolutionState> {
    return this.post(`/resolve/sessions/${sessionId}/resolve`, {
      conflict_index: conflictIndex,
      cluster_id: clusterId,
    });
  }

  undo(sessionId: string): Promise<ResolutionState> {
    return this.post(`/resolve/sessions/${sessionId}/undo`, {});
  }

  activateConflict(sessionId: string, conflictIndex: number): Promise<ResolutionState> {
    return this.post(`/resolve/sessions/${sessionId}/activate`, {
      conflict_index: conflictIndex,
    });
  }

  /**
   * Subscribe to a session's snapshot stream. `onSnapshot` fires once per
   * `data:` event in arrival order; the subscription resolves when the
   * stream ends and can be cancelled with close().
   */
  streamSnapshots(sessionId: string, onSnapshot: (snap: Snapshot) => void): SseSubscription {
    const controller = new AbortController();
    const done = (async () => {
      const response = await this.fetchImpl(
        `${this.baseUrl}/search/sessions/${sessionId}/stream`,
        { signal: controller.signal, headers: { accept: "text/event-stream" } },
      );
      if (!response.ok || response.body === null) {
        throw new Error(`stream failed: ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      try {
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          buffer += decoder.decode(value, { stream: true });
          for (;;) {
            const cut = buffer.indexOf("\n\n");
            if (cut < 0) break;
            const block = buffer.slice(0, cut);
            buffer = buffer.slice(cut + 2);
            for (const line of block.split("\n")) {
              if (line.startsWith("data: ")) {
                onSnapshot(JSON.parse(line.slice(6)) as Snapshot);
              }
            }
          }
        }
      } catch (error) {
        if (!controller.signal.aborted) throw error;
      }
    })();
    return {
      close: () => controller.abort(),
      done: done.catch(() => undefined),
    };
  }
}
