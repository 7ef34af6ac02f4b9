// Shared helpers for the end-to-end tests against the live service.

import { ApiClient } from "../src/api.js";
import type { Snapshot } from "../src/types.js";

export async function runSearchToExhaustion(
  api: ApiClient,
  routeId: string,
  params: Record<string, unknown> = { k: 4, seed: 5 },
): Promise<string> {
  const created = await api.createSearchSession({ route_id: routeId, params });
  const sessionId = created.session_id;
  await api.control(sessionId, "resume");
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => {
      subscription.close();
      reject(new Error("search did not exhaust in time"));
    }, 45_000);
    const subscription = api.streamSnapshots(sessionId, (snap) => {
      if (snap.status === "exhausted" || snap.status === "stopped") {
        clearTimeout(timer);
        subscription.close();
        resolve();
      }
    });
  });
  return sessionId;
}

export function collectSnapshots(
  api: ApiClient,
  sessionId: string,
  onEach: (snap: Snapshot) => void,
  until: (snap: Snapshot) => boolean,
  timeoutMs = 45_000,
): Promise<Snapshot[]> {
  const seen: Snapshot[] = [];
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      subscription.close();
      reject(new Error(`stream timeout after ${seen.length} snapshots`));
    }, timeoutMs);
    const subscription = api.streamSnapshots(sessionId, (snap) => {
      seen.push(snap);
      onEach(snap);
      if (until(snap)) {
        clearTimeout(timer);
        subscription.close();
        resolve(seen);
      }
    });
  });
}
