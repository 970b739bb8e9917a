import { vi } from "vitest";

import type { Ack, TaskAssignment } from "../src/api.js";

export function pairTask(): TaskAssignment {
  return {
    task_id: "t-pair-1",
    rater: "r0",
    kind: "pair",
    payload: { left: "itA", right: "itB" } as TaskAssignment["payload"],
    issued_at: 0,
    audio: { left: "/api/audio/itA", right: "/api/audio/itB" },
  };
}

export function placementTask(nAnchors = 10): TaskAssignment {
  const anchors = Array.from({ length: nAnchors }, (_, i) => `a${i}`);
  return {
    task_id: "t-place-1",
    rater: "r0",
    kind: "placement",
    payload: { item: "itX", anchors } as TaskAssignment["payload"],
    issued_at: 0,
    audio: { item: "/api/audio/itX" },
  };
}

export interface RecordedPost {
  url: string;
  body: Record<string, unknown>;
}

/** Installs a fetch mock that records POSTs and answers with the given ack. */
export function mockFetch(ack: Partial<Ack> = {}): RecordedPost[] {
  const posts: RecordedPost[] = [];
  const response = (body: unknown) =>
    new Response(JSON.stringify(body), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      if (init?.method === "POST") {
        const body = JSON.parse(String(init.body)) as Record<string, unknown>;
        posts.push({ url: String(url), body });
        return response({ task_id: body.task_id, accepted: true, line: posts.length - 1, ...ack });
      }
      return response({ exhausted: true });
    }),
  );
  return posts;
}

export function click(el: Element): void {
  el.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

export function markPlayed(audio: Element): void {
  audio.dispatchEvent(new Event("play"));
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
