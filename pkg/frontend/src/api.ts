/** Typed client for the annotation service HTTP API. */

export type TaskKind = "pair" | "placement";

export interface PairPayload {
  left: string;
  right: string;
}

export interface PlacementPayload {
  item: string;
  anchors: string[]; // ascending in majorness, as issued by the server
}

export interface TaskAssignment {
  task_id: string;
  rater: string;
  kind: TaskKind;
  payload: PairPayload & PlacementPayload;
  issued_at: number;
  audio: Record<string, string>;
}

export interface ExhaustedMarker {
  exhausted: true;
}

export type TaskResponse = TaskAssignment | ExhaustedMarker;

export interface Ack {
  task_id: string;
  accepted: boolean;
  line: number;
  rating?: number;
}

export type Choice = "left_more_major" | "right_more_major" | "equal";
export type Judgment = "item_more_minor" | "item_less_minor";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parseOrThrow(response: Response): Promise<unknown> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return response.json();
}

export function isExhausted(task: TaskResponse): task is ExhaustedMarker {
  return (task as ExhaustedMarker).exhausted === true;
}

export async function fetchTask(rater: string, kind: TaskKind): Promise<TaskResponse> {
  const params = new URLSearchParams({ rater, kind });
  const response = await fetch(`/api/task?${params}`);
  return (await parseOrThrow(response)) as TaskResponse;
}

export async function submitChoice(taskId: string, choice: Choice): Promise<Ack> {
  const response = await fetch("/api/annotation", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ task_id: taskId, choice }),
  });
  return (await parseOrThrow(response)) as Ack;
}

export async function submitWalk(taskId: string, walk: Judgment[]): Promise<Ack> {
  const response = await fetch("/api/annotation", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ task_id: taskId, walk }),
  });
  return (await parseOrThrow(response)) as Ack;
}
