/** Entry point: asks for a rater id, then loops tasks of the selected kind.
 * A refresh abandons any walk in progress; the server re-issues the task. */
import { Ack, TaskKind, fetchTask, isExhausted } from "./api.js";
import { renderPairwiseScreen } from "./pairwise.js";
import { renderPlacementScreen } from "./placement.js";
import { STRINGS } from "./strings.js";

export async function runTaskLoop(
  root: HTMLElement,
  rater: string,
  kind: TaskKind,
): Promise<void> {
  const task = await fetchTask(rater, kind);
  if (isExhausted(task)) {
    root.innerHTML = "";
    const done = document.createElement("p");
    done.textContent = STRINGS.exhausted;
    root.appendChild(done);
    return;
  }
  const next = (_ack: Ack) => {
    void runTaskLoop(root, rater, kind);
  };
  const retry = () => {
    // server rejected or network failed: refetch (same task re-issued if open)
    void runTaskLoop(root, rater, kind);
  };
  if (task.kind === "pair") {
    renderPairwiseScreen(root, task, { onSubmitted: next, onError: retry });
  } else {
    renderPlacementScreen(root, task, { onSubmitted: next, onError: retry });
  }
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const form = document.getElementById("join") as HTMLFormElement | null;
  if (!form) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const rater = (document.getElementById("rater") as HTMLInputElement).value.trim();
    const kind = (document.getElementById("kind") as HTMLSelectElement).value as TaskKind;
    if (rater) {
      form.hidden = true;
      void runTaskLoop(root, rater, kind);
    }
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  bootstrap();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", bootstrap);
}
