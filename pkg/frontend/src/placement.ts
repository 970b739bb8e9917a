/** Placement screen: walk the item along the anchors from the most major end
 * until it sits between two examples, then post the full walk. The client
 * only records judgments; the server derives the rating from the walk. */
import { Ack, Judgment, TaskAssignment, submitWalk } from "./api.js";
import { STRINGS } from "./strings.js";

export interface PlacementHooks {
  onSubmitted: (ack: Ack) => void;
  onError: (err: unknown) => void;
}

interface WalkState {
  cursor: number; // steps taken from the most major anchor
  judgments: Judgment[];
  done: boolean;
}

export function renderPlacementScreen(
  root: HTMLElement,
  task: TaskAssignment,
  hooks: PlacementHooks,
): void {
  const anchors = task.payload.anchors; // ascending majorness, server-issued
  const state: WalkState = { cursor: 0, judgments: [], done: false };
  let submitting = false;

  root.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = STRINGS.placementQuestion;
  root.appendChild(heading);

  const itemBox = document.createElement("div");
  const itemLabel = document.createElement("div");
  itemLabel.textContent = `${STRINGS.placementItem}: ${task.payload.item}`;
  const itemAudio = document.createElement("audio");
  itemAudio.controls = true;
  itemAudio.src = task.audio.item;
  itemAudio.dataset.role = "item";
  itemBox.append(itemLabel, itemAudio);
  root.appendChild(itemBox);

  const anchorBox = document.createElement("div");
  const anchorLabel = document.createElement("div");
  const anchorAudio = document.createElement("audio");
  anchorAudio.controls = true;
  anchorAudio.dataset.role = "anchor";
  anchorBox.append(anchorLabel, anchorAudio);
  root.appendChild(anchorBox);

  const progress = document.createElement("p");
  progress.className = "progress";
  root.appendChild(progress);

  const status = document.createElement("p");
  status.className = "status";
  root.appendChild(status);

  const moreMinor = document.createElement("button");
  moreMinor.textContent = STRINGS.moreMinor;
  moreMinor.dataset.judgment = "item_more_minor";
  const moreMajor = document.createElement("button");
  moreMajor.textContent = STRINGS.moreMajor;
  moreMajor.dataset.judgment = "item_less_minor";
  const bar = document.createElement("div");
  bar.className = "choices";
  bar.append(moreMinor, moreMajor);
  root.appendChild(bar);

  function currentAnchor(): string {
    return anchors[anchors.length - 1 - state.cursor];
  }

  function showStep(): void {
    anchorLabel.textContent = `${STRINGS.placementAnchor}: ${currentAnchor()}`;
    anchorAudio.src = `/api/audio/${currentAnchor()}`;
    progress.textContent = STRINGS.progress(state.cursor + 1, anchors.length);
  }

  function bracketText(): string {
    // slot = anchors the item beats = K - cursor for a less-minor stop,
    // 0 after walking off the minor end
    const k = anchors.length;
    const slot = state.judgments[state.judgments.length - 1] === "item_less_minor"
      ? k - (state.cursor)
      : 0;
    if (slot === 0) return STRINGS.placedBelowAll;
    if (slot === k) return STRINGS.placedAboveAll;
    return STRINGS.placedBetween(anchors[slot - 1], anchors[slot]);
  }

  function finish(): void {
    state.done = true;
    moreMinor.disabled = true;
    moreMajor.disabled = true;
    status.textContent = `${bracketText()} ${STRINGS.submitting}`;
    if (submitting) return;
    submitting = true;
    submitWalk(task.task_id, state.judgments).then((ack) => {
      if (typeof ack.rating === "number") {
        status.textContent = `${bracketText()} ${STRINGS.ratingReceived(ack.rating)}`;
      }
      hooks.onSubmitted(ack);
    }, (err) => {
      status.textContent = STRINGS.submitFailed;
      hooks.onError(err);
    });
  }

  moreMinor.addEventListener("click", () => {
    if (state.done) return;
    state.judgments.push("item_more_minor");
    state.cursor += 1;
    if (state.cursor === anchors.length) {
      finish(); // fell off the most minor end
    } else {
      showStep();
    }
  });

  moreMajor.addEventListener("click", () => {
    if (state.done) return;
    state.judgments.push("item_less_minor");
    finish(); // bracketed: more major than the current anchor
  });

  showStep();
}
