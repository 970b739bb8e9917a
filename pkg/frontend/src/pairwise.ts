/** Pairwise comparison screen: two players, a choice enabled only after both
 * excerpts have been heard, and the help tooltip. The choice posts exactly
 * once; the buttons lock on the first click. */
import { Ack, Choice, TaskAssignment, submitChoice } from "./api.js";
import { STRINGS } from "./strings.js";

export interface PairwiseHooks {
  onSubmitted: (ack: Ack) => void;
  onError: (err: unknown) => void;
}

export function renderPairwiseScreen(
  root: HTMLElement,
  task: TaskAssignment,
  hooks: PairwiseHooks,
): void {
  root.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = STRINGS.pairQuestion;
  heading.title = STRINGS.pairHelp;
  root.appendChild(heading);

  const played = { left: false, right: false };
  const players = document.createElement("div");
  players.className = "players";
  for (const side of ["left", "right"] as const) {
    const box = document.createElement("div");
    const label = document.createElement("div");
    label.textContent = side;
    const audio = document.createElement("audio");
    audio.controls = true;
    audio.src = task.audio[side];
    audio.dataset.side = side;
    audio.addEventListener("play", () => {
      played[side] = true;
      updateButtons();
    });
    box.append(label, audio);
    players.appendChild(box);
  }
  root.appendChild(players);

  const hint = document.createElement("p");
  hint.className = "hint";
  hint.textContent = STRINGS.listenFirst;
  root.appendChild(hint);

  const buttons: HTMLButtonElement[] = [];
  const choices: Array<[Choice, string]> = [
    ["left_more_major", STRINGS.leftMoreMajor],
    ["equal", STRINGS.equal],
    ["right_more_major", STRINGS.rightMoreMajor],
  ];
  let submitting = false;

  const bar = document.createElement("div");
  bar.className = "choices";
  for (const [choice, label] of choices) {
    const button = document.createElement("button");
    button.textContent = label;
    button.disabled = true;
    button.dataset.choice = choice;
    button.addEventListener("click", () => {
      if (submitting) return; // double-click guard
      submitting = true;
      buttons.forEach((b) => (b.disabled = true));
      hint.textContent = STRINGS.submitting;
      submitChoice(task.task_id, choice).then(hooks.onSubmitted, (err) => {
        hint.textContent = STRINGS.submitFailed;
        hooks.onError(err);
      });
    });
    buttons.push(button);
    bar.appendChild(button);
  }
  root.appendChild(bar);

  function updateButtons(): void {
    const ready = played.left && played.right && !submitting;
    buttons.forEach((b) => (b.disabled = !ready));
    if (ready) hint.textContent = "";
  }
}
