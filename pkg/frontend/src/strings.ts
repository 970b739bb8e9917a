/** All user-facing text, kept out of the components. */
export const STRINGS = {
  pairQuestion: "Which excerpt sounds more major?",
  pairHelp:
    "Major mode tends to sound bright or resolved; minor tends to sound dark or sad. " +
    "Judge the excerpt as a whole. Listen to both excerpts before answering.",
  leftMoreMajor: "Left is more major",
  rightMoreMajor: "Right is more major",
  equal: "They sound equal",
  listenFirst: "Listen to both excerpts to enable the answers.",
  placementQuestion: "Compare the piece to the example:",
  placementItem: "Piece to rate",
  placementAnchor: "Example",
  moreMinor: "Piece is more minor",
  moreMajor: "Piece is more major",
  placedBetween: (low: string, high: string) =>
    `Placed between example ${low} and example ${high}.`,
  placedBelowAll: "Placed below every example (most minor).",
  placedAboveAll: "Placed above every example (most major).",
  ratingReceived: (rating: number) => `Recorded rating: ${rating}`,
  submitting: "Submitting…",
  submitFailed: "Submission failed; fetching a fresh task.",
  exhausted: "No tasks left for you. Thank you!",
  progress: (done: number, total: number) => `Example ${done} of ${total}`,
};
