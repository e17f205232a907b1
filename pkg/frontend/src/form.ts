/**
 * The point-entry form as a pure model.
 *
 * Courtside entry uses toggle chips (server, winner, event flags); this
 * module turns a chip state into the event body the service expects.
 * Attributions are derived, never typed: an ace belongs to the server,
 * an unforced error to the point loser, a converted break to the
 * receiver. The service re-validates everything; `chipConflicts` exists
 * only so the form can disable the send button with a reason instead of
 * collecting a 422.
 */

import type { NetApproach, Player, PointEvent } from "./api.js";

export interface FormState {
  server: Player;
  winner: Player;
  distanceA: number;
  distanceB: number;
  scoreState: string;
  ace: boolean;
  doubleFault: boolean;
  unforcedError: boolean;
  winnerShot: boolean;
  breakPoint: boolean;
  netApproach: Player | null;
  netWon: boolean;
}

export function initialForm(): FormState {
  return {
    server: "A",
    winner: "A",
    distanceA: 0,
    distanceB: 0,
    scoreState: "",
    ace: false,
    doubleFault: false,
    unforcedError: false,
    winnerShot: false,
    breakPoint: false,
    netApproach: null,
    netWon: false,
  };
}

export function otherPlayer(player: Player): Player {
  return player === "A" ? "B" : "A";
}

/** Why this chip combination cannot be sent; empty means sendable. */
export function chipConflicts(form: FormState): string[] {
  const problems: string[] = [];
  if (form.ace && form.doubleFault) {
    problems.push("a point cannot be both an ace and a double fault");
  }
  if (form.ace && form.winner !== form.server) {
    problems.push("an ace means the server won the point");
  }
  if (form.doubleFault && form.winner === form.server) {
    problems.push("a double fault means the server lost the point");
  }
  if (form.breakPoint && form.winner === form.server) {
    problems.push("a break is converted by the receiver winning the point");
  }
  if (form.netApproach !== null && form.netWon && form.netApproach !== form.winner) {
    problems.push("a won net approach must belong to the point winner");
  }
  if (form.netApproach === null && form.netWon) {
    problems.push("nobody approached the net");
  }
  if (!(form.distanceA >= 0) || !(form.distanceB >= 0)) {
    problems.push("distances must be zero or more");
  }
  return problems;
}

/** Build the next point event; positions come from the tracker, not the chips. */
export function buildEvent(
  form: FormState,
  setNo: number,
  gameNo: number,
  pointIndex: number,
): PointEvent {
  const loser = otherPlayer(form.winner);
  const net: NetApproach | null =
    form.netApproach === null ? null : { player: form.netApproach, won: form.netWon };
  return {
    set_no: setNo,
    game_no: gameNo,
    point_index: pointIndex,
    server: form.server,
    point_winner: form.winner,
    distance_run_a: form.distanceA,
    distance_run_b: form.distanceB,
    score_state: form.scoreState,
    ace: form.ace ? form.server : null,
    double_fault: form.doubleFault ? form.server : null,
    unforced_error: form.unforcedError ? loser : null,
    winner_shot: form.winnerShot ? form.winner : null,
    net_approach: net,
    break_point_won: form.breakPoint ? form.winner : null,
  };
}
