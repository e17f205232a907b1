import { describe, expect, it } from "vitest";

import { buildEvent, chipConflicts, initialForm, otherPlayer } from "../src/form.js";
import type { FormState } from "../src/form.js";
import { loadGolden } from "./support.js";

function form(overrides: Partial<FormState> = {}): FormState {
  return { ...initialForm(), ...overrides };
}

describe("chip conflict rules", () => {
  it("accepts the blank form", () => {
    expect(chipConflicts(initialForm())).toEqual([]);
  });

  it("swaps players", () => {
    expect(otherPlayer("A")).toBe("B");
    expect(otherPlayer("B")).toBe("A");
  });

  it("rejects an ace combined with a double fault", () => {
    const problems = chipConflicts(form({ ace: true, doubleFault: true }));
    expect(problems.some((p) => p.includes("both an ace and a double fault"))).toBe(true);
  });

  it("requires the server to win an ace point", () => {
    expect(chipConflicts(form({ ace: true, server: "A", winner: "A" }))).toEqual([]);
    const problems = chipConflicts(form({ ace: true, server: "A", winner: "B" }));
    expect(problems).toEqual(["an ace means the server won the point"]);
  });

  it("requires the server to lose a double-fault point", () => {
    expect(chipConflicts(form({ doubleFault: true, server: "A", winner: "B" }))).toEqual([]);
    const problems = chipConflicts(form({ doubleFault: true, server: "B", winner: "B" }));
    expect(problems).toEqual(["a double fault means the server lost the point"]);
  });

  it("requires the receiver to win a converted break", () => {
    expect(chipConflicts(form({ breakPoint: true, server: "A", winner: "B" }))).toEqual([]);
    const problems = chipConflicts(form({ breakPoint: true, server: "A", winner: "A" }));
    expect(problems).toEqual(["a break is converted by the receiver winning the point"]);
  });

  it("ties a won net approach to the point winner", () => {
    expect(chipConflicts(form({ netApproach: "A", netWon: true, winner: "A" }))).toEqual([]);
    expect(chipConflicts(form({ netApproach: "B", netWon: false, winner: "A" }))).toEqual([]);
    const problems = chipConflicts(form({ netApproach: "B", netWon: true, winner: "A" }));
    expect(problems).toEqual(["a won net approach must belong to the point winner"]);
  });

  it("rejects a net win when nobody approached", () => {
    const problems = chipConflicts(form({ netApproach: null, netWon: true }));
    expect(problems).toEqual(["nobody approached the net"]);
  });

  it("rejects negative distances", () => {
    expect(chipConflicts(form({ distanceA: -1 }))).toEqual(["distances must be zero or more"]);
    expect(chipConflicts(form({ distanceB: -0.5 }))).toEqual(["distances must be zero or more"]);
    expect(chipConflicts(form({ distanceA: 0, distanceB: 0 }))).toEqual([]);
  });

  it("collects every active conflict at once", () => {
    const problems = chipConflicts(
      form({ ace: true, doubleFault: true, server: "A", winner: "B", distanceA: -2 }),
    );
    expect(problems).toHaveLength(3);
  });
});

describe("event construction", () => {
  it("passes the position fields straight through", () => {
    const event = buildEvent(initialForm(), 2, 5, 37);
    expect(event.set_no).toBe(2);
    expect(event.game_no).toBe(5);
    expect(event.point_index).toBe(37);
  });

  it("sends a plain rally as all-null attributions", () => {
    const event = buildEvent(form({ server: "B", winner: "A", distanceA: 3, distanceB: 4 }), 1, 1, 1);
    expect(event.server).toBe("B");
    expect(event.point_winner).toBe("A");
    expect(event.distance_run_a).toBe(3);
    expect(event.distance_run_b).toBe(4);
    expect(event.ace).toBeNull();
    expect(event.double_fault).toBeNull();
    expect(event.unforced_error).toBeNull();
    expect(event.winner_shot).toBeNull();
    expect(event.net_approach).toBeNull();
    expect(event.break_point_won).toBeNull();
  });

  it("credits an ace to the server", () => {
    const event = buildEvent(form({ server: "B", winner: "B", ace: true }), 1, 1, 1);
    expect(event.ace).toBe("B");
  });

  it("charges a double fault to the server", () => {
    const event = buildEvent(form({ server: "A", winner: "B", doubleFault: true }), 1, 1, 1);
    expect(event.double_fault).toBe("A");
  });

  it("charges an unforced error to the point loser", () => {
    const event = buildEvent(form({ winner: "A", unforcedError: true }), 1, 1, 1);
    expect(event.unforced_error).toBe("B");
  });

  it("credits a winner shot and a converted break to the point winner", () => {
    const event = buildEvent(
      form({ server: "A", winner: "B", winnerShot: true, breakPoint: true }),
      1,
      1,
      1,
    );
    expect(event.winner_shot).toBe("B");
    expect(event.break_point_won).toBe("B");
  });

  it("sends the net approach with its outcome", () => {
    const lost = buildEvent(form({ winner: "A", netApproach: "B", netWon: false }), 1, 1, 1);
    expect(lost.net_approach).toEqual({ player: "B", won: false });
    const won = buildEvent(form({ winner: "A", netApproach: "A", netWon: true }), 1, 1, 1);
    expect(won.net_approach).toEqual({ player: "A", won: true });
  });

  it("keeps the score state verbatim", () => {
    expect(buildEvent(form({ scoreState: "AD-40" }), 1, 1, 1).score_state).toBe("AD-40");
  });
});

describe("golden script", () => {
  const golden = loadGolden();

  it("is enterable: no chip state in the script conflicts", () => {
    for (const state of golden.script) {
      expect(chipConflicts(state)).toEqual([]);
    }
  });

  it("rebuilds every recorded request from its chip state", () => {
    golden.script.forEach((state, i) => {
      const recorded = golden.events[i];
      const built = buildEvent(state, recorded.set_no, recorded.game_no, recorded.point_index);
      expect(built).toEqual(recorded);
    });
  });
});
