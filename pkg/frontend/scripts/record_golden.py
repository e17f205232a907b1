"""Record golden service responses for the console test suite.

Replays the bundled ten-point demo match against the live service
(in-process) and freezes every request body and response the console
would see: per-point snapshots, the state after each point, the undo
response, and the model listing. Rerun after any service change:

    python3 scripts/record_golden.py

The console tests replay this file through a fake fetch, which keeps
them hermetic while still pinning the exact server contract.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from turnpoint.ingest import FormatDescriptor, bundled_match_path, parse_match_file, record_to_dict
from turnpoint.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "replay.json"


def chip_state(record) -> dict:
    """The toggle-chip form state that produces this record's event."""
    return {
        "server": record.server,
        "winner": record.point_winner,
        "distanceA": record.distance_run_a,
        "distanceB": record.distance_run_b,
        "scoreState": record.score_state,
        "ace": record.ace is not None,
        "doubleFault": record.double_fault is not None,
        "unforcedError": record.unforced_error is not None,
        "winnerShot": record.winner_shot is not None,
        "breakPoint": record.break_point_won is not None,
        "netApproach": None if record.net_approach is None else record.net_approach.player,
        "netWon": record.net_approach.won if record.net_approach is not None else False,
    }


def main() -> None:
    records = parse_match_file(bundled_match_path(), FormatDescriptor.canonical()).records()
    events = []
    for r in records:
        body = record_to_dict(r)
        body.pop("match_id")
        events.append(body)

    with TestClient(create_app()) as client:
        models = client.get("/models").json()
        created = client.post(
            "/sessions",
            json={"player_a": "Alpha", "player_b": "Beta", "length_hint": 10},
        ).json()
        sid = created["session"]["session_id"]
        snapshots, states = [], []
        for event in events:
            resp = client.post(f"/sessions/{sid}/points", json=event)
            resp.raise_for_status()
            snapshots.append(resp.json())
            states.append(client.get(f"/sessions/{sid}/state").json())
        undo_snapshot = client.delete(f"/sessions/{sid}/points/last").json()
        state_after_undo = client.get(f"/sessions/{sid}/state").json()
        log = client.get(f"/sessions/{sid}/log").json()

    doc = {
        "comment": "recorded from the live service; regenerate with scripts/record_golden.py",
        "models": models,
        "created": created,
        "script": [chip_state(r) for r in records],
        "events": events,
        "snapshots": snapshots,
        "states": states,
        "undo_snapshot": undo_snapshot,
        "state_after_undo": state_after_undo,
        "log": log,
    }
    OUT.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
