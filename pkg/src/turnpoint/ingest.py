"""Point-by-point match ingestion and per-point competitive indicators.

A match is a sequence of scoring units (one serve up to the resulting
score). Each unit is described by a :class:`PointRecord`, from which a
14-column indicator matrix is derived: columns 1-7 describe the player
under analysis ("A"), columns 8-14 describe the opponent ("B").
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

PLAYER_A = "A"
PLAYER_B = "B"

INDICATOR_NAMES = (
    "dist_a",
    "score_streak_a",
    "error_streak_a",
    "aces_a",
    "winners_a",
    "net_wins_a",
    "breaks_a",
    "dist_b",
    "score_streak_b",
    "error_streak_b",
    "aces_b",
    "winners_b",
    "net_wins_b",
    "breaks_b",
)

N_INDICATORS = len(INDICATOR_NAMES)

# +1 where a larger value favours player A, -1 where it counts against A.
# Own distance run is a cost; the opponent's is a gain, and symmetrically
# for streaks and technical events.
INDICATOR_POLARITY = np.array(
    [-1, +1, -1, +1, +1, +1, +1, +1, -1, +1, -1, -1, -1, -1], dtype=float
)

# Indices that exchange the A-block and the B-block.
_SWAP_ORDER = np.concatenate([np.arange(7, 14), np.arange(0, 7)])

MINMAX_FLOOR = 1e-6


class SchemaError(Exception):
    """A required column is missing from the input file."""


class IntegrityError(Exception):
    """Duplicate or out-of-order point identity within a match."""


@dataclass(frozen=True)
class NetApproach:
    player: str
    won: bool


@dataclass(frozen=True)
class PointRecord:
    """One scoring unit of a match, attributed events included.

    Event fields hold the player id ("A" or "B") they are attributed to,
    or None when the event did not occur on this point.
    """

    match_id: str
    set_no: int
    game_no: int
    point_index: int
    server: str
    point_winner: str
    distance_run_a: float
    distance_run_b: float
    score_state: str = ""
    ace: str | None = None
    double_fault: str | None = None
    unforced_error: str | None = None
    winner_shot: str | None = None
    net_approach: NetApproach | None = None
    break_point_won: str | None = None

    def __post_init__(self) -> None:
        if not self.match_id:
            raise ValueError("match_id must be non-empty")
        for name in ("set_no", "game_no", "point_index"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("server", "point_winner"):
            if getattr(self, name) not in (PLAYER_A, PLAYER_B):
                raise ValueError(f"{name} must be 'A' or 'B'")
        for name in ("ace", "double_fault", "unforced_error", "winner_shot", "break_point_won"):
            v = getattr(self, name)
            if v is not None and v not in (PLAYER_A, PLAYER_B):
                raise ValueError(f"{name} must be 'A', 'B' or None")
        for name in ("distance_run_a", "distance_run_b"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        loser = other_player(self.point_winner)
        # Logically forced attributions: an ace is served and wins the point,
        # a double fault is served and loses it, a clean winner wins it, an
        # unforced error loses it, a break is converted by the receiver.
        if self.ace is not None and (self.ace != self.server or self.ace != self.point_winner):
            raise ValueError("ace must be attributed to the server winning the point")
        if self.double_fault is not None and (
            self.double_fault != self.server or self.double_fault != loser
        ):
            raise ValueError("double fault must be attributed to the server losing the point")
        if self.winner_shot is not None and self.winner_shot != self.point_winner:
            raise ValueError("winner shot must be attributed to the point winner")
        if self.unforced_error is not None and self.unforced_error != loser:
            raise ValueError("unforced error must be attributed to the point loser")
        if self.break_point_won is not None and (
            self.break_point_won == self.server or self.break_point_won != self.point_winner
        ):
            raise ValueError("converted break must be attributed to the receiver winning the point")
        if self.net_approach is not None:
            if self.net_approach.player not in (PLAYER_A, PLAYER_B):
                raise ValueError("net approach player must be 'A' or 'B'")
            if self.net_approach.won and self.net_approach.player != self.point_winner:
                raise ValueError("a won net approach must belong to the point winner")


def other_player(player: str) -> str:
    return PLAYER_B if player == PLAYER_A else PLAYER_A


def bundled_match_path(name: str = "toy_match") -> Path:
    """Path of a data file shipped with the package (e.g. the toy match)."""
    path = Path(__file__).parent / "data" / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"no bundled data file named {name!r}")
    return path


def record_to_dict(record: PointRecord) -> dict:
    net = record.net_approach
    return {
        "match_id": record.match_id,
        "set_no": record.set_no,
        "game_no": record.game_no,
        "point_index": record.point_index,
        "server": record.server,
        "point_winner": record.point_winner,
        "distance_run_a": record.distance_run_a,
        "distance_run_b": record.distance_run_b,
        "score_state": record.score_state,
        "ace": record.ace,
        "double_fault": record.double_fault,
        "unforced_error": record.unforced_error,
        "winner_shot": record.winner_shot,
        "net_approach": None if net is None else {"player": net.player, "won": net.won},
        "break_point_won": record.break_point_won,
    }


def record_from_dict(doc: Mapping) -> PointRecord:
    net_doc = doc.get("net_approach")
    return PointRecord(
        match_id=doc["match_id"],
        set_no=int(doc["set_no"]),
        game_no=int(doc["game_no"]),
        point_index=int(doc["point_index"]),
        server=doc["server"],
        point_winner=doc["point_winner"],
        distance_run_a=float(doc["distance_run_a"]),
        distance_run_b=float(doc["distance_run_b"]),
        score_state=doc.get("score_state", ""),
        ace=doc.get("ace"),
        double_fault=doc.get("double_fault"),
        unforced_error=doc.get("unforced_error"),
        winner_shot=doc.get("winner_shot"),
        net_approach=None if net_doc is None else NetApproach(net_doc["player"], bool(net_doc["won"])),
        break_point_won=doc.get("break_point_won"),
    )


def swap_players(record: PointRecord) -> PointRecord:
    """Relabel A as B and vice versa (distances and events included)."""

    def sw(p: str | None) -> str | None:
        return None if p is None else other_player(p)

    score = record.score_state
    if "-" in score:
        left, _, right = score.partition("-")
        score = f"{right}-{left}"
    net = record.net_approach
    if net is not None:
        net = NetApproach(other_player(net.player), net.won)
    return replace(
        record,
        server=other_player(record.server),
        point_winner=other_player(record.point_winner),
        distance_run_a=record.distance_run_b,
        distance_run_b=record.distance_run_a,
        score_state=score,
        ace=sw(record.ace),
        double_fault=sw(record.double_fault),
        unforced_error=sw(record.unforced_error),
        winner_shot=sw(record.winner_shot),
        net_approach=net,
        break_point_won=sw(record.break_point_won),
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_PAIRED_MANDATORY = (
    "match_id",
    "set_no",
    "game_no",
    "point_index",
    "server",
    "point_winner",
    "distance_a",
    "distance_b",
)

_PAIRED_EVENTS = (
    "ace",
    "double_fault",
    "unforced_error",
    "winner",
)

_CANONICAL_COLUMNS = (
    "match_id",
    "set_no",
    "game_no",
    "point_index",
    "server",
    "point_winner",
    "ace",
    "double_fault",
    "unforced_error",
    "winner_shot",
    "net_approach",
    "net_approach_won",
    "break_point_won",
    "distance_run_a",
    "distance_run_b",
    "score_state",
)


def _mcm_columns() -> dict[str, str]:
    return {
        "match_id": "match_id",
        "set_no": "set_no",
        "game_no": "game_no",
        "point_index": "point_no",
        "server": "server",
        "point_winner": "point_victor",
        "distance_a": "p1_distance_run",
        "distance_b": "p2_distance_run",
        "score_a": "p1_score",
        "score_b": "p2_score",
        "ace_a": "p1_ace",
        "ace_b": "p2_ace",
        "double_fault_a": "p1_double_fault",
        "double_fault_b": "p2_double_fault",
        "unforced_error_a": "p1_unf_err",
        "unforced_error_b": "p2_unf_err",
        "winner_a": "p1_winner",
        "winner_b": "p2_winner",
        "net_a": "p1_net_pt",
        "net_b": "p2_net_pt",
        "net_won_a": "p1_net_pt_won",
        "net_won_b": "p2_net_pt_won",
        "break_won_a": "p1_break_pt_won",
        "break_won_b": "p2_break_pt_won",
    }


@dataclass(frozen=True)
class FormatDescriptor:
    """Maps logical point fields to the columns of a delimited file.

    Two styles exist. "paired" files carry one column per player for each
    event (the public MCM-2024-C point-by-point schema is the default
    mapping). "canonical" files carry one column per logical field and are
    what :func:`write_match_file` emits.

    Event semantics are configurable through the mapping itself: pointing
    ``break_won_a`` at an opportunity column instead of a conversion column
    redefines what counts as an effective break, and pointing ``net_a`` at
    a won-points-at-net column restricts approaches to winning ones.
    """

    style: str = "paired"
    delimiter: str = ","
    player_a_value: str = "1"
    player_b_value: str = "2"
    columns: Mapping[str, str] = field(default_factory=_mcm_columns)

    @classmethod
    def mcm_2024_c(cls) -> "FormatDescriptor":
        return cls()

    @classmethod
    def canonical(cls) -> "FormatDescriptor":
        return cls(
            style="canonical",
            player_a_value=PLAYER_A,
            player_b_value=PLAYER_B,
            columns={name: name for name in _CANONICAL_COLUMNS},
        )

    def to_dict(self) -> dict:
        return {
            "style": self.style,
            "delimiter": self.delimiter,
            "player_a_value": self.player_a_value,
            "player_b_value": self.player_b_value,
            "columns": dict(self.columns),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FormatDescriptor":
        return cls(
            style=doc.get("style", "paired"),
            delimiter=doc.get("delimiter", ","),
            player_a_value=doc.get("player_a_value", "1"),
            player_b_value=doc.get("player_b_value", "2"),
            columns=dict(doc["columns"]) if "columns" in doc else _mcm_columns(),
        )


@dataclass(frozen=True)
class RowIssue:
    line_no: int
    message: str


@dataclass
class ParseResult:
    matches: dict[str, list[PointRecord]]
    row_issues: list[RowIssue]

    @property
    def n_records(self) -> int:
        return sum(len(v) for v in self.matches.values())

    def records(self) -> list[PointRecord]:
        out: list[PointRecord] = []
        for recs in self.matches.values():
            out.extend(recs)
        return out


_TRUE_VALUES = {"1", "true", "yes", "y"}
_FALSE_VALUES = {"", "0", "false", "no", "n", "na", "nan", "none"}


def _flag(value: str | None) -> bool:
    if value is None:
        return False
    v = value.strip().lower()
    if v in _TRUE_VALUES:
        return True
    if v in _FALSE_VALUES:
        return False
    raise ValueError(f"unrecognized flag value {value!r}")


def parse_match_file(
    source: str | Path | IO[str],
    descriptor: FormatDescriptor | None = None,
) -> ParseResult:
    """Parse a delimited point-by-point file into records grouped by match.

    Malformed rows are skipped and reported with their line numbers in
    :attr:`ParseResult.row_issues`; structural problems (missing columns,
    duplicate or decreasing point_index within a match) raise.
    """
    descriptor = descriptor or FormatDescriptor.mcm_2024_c()
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return _parse_stream(fh, descriptor)
    return _parse_stream(source, descriptor)


def _parse_stream(stream: IO[str], descriptor: FormatDescriptor) -> ParseResult:
    reader = csv.reader(stream, delimiter=descriptor.delimiter)
    line_no = 0
    header: list[str] | None = None
    for row in reader:
        line_no += 1
        if row and row[0].lstrip().startswith("#"):
            continue  # leading annotation lines written by the pipeline
        header = [c.strip() for c in row]
        break
    if header is None:
        raise SchemaError("input has no header row")

    col_index = {name: i for i, name in enumerate(header)}
    mandatory = _PAIRED_MANDATORY if descriptor.style == "paired" else (
        "match_id",
        "set_no",
        "game_no",
        "point_index",
        "server",
        "point_winner",
        "distance_run_a",
        "distance_run_b",
    )
    for logical in mandatory:
        column = descriptor.columns.get(logical)
        if column is None:
            raise SchemaError(f"descriptor does not map mandatory field '{logical}'")
        if column not in col_index:
            raise SchemaError(f"missing column '{column}' (field '{logical}')")
    for logical, column in descriptor.columns.items():
        if column is not None and column not in col_index:
            raise SchemaError(f"missing column '{column}' (field '{logical}')")

    matches: dict[str, list[PointRecord]] = {}
    issues: list[RowIssue] = []
    seen: set[tuple[str, int]] = set()

    build = _paired_record if descriptor.style == "paired" else _canonical_record
    for row in reader:
        line_no += 1
        if not row or all(not c.strip() for c in row):
            continue

        def cell(logical: str) -> str | None:
            column = descriptor.columns.get(logical)
            if column is None:
                return None
            i = col_index[column]
            return row[i] if i < len(row) else None

        try:
            record = build(cell, descriptor)
        except ValueError as exc:
            issues.append(RowIssue(line_no, str(exc)))
            continue
        key = (record.match_id, record.point_index)
        if key in seen:
            raise IntegrityError(
                f"duplicate point {record.point_index} in match {record.match_id}"
                f" (line {line_no})"
            )
        seen.add(key)
        group = matches.setdefault(record.match_id, [])
        if group and record.point_index <= group[-1].point_index:
            raise IntegrityError(
                f"point_index not increasing in match {record.match_id} (line {line_no})"
            )
        group.append(record)
    return ParseResult(matches=matches, row_issues=issues)


def _parse_player(value: str | None, descriptor: FormatDescriptor, what: str) -> str:
    v = (value or "").strip()
    if v == descriptor.player_a_value:
        return PLAYER_A
    if v == descriptor.player_b_value:
        return PLAYER_B
    raise ValueError(f"unrecognized {what} value {value!r}")


def _parse_distance(value: str | None, what: str) -> float:
    try:
        return float((value or "").strip())
    except ValueError:
        raise ValueError(f"non-numeric {what} value {value!r}") from None


def _parse_int(value: str | None, what: str) -> int:
    try:
        return int((value or "").strip())
    except ValueError:
        raise ValueError(f"non-integer {what} value {value!r}") from None


def _paired_record(cell, descriptor: FormatDescriptor) -> PointRecord:
    winner = _parse_player(cell("point_winner"), descriptor, "point_winner")

    def event(logical: str) -> str | None:
        a = _flag(cell(f"{logical}_a"))
        b = _flag(cell(f"{logical}_b"))
        if a and b:
            raise ValueError(f"both players flagged for {logical}")
        return PLAYER_A if a else PLAYER_B if b else None

    net: NetApproach | None = None
    net_a, net_b = _flag(cell("net_a")), _flag(cell("net_b"))
    if net_a and net_b:
        # Both at net: keep the winner's approach, the one that can score.
        keep = winner
    elif net_a or net_b:
        keep = PLAYER_A if net_a else PLAYER_B
    else:
        keep = None
    if keep is not None:
        won = _flag(cell("net_won_a" if keep == PLAYER_A else "net_won_b"))
        net = NetApproach(keep, won)

    score_a, score_b = cell("score_a"), cell("score_b")
    score = f"{score_a}-{score_b}" if score_a is not None and score_b is not None else ""
    return PointRecord(
        match_id=(cell("match_id") or "").strip(),
        set_no=_parse_int(cell("set_no"), "set_no"),
        game_no=_parse_int(cell("game_no"), "game_no"),
        point_index=_parse_int(cell("point_index"), "point_index"),
        server=_parse_player(cell("server"), descriptor, "server"),
        point_winner=winner,
        distance_run_a=_parse_distance(cell("distance_a"), "distance"),
        distance_run_b=_parse_distance(cell("distance_b"), "distance"),
        score_state=score,
        ace=event("ace"),
        double_fault=event("double_fault"),
        unforced_error=event("unforced_error"),
        winner_shot=event("winner"),
        net_approach=net,
        break_point_won=event("break_won"),
    )


def _canonical_record(cell, descriptor: FormatDescriptor) -> PointRecord:
    def player_or_none(logical: str) -> str | None:
        v = (cell(logical) or "").strip()
        if not v:
            return None
        return _parse_player(v, descriptor, logical)

    net = None
    net_player = player_or_none("net_approach")
    if net_player is not None:
        net = NetApproach(net_player, _flag(cell("net_approach_won")))
    return PointRecord(
        match_id=(cell("match_id") or "").strip(),
        set_no=_parse_int(cell("set_no"), "set_no"),
        game_no=_parse_int(cell("game_no"), "game_no"),
        point_index=_parse_int(cell("point_index"), "point_index"),
        server=_parse_player(cell("server"), descriptor, "server"),
        point_winner=_parse_player(cell("point_winner"), descriptor, "point_winner"),
        distance_run_a=_parse_distance(cell("distance_run_a"), "distance"),
        distance_run_b=_parse_distance(cell("distance_run_b"), "distance"),
        score_state=cell("score_state") or "",
        ace=player_or_none("ace"),
        double_fault=player_or_none("double_fault"),
        unforced_error=player_or_none("unforced_error"),
        winner_shot=player_or_none("winner_shot"),
        net_approach=net,
        break_point_won=player_or_none("break_point_won"),
    )


def write_match_file(
    records: Iterable[PointRecord],
    dest: str | Path | IO[str],
    header_comment: str | None = None,
) -> None:
    """Write records in the canonical format (re-parseable losslessly)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_match_file(records, fh, header_comment)
        return
    writer = csv.writer(dest, lineterminator="\n")
    if header_comment:
        dest.write(f"# {header_comment}\n")
    writer.writerow(_CANONICAL_COLUMNS)
    for r in records:
        net = r.net_approach
        writer.writerow(
            [
                r.match_id,
                r.set_no,
                r.game_no,
                r.point_index,
                r.server,
                r.point_winner,
                r.ace or "",
                r.double_fault or "",
                r.unforced_error or "",
                r.winner_shot or "",
                net.player if net else "",
                ("1" if net.won else "0") if net else "",
                r.break_point_won or "",
                repr(r.distance_run_a),
                repr(r.distance_run_b),
                r.score_state,
            ]
        )


# ---------------------------------------------------------------------------
# Indicator matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    sd: np.ndarray  # sample standard deviation (n-1 denominator)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ColumnStats":
        return cls(np.asarray(doc["mean"], float), np.asarray(doc["sd"], float))


@dataclass
class IndicatorMatrix:
    """Per-unit indicator vectors of one match, from A's perspective."""

    match_id: str
    point_index: np.ndarray
    raw: np.ndarray
    standardized: np.ndarray | None = None
    column_stats: ColumnStats | None = None

    @property
    def n_units(self) -> int:
        return self.raw.shape[0]

    def swapped(self) -> "IndicatorMatrix":
        """The same match viewed from B's perspective (blocks exchanged)."""
        stats = self.column_stats
        if stats is not None:
            stats = ColumnStats(stats.mean[_SWAP_ORDER], stats.sd[_SWAP_ORDER])
        return IndicatorMatrix(
            match_id=self.match_id,
            point_index=self.point_index.copy(),
            raw=self.raw[:, _SWAP_ORDER].copy(),
            standardized=None if self.standardized is None else self.standardized[:, _SWAP_ORDER].copy(),
            column_stats=stats,
        )


def extract_indicators(records: Sequence[PointRecord]) -> IndicatorMatrix:
    """Derive the 14 per-unit indicators from one match's records.

    Distances are the point's values, streaks are running lengths that
    include the current point and reset only when broken by the opposing
    outcome (never at set or game boundaries), and technical events count
    0/1 on the point they occur.
    """
    if not records:
        raise ValueError("no records")
    match_id = records[0].match_id
    for r in records:
        if r.match_id != match_id:
            raise ValueError("records mix multiple match_ids")
    idx = [r.point_index for r in records]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("records not sorted by point_index")

    raw = np.zeros((len(records), N_INDICATORS), dtype=float)
    score_a = score_b = err_a = err_b = 0
    for t, r in enumerate(records):
        a_won = r.point_winner == PLAYER_A
        score_a = score_a + 1 if a_won else 0
        score_b = score_b + 1 if not a_won else 0
        a_erred = r.double_fault == PLAYER_A or r.unforced_error == PLAYER_A
        b_erred = r.double_fault == PLAYER_B or r.unforced_error == PLAYER_B
        err_a = err_a + 1 if a_erred else 0
        err_b = err_b + 1 if b_erred else 0
        net = r.net_approach
        raw[t] = [
            r.distance_run_a,
            score_a,
            err_a,
            1.0 if r.ace == PLAYER_A else 0.0,
            1.0 if r.winner_shot == PLAYER_A else 0.0,
            1.0 if net is not None and net.player == PLAYER_A and net.won else 0.0,
            1.0 if r.break_point_won == PLAYER_A else 0.0,
            r.distance_run_b,
            score_b,
            err_b,
            1.0 if r.ace == PLAYER_B else 0.0,
            1.0 if r.winner_shot == PLAYER_B else 0.0,
            1.0 if net is not None and net.player == PLAYER_B and net.won else 0.0,
            1.0 if r.break_point_won == PLAYER_B else 0.0,
        ]
    return IndicatorMatrix(match_id=match_id, point_index=np.array(idx, dtype=int), raw=raw)


def standardize(matrix: IndicatorMatrix) -> IndicatorMatrix:
    """Z-score each column with the match's own mean and sample sd.

    Constant columns become all zeros. Requires at least two units; the
    fitted stats are kept for reuse against later data.
    """
    if matrix.n_units < 2:
        raise ValueError("cannot standardize a single-unit match")
    mean = matrix.raw.mean(axis=0)
    sd = matrix.raw.std(axis=0, ddof=1)
    stats = ColumnStats(mean=mean, sd=sd)
    return standardize_with_stats(matrix, stats)


def standardize_with_stats(matrix: IndicatorMatrix, stats: ColumnStats) -> IndicatorMatrix:
    """Z-score against externally supplied (frozen) column stats."""
    sd_safe = np.where(stats.sd > 0, stats.sd, 1.0)
    z = (matrix.raw - stats.mean) / sd_safe
    z[:, stats.sd == 0] = 0.0
    return IndicatorMatrix(
        match_id=matrix.match_id,
        point_index=matrix.point_index.copy(),
        raw=matrix.raw.copy(),
        standardized=z,
        column_stats=stats,
    )


def min_max_normalize(matrix: IndicatorMatrix) -> np.ndarray:
    """Rescale each raw column into [1e-6, 1] (constant columns map to the floor).

    The floor keeps every column share strictly positive, which the
    entropy weighting downstream requires.
    """
    if matrix.n_units < 2:
        raise ValueError("cannot normalize a single-unit match")
    lo = matrix.raw.min(axis=0)
    hi = matrix.raw.max(axis=0)
    span = hi - lo
    span_safe = np.where(span > 0, span, 1.0)
    out = (matrix.raw - lo) / span_safe
    out[:, span == 0] = 0.0
    return np.maximum(out, MINMAX_FLOOR)
