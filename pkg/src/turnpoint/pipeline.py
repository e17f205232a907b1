"""Staged batch runs: ingest through export, with content-addressed caching.

A :class:`PipelineConfig` fully determines every artifact. Each stage's
cache key hashes the slice of the config it depends on plus the digests
of its upstream artifacts, so editing the grid ranges never forces
re-ingestion while touching an input file invalidates everything
downstream. Artifacts are canonical JSON (sorted keys, two-space
indent), each embedding the config digest; reruns with an unchanged
config are byte-identical. Wall-clock timestamps go only to the
``run_log.txt`` sidecar.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from hashlib import sha256
from pathlib import Path
from typing import Mapping

import numpy as np

from .evaluation import chronological_split, cross_validate, evaluate_predictions
from .forest import (
    GridSpec,
    ModelSpec,
    document_digest,
    grid_search,
    model_from_doc,
    model_to_doc,
    oob_importance,
)
from .ingest import (
    FormatDescriptor,
    IntegrityError,
    SchemaError,
    bundled_match_path,
    extract_indicators,
    min_max_normalize,
    parse_match_file,
    record_from_dict,
    record_to_dict,
    standardize,
)
from .potential import (
    LabeledDataset,
    PotentialSeries,
    build_dataset,
    mark_turning_points,
    midpoint_boundary,
    quantify_both,
)
from .sampling import ResamplePlan, rebalance
from .weights import (
    JudgmentMatrix,
    STAGE_WEIGHT_PRESETS,
    StageWeightSet,
    build_stage_weights,
    preset_stage_weights,
)

STAGES = (
    "ingest",
    "weigh",
    "quantify",
    "label",
    "rebalance",
    "train",
    "evaluate",
    "importance",
    "export",
)

_FILE_FORMATS = ("canonical", "mcm-2024-c")

# Fixed keys for deriving stage seeds from the run seed; distinct values
# keep the final fit, the CV evaluation and the importance pass on
# independent streams.
_FIT_KEY = 3
_CV_KEY = 4
_IMPORTANCE_KEY = 5


class ConfigError(Exception):
    """The run configuration is malformed or self-contradictory."""


class DataError(Exception):
    """The input data cannot support the requested computation."""


class SkippedError(Exception):
    """A conditional step was skipped because its inputs are absent."""


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(tuple(int(k) for k in key)).generate_state(1)[0])


def _file_digest(path: Path) -> str:
    return sha256(path.read_bytes()).hexdigest()


def _canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


_CONFIG_KEYS = {
    "inputs",
    "file_format",
    "weight_preset",
    "judgment_early",
    "judgment_late",
    "stage_boundary",
    "plan",
    "model",
    "grid",
    "train_fraction",
    "cv_folds",
    "seed",
    "paper_protocol",
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a batch run depends on, in serializable form.

    ``model``, ``plan`` and ``grid`` are kept as canonical dicts (the
    round-trip through their dataclasses normalizes key order and fills
    defaults) so the config digest is stable. ``base_dir`` only anchors
    relative input paths and never enters the digest.
    """

    inputs: tuple[str, ...]
    file_format: str = "canonical"
    weight_preset: str | None = "wimbledon-2023-1301"
    judgment_early: tuple[tuple[float, ...], ...] | None = None
    judgment_late: tuple[tuple[float, ...], ...] | None = None
    stage_boundary: int | None = None
    plan: dict | None = None
    model: dict = field(default_factory=lambda: ModelSpec().to_dict())
    grid: dict | None = None
    train_fraction: float = 0.8
    cv_folds: int = 5
    seed: int = 0
    paper_protocol: bool = False
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.inputs:
            raise ConfigError("config needs at least one input file")

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: str | Path | None = None) -> "PipelineConfig":
        unknown = sorted(set(doc) - _CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            inputs = tuple(str(p) for p in doc.get("inputs", ()))
            file_format = doc.get("file_format", "canonical")
            if isinstance(file_format, Mapping):
                file_format = FormatDescriptor.from_dict(file_format).to_dict()
            elif file_format not in _FILE_FORMATS:
                raise ValueError(
                    f"file_format must be one of {_FILE_FORMATS} or a column mapping"
                )
            judgment_early = doc.get("judgment_early")
            judgment_late = doc.get("judgment_late")
            if (judgment_early is None) != (judgment_late is None):
                raise ValueError("judgment_early and judgment_late must come together")
            preset = doc.get("weight_preset", None if judgment_early is not None else "wimbledon-2023-1301")
            if judgment_early is not None:
                if preset is not None:
                    raise ValueError("give either a weight preset or judgment matrices, not both")
                judgment_early = tuple(
                    tuple(float(x) for x in row)
                    for row in JudgmentMatrix.from_dict({"values": judgment_early}).values
                )
                judgment_late = tuple(
                    tuple(float(x) for x in row)
                    for row in JudgmentMatrix.from_dict({"values": judgment_late}).values
                )
            elif preset not in STAGE_WEIGHT_PRESETS:
                raise ValueError(f"unknown weight preset {preset!r}")
            boundary = doc.get("stage_boundary")
            if boundary is not None:
                boundary = int(boundary)
                if boundary < 1:
                    raise ValueError("stage_boundary must be a positive unit number")
            plan = doc.get("plan")
            if plan is not None:
                plan = ResamplePlan.from_dict(plan).to_dict()
            model = ModelSpec.from_dict(doc.get("model", {})).to_dict()
            grid = doc.get("grid")
            if grid is not None:
                grid = GridSpec.from_dict(grid).to_dict()
                if model["kind"] != "forest":
                    raise ValueError("grid search tunes forests; drop it for other models")
            train_fraction = float(doc.get("train_fraction", 0.8))
            if not 0.0 < train_fraction < 1.0:
                raise ValueError("train_fraction must be in (0, 1)")
            cv_folds = int(doc.get("cv_folds", 5))
            if cv_folds < 2:
                raise ValueError("cv_folds must be at least 2")
            return cls(
                inputs=inputs,
                file_format=file_format,
                weight_preset=preset,
                judgment_early=judgment_early,
                judgment_late=judgment_late,
                stage_boundary=boundary,
                plan=plan,
                model=model,
                grid=grid,
                train_fraction=train_fraction,
                cv_folds=cv_folds,
                seed=int(doc.get("seed", 0)),
                paper_protocol=bool(doc.get("paper_protocol", False)),
                base_dir=None if base_dir is None else str(base_dir),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "file_format": self.file_format,
            "weight_preset": self.weight_preset,
            "judgment_early": None
            if self.judgment_early is None
            else [list(row) for row in self.judgment_early],
            "judgment_late": None
            if self.judgment_late is None
            else [list(row) for row in self.judgment_late],
            "stage_boundary": self.stage_boundary,
            "plan": self.plan,
            "model": self.model,
            "grid": self.grid,
            "train_fraction": self.train_fraction,
            "cv_folds": self.cv_folds,
            "seed": self.seed,
            "paper_protocol": self.paper_protocol,
        }

    def digest(self) -> str:
        return document_digest(self.to_dict())

    def descriptor(self) -> FormatDescriptor:
        if isinstance(self.file_format, Mapping):
            return FormatDescriptor.from_dict(self.file_format)
        if self.file_format == "mcm-2024-c":
            return FormatDescriptor.mcm_2024_c()
        return FormatDescriptor.canonical()

    def resolved_inputs(self) -> list[Path]:
        base = Path(self.base_dir) if self.base_dir else Path(".")
        out = []
        for raw in self.inputs:
            if raw.startswith("bundled:"):
                out.append(bundled_match_path(raw.split(":", 1)[1]))
                continue
            p = Path(raw)
            out.append(p if p.is_absolute() else base / p)
        return out

    def resample_plan(self) -> ResamplePlan | None:
        return None if self.plan is None else ResamplePlan.from_dict(self.plan)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return PipelineConfig.from_dict(doc, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Stage computations
# ---------------------------------------------------------------------------


def _stage_weights_from_doc(doc: Mapping) -> StageWeightSet:
    return StageWeightSet.from_dict(doc)


def _per_match_matrices(ingest_doc: Mapping):
    """Standardized indicator matrices per match, in artifact order."""
    for mid, rows in ingest_doc["matches"].items():
        records = [record_from_dict(r) for r in rows]
        yield mid, standardize(extract_indicators(records))


def _compute_ingest(config: PipelineConfig) -> dict:
    descriptor = config.descriptor()
    matches: dict[str, list[dict]] = {}
    issues: list[dict] = []
    total = 0
    for path in config.resolved_inputs():
        if not path.exists():
            raise DataError(f"input file not found: {path}")
        result = parse_match_file(path, descriptor)
        for mid, records in result.matches.items():
            if mid in matches:
                raise DataError(f"match {mid!r} appears in more than one input file")
            matches[mid] = [record_to_dict(r) for r in records]
            total += len(records)
        issues.extend(
            {"file": path.name, "line_no": i.line_no, "message": i.message}
            for i in result.row_issues
        )
    if not matches:
        raise DataError("no usable point records in the input files")
    return {"matches": matches, "row_issues": issues, "n_records": total}


def _compute_weigh(config: PipelineConfig, ingest_doc: Mapping) -> dict:
    per_match: dict[str, dict] = {}
    diagnostics: dict[str, dict] = {}
    for mid, matrix in _per_match_matrices(ingest_doc):
        boundary = config.stage_boundary or midpoint_boundary(matrix.n_units)
        if config.weight_preset is not None:
            per_match[mid] = preset_stage_weights(config.weight_preset, boundary).to_dict()
        else:
            stage_set, diag = build_stage_weights(
                JudgmentMatrix.from_dict({"values": config.judgment_early}),
                JudgmentMatrix.from_dict({"values": config.judgment_late}),
                min_max_normalize(matrix),
                boundary,
            )
            per_match[mid] = stage_set.to_dict()
            diagnostics[mid] = diag
    return {
        "source": f"preset:{config.weight_preset}" if config.weight_preset else "judgment",
        "per_match": per_match,
        "diagnostics": diagnostics or None,
    }


def _compute_quantify(config: PipelineConfig, ingest_doc: Mapping, weigh_doc: Mapping) -> dict:
    per_match: dict[str, dict] = {}
    for mid, matrix in _per_match_matrices(ingest_doc):
        weights = _stage_weights_from_doc(weigh_doc["per_match"][mid])
        series_a, series_b = quantify_both(matrix, weights)
        per_match[mid] = {
            "point_index": [int(v) for v in matrix.point_index],
            "p_a": series_a.to_list(),
            "p_b": series_b.to_list(),
            "column_stats": matrix.column_stats.to_dict(),
        }
    return {"per_match": per_match}


def _compute_label(
    config: PipelineConfig, ingest_doc: Mapping, weigh_doc: Mapping, quantify_doc: Mapping
) -> dict:
    per_match: dict[str, dict] = {}
    parts: list[LabeledDataset] = []
    for mid, matrix in _per_match_matrices(ingest_doc):
        stored = quantify_doc["per_match"][mid]
        weights = _stage_weights_from_doc(weigh_doc["per_match"][mid])
        index = np.asarray(stored["point_index"], dtype=int)

        def series(player: str, values: list[float]) -> PotentialSeries:
            return PotentialSeries(
                match_id=mid,
                player=player,
                point_index=index,
                values=np.asarray(values, dtype=float),
                p0=0.0,
                weights_used=weights,
            )

        turns = mark_turning_points(series("A", stored["p_a"]), series("B", stored["p_b"]))
        per_match[mid] = {
            "labels": [int(v) for v in turns.labels],
            "diff": [float(v) for v in turns.diff],
            "count_turns": turns.count_turns,
        }
        parts.append(build_dataset(matrix, turns))
    dataset = LabeledDataset.concat(parts)
    return {
        "per_match": per_match,
        "dataset": dataset.to_doc(),
        "n_positive": dataset.n_positive,
        "n_negative": dataset.n_negative,
        "imbalance_pct": dataset.imbalance_pct() if dataset.n_negative else None,
    }


def _compute_rebalance(config: PipelineConfig, label_doc: Mapping) -> dict:
    dataset = LabeledDataset.from_doc(label_doc["dataset"])
    train, test = chronological_split(dataset, config.train_fraction)
    plan = config.resample_plan()
    if plan is None:
        balanced, report = train, None
    else:
        if not train.trainable:
            raise DataError("training split has a single class; nothing to rebalance")
        balanced, report = rebalance(train, plan)
    return {
        "train": train.to_doc(),
        "test": test.to_doc(),
        "rebalanced_train": balanced.to_doc(),
        "report": None if report is None else report.to_dict(),
    }


def _compute_train(config: PipelineConfig, rebalance_doc: Mapping, threads: int | None) -> dict:
    train_raw = LabeledDataset.from_doc(rebalance_doc["train"])
    balanced = LabeledDataset.from_doc(rebalance_doc["rebalanced_train"])
    spec = ModelSpec.from_dict(config.model)
    grid_doc = None
    if config.grid is not None:
        if not train_raw.trainable:
            raise DataError("training split has a single class; cannot run the grid search")
        result = grid_search(
            train_raw,
            GridSpec.from_dict(config.grid),
            seed=config.seed,
            plan=config.resample_plan(),
            paper_protocol=config.paper_protocol,
            threads=threads,
        )
        spec = replace(spec, n_trees=result.n_trees, max_splits=result.max_splits)
        grid_doc = result.to_dict()
    if not balanced.trainable:
        raise DataError("training data has a single class; cannot fit a classifier")
    fit_seed = _derived_seed(config.seed, _FIT_KEY)
    model = spec.fit(balanced.features, balanced.labels, seed=fit_seed)
    doc = model_to_doc(model)
    return {
        "model": doc,
        "model_digest": document_digest(doc),
        "spec": spec.to_dict(),
        "grid": grid_doc,
        "fit_seed": fit_seed,
    }


def _compute_evaluate(
    config: PipelineConfig, rebalance_doc: Mapping, train_doc: Mapping, threads: int | None
) -> dict:
    train_raw = LabeledDataset.from_doc(rebalance_doc["train"])
    balanced = LabeledDataset.from_doc(rebalance_doc["rebalanced_train"])
    test = LabeledDataset.from_doc(rebalance_doc["test"])
    spec = ModelSpec.from_dict(train_doc["spec"])
    cv_report = cross_validate(
        train_raw,
        spec.fitter(),
        k=config.cv_folds,
        seed=_derived_seed(config.seed, _CV_KEY),
        plan=config.resample_plan(),
        paper_protocol=config.paper_protocol,
        threads=threads,
    )
    model = model_from_doc(train_doc["model"])
    test_doc = None
    test_note = None
    if test.trainable:
        test_doc = evaluate_predictions(test.labels, model.scores(test.features)).to_dict()
    else:
        test_note = "test split has a single class; threshold metrics and AUC undefined"
    train_refit_doc = evaluate_predictions(
        balanced.labels, model.scores(balanced.features)
    ).to_dict()
    return {
        "cv": cv_report.to_dict(),
        "cv_protocol": "resample-whole-then-fold" if config.paper_protocol else "resample-inside-fold",
        "test": test_doc,
        "test_note": test_note,
        "train_refit": train_refit_doc,
    }


def _compute_importance(
    config: PipelineConfig, rebalance_doc: Mapping, train_doc: Mapping, threads: int | None
) -> dict:
    spec = ModelSpec.from_dict(train_doc["spec"])
    if spec.kind != "forest":
        return {
            "skipped": "permutation importance needs out-of-bag rows; only forests keep them",
            "importance": None,
            "ranking": None,
        }
    balanced = LabeledDataset.from_doc(rebalance_doc["rebalanced_train"])
    model = spec.fit(balanced.features, balanced.labels, seed=int(train_doc["fit_seed"]))
    if document_digest(model_to_doc(model)) != train_doc["model_digest"]:
        raise RuntimeError("refit for importance diverged from the stored model")
    values = oob_importance(
        model,
        balanced.features,
        balanced.labels,
        seed=_derived_seed(config.seed, _IMPORTANCE_KEY),
        threads=threads,
    )
    names = balanced.feature_names
    order = sorted(range(len(names)), key=lambda j: (-values[j], names[j]))
    return {
        "importance": {names[j]: float(values[j]) for j in range(len(names))},
        "ranking": [names[j] for j in order],
    }


def _safe_name(match_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", match_id)


def _compute_export(config: PipelineConfig, artifacts: Mapping, out_dir: Path) -> dict:
    plots = out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    files: dict[str, str] = {}
    notes: list[str] = []

    def write_csv(name: str, header: list[str], rows: list[list]) -> None:
        lines = [f"# config_digest: {digest}", ",".join(header)]
        for row in rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        path = plots / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        files[name] = _file_digest(path)

    quantify_doc = artifacts["quantify"]
    label_doc = artifacts["label"]
    for mid, stored in quantify_doc["per_match"].items():
        labels = label_doc["per_match"][mid]["labels"]
        rows = [
            [int(u), float(a), float(b), int(t)]
            for u, a, b, t in zip(stored["point_index"], stored["p_a"], stored["p_b"], labels)
        ]
        write_csv(f"potential_{_safe_name(mid)}.csv", ["unit", "p_a", "p_b", "turn"], rows)

    evaluate_doc = artifacts["evaluate"]
    roc_source = evaluate_doc["test"] or evaluate_doc["cv"]
    roc_kind = "test" if evaluate_doc["test"] else "cv"
    write_csv(
        "roc.csv",
        ["fpr", "tpr"],
        [[float(x), float(y)] for x, y in roc_source["roc"]],
    )
    notes.append(f"roc.csv holds the {roc_kind} curve")

    importance_doc = artifacts["importance"]
    if importance_doc["importance"] is None:
        notes.append(f"importance.csv skipped: {importance_doc['skipped']}")
    else:
        write_csv(
            "importance.csv",
            ["feature", "importance"],
            [[name, float(importance_doc["importance"][name])] for name in importance_doc["ranking"]],
        )

    winner_rows = []
    for mid, rows in artifacts["ingest"]["matches"].items():
        games: dict[tuple[int, int], dict] = {}
        counts: dict[tuple[int, int], int] = {}
        for row in rows:
            key = (int(row["set_no"]), int(row["game_no"]))
            games[key] = row
            counts[key] = counts.get(key, 0) + 1
        for (set_no, game_no), last in sorted(games.items()):
            winner_rows.append(
                [mid, set_no, game_no, last["point_winner"], counts[(set_no, game_no)]]
            )
    write_csv(
        "game_winners.csv",
        ["match_id", "set_no", "game_no", "winner", "points"],
        winner_rows,
    )
    return {"files": files, "notes": notes}


# ---------------------------------------------------------------------------
# Run driver
# ---------------------------------------------------------------------------


@dataclass
class StageRecord:
    key: str
    file: str
    digest: str
    cached: bool

    def to_dict(self) -> dict:
        return {"key": self.key, "file": self.file, "digest": self.digest}


@dataclass
class PipelineResult:
    config: PipelineConfig
    out_dir: Path
    stages: dict[str, StageRecord]
    artifacts: dict[str, dict]

    def artifact(self, stage: str) -> dict:
        return self.artifacts[stage]

    def path(self, stage: str) -> Path:
        return self.out_dir / self.stages[stage].file


def _stage_key(name: str, parts: dict) -> str:
    return document_digest({"stage": name, **parts})


def _load_manifest(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return doc.get("stages", {}) if isinstance(doc, dict) else {}
    except (OSError, json.JSONDecodeError):
        return {}


def run_pipeline(
    config: PipelineConfig,
    out_dir: str | Path,
    upto: str = "export",
    threads: int | None = None,
    force: bool = False,
) -> PipelineResult:
    """Run stages through ``upto``, reusing cached artifacts where valid.

    A stage is reused when its cache key (config slice plus upstream
    digests) matches the manifest and the artifact file on disk still
    hashes to the recorded digest. ``threads`` only sets worker counts;
    results are identical for any value.
    """
    if upto not in STAGES:
        raise ConfigError(f"unknown stage {upto!r}; expected one of {', '.join(STAGES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_digest = config.digest()
    (out_dir / "config.json").write_text(
        _canonical_json({"config": config.to_dict(), "digest": config_digest}),
        encoding="utf-8",
    )
    manifest_path = out_dir / "manifest.json"
    previous = {} if force else _load_manifest(manifest_path)
    stages: dict[str, StageRecord] = {}
    artifacts: dict[str, dict] = {}
    log_lines: list[str] = []

    def run_stage(name: str, key: str, compute, verify=None) -> None:
        file_name = f"{name}.json"
        path = out_dir / file_name
        prior = previous.get(name)
        if (
            prior is not None
            and prior.get("key") == key
            and path.exists()
            and _file_digest(path) == prior.get("digest")
            and (verify is None or verify(json.loads(path.read_text(encoding="utf-8"))))
        ):
            artifacts[name] = json.loads(path.read_text(encoding="utf-8"))
            stages[name] = StageRecord(key, file_name, prior["digest"], cached=True)
        else:
            try:
                doc = compute()
            except (SchemaError, IntegrityError) as exc:
                raise DataError(str(exc)) from exc
            except ValueError as exc:
                raise DataError(str(exc)) from exc
            doc = {"config_digest": config_digest, **doc}
            path.write_text(_canonical_json(doc), encoding="utf-8")
            artifacts[name] = doc
            stages[name] = StageRecord(key, file_name, _file_digest(path), cached=False)
        status = "cached" if stages[name].cached else "computed"
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        log_lines.append(f"{stamp} config={config_digest[:12]} stage={name} {status}")

    want = set(STAGES[: STAGES.index(upto) + 1])

    input_digests = []
    for path in config.resolved_inputs():
        if not path.exists():
            raise DataError(f"input file not found: {path}")
        input_digests.append(_file_digest(path))

    run_stage(
        "ingest",
        _stage_key("ingest", {"inputs": input_digests, "file_format": config.file_format}),
        lambda: _compute_ingest(config),
    )
    if "weigh" in want:
        run_stage(
            "weigh",
            _stage_key(
                "weigh",
                {
                    "upstream": stages["ingest"].digest,
                    "weight_preset": config.weight_preset,
                    "judgment_early": config.to_dict()["judgment_early"],
                    "judgment_late": config.to_dict()["judgment_late"],
                    "stage_boundary": config.stage_boundary,
                },
            ),
            lambda: _compute_weigh(config, artifacts["ingest"]),
        )
    if "quantify" in want:
        run_stage(
            "quantify",
            _stage_key(
                "quantify",
                {"upstream": [stages["ingest"].digest, stages["weigh"].digest]},
            ),
            lambda: _compute_quantify(config, artifacts["ingest"], artifacts["weigh"]),
        )
    if "label" in want:
        run_stage(
            "label",
            _stage_key(
                "label",
                {
                    "upstream": [
                        stages["ingest"].digest,
                        stages["weigh"].digest,
                        stages["quantify"].digest,
                    ]
                },
            ),
            lambda: _compute_label(
                config, artifacts["ingest"], artifacts["weigh"], artifacts["quantify"]
            ),
        )
    if "rebalance" in want:
        run_stage(
            "rebalance",
            _stage_key(
                "rebalance",
                {
                    "upstream": stages["label"].digest,
                    "plan": config.plan,
                    "train_fraction": config.train_fraction,
                },
            ),
            lambda: _compute_rebalance(config, artifacts["label"]),
        )
    if "train" in want:
        run_stage(
            "train",
            _stage_key(
                "train",
                {
                    "upstream": stages["rebalance"].digest,
                    "model": config.model,
                    "grid": config.grid,
                    "plan": config.plan,
                    "seed": config.seed,
                    "paper_protocol": config.paper_protocol,
                },
            ),
            lambda: _compute_train(config, artifacts["rebalance"], threads),
        )
    if "evaluate" in want:
        run_stage(
            "evaluate",
            _stage_key(
                "evaluate",
                {
                    "upstream": [stages["rebalance"].digest, stages["train"].digest],
                    "cv_folds": config.cv_folds,
                    "plan": config.plan,
                    "seed": config.seed,
                    "paper_protocol": config.paper_protocol,
                },
            ),
            lambda: _compute_evaluate(config, artifacts["rebalance"], artifacts["train"], threads),
        )
    if "importance" in want:
        run_stage(
            "importance",
            _stage_key(
                "importance",
                {
                    "upstream": [stages["rebalance"].digest, stages["train"].digest],
                    "seed": config.seed,
                },
            ),
            lambda: _compute_importance(
                config, artifacts["rebalance"], artifacts["train"], threads
            ),
        )
    if "export" in want:

        def plots_intact(doc: dict) -> bool:
            plots = out_dir / "plots"
            return all(
                (plots / name).exists() and _file_digest(plots / name) == digest
                for name, digest in doc.get("files", {}).items()
            )

        run_stage(
            "export",
            _stage_key(
                "export",
                {
                    "upstream": [
                        stages["ingest"].digest,
                        stages["quantify"].digest,
                        stages["label"].digest,
                        stages["evaluate"].digest,
                        stages["importance"].digest,
                    ]
                },
            ),
            lambda: _compute_export(config, artifacts, out_dir),
            verify=plots_intact,
        )

    manifest = {
        "config_digest": config_digest,
        "stages": {name: rec.to_dict() for name, rec in stages.items()},
    }
    manifest_path.write_text(_canonical_json(manifest), encoding="utf-8")
    with (out_dir / "run_log.txt").open("a", encoding="utf-8") as log:
        for line in log_lines:
            log.write(line + "\n")
    return PipelineResult(config=config, out_dir=out_dir, stages=stages, artifacts=artifacts)


# ---------------------------------------------------------------------------
# Published-recipe reproduction
# ---------------------------------------------------------------------------


# Headline numbers the original study reported for the 2023 Wimbledon
# point-by-point dataset, used for the side-by-side comparison table.
# Metric values are percentages except the AUC floors.
REFERENCE_RESULTS: dict[str, float] = {
    "imbalance_pct": 10.04,
    "train_minority_after": 5297,
    "train_total_after": 10592,
    "grid_n_trees": 445,
    "grid_max_splits": 915,
    "train_accuracy": 85.23,
    "train_recall": 88.26,
    "train_g_mean": 85.18,
    "test_accuracy": 65.48,
    "test_recall": 86.13,
    "test_g_mean": 73.86,
}

TRAIN_AUC_FLOOR = 0.85
TEST_AUC_FLOOR = 0.70

DATASET_ENV_VAR = "TURNPOINT_MCM_DATA"


CHECKSUM_ENV_VAR = "TURNPOINT_MCM_SHA256"


def resolve_reference_dataset(path: str | None, checksum: str | None = None) -> Path:
    """Locate the user-supplied point-by-point dataset, or raise SkippedError.

    The dataset is never vendored. When a checksum is supplied (argument,
    environment variable, or a ``<file>.sha256`` sidecar) the file must
    hash to it; schema problems surface later as data errors.
    """
    candidate = path or os.environ.get(DATASET_ENV_VAR)
    if not candidate:
        raise SkippedError(
            "reference dataset not supplied; pass its path or set "
            f"{DATASET_ENV_VAR} (the file ships with the public MCM-2024-C"
            " materials and is not bundled here)"
        )
    resolved = Path(candidate)
    if not resolved.exists():
        raise SkippedError(f"reference dataset not found at {resolved}")
    expected = checksum or os.environ.get(CHECKSUM_ENV_VAR)
    sidecar = resolved.with_name(resolved.name + ".sha256")
    if expected is None and sidecar.exists():
        expected = sidecar.read_text(encoding="utf-8").split()[0]
    if expected:
        actual = _file_digest(resolved)
        if actual != expected.strip().lower():
            raise DataError(
                f"dataset checksum mismatch: expected {expected.strip()}, got {actual}"
            )
    return resolved


def reference_config(dataset: Path, seed: int = 0) -> PipelineConfig:
    """The published end-to-end recipe, expressed as a pipeline config."""
    return PipelineConfig.from_dict(
        {
            "inputs": [str(dataset)],
            "file_format": "mcm-2024-c",
            "weight_preset": "wimbledon-2023-1301",
            "plan": {
                "method": "km_smote",
                "k_clusters": 3,
                "k_neighbors": 5,
                "oversampling_percentage": 90,
                "seed": seed,
            },
            "model": {"kind": "forest", "n_trees": 445, "max_splits": 915},
            "grid": {
                "trees_range": [445, 445],
                "splits_range": [915, 915],
                "folds": 5,
                "points": 1,
            },
            "train_fraction": 0.8,
            "cv_folds": 5,
            "seed": seed,
            "paper_protocol": True,
        }
    )


def _delta(ours: float | None, reference: float | None) -> float | None:
    if ours is None or reference is None:
        return None
    return float(ours) - float(reference)


def reproduce_paper(
    dataset_path: str | None,
    out_dir: str | Path,
    seed: int = 0,
    threads: int | None = None,
    checksum: str | None = None,
) -> dict:
    """Rerun the published recipe and tabulate ours-vs-reference deltas.

    Raises :class:`SkippedError` when the dataset is not available; the
    comparison report is also written to ``reproduce_report.json`` in
    the output directory.
    """
    dataset = resolve_reference_dataset(dataset_path, checksum=checksum)
    config = reference_config(dataset, seed=seed)
    result = run_pipeline(config, out_dir, threads=threads)

    label_doc = result.artifact("label")
    rebalance_doc = result.artifact("rebalance")
    train_doc = result.artifact("train")
    evaluate_doc = result.artifact("evaluate")
    report = rebalance_doc["report"] or {}
    cv = evaluate_doc["cv"]
    test = evaluate_doc["test"] or {}

    ours: dict[str, float | None] = {
        "imbalance_pct": label_doc["imbalance_pct"],
        "train_minority_after": (report.get("after") or {}).get("minority"),
        "train_total_after": (report.get("after") or {}).get("total"),
        "grid_n_trees": (train_doc["grid"] or {}).get("n_trees"),
        "grid_max_splits": (train_doc["grid"] or {}).get("max_splits"),
        "train_accuracy": cv["accuracy"],
        "train_recall": cv["recall"],
        "train_g_mean": cv["g_mean"],
        "test_accuracy": test.get("accuracy"),
        "test_recall": test.get("recall"),
        "test_g_mean": test.get("g_mean"),
    }
    rows = [
        {
            "quantity": key,
            "ours": ours[key],
            "reference": REFERENCE_RESULTS[key],
            "delta": _delta(ours[key], REFERENCE_RESULTS[key]),
        }
        for key in REFERENCE_RESULTS
    ]
    doc = {
        "config_digest": config.digest(),
        "rows": rows,
        "auc": {
            "train_cv": cv["auc"],
            "train_cv_floor": TRAIN_AUC_FLOOR,
            "test": test.get("auc"),
            "test_floor": TEST_AUC_FLOOR,
        },
        "protocol": evaluate_doc["cv_protocol"],
    }
    out = Path(out_dir) / "reproduce_report.json"
    out.write_text(_canonical_json(doc), encoding="utf-8")
    return doc
