"""Model bundles: a trained classifier plus the frozen context live scoring needs.

A live session cannot standardize against its own match (those stats are
unknowable mid-match), so every served model travels with reference
column statistics and an entropy weight vector frozen from the corpus it
was trained on. The default bundle is built by running the packaged toy
config through the batch pipeline, which keeps the live path and the
batch path pinned to identical numbers.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from ..forest import model_from_doc
from ..ingest import ColumnStats
from ..weights import WeightVector, reference_weight_vector


@dataclass
class ModelBundle:
    model_id: str
    description: str
    model_doc: dict
    model: object
    column_stats: ColumnStats
    entropy: WeightVector

    @property
    def kind(self) -> str:
        return self.model_doc["kind"]

    @property
    def n_features(self) -> int:
        return int(self.model_doc["n_features"])


def bundle_from_doc(doc: dict) -> ModelBundle:
    entropy = doc.get("entropy")
    return ModelBundle(
        model_id=doc["model_id"],
        description=doc.get("description", ""),
        model_doc=doc["model"],
        model=model_from_doc(doc["model"]),
        column_stats=ColumnStats.from_dict(doc["column_stats"]),
        entropy=WeightVector.normalized(entropy)
        if entropy is not None
        else reference_weight_vector("entropy"),
    )


def toy_config_path() -> Path:
    return Path(__file__).parent.parent / "data" / "toy_config.json"


@lru_cache(maxsize=1)
def toy_bundle() -> ModelBundle:
    """The bundled demo model, derived from the packaged toy match.

    Built by the same batch pipeline users run from the CLI, so a live
    replay of the fixture reproduces the batch artifacts exactly. Cached
    per process; the pipeline output goes to a throwaway directory.
    """
    from ..pipeline import load_config, run_pipeline

    config = load_config(toy_config_path())
    out_dir = Path(tempfile.mkdtemp(prefix="turnpoint-toy-bundle-"))
    result = run_pipeline(config, out_dir, upto="train")
    quantify = result.artifact("quantify")["per_match"]
    match_id = next(iter(quantify))
    model_doc = result.artifact("train")["model"]
    return ModelBundle(
        model_id="toy-forest",
        description=f"demo forest fit on the bundled fixture match {match_id}",
        model_doc=model_doc,
        model=model_from_doc(model_doc),
        column_stats=ColumnStats.from_dict(quantify[match_id]["column_stats"]),
        entropy=reference_weight_vector("entropy"),
    )


class ModelRegistry:
    """Read-only lookup of the models the service can score with."""

    def __init__(self, bundles: list[ModelBundle]):
        self._bundles: dict[str, ModelBundle] = {}
        for bundle in bundles:
            if bundle.model_id in self._bundles:
                raise ValueError(f"duplicate model id {bundle.model_id!r}")
            self._bundles[bundle.model_id] = bundle

    @classmethod
    def with_defaults(cls, model_dir: str | Path | None = None) -> "ModelRegistry":
        bundles = [toy_bundle()]
        if model_dir is not None:
            for path in sorted(Path(model_dir).glob("*.json")):
                bundles.append(bundle_from_doc(json.loads(path.read_text(encoding="utf-8"))))
        return cls(bundles)

    def get(self, model_id: str) -> ModelBundle | None:
        return self._bundles.get(model_id)

    def list(self) -> list[ModelBundle]:
        return list(self._bundles.values())
