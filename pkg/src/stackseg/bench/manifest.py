"""Experiment inputs: the case manifest and the run configuration."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ContractError
from ..volume import VALID_AXES, WindowSpec


@dataclass(frozen=True)
class CaseManifestEntry:
    case_id: str
    image_path: str
    label_path: str
    axis: int = 2
    window: WindowSpec | None = None
    modality_tag: str = ""

    def __post_init__(self):
        if self.axis not in VALID_AXES:
            raise ContractError(f"case {self.case_id}: axis must be one of {VALID_AXES}")


@dataclass(frozen=True)
class ExperimentConfig:
    """How to run: prompting mode, backends, filtering and tolerances.

    mode: "gt_mask" or "clicks"; clicks_k applies only in clicks mode.
    propagator/segmenter_2d: "reference" or a remote endpoint URL.
    """

    mode: str = "gt_mask"
    clicks_k: int = 5
    propagator: str = "reference"
    propagator_endpoint: str | None = None
    segmenter_2d: str = "reference"
    segmenter_endpoint: str | None = None
    salient_filter: bool = False
    salient_threshold: int = 256
    nsd_delta: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("gt_mask", "clicks"):
            raise ContractError(f"mode must be gt_mask or clicks, got {self.mode!r}")
        if self.mode == "clicks" and self.clicks_k < 1:
            raise ContractError(f"clicks mode needs k >= 1, got {self.clicks_k}")
        if self.propagator not in ("reference", "remote"):
            raise ContractError(f"propagator must be reference or remote, got {self.propagator!r}")
        if self.propagator == "remote" and not self.propagator_endpoint:
            raise ContractError("remote propagator requires an endpoint")
        if self.segmenter_2d not in ("reference", "remote"):
            raise ContractError(f"segmenter_2d must be reference or remote, got {self.segmenter_2d!r}")
        if self.segmenter_2d == "remote" and not self.segmenter_endpoint:
            raise ContractError("remote segmenter requires an endpoint")
        if self.salient_threshold < 0:
            raise ContractError("salient_threshold must be >= 0")
        if self.nsd_delta < 0:
            raise ContractError("nsd_delta must be >= 0")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "clicks_k": self.clicks_k if self.mode == "clicks" else None,
            "propagator": self.propagator,
            "propagator_endpoint": self.propagator_endpoint,
            "segmenter_2d": self.segmenter_2d,
            "segmenter_endpoint": self.segmenter_endpoint,
            "salient_filter": self.salient_filter,
            "salient_threshold": self.salient_threshold,
            "nsd_delta": self.nsd_delta,
            "rng_seed": self.rng_seed,
        }


def _window_from(obj: dict | None) -> WindowSpec | None:
    if obj is None:
        return None
    return WindowSpec(mode=obj.get("mode", "percentile"), lo=obj["lo"], hi=obj["hi"])


def load_manifest(path: str | Path) -> list[CaseManifestEntry]:
    """Read a JSON array of cases; relative data paths resolve against the
    manifest's directory."""
    path = Path(path)
    entries = json.loads(path.read_text())
    if not isinstance(entries, list) or not entries:
        raise ContractError(f"manifest {path} must be a non-empty JSON array")
    base = path.parent
    cases = []
    for obj in entries:
        cases.append(
            CaseManifestEntry(
                case_id=str(obj["case_id"]),
                image_path=str((base / obj["image_path"]).resolve()),
                label_path=str((base / obj["label_path"]).resolve()),
                axis=int(obj.get("axis", 2)),
                window=_window_from(obj.get("window")),
                modality_tag=str(obj.get("modality_tag", "")),
            )
        )
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise ContractError("manifest case_ids must be unique")
    return cases


def load_config(path: str | Path) -> ExperimentConfig:
    obj = json.loads(Path(path).read_text())
    mode = obj.get("mode", "gt_mask")
    clicks_k = 5
    if isinstance(mode, dict):  # {"clicks": 5} shorthand
        clicks_k = int(mode.get("clicks", 5))
        mode = "clicks"
    prop = obj.get("propagator", "reference")
    prop_endpoint = None
    if isinstance(prop, dict):
        prop_endpoint = prop.get("remote")
        prop = "remote"
    seg = obj.get("segmenter_2d", "reference")
    seg_endpoint = None
    if isinstance(seg, dict):
        seg_endpoint = seg.get("remote")
        seg = "remote"
    return ExperimentConfig(
        mode=mode,
        clicks_k=int(obj.get("clicks_k", clicks_k)),
        propagator=prop,
        propagator_endpoint=prop_endpoint,
        segmenter_2d=seg,
        segmenter_endpoint=seg_endpoint,
        salient_filter=bool(obj.get("salient_filter", False)),
        salient_threshold=int(obj.get("salient_threshold", 256)),
        nsd_delta=float(obj.get("nsd_delta", 1.0)),
        rng_seed=int(obj.get("rng_seed", 0)),
    )
