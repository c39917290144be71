"""Manifest-driven experiment execution and phantom dataset generation."""

import json
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..errors import ContractError, MetricUndefinedError
from ..metrics import CaseMetrics, aggregate, dice, hd95, masked_metrics, nsd, salient_slices
from ..nifti import load_volume, save_mask, save_volume
from ..phantom import PhantomSpec, make_phantom
from ..prompts import reference_2d_segmenter, run_click_session, select_center_slice
from ..propagation import propagate, reference_propagator, remote_propagator
from ..remote2d import Remote2DSegmenter
from ..volume import MaskVolume, default_window, slice_of, to_frames
from .manifest import CaseManifestEntry, ExperimentConfig
from .report import CaseResult, Report, load_baselines


def _make_propagator(config: ExperimentConfig):
    if config.propagator == "remote":
        return remote_propagator(config.propagator_endpoint)
    return reference_propagator()


def _make_segmenter(config: ExperimentConfig):
    if config.segmenter_2d == "remote":
        return Remote2DSegmenter(config.segmenter_endpoint)
    return reference_2d_segmenter()


def _binarize(vol) -> MaskVolume:
    return MaskVolume(dims=vol.dims, labels=(vol.data != 0).astype(np.uint8))


def run_case(entry: CaseManifestEntry, config: ExperimentConfig) -> CaseResult:
    started = time.perf_counter()
    result = CaseResult(case_id=entry.case_id, status="failed", axis=entry.axis)
    try:
        vol = load_volume(entry.image_path, modality_tag=entry.modality_tag)
        gt = _binarize(load_volume(entry.label_path))
        if gt.dims != vol.dims:
            raise ValueError(f"label dims {gt.dims} do not match image dims {vol.dims}")
        window = entry.window or default_window(entry.modality_tag)
        frames = to_frames(vol, entry.axis, window)
        center = select_center_slice(gt, entry.axis)
        result.center_slice = center
        gt_center = slice_of(gt, entry.axis, center)

        if config.mode == "clicks":
            session = run_click_session(
                frames.frames[center], gt_center, _make_segmenter(config), config.clicks_k
            )
            result.rounds = [
                {
                    "round": r.round,
                    "points_added": 1,
                    "click": [r.click.row, r.click.col, r.click.label],
                    "dice_after": r.dice_after,
                }
                for r in session.rounds
            ]
            if session.error is not None:
                raise RuntimeError(f"interactive session failed: {session.error}")
            prompt_mask = session.final_mask
        else:
            prompt_mask = gt_center

        prop_result = propagate(frames, prompt_mask, center, _make_propagator(config))
        pred = prop_result.mask
        result.provenance_gaps = sum(1 for p in prop_result.provenance if p is None)

        spacing = vol.spacing
        try:
            hd = hd95(pred, gt, spacing)
        except MetricUndefinedError:
            hd = None
        salient_dice = salient_nsd = None
        salient_fallback = False
        case_dice = dice(pred, gt)
        case_nsd = nsd(pred, gt, spacing, config.nsd_delta)
        if config.salient_filter:
            indices = salient_slices(gt, entry.axis, config.salient_threshold)
            if indices:
                filtered = masked_metrics(
                    pred, gt, entry.axis, indices, spacing, config.nsd_delta
                )
                salient_dice, salient_nsd = filtered["dice"], filtered["nsd"]
            else:
                # no slice clears the threshold: report unfiltered values, flagged
                salient_dice, salient_nsd = case_dice, case_nsd
                salient_fallback = True
        result.metrics = CaseMetrics(
            case_id=entry.case_id,
            dice=case_dice,
            nsd=case_nsd,
            hd95=hd,
            salient_dice=salient_dice,
            salient_nsd=salient_nsd,
            salient_fallback=salient_fallback,
        )
        if prop_result.errors:
            result.status = "partial"
            result.error = "; ".join(
                f"{e.direction}@{e.frame_index}: {e.message}" for e in prop_result.errors
            )
        else:
            result.status = "ok"
    except Exception as exc:
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        result.metrics = None
        if os.environ.get("STACKSEG_DEBUG"):
            traceback.print_exc()
    result.seconds = time.perf_counter() - started
    return result


def run_experiment(
    manifest: list[CaseManifestEntry],
    config: ExperimentConfig,
    workers: int | None = None,
    baselines: dict | None = None,
) -> Report:
    """Evaluate every manifest case independently (and concurrently), then
    aggregate. Per-case failures are isolated; the report always contains one
    entry per case."""
    if not manifest:
        raise ContractError("manifest is empty")
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(manifest) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(lambda e: run_case(e, config), manifest))
    else:
        cases = [run_case(e, config) for e in manifest]
    scored = [c.metrics for c in cases if c.metrics is not None]
    return Report(
        config=config,
        cases=cases,
        aggregate=aggregate(scored) if scored else None,
        baselines=baselines if baselines is not None else load_baselines(),
    )


def generate_phantom_cases(out_dir: str | Path, count: int, seed: int) -> Path:
    """Write ``count`` ellipsoid phantom image/label pairs plus a manifest.
    Fully determined by the seed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    entries = []
    for i in range(count):
        n = int(rng.integers(40, 65))
        dims = (n, n, n)
        semi = tuple(float(rng.uniform(n / 8, n / 4)) for _ in range(3))
        center = tuple(
            float(rng.uniform(semi[k] + 1, n - 2 - semi[k])) for k in range(3)
        )
        spec = PhantomSpec(
            dims=dims,
            center=center,
            semi_axes=semi,
            fg_intensity=float(rng.uniform(100, 160)),
            bg_intensity=float(rng.uniform(10, 40)),
            noise_sigma=float(rng.uniform(0, 6)),
            rng_seed=int(rng.integers(0, 2**31 - 1)),
        )
        vol, mask = make_phantom(spec)
        image_path = out_dir / f"phantom_{i:03d}.nii.gz"
        label_path = out_dir / f"phantom_{i:03d}_label.nii.gz"
        save_volume(vol, image_path)
        save_mask(mask, vol, label_path)
        entries.append(
            {
                "case_id": f"phantom_{i:03d}",
                "image_path": image_path.name,
                "label_path": label_path.name,
                "axis": 2,
                "window": {"mode": "percentile", "lo": 0.5, "hi": 99.5},
                "modality_tag": "PHANTOM",
            }
        )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(entries, indent=2) + "\n")
    return manifest_path
