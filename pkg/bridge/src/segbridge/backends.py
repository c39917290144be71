"""Pluggable segmentation backends.

``centroid-track`` is a dependency-light deterministic tracker used for
protocol conformance and local development. ``sam2`` adapts a real promptable
video model; it imports its runtime lazily and refuses to start when the
runtime or checkpoint is missing.

Resizing policy (applies to model backends): frames whose long edge exceeds
``max_edge`` are downscaled for inference and the predicted masks are scaled
back to the original geometry with nearest-neighbor, so wire-level shapes
always match the input frames. Model logits are thresholded at 0 before
encoding.
"""

from abc import ABC, abstractmethod
from typing import Iterator

import numpy as np
from scipy import ndimage

from .config import BridgeConfig, BridgeStartupError


class VideoBackend(ABC):
    """One stream at a time; begin_stream yields len(frames)-1 masks."""

    name: str = "?"

    @abstractmethod
    def begin_stream(
        self, frames: list[np.ndarray], prompt_mask: np.ndarray
    ) -> Iterator[np.ndarray]:
        ...

    @abstractmethod
    def segment_frame(
        self,
        frame: np.ndarray,
        clicks: list[dict] | None,
        box: list[int] | None,
        mask: np.ndarray | None,
    ) -> np.ndarray:
        ...


class CentroidTrackBackend(VideoBackend):
    """Deterministic intensity tracker: per step, keep the 4-connected
    in-band components (mean +/- 2 std of the tracked region, std floored at
    1) that overlap the previous mask; empty stays empty."""

    name = "centroid-track"

    def begin_stream(self, frames, prompt_mask):
        def run():
            mask = np.asarray(prompt_mask) != 0
            prev = np.asarray(frames[0], dtype=np.float64)
            for raw in frames[1:]:
                frame = np.asarray(raw, dtype=np.float64)
                if not mask.any():
                    yield np.zeros(frame.shape, np.uint8)
                    continue
                values = prev[mask]
                mu, sigma = float(values.mean()), max(float(values.std()), 1.0)
                band = np.abs(frame - mu) <= 2.0 * sigma
                labeled, n = ndimage.label(band)
                keep = np.zeros(frame.shape, bool)
                for lab in range(1, n + 1):
                    comp = labeled == lab
                    if np.count_nonzero(comp & mask) > 0:
                        keep |= comp
                mask = keep
                prev = frame
                yield mask.astype(np.uint8)

        return run()

    def segment_frame(self, frame, clicks, box, mask):
        frame = np.asarray(frame, dtype=np.float64)
        if mask is not None:
            return (np.asarray(mask) != 0).astype(np.uint8)
        out = np.zeros(frame.shape, np.uint8)
        if box is not None:
            r0, c0, r1, c1 = box
            out[max(r0, 0) : r1 + 1, max(c0, 0) : c1 + 1] = 1
            return out
        fg = [(c["row"], c["col"]) for c in clicks or [] if c.get("label") == "foreground"]
        if not fg:
            return out
        seeds = np.array([frame[r, c] for r, c in fg])
        band = np.abs(frame - seeds.mean()) <= max(seeds.std(), 1.0) * 2.0 + 12.5
        labeled, n = ndimage.label(band)
        for r, c in fg:
            lab = labeled[r, c]
            if lab:
                out |= (labeled == lab).astype(np.uint8)
            else:
                out[r, c] = 1
        for c in clicks or []:
            if c.get("label") == "background":
                out[c["row"], c["col"]] = 0
        return out


class Sam2Backend(VideoBackend):
    """Adapter for the SAM 2 video predictor. Requires the `sam2` package,
    torch, and a checkpoint; all imported lazily so the bridge itself stays
    free of ML dependencies."""

    name = "sam2"

    def __init__(self, config: BridgeConfig):
        if not config.checkpoint:
            raise BridgeStartupError("sam2 backend needs --checkpoint / BRIDGE_CHECKPOINT")
        try:
            import torch  # noqa: F401
            from sam2.build_sam import build_sam2, build_sam2_video_predictor
            from sam2.sam2_image_predictor import SAM2ImagePredictor
        except ImportError as exc:
            raise BridgeStartupError(f"sam2 runtime unavailable: {exc}") from exc
        self._torch = torch
        self.config = config
        self.video_predictor = build_sam2_video_predictor(
            config.model_cfg, config.checkpoint, device=config.device
        )
        self.image_predictor = SAM2ImagePredictor(
            build_sam2(config.model_cfg, config.checkpoint, device=config.device)
        )

    def _resize_in(self, frame: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
        h, w = frame.shape
        edge = max(h, w)
        if edge <= self.config.max_edge:
            return frame, (h, w)
        scale = self.config.max_edge / edge
        nh, nw = max(int(round(h * scale)), 1), max(int(round(w * scale)), 1)
        ii = (np.arange(nh) * h / nh).astype(int)
        jj = (np.arange(nw) * w / nw).astype(int)
        return frame[np.ix_(ii, jj)], (h, w)

    def _resize_out(self, mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
        if mask.shape == shape:
            return mask
        h, w = shape
        ii = (np.arange(h) * mask.shape[0] / h).astype(int)
        jj = (np.arange(w) * mask.shape[1] / w).astype(int)
        return mask[np.ix_(ii, jj)]

    def begin_stream(self, frames, prompt_mask):
        def run():
            small = [self._resize_in(np.asarray(f, np.uint8)) for f in frames]
            rgb = [np.stack([s[0]] * 3, axis=-1) for s in small]
            original = small[0][1]
            state = self.video_predictor.init_state_from_images(rgb)
            prompt_small = self._resize_out(
                (np.asarray(prompt_mask) != 0).astype(np.uint8), rgb[0].shape[:2]
            )
            self.video_predictor.add_new_mask(state, frame_idx=0, obj_id=1, mask=prompt_small)
            with self._torch.inference_mode():
                for frame_idx, obj_ids, logits in self.video_predictor.propagate_in_video(state):
                    if frame_idx == 0:
                        continue
                    # first predicted mask, thresholded at logit 0
                    binary = (logits[0, 0] > 0).cpu().numpy().astype(np.uint8)
                    yield self._resize_out(binary, original)

        return run()

    def segment_frame(self, frame, clicks, box, mask):
        small, original = self._resize_in(np.asarray(frame, np.uint8))
        rgb = np.stack([small] * 3, axis=-1)
        self.image_predictor.set_image(rgb)
        kwargs = {"multimask_output": False}
        if mask is not None:
            kwargs["mask_input"] = self._resize_out((np.asarray(mask) != 0).astype(np.float32), small.shape)[None]
        elif box is not None:
            r0, c0, r1, c1 = box
            kwargs["box"] = np.array([c0, r0, c1, r1], dtype=np.float32)
        else:
            pts = np.array([[c["col"], c["row"]] for c in clicks or []], dtype=np.float32)
            labels = np.array(
                [1 if c["label"] == "foreground" else 0 for c in clicks or []], dtype=np.int32
            )
            kwargs["point_coords"] = pts
            kwargs["point_labels"] = labels
        masks, _, _ = self.image_predictor.predict(**kwargs)
        return self._resize_out((masks[0] > 0).astype(np.uint8), original)


_BACKENDS = {
    CentroidTrackBackend.name: lambda config: CentroidTrackBackend(),
    Sam2Backend.name: Sam2Backend,
}


def make_backend(config: BridgeConfig) -> VideoBackend:
    try:
        factory = _BACKENDS[config.backend]
    except KeyError:
        raise BridgeStartupError(
            f"unknown backend {config.backend!r}; available: {sorted(_BACKENDS)}"
        )
    return factory(config)
