"""Bridge configuration from CLI flags and BRIDGE_* environment variables."""

import os
from dataclasses import dataclass
from pathlib import Path


class BridgeStartupError(RuntimeError):
    """Configuration or model-loading failure; the server must not start."""


@dataclass(frozen=True)
class BridgeConfig:
    backend: str = "centroid-track"
    checkpoint: str | None = None
    model_cfg: str = "configs/sam2.1/sam2.1_hiera_l.yaml"
    device: str = "cpu"
    max_edge: int = 1024
    request_timeout: float = 60.0

    def __post_init__(self):
        if self.max_edge <= 0:
            raise BridgeStartupError(f"max_edge must be positive, got {self.max_edge}")
        if self.request_timeout <= 0:
            raise BridgeStartupError("request_timeout must be positive")
        if self.checkpoint and not Path(self.checkpoint).exists():
            raise BridgeStartupError(f"checkpoint not found: {self.checkpoint}")


def config_from_env(**overrides) -> BridgeConfig:
    values = {
        "backend": os.environ.get("BRIDGE_BACKEND", "centroid-track"),
        "checkpoint": os.environ.get("BRIDGE_CHECKPOINT"),
        "device": os.environ.get("BRIDGE_DEVICE", "cpu"),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return BridgeConfig(**values)
