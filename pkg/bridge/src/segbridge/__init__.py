from .backends import CentroidTrackBackend, VideoBackend, make_backend
from .config import BridgeConfig, BridgeStartupError, config_from_env
from .server import create_app

__all__ = [
    "BridgeConfig",
    "BridgeStartupError",
    "CentroidTrackBackend",
    "VideoBackend",
    "config_from_env",
    "create_app",
    "make_backend",
]

__version__ = "0.1.0"
