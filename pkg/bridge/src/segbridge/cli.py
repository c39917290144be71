import os
import sys

import click

from .config import BridgeStartupError, config_from_env
from .server import create_app


@click.command()
@click.option("--backend", default=None, help="centroid-track (default) or sam2")
@click.option("--checkpoint", default=None, help="model checkpoint path (sam2)")
@click.option("--device", default=None, help="torch device selector (sam2)")
@click.option("--max-edge", type=int, default=1024, show_default=True)
@click.option("--port", type=int, default=None, help="defaults to BRIDGE_PORT or 8801")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_bridge(backend, checkpoint, device, max_edge, port, host):
    """Serve a segmentation model behind the propagation wire protocol."""
    import uvicorn

    try:
        config = config_from_env(
            backend=backend, checkpoint=checkpoint, device=device, max_edge=max_edge
        )
        app = create_app(config)
    except BridgeStartupError as exc:
        click.echo(f"startup failed: {exc}", err=True)
        raise SystemExit(3)
    port = port or int(os.environ.get("BRIDGE_PORT", "8801"))
    uvicorn.run(app, host=host, port=port)


def main():
    try:
        serve_bridge.main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(64)


if __name__ == "__main__":
    main()
