"""Console entry point: ood-adapter --config adapter.json --port 8080"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import load_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ood-adapter",
                                     description="Serve the model-backend wire contract.")
    parser.add_argument("--config", required=True, help="adapter config JSON")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)
    app = create_app(load_config(args.config))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
