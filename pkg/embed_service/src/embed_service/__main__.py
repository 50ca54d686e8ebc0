"""Run the sidecar: ``python -m embed_service [--model ID] [--port N]``."""

from __future__ import annotations

import argparse

import uvicorn

from .app import ServiceConfig, create_app
from .encoder import DEFAULT_MODEL_ID


def main() -> None:
    parser = argparse.ArgumentParser(prog="embed-service", description=__doc__)
    parser.add_argument("--model", default=DEFAULT_MODEL_ID)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8901)
    parser.add_argument("--max-batch", type=int, default=256)
    args = parser.parse_args()
    config = ServiceConfig(
        model_id=args.model, host=args.host, port=args.port, max_batch=args.max_batch
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
