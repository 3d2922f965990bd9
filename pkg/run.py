#!/usr/bin/env python3
"""
快速启动脚本 / quick launcher: checks the numerical stack, then forwards argv to the runner.

    python run.py preset fig2
    python run.py run config.example.json --out-dir results/custom
"""
import sys


def main():
    try:
        import matplotlib  # noqa: F401
        import numpy  # noqa: F401
        import orjson  # noqa: F401
        import scipy  # noqa: F401
        import tqdm  # noqa: F401
        from loguru import logger  # noqa: F401
    except ImportError as e:
        print(f"missing dependency ({e.name}); install with: pip install -r requirements.txt")
        sys.exit(1)

    from src.pipeline.runner import main as runner_main

    sys.exit(runner_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
