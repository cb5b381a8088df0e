"""Run the classification, retrieval and segmentation experiments and print their summaries.

Usage: python scripts/experiments.py [sitk] [silm] [segmentation]
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from test_acceptance import segmentation, silm_trend, sitk_trend  # noqa: E402

EXPERIMENTS = {"sitk": sitk_trend, "silm": silm_trend, "segmentation": segmentation}


def main(names):
    for name in names or EXPERIMENTS:
        if name not in EXPERIMENTS:
            sys.exit(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        t0 = time.perf_counter()
        ok, detail = EXPERIMENTS[name]()
        print(f"{name}: {'ok' if ok else 'below target'}; {detail} [{time.perf_counter() - t0:.1f}s]")


if __name__ == "__main__":
    main(sys.argv[1:])
