"""Regenerate the benchmark model files under data/."""

import pathlib

from clmmse.model import save_model
from clmmse.systems import (four_mode_benchmark, four_mode_benchmark_scaled,
                            three_mode_random_walk)

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def main():
    DATA.mkdir(exist_ok=True)
    save_model(four_mode_benchmark(), DATA / "four_mode.json")
    save_model(four_mode_benchmark_scaled(), DATA / "four_mode_scaled.json")
    save_model(three_mode_random_walk(), DATA / "three_mode_random_walk.json")
    for name in ("four_mode.json", "four_mode_scaled.json", "three_mode_random_walk.json"):
        print(f"wrote {DATA / name}")


if __name__ == "__main__":
    main()
