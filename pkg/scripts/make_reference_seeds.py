"""Regenerate src/graspview/data/reference_seeds.json.

For each difficulty level, walks seeds 0, 1, 2, ... and keeps the first 20
whose scenes place successfully; the ray-cast visibility of the initial view
is recorded next to each seed and re-checked against the level's band.
"""
import argparse
import json
from pathlib import Path

from graspview import sim
from graspview.errors import PlacementFailure

OUT = Path(__file__).resolve().parents[1] / "src" / "graspview" / "data" / "reference_seeds.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    table = {"count": args.count, "levels": {}}
    for level in sim.LEVELS:
        lo, hi = sim.VISIBILITY_BANDS[level]
        seeds, vis, skipped = [], [], []
        s = 0
        while len(seeds) < args.count:
            try:
                scene = sim.build_scene(sim.make_scene_spec(level, s))
            except PlacementFailure:
                skipped.append(s)
            else:
                v = scene.truth.initial_visibility
                assert lo <= v <= hi, (level, s, v)
                seeds.append(s)
                vis.append(round(v, 6))
            s += 1
        table["levels"][level] = {"band": [lo, hi], "seeds": seeds,
                                  "initial_visibility": vis, "skipped": skipped}
        print(level, seeds, "skipped", skipped)
    args.out.write_text(json.dumps(table, indent=2) + "\n")


if __name__ == "__main__":
    main()
