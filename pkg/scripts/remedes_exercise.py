"""Run one seeded REMEDES routine on a simulated clock and print the timeline.

    python scripts/remedes_exercise.py --pads 10 --sequence 3,7,0,9,1,4,8,2,6,5 --seed 1234
"""

import argparse
import sys
from datetime import datetime

from iotmesh.clock import SimClock
from iotmesh.protocol import canonical
from iotmesh.remedes import ExerciseConfig, MasterController, load_exercise_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pads", type=int, default=4)
    parser.add_argument("--sequence", default=None, help="comma-separated pad ids")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--exercise", default=None, help="exercise YAML (default: shipped one)")
    args = parser.parse_args()

    base = load_exercise_config(args.exercise)
    overrides: dict = {}
    if args.sequence:
        overrides["pad_sequence"] = [int(p) for p in args.sequence.split(",")]
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = ExerciseConfig.from_dict(overrides, base=base)

    mc = MasterController(args.pads, SimClock(datetime(2017, 10, 22, 20, 0)))
    result = mc.run_routine(cfg, exercise_id=1)
    for ev in mc.event_log:
        print(f"{ev.at_ms:>7} ms  pad {ev.pad_id}  {ev.state.name}")
    print(canonical(result.to_payload()).decode())
    return 0


if __name__ == "__main__":
    sys.exit(main())
