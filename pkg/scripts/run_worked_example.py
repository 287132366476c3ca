"""Parse the worked reminder utterance, then replay the full scenario.

    python scripts/run_worked_example.py [--sockets]
"""

import argparse
import sys
from datetime import datetime

from iotmesh.nlp import ReferenceClock, parse_reminders
from iotmesh.protocol import canonical
from iotmesh.scenario import run_scenario

TEXT = (
    "Remind me to take the medicine every day after lunch. "
    "Furthermore, remind me to practice REMEDES on Sundays nights"
)
NOW = datetime(2017, 10, 18, 10, 0)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sockets", action="store_true", help="link peers over TCP")
    args = parser.parse_args()

    print(f"now={NOW.isoformat()}")
    for e in parse_reminders(TEXT, ReferenceClock(NOW)):
        print(canonical(e.to_payload()).decode())
    print()
    report = run_scenario("example", sockets=args.sockets)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
