"""Random subscribe/unsubscribe churn followed by one publish, repeated.

Counts trials where delivery differs from the live subscription set or the
publisher hears its own event.

    python scripts/broker_fanout_trials.py --trials 1000 --max-subscribers 20
"""

import argparse
import random
import sys
import time

from iotmesh.client import connect
from iotmesh.router import Router

TOPIC = "remedes.results"


def trial(rng: random.Random, max_subs: int) -> bool:
    router = Router(["clinic"])
    try:
        k = rng.randint(0, max_subs)
        publisher = connect(router, "clinic")
        subs = [connect(router, "clinic") for _ in range(k)]
        inboxes: list[list[dict]] = [[] for _ in range(k)]
        live: dict[int, int] = {}
        for _ in range(rng.randint(0, 4 * k + 1) if k else 0):
            i = rng.randrange(k)
            if i in live:
                subs[i].unsubscribe(live.pop(i))
            else:
                live[i] = subs[i].subscribe(TOPIC, inboxes[i].append)
        own: list[dict] = []
        if rng.random() < 0.5:
            publisher.subscribe(TOPIC, own.append)
        payload = {"trial": rng.random()}
        publisher.publish(TOPIC, payload)
        deadline = time.monotonic() + 1.0
        while time.monotonic() < deadline and any(len(inboxes[i]) < 1 for i in live):
            time.sleep(0.002)
        time.sleep(0.005)
        ok = not own and all(inboxes[i] == ([payload] if i in live else []) for i in range(k))
        for c in [publisher, *subs]:
            c.close()
        return ok
    finally:
        router.shutdown()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--max-subscribers", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    t0 = time.perf_counter()
    bad = [s for s in range(args.seed, args.seed + args.trials) if not trial(random.Random(s), args.max_subscribers)]
    print(f"trials={args.trials} violations={len(bad)} seeds={bad[:10]} t={time.perf_counter() - t0:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
