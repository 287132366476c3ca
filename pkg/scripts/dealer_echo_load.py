"""Concurrent echo calls through a TCP router; reports latency and crosstalk.

    python scripts/dealer_echo_load.py --calls 1000 --callers 8
"""

import argparse
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from iotmesh.client import connect
from iotmesh.router import Router
from iotmesh.transport import RouterServer


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--calls", type=int, default=1000)
    parser.add_argument("--callers", type=int, default=8)
    parser.add_argument("--threads", type=int, default=64)
    args = parser.parse_args()

    router = Router(["clinic"])
    server = RouterServer(router).start()
    callee = connect(server.address, "clinic")
    callee.register("test.echo", lambda p: p)
    callers = [connect(server.address, "clinic") for _ in range(args.callers)]

    def one(i: int) -> tuple[bool, float]:
        sent = {"tag": i}
        t = time.perf_counter()
        got = callers[i % len(callers)].call("test.echo", sent)
        return got == sent, (time.perf_counter() - t) * 1000

    t0 = time.perf_counter()
    with ThreadPoolExecutor(args.threads) as pool:
        results = list(pool.map(one, range(args.calls)))
    wall = time.perf_counter() - t0
    lat = sorted(ms for _, ms in results)
    crosstalk = sum(1 for ok, _ in results if not ok)
    print(
        f"calls={args.calls} crosstalk={crosstalk} wall={wall:.2f}s rate={args.calls / wall:.0f}/s "
        f"p50={statistics.median(lat):.2f}ms p99={lat[int(0.99 * (len(lat) - 1))]:.2f}ms"
    )
    for c in [callee, *callers]:
        c.close()
    server.stop()
    router.shutdown()
    return 1 if crosstalk else 0


if __name__ == "__main__":
    sys.exit(main())
