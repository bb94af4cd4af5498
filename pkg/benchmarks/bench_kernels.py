"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from surfgap import kernels
from surfgap.domains import make_cap
from surfgap.eigen import radial_oracle
from surfgap.geometry import RoundSphere


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    cap = make_cap(RoundSphere(), theta0=math.pi / 2)
    mesh = cap.triangulate(0.01)
    r = np.linspace(1e-3, math.pi / 2, 200001)
    f = np.sin(r)
    cases = {
        f"P1 element blocks ({len(mesh.tris)} triangles)": lambda b: kernels.element_matrices(mesh.params, mesh.metric, mesh.tris, backend=b),
        f"RK4 shooting ({(len(r) - 1) // 2} steps)": lambda b: kernels.shoot_radial(f, r[2] - r[0], 2.0, 1, r[0], r[0], backend=b),
        "radial oracle, hemisphere": lambda b: radial_oracle(cap.chart, cap.radius, backend=b),
    }
    backends = kernels.available_backends()
    print(f"{'kernel':<42}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        line = f"{name:<42}" + "".join(f"{t[b]:>11.4f}s" for b in backends)
        if len(backends) == 2:
            line += f"{t['python'] / t['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
