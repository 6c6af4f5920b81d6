"""Compiled vs numpy geometry kernels on the rasterization workload.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each backend rasterizes the scene and wrist grids of states sampled from
a scripted demonstration, checks that both backends agree cell for cell,
and reports microseconds per call.
"""

import argparse
import timeit

import numpy as np

from hangerlab import _kernels_py, simworld
from hangerlab.core import EpisodeType, SimConfig
from hangerlab.expert import expert_action

try:
    from hangerlab import _ckernels
except ImportError:
    _ckernels = None


def workload(cfg, n_states=40):
    state = simworld.reset(cfg, 11, EpisodeType.I)
    cases = []
    for _ in range(n_states):
        if state.is_terminal:
            break
        poly = simworld.cloth_model(state, cfg).polygon
        segs = simworld.hanger_segments(state.hanger, cfg)
        cases.append((poly, segs))
        state, _ = simworld.step(state, expert_action(state, cfg), cfg)
    return cases


def raster(impl, cases, px, py, radius):
    out = []
    for poly, segs in cases:
        out.append(impl.points_in_polygon(px, py, poly))
        out.append(impl.points_near_segments(px, py, segs, radius))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    cfg = SimConfig()
    cases = workload(cfg)
    n = cfg.scene_grid
    idx = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(cfg.x_min + idx * (cfg.x_max - cfg.x_min), cfg.y_max - idx * (cfg.y_max - cfg.y_min))
    px, py = gx.ravel().copy(), gy.ravel().copy()
    radius = max(cfg.leg_thickness / 2, (cfg.x_max - cfg.x_min) / n / 2)

    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; only the numpy fallback is timed")

    ref = raster(_kernels_py, cases, px, py, radius)
    calls = 2 * len(cases)
    results = {}
    for name, impl in backends.items():
        got = raster(impl, cases, px, py, radius)
        same = all(np.array_equal(a, b) for a, b in zip(ref, got))
        t = min(timeit.repeat(lambda: raster(impl, cases, px, py, radius), number=1, repeat=args.repeat))
        results[name] = t
        print(f"{name:7s} {1e6 * t / calls:8.1f} us/call  ({calls} calls, {n}x{n} grid)  matches fallback: {same}")
    if "cython" in results:
        print(f"speedup {results['python'] / results['cython']:.1f}x")


if __name__ == "__main__":
    main()
