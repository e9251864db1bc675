"""Compare the compiled and pure-Python RK4 kernels on one generation window.

    python3 benchmarks/bench_kernels.py [--repeat N] [--dt SECONDS]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from tbf import _kernels_py
from tbf.dynamics import InitialState, StarkInjection, rate_vector
from tbf.pulses import CouplingPulseSpec, Grid, coupling_pulse
from tbf.system import load_system_params

try:
    from tbf import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def workload(dt: float, window: float = 0.95e-6):
    p = load_system_params()
    pulse = CouplingPulseSpec(chirp_coeff=-2 * math.pi * 1.66e6)
    n = int(round(window / dt))
    g = coupling_pulse(pulse, Grid(0.0, dt / 2, 2 * n + 1)).samples
    s = StarkInjection(-pulse.chirp_coeff, pulse.peak_geff).shift(g)
    rates = rate_vector(p)
    y0 = InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5)).coefficients()
    return (y0, g, s, 0.0, dt, n, rates, True)


def best_of(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    best, out = math.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> dict:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dt", type=float, default=0.1e-9)
    args = ap.parse_args(argv)
    work = workload(args.dt)
    n = work[5]
    t_py, y_py = best_of(_kernels_py.integrate_coefficients, work, max(1, args.repeat // 3))
    print(f"steps            {n}")
    print(f"python           {t_py * 1e3:9.2f} ms  ({t_py / n * 1e6:.2f} us/step)")
    result = {"steps": n, "python_s": t_py}
    if _kernels_c is None:
        print("cython           not built")
        return result
    t_c, y_c = best_of(_kernels_c.integrate_coefficients, work, args.repeat)
    diff = float(np.max(np.abs(y_c - y_py)))
    print(f"cython           {t_c * 1e3:9.2f} ms  ({t_c / n * 1e6:.3f} us/step)")
    print(f"speedup          {t_py / t_c:9.1f}x")
    print(f"max |difference| {diff:.2e}")
    result.update(cython_s=t_c, speedup=t_py / t_c, max_abs_diff=diff)
    return result


if __name__ == "__main__":
    main()
