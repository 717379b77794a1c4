"""Compare the compiled and NumPy kernel backends on the hot loops.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per kernel and backend, the speed-up, and the
largest absolute difference between the two results.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from spinlyap.classical_phase import disk_to_bloch
from spinlyap.kernels import _pykernels
from spinlyap.spin_core import coherent_state

try:
    from spinlyap.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases():
    h = np.linspace(0.0, 6.0, 300)
    K = np.linspace(0.0, 4.0, 300)
    axis = np.linspace(-2.0, 2.0, 201)
    Qg, Pg = np.meshgrid(axis, axis, indexing="ij")
    inside = Qg**2 + Pg**2 <= 4.0
    theta, phi = disk_to_bloch(Qg[inside], Pg[inside])
    psi = coherent_state(2.5, 0.3, 300)
    return {
        "lyapunov_grid 300x300": (lambda m: m.lyapunov_grid(h, K, 1.0), lambda r: r[0]),
        "vprime_scan h=3.265 K=1.5": (lambda m: m.vprime_scan(3.265, 1.0, 1.5), lambda r: r),
        "husimi_values N=300 disk 201^2": (lambda m: m.husimi_values(psi, theta, phi), lambda r: r),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, (call, pick) in _cases().items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat))
        a = np.asarray(pick(call(_pykernels)))
        b = np.asarray(pick(call(_ckernels)))
        diff = float(np.max(np.abs(a - b))) if a.shape == b.shape else float("nan")
        print(f"{name:34s} {1e3 * t_py:11.2f} {1e3 * t_c:12.2f} {t_py / t_c:9.1f} {diff:11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
