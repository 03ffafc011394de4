"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N time of each backend and the
speed-up. Results are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from fxhybrid import _pykernels, kernels
from fxhybrid.wavelet import get_filter


def cases(rng):
    x = rng.normal(size=20_000)
    filt = get_filter("sym15")
    h, g = filt.lowpass_dec, filt.highpass_dec
    L = len(h)
    xe = np.pad(x[:4096], L - 1, mode="symmetric")
    a, d = _pykernels.analysis_step(xe, h, g)
    return {
        "exp_smooth (n=20000)": ((x, 2.0 / 27, 25, 0.0), "exp_smooth"),
        "arma_residuals (n=20000, p=3, q=1)": ((x, 0.0, np.array([0.5, -0.3, 0.2]), np.array([0.4])),
                                                "arma_residuals"),
        "analysis_step (n=4096, L=30)": ((xe, h, g), "analysis_step"),
        "synthesis_step (n=4096, L=30)": ((a, d, h, g, 4096), "synthesis_step"),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the Python backend can be timed")
    from importlib import import_module

    try:
        fast = import_module("fxhybrid._ckernels")
    except ImportError:
        fast = None
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for label, (call_args, name) in cases(rng).items():
        slow_fn = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: slow_fn(*call_args), number=1, repeat=args.repeat))
        if fast is None:
            print(f"{label:<38}{1e3 * t_py:>12.2f}{'-':>12}{'-':>10}")
            continue
        fast_fn = getattr(fast, name)
        ref, got = slow_fn(*call_args), fast_fn(*call_args)
        np.testing.assert_allclose(np.asarray(got, dtype=float), np.asarray(ref, dtype=float),
                                   atol=1e-10, equal_nan=True)
        t_c = min(timeit.repeat(lambda: fast_fn(*call_args), number=1, repeat=args.repeat))
        print(f"{label:<38}{1e3 * t_py:>12.2f}{1e3 * t_c:>12.3f}{t_py / t_c:>9.0f}x")


if __name__ == "__main__":
    main()
