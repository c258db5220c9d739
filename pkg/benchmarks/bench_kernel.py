"""Compare the compiled slot loop with the pure-Python fallback.

Both backends run on identical precomputed chunks, and the results are
checked for equality before timings are reported.

    python3 benchmarks/bench_kernel.py [--slots N] [--sensors K] [--repeat R]
"""

import argparse
import time

import numpy as np

from seqdet import kernel
from seqdet.config import build_experiment
from seqdet.detection import Hypothesis
from seqdet.sim import prepare, run_trials


def make_chunk(K, n, seed):
    rng = np.random.default_rng(seed)
    obs = 2.0 * rng.normal(1.0, np.sqrt(0.5), (K, n)) - 1.0
    pos = np.full((K, n), 4.9)
    neg = np.full((K, n), -4.9)
    idle = rng.normal(0.0, 0.01, (K, n))
    return obs, pos, neg, idle


def time_chunk(impl, chunk, repeat):
    obs, pos, neg, idle = chunk
    K = obs.shape[0]
    thr = np.full(K, 4.13)
    best, out = float("inf"), None
    for _ in range(repeat):
        acc = np.zeros(K)
        counts = np.zeros(K, dtype=np.int64)
        fc = np.zeros(1)
        t = time.perf_counter()
        # unreachable fusion thresholds: the whole chunk is processed
        status = impl.run_chunk(obs, pos, neg, idle, acc, counts, fc, thr, thr, 1e300, 1e300, True)
        best = min(best, time.perf_counter() - t)
        out = (status, acc.tobytes(), counts.tobytes(), fc.tobytes())
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--sensors", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trials", type=int, default=2000)
    args = ap.parse_args()
    if not kernel.compiled_available():
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")
    py, cy = kernel.backend("python"), kernel.backend("cython")
    chunk = make_chunk(args.sensors, args.slots, 0)
    t_py, r_py = time_chunk(py, chunk, args.repeat)
    t_cy, r_cy = time_chunk(cy, chunk, args.repeat)
    assert r_py == r_cy, "backends disagree"
    steps = args.sensors * args.slots
    print(f"slot loop, {steps} sensor-slots: python {t_py:.4f}s ({steps / t_py:.3g}/s), "
          f"cython {t_cy:.4f}s ({steps / t_cy:.3g}/s), speedup x{t_py / t_cy:.1f}")

    exp, _ = build_experiment({"seed": 1, "prep_trials": 20_000, "channel": {"kind": "rician", "snr_db": 0},
                               "fusion": {"threshold_up": 9.2, "threshold_down": 9.2}})
    prep = prepare(exp)
    res = {}
    for name in ("python", "cython"):
        t = time.perf_counter()
        res[name] = run_trials(prep, Hypothesis.H1, args.trials, backend=name)
        res[name + "_t"] = time.perf_counter() - t
    assert res["python"] == res["cython"], "end-to-end results differ"
    print(f"end to end, {args.trials} Rician trials: python {res['python_t']:.2f}s, cython {res['cython_t']:.2f}s, "
          f"speedup x{res['python_t'] / res['cython_t']:.2f}")


if __name__ == "__main__":
    main()
