"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py --sizes 100 400 --repeat 5

Both variants are imported directly, so the DOMADAPT_NUMBA flag does not
matter here.  The first numba call is made before timing (compile or cache
load), and each row also reports the max absolute difference of the outputs.
"""
import argparse
import math
import timeit

import numpy as np

from domadapt import kernels
from domadapt._accel import HAVE_NUMBA
from domadapt.core import RandomStream


def cases(n, seed=0):
    r = RandomStream(seed)
    x = r.normal((n, 10))
    y = r.normal((n, 10)) + 0.5
    d2 = kernels.sq_dists_numpy(x, x)
    np.fill_diagonal(d2, 0.0)
    cost = kernels.sq_dists_numpy(x, y)
    cost /= cost.max()
    log_w = np.full(n, -math.log(n))
    labels = (np.arange(n) % 2).astype(np.int64)
    p, _ = kernels.conditional_p_numpy(d2, min(30.0, (n - 1) / 3), 1e-5, 50)
    p = np.ascontiguousarray((p + p.T) / (2 * n))
    emb = r.normal((n, 2))
    w = np.ascontiguousarray(np.linalg.qr(r.normal((10, 2)))[0])
    xy = np.vstack([x, y])
    is_src = np.arange(2 * n) < n
    cls = np.where(is_src, np.arange(2 * n) % 2, -1).astype(np.int64)
    return {
        "sq_dists": ((x, y), lambda o: o),
        "sinkhorn_log": ((cost, 0.05, log_w, log_w, 200, 1e-9), lambda o: o[0]),
        "knn_predict": ((x, labels, y, 1, 2), lambda o: o),
        "conditional_p": ((d2, min(30.0, (n - 1) / 3), 1e-5, 50), lambda o: o[0]),
        "tsne_grad": ((emb, p), lambda o: o),
        "itl_objective": ((xy, w, is_src, cls, 2, 1.0, 0.0), lambda o: o),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':14s} {'n':>5s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s} {'max diff':>9s}")
    for n in args.sizes:
        for name, (call_args, pick) in cases(n).items():
            fast = getattr(kernels, name + "_numba")
            slow = getattr(kernels, name + "_numpy")
            a, b = pick(fast(*call_args)), pick(slow(*call_args))
            diff = float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
            t_fast = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
            t_slow = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat))
            print(f"{name:14s} {n:5d} {1e3 * t_fast:10.3f} {1e3 * t_slow:10.3f} "
                  f"{t_slow / t_fast:8.2f} {diff:9.1e}")


if __name__ == "__main__":
    main()
