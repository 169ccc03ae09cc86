"""Compare the numba and pure-numpy paths of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  The kernel-level timings
call both implementations directly in one process; the end-to-end timings
rerun a batched expansion in subprocesses with ``PARAKERNEL_NUMBA`` set to 1
and to 0.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from parakernel import _kernels
from parakernel.polyalg import basis

END_TO_END = """
import time
import numpy as np
from parakernel._jit import backend
from parakernel.fields import FourierField
from parakernel.wkb import expand_batch
f = FourierField(2, [[0, 1.0, 0.0], [0, 1.0, -1.0], [0, 0.0, 2.0]], [0.3, 0.2, -0.1], [0.1, -0.4, 0.2])
Y = np.random.default_rng(0).uniform(-1, 1, size=({points}, 2))
expand_batch([f, f], Y[:2], K={order})
start = time.perf_counter()
expand_batch([f, f], Y, K={order})
print(backend(), time.perf_counter() - start)
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(batch, dim, cap, repeat):
    rng = np.random.default_rng(1)
    B = basis(dim, cap)
    P = rng.normal(size=(batch, B.size))
    Q = rng.normal(size=(batch, B.size))
    args = (P, Q, B.mul_a, B.mul_b, B.mul_c, B.size)
    scatter = _kernels._scatter_matrix(B.mul_c, B.size)
    rows = [("mul_rows", "numpy", best_of(lambda: _kernels.mul_rows_numpy(*args, scatter), repeat))]
    rows.append(("dropped", "numpy", best_of(lambda: _kernels.dropped_numpy(P, Q, B.degs, cap), repeat)))
    if _kernels.HAVE_NUMBA:
        _kernels.mul_rows_numba(*args)
        _kernels.dropped_products(P, Q, B.degs, cap)
        rows.append(("mul_rows", "numba", best_of(lambda: _kernels.mul_rows_numba(*args), repeat)))
        rows.append(("dropped", "numba", best_of(lambda: _kernels.dropped_products(P, Q, B.degs, cap), repeat)))
        same = np.allclose(_kernels.mul_rows_numpy(*args, scatter), _kernels.mul_rows_numba(*args))
        print(f"numba and numpy products agree: {same}")
    return rows


def end_to_end(points, order):
    code = END_TO_END.format(points=points, order=order)
    out = []
    for flag in ("1", "0"):
        env = dict(os.environ, PARAKERNEL_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, seconds = res.stdout.split()
        out.append(("expand_batch", name, float(seconds)))
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=2048, help="coefficient rows per product")
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--cap", type=int, default=10, help="degree cap of the basis")
    parser.add_argument("--points", type=int, default=1024, help="base points for expand_batch")
    parser.add_argument("--order", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    B = basis(args.dim, args.cap)
    print(f"basis: dim={args.dim} cap={args.cap} size={B.size} pairs={B.mul_a.size}; batch={args.batch}")
    rows = kernel_rows(args.batch, args.dim, args.cap, args.repeat)
    rows += end_to_end(args.points, args.order)
    print(f"{'kernel':<14}{'backend':<9}{'seconds':>10}")
    for name, backend, seconds in rows:
        print(f"{name:<14}{backend:<9}{seconds:>10.4f}")


if __name__ == "__main__":
    main()
