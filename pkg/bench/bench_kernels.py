"""Time the numba and numpy kernel backends on the same inputs.

    python3 bench/bench_kernels.py [--sizes 1000 10000 100000] [--p 10] [--repeat 5]

Also times one full elastic-net fit per backend on simulated data.  Reports
the best of ``--repeat`` runs after one warm-up call (so numba compilation is
excluded) and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from coxnet import _kernels
from coxnet.partial_likelihood import LikelihoodContext
from coxnet.penalty import PenaltySpec
from coxnet.simulation import SimConfig, simulate
from coxnet.solver import fit_penalized_cox


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_inputs(n, p, seed=0):
    rng = np.random.default_rng(seed)
    cfg = SimConfig(n=n, seed=seed, beta_true=tuple(rng.normal(0, 0.3, p)), design="independent")
    ctx = LikelihoodContext.from_dataset(simulate(cfg))
    beta = rng.normal(0, 0.2, p)
    return ctx, ctx.linear_predictor(beta)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--p", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")
    impls = {"numba": _kernels.numba_impl, "numpy": _kernels.numpy_impl}

    print(f"{'kernel':<14}{'n':>8}{'numba ms':>12}{'numpy ms':>12}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        ctx, eta = kernel_inputs(n, args.p)
        idx, st, X = ctx.index, ctx.status_sorted, ctx.X_sorted
        H = X.T @ X / n + np.eye(args.p) * 0.1
        g = np.linspace(-0.5, 0.5, args.p)
        order = np.arange(args.p)
        cases = {
            "cox_loss": lambda k: k.cox_loss(eta, st, idx.group_start),
            "risk_moments": lambda k: k.risk_moments(X, eta, st, idx.group_start, idx.group_end, True),
            "cd_sweeps": lambda k: (lambda b, v: (k.cd_sweeps(H, v, b, np.full(args.p, 0.01), 0.0,
                                                              order, 200, 1e-12), b)[1])(
                np.zeros(args.p), g.copy()),
        }
        for name, call in cases.items():
            res = {b: call(k) for b, k in impls.items()}
            a, c = res["numba"], res["numpy"]
            if isinstance(a, tuple):
                diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, c))
            else:
                diff = float(np.max(np.abs(np.asarray(a) - np.asarray(c))))
            t = {b: best_time(lambda k=k: call(k), args.repeat) for b, k in impls.items()}
            print(f"{name:<14}{n:>8}{t['numba'] * 1e3:>12.3f}{t['numpy'] * 1e3:>12.3f}"
                  f"{t['numpy'] / t['numba']:>9.1f}{diff:>11.1e}")

    d = simulate(SimConfig(n=1000, seed=1))
    spec = PenaltySpec.elastic_net(d.p, 0.01, 1.0 / 3.0)
    t = {}
    betas = {}
    for b, k in impls.items():
        _kernels.backend = k
        betas[b] = fit_penalized_cox(d, spec).beta
        t[b] = best_time(lambda: fit_penalized_cox(d, spec), args.repeat)
    _kernels.backend = _kernels.select_backend()
    diff = float(np.max(np.abs(betas["numba"] - betas["numpy"])))
    print(f"{'en_fit':<14}{1000:>8}{t['numba'] * 1e3:>12.3f}{t['numpy'] * 1e3:>12.3f}"
          f"{t['numpy'] / t['numba']:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
