"""Time the compiled and pure-Python kernel backends on representative inputs.

    python benchmarks/bench_kernels.py --repeat 3
"""
import argparse
import time

import numpy as np

from gwbe_mimo import kernels
from gwbe_mimo.design_baseline import wbe_design
from gwbe_mimo.netmodel import NetworkConfig


def mc_case(rng, trials, Nt, L=3, K=4, tau=3):
    n = L * K
    cn = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) * np.sqrt(0.5)
    return (cn(trials, n, L, Nt), cn(trials, L, tau, Nt), rng.random((n, n)),
            rng.standard_normal((tau, n)), rng.random(n), rng.random((n, L)),
            np.repeat(np.arange(L), K), rng.random(n))


def perron_case(rng, batch):
    cfg = NetworkConfig.symmetric(3, 4, 3, 1.0, 0.9)
    W = wbe_design(cfg).Q
    W = (W.T @ W) ** 2
    z = np.sort(rng.uniform(0.0, 0.3, (batch, W.shape[0])), axis=0)
    return z[:, :, None] * W[None]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trials", type=int, default=2048)
    ap.add_argument("--nt", type=int, default=64)
    ap.add_argument("--batch", type=int, default=50_000)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    mc = mc_case(rng, args.trials, args.nt)
    M = perron_case(rng, args.batch)
    backends = kernels.available_backends()
    rows = []
    for name, run in (
        (f"mc_moments ({args.trials} trials, Nt={args.nt})",
         lambda b: kernels.mc_moments(*mc, np.zeros((12, 10)), backend=b)),
        (f"perron_batch ({args.batch} x 12x12)",
         lambda b: kernels.perron_batch(M, backend=b)),
    ):
        t = {b: best_of(lambda: run(b), args.repeat) for b in backends}
        rows.append((name, t))
    print(f"{'kernel':44s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, t in rows:
        speed = t["python"] / t["compiled"] if "compiled" in t else float("nan")
        print(f"{name:44s}" + "".join(f"{t[b]:11.3f}s" for b in backends) + f"   {speed:8.2f}x")


if __name__ == "__main__":
    main()
