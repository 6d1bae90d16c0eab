"""Benchmark the compiled ascent kernel against the pure numpy fallback.

Times the raw kernel on random smoothed max-min instances and a full
Dinkelbach reflect-vector solve on a realistic multi-user drop, for both
backends. Run from the repository root:

    python benchmarks/bench_ascent.py
"""

import time

import numpy as np

from irsmiso import _ascent_py

try:
    from irsmiso import _ascent
except ImportError:
    _ascent = None

from irsmiso.beamforming import olp_solve
from irsmiso.experiments import ChannelSampler, multiuser_budget, trial_rng
from irsmiso.maxmin_sdp import build_ratio_system, dinkelbach_solve
from irsmiso.sysmodel import SystemConfig

TEMPS = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4])


def random_instance(rng, n, K):
    Ms = np.empty((K, n, n), dtype=complex)
    for k in range(K):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Ms[k] = (A + A.conj().T) / 2
    offs = rng.standard_normal(K)
    Y0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return np.ascontiguousarray(Ms), offs, Y0


def bench_kernel(repeats=3):
    print(f"{'instance':>14} {'ext':>10} {'numpy':>10} {'speedup':>8} "
          f"{'iters':>6}  value agreement")
    rng = np.random.default_rng(42)
    for n, K in [(5, 2), (9, 4), (17, 4), (33, 4), (49, 4)]:
        Ms, offs, Y0 = random_instance(rng, n, K)
        results = {}
        for name, mod in (("ext", _ascent), ("numpy", _ascent_py)):
            if mod is None:
                continue
            best_t = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                _, val, iters = mod.lse_ascent(Ms, offs, Y0, TEMPS, 5000,
                                               1e-9, 60, 0.1)
                best_t = min(best_t, time.perf_counter() - t0)
            results[name] = (best_t, val, iters)
        if "ext" not in results:
            te, ve = np.nan, np.nan
            speed = np.nan
        else:
            te, ve, it = results["ext"][:2] + (results["ext"][2],)
            speed = results["numpy"][0] / te
        tp, vp, itp = results["numpy"]
        agree = abs(ve - vp) / max(abs(vp), 1e-300) if "ext" in results else np.nan
        print(f"n={n:3d} K={K:2d}     {te * 1e3:8.1f}ms {tp * 1e3:8.1f}ms "
              f"{speed:7.1f}x {itp:6d}  {agree:.2e}")


def bench_reflect_solve():
    import irsmiso.maxmin_sdp as mm
    print(f"\nfull Dinkelbach reflect solve (backend = {mm.BACKEND}):")
    for N in (8, 16, 32):
        cfg = SystemConfig(M=8, N=N, K=4, S=N + 1, sigma_sq=1e-16,
                           tau_S=2e-4)
        rng = trial_rng(0, N)
        sampler = ChannelSampler(cfg)
        ch = sampler.draw(multiuser_budget(cfg, rng), rng)
        v = np.ones(N, dtype=complex)
        h = ch.hd + np.einsum("kmn,n->km", ch.H0, v)
        G, p, _, _ = olp_solve(h, cfg.sigma_n_sq, cfg.P_max)
        system = build_ratio_system(G, p, ch.hd, ch.H0, cfg.sigma_n_sq)
        t0 = time.perf_counter()
        sol = dinkelbach_solve(system, rng=rng)
        dt = time.perf_counter() - t0
        print(f"  N={N:3d}: {dt * 1e3:8.1f}ms, {sol.dinkelbach_iterations} "
              f"Dinkelbach iterations, lambda*={sol.lambda_star:.4f}, "
              f"rank ratio {sol.rank_ratio:.1e}")


if __name__ == "__main__":
    if _ascent is None:
        print("compiled kernel not available; benchmarking fallback only")
    bench_kernel()
    bench_reflect_solve()
