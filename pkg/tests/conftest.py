"""Shared oracles and instance builders for the test suite."""

import itertools

import numpy as np
import pytest

from irsmiso.maxmin_sdp import RatioSystem, build_ratio_system
from irsmiso.sysmodel import SystemConfig


def rng_for(*key):
    flat = []
    for item in key:
        if isinstance(item, (tuple, list)):
            flat.extend(int(x) for x in item)
        else:
            flat.append(int(item))
    return np.random.default_rng(flat)


def random_unit_columns(rng, M, K):
    G = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
    return G / np.linalg.norm(G, axis=0, keepdims=True)


def random_ratio_system(rng, M, N, K, sigma_n_sq=0.5, P_max=2.0):
    """Unit-scale random instance of the reflect subproblem."""
    hd = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) \
        / np.sqrt(2)
    H0 = (rng.standard_normal((K, M, N)) + 1j * rng.standard_normal((K, M, N))) \
        / np.sqrt(2)
    G = random_unit_columns(rng, M, K)
    p = rng.uniform(0.5, 1.0, K)
    p *= K * P_max / p.sum()
    return build_ratio_system(G, p, hd, H0, sigma_n_sq), hd, H0, G, p


def pipeline_ratio_system(seed, M, N, K, sigma_n_sq=None, P_max=5.0):
    """Reflect-subproblem instance drawn from the artifact's own pipeline:
    cascaded channels from the system model and precoders/powers from the
    optimal linear precoder at unit phases."""
    from irsmiso.beamforming import olp_solve
    from irsmiso.experiments import ChannelSampler, multiuser_budget
    cfg = SystemConfig(M=M, N=N, K=K, S=N + 1, tau_S=2e-4)
    if sigma_n_sq is None:
        sigma_n_sq = cfg.sigma_n_sq
    rng = rng_for(seed)
    sampler = ChannelSampler(cfg)
    ch = sampler.draw(multiuser_budget(cfg, rng), rng)
    h = ch.overall(np.ones(N, dtype=complex))
    G, p, _, _ = olp_solve(h, sigma_n_sq, P_max)
    from irsmiso.maxmin_sdp import build_ratio_system
    return build_ratio_system(G, p, ch.hd, ch.H0, sigma_n_sq)


def phase_grid_optimum(system, n_phases, chunk=4096):
    """Brute-force max-min ratio over unit-modulus v with quantized phases.

    Enumerates all n_phases^N combinations (auxiliary entry fixed at 1);
    independent of the solver path."""
    N = system.n - 1
    phases = np.exp(2j * np.pi * np.arange(n_phases) / n_phases)
    best = -np.inf
    combos = itertools.product(range(n_phases), repeat=N)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        vb = np.ones((len(block), N + 1), dtype=complex)
        vb[:, :N] = phases[np.asarray(block)]
        vals = np.atleast_1d(system.min_ratio_at(vb))
        best = max(best, float(np.max(vals)))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def small_config(M=4, N=6, K=2, **kw):
    defaults = dict(M=M, N=N, K=K, S=N + 1, sigma_sq=1e-4, tau_S=1e-4)
    defaults.update(kw)
    return SystemConfig(**defaults)
