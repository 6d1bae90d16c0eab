"""Downlink beamforming: optimal linear precoder and alternating optimization.

For a fixed reflect vector the max-min SINR precoder/power pair is the
optimal linear precoder: regularized channel inversion directed by a positive
fixed point q,

    g_k = normalize( A_k^{-1} h_k ),  A_k = sum_{i != k} (q_i/K) h_i h_i^H
                                             + sigma_n^2 I,

with q_k = tau / ((1/K) h_k^H A_k^{-1} h_k) and tau chosen so that
sum_k q_k = K P_max. The powers solve p = (I - tau D F)^{-1} tau sigma_n^2 D 1
and balance all SINRs at tau. Alternating this with the semidefinite-relaxed
reflect update (maxmin_sdp) yields a monotonically non-decreasing min-SINR.
"""

from dataclasses import dataclass, field

import numpy as np

from .maxmin_sdp import build_ratio_system, solve_reflect


def sinr_values(h, G, p, sigma_n_sq):
    """Per-user SINR for stacked overall channels h (K, M)."""
    if sigma_n_sq <= 0:
        raise ValueError("noise variance must be positive")
    h = np.asarray(h)
    G = np.asarray(G)
    p = np.asarray(p, dtype=float)
    K = h.shape[0]
    gains = np.abs(h.conj() @ G) ** 2        # (K, K): |h_k^H g_i|^2
    weighted = gains * (p[None, :] / K)
    sig = np.diag(weighted)
    interf = weighted.sum(axis=1) - sig
    return sig / (interf + sigma_n_sq)


def downlink_sinr(channels, G, p, sigma_n_sq, v):
    """SINR vector for a ChannelSet at reflect vector v."""
    return sinr_values(channels.overall(v), G, p, sigma_n_sq)


def _interference_solves(h, q, sigma_n_sq):
    """x_k = A_k^{-1} h_k for all users; A_k as in the module docstring."""
    K, M = h.shape
    X = np.empty((K, M), dtype=complex)
    base = sigma_n_sq * np.eye(M) \
        + np.einsum("k,km,kn->mn", q / K, h, h.conj())
    for k in range(K):
        A = base - (q[k] / K) * np.outer(h[k], h[k].conj())
        X[k] = np.linalg.solve(A, h[k])
    return X


def olp_fixed_point(h, sigma_n_sq, P_max, tol=1e-9, max_iter=10000):
    """Positive fixed point (q, tau) of the precoder direction system.

    Picard iteration from q = 1 with the normalization sum q = K P_max kept
    exact at every step; a damping factor 0.5 engages if the residual
    oscillates. Raises RuntimeError when max_iter is exceeded."""
    h = np.asarray(h)
    K = h.shape[0]
    if np.any(np.linalg.norm(h, axis=1) == 0):
        raise ValueError("every user channel must be nonzero")
    q = np.ones(K)
    res_prev = np.inf
    damped = False
    for _ in range(max_iter):
        X = _interference_solves(h, q, sigma_n_sq)
        quad = np.real(np.einsum("km,km->k", h.conj(), X)) / K
        inv = 1.0 / quad
        tau = K * P_max / inv.sum()
        q_new = tau * inv
        res = float(np.max(np.abs(q_new - q)))
        if res > res_prev:
            damped = True
        q = 0.5 * (q + q_new) if damped else q_new
        res_prev = res
        if res < tol:
            return q, float(tau)
    raise RuntimeError(f"fixed point did not converge: residual {res:.3e} "
                       f"after {max_iter} iterations")


def olp_precoders(h, q, sigma_n_sq):
    """Unit-norm precoding matrix G (M, K) at the fixed point q."""
    X = _interference_solves(np.asarray(h), np.asarray(q), sigma_n_sq)
    G = X.T.copy()
    G /= np.linalg.norm(G, axis=0, keepdims=True)
    return G


def olp_powers(h, G, tau, sigma_n_sq):
    """Power vector p = (I - tau D F)^{-1} tau sigma_n^2 D 1; at the fixed
    point the budget is met with equality and all SINRs equal tau."""
    h = np.asarray(h)
    K = h.shape[0]
    gains = np.abs(h.conj() @ np.asarray(G)) ** 2 / K
    D = 1.0 / np.diag(gains)
    F = gains - np.diag(np.diag(gains))
    A = np.eye(K) - tau * (D[:, None] * F)
    p = np.linalg.solve(A, tau * sigma_n_sq * D)
    return p


def olp_solve(h, sigma_n_sq, P_max, tol=1e-9, max_iter=10000):
    """Full precoder/power solution for fixed reflect vector."""
    q, tau = olp_fixed_point(h, sigma_n_sq, P_max, tol=tol, max_iter=max_iter)
    G = olp_precoders(h, q, sigma_n_sq)
    p = olp_powers(h, G, tau, sigma_n_sq)
    return G, p, q, tau


@dataclass
class BeamformingSolution:
    """Joint design output: precoders, powers, reflect vector, diagnostics."""

    G: np.ndarray                      # (M, K), unit-norm columns
    p: np.ndarray                      # (K,)
    v: np.ndarray                      # (N,), unit modulus
    objective_history: list            # min optimized SINR per outer iteration
    converged: bool
    q_star: np.ndarray
    tau_star: float
    gamma: np.ndarray                  # SINRs on the optimization channels
    gamma_true: np.ndarray | None = None
    true_history: list | None = None   # min true SINR per outer iteration
    iterations: int = 0


def com_init(N, hd=None, H0=None, policy="ones", rng=None):
    """Initial reflect vector. Policies: all-ones phases (default), seeded
    random phases, or "steering": phases of the summed per-user alignment
    directions sum_k H0_k^H hd_k."""
    if policy == "ones":
        return np.ones(N, dtype=complex)
    if policy == "random":
        if rng is None:
            raise ValueError("random init needs an rng")
        return np.exp(2j * np.pi * rng.uniform(size=N))
    if policy == "steering":
        if hd is None or H0 is None:
            raise ValueError("steering init needs channels")
        target = np.einsum("kmn,km->n", np.conj(H0), np.asarray(hd))
        return np.exp(1j * np.angle(target))
    raise ValueError(f"unknown init policy {policy!r}")


def ao_maxmin(hd, H0, sigma_n_sq, P_max, eps=1e-4, eps1=1e-4, max_outer=30,
              init="ones", L=1000, rng=None, true_hd=None, true_H0=None,
              fp_tol=1e-10):
    """Alternating optimization of (G, p) and v for max-min SINR.

    hd/H0 are the channels the optimizer sees (true for perfect CSI,
    estimates otherwise). Each outer iteration solves the precoder/power
    problem exactly for fixed v, then updates v through the semidefinite
    relaxation, keeping the previous v whenever the recovered one does not
    improve the objective; the recorded history is therefore non-decreasing.
    Stops when the fractional increase drops below eps. When true channels
    are supplied the returned gamma_true evaluates the design on them."""
    hd = np.asarray(hd)
    H0 = np.asarray(H0)
    K, M = hd.shape
    N = H0.shape[2]
    if rng is None:
        rng = np.random.default_rng(0)
    track_true = true_hd is not None and true_H0 is not None
    v = com_init(N, hd=hd, H0=H0, policy=init, rng=rng)
    history = []
    true_history = [] if track_true else None
    converged = False
    Vwarm = None
    G = p = q = None
    tau = 0.0
    for r in range(max_outer):
        h = hd + np.einsum("kmn,n->km", H0, v)
        G, p, q, tau = olp_solve(h, sigma_n_sq, P_max, tol=fp_tol)
        gamma = sinr_values(h, G, p, sigma_n_sq)
        history.append(float(gamma.min()))
        if track_true:
            h_t = np.asarray(true_hd) \
                + np.einsum("kmn,n->km", np.asarray(true_H0), v)
            true_history.append(
                float(sinr_values(h_t, G, p, sigma_n_sq).min()))
        if r > 0 and (history[-1] - history[-2]) \
                / max(history[-2], 1e-300) < eps:
            converged = True
            break
        system = build_ratio_system(G, p, hd, H0, sigma_n_sq)
        try:
            v, sol = solve_reflect(system, v, eps1=eps1, L=L, rng=rng,
                                   V0=Vwarm)
        except RuntimeError as exc:
            raise RuntimeError(
                f"reflect subproblem failed at outer iteration {r}: {exc}"
            ) from exc
        Vwarm = sol.Vbar
    h = hd + np.einsum("kmn,n->km", H0, v)
    gamma = sinr_values(h, G, p, sigma_n_sq)
    gamma_true = None
    if true_hd is not None and true_H0 is not None:
        h_true = np.asarray(true_hd) \
            + np.einsum("kmn,n->km", np.asarray(true_H0), v)
        gamma_true = sinr_values(h_true, G, p, sigma_n_sq)
    return BeamformingSolution(G=G, p=p, v=v, objective_history=history,
                               converged=converged, q_star=q, tau_star=tau,
                               gamma=gamma, gamma_true=gamma_true,
                               true_history=true_history,
                               iterations=len(history))


def single_user_closed_form(hd_hat, H0_hat):
    """K = 1 shortcut: reflect phases aligning every cascaded column with the
    direct channel, v = exp(j angle(H0^H hd)), and matched-filter precoding
    g = h_hat / ||h_hat||."""
    hd_hat = np.asarray(hd_hat, dtype=complex)
    H0_hat = np.asarray(H0_hat, dtype=complex)
    v = np.exp(1j * np.angle(H0_hat.conj().T @ hd_hat))
    h = hd_hat + H0_hat @ v
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("zero channel estimate")
    return v, h / nrm
