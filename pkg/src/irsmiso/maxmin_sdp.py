"""Reflect-beamforming subproblem: max-min SINR over the IRS phase vector.

For fixed precoders G and powers p, each |h_k^H g_i|^2 is a quadratic form in
the lifted vector vbar = [v; t]:

    |h_k^H g_i|^2 = vbar^H R_ki vbar + |b_ki|^2,
    R_ki = [[a a^H, a conj(b)], [b a^H, 0]],  a = H0_k^H g_i,  b = hd_k^H g_i.

Lifting V = vbar vbar^H and dropping the rank-one constraint leaves a max-min
of affine ratios over {V PSD, unit diagonal}, solved by the generalized
Dinkelbach iteration: repeatedly maximize min_k [n_k(V) - lambda d_k(V)] and
update lambda to the attained min ratio. The inner maximization runs on the
factor manifold V = Y^H Y with unit-norm columns (log-sum-exp smoothed ascent;
see _ascent/_ascent_py), followed by a rank-one polish with a single-row
factor. A feasible unit-modulus v is then recovered from the principal
eigenvector or by Gaussian randomization, and phase projection.

Set IRSMISO_BACKEND=py (or ext) to force the kernel backend.
"""

import os
from dataclasses import dataclass, field

import numpy as np

if os.environ.get("IRSMISO_BACKEND", "").lower() == "py":
    from . import _ascent_py as _kernel
    HAVE_EXT = False
else:
    try:
        from . import _ascent as _kernel
        HAVE_EXT = True
    except ImportError:
        from . import _ascent_py as _kernel
        HAVE_EXT = False

BACKEND = "ext" if HAVE_EXT else "py"

# annealing temperatures on the normalized objective
FULL_ANNEAL = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
WARM_ANNEAL = (1e-3, 1e-4)


@dataclass
class RatioSystem:
    """Quadratic-form data of the K SINR ratios for fixed G and p."""

    R: np.ndarray                      # (K, K, N+1, N+1) Hermitian blocks
    b_abs_sq: np.ndarray               # (K, K)
    p: np.ndarray                      # (K,)
    sigma_n_sq: float

    @property
    def K(self):
        return self.R.shape[0]

    @property
    def n(self):
        return self.R.shape[2]

    def numerator_terms(self):
        """(C, c0) with n_k(V) = Re tr(C_k V) + c0_k."""
        K = self.K
        w = self.p / K
        C = w[:, None, None] * self.R[np.arange(K), np.arange(K)]
        c0 = w * self.b_abs_sq[np.arange(K), np.arange(K)]
        return C, c0

    def denominator_terms(self):
        """(C, c0) with d_k(V) = Re tr(C_k V) + c0_k; c0_k >= sigma_n_sq."""
        K = self.K
        w = self.p / K
        C = np.einsum("i,kinm->knm", w, self.R) \
            - (w[:, None, None] * self.R[np.arange(K), np.arange(K)])
        c0 = self.b_abs_sq @ w - w * np.diag(self.b_abs_sq) + self.sigma_n_sq
        return C, c0

    def ratio_values(self, V):
        """(numerators, denominators) of the K ratios at Hermitian V."""
        Cn, cn = self.numerator_terms()
        Cd, cd = self.denominator_terms()
        num = np.real(np.einsum("kij,ji->k", Cn, V)) + cn
        den = np.real(np.einsum("kij,ji->k", Cd, V)) + cd
        return num, den

    def min_ratio_at(self, vbar):
        """Max-min objective evaluated at lifted vectors (supports a stack)."""
        vbar = np.atleast_2d(np.asarray(vbar, dtype=complex))
        quad = np.real(np.einsum("li,kvij,lj->lkv", vbar.conj(), self.R, vbar))
        terms = quad + self.b_abs_sq[None, :, :]
        w = self.p / self.K
        num = terms[:, np.arange(self.K), np.arange(self.K)] * w[None, :]
        den = np.einsum("lkv,v->lk", terms, w) - num + self.sigma_n_sq
        out = np.min(num / den, axis=1)
        return out if out.shape[0] > 1 else float(out[0])


def build_ratio_system(G, p, hd, H0, sigma_n_sq):
    """Assemble the lifted quadratic forms from channels (true or estimated)."""
    hd = np.asarray(hd)
    H0 = np.asarray(H0)
    G = np.asarray(G)
    K, M = hd.shape
    N = H0.shape[2]
    if G.shape != (M, K) or H0.shape != (K, M, N):
        raise ValueError("dimension mismatch between G, hd and H0")
    R = np.zeros((K, K, N + 1, N + 1), dtype=complex)
    b2 = np.zeros((K, K))
    for k in range(K):
        a = H0[k].conj().T @ G            # (N, K) columns a_{k,i}
        b = hd[k].conj() @ G              # (K,)  scalars b_{k,i}
        for i in range(K):
            R[k, i, :N, :N] = np.outer(a[:, i], a[:, i].conj())
            R[k, i, :N, N] = a[:, i] * np.conj(b[i])
            R[k, i, N, :N] = b[i] * a[:, i].conj()
            b2[k, i] = np.abs(b[i]) ** 2
    return RatioSystem(R=R, b_abs_sq=b2, p=np.asarray(p, dtype=float),
                       sigma_n_sq=float(sigma_n_sq))


@dataclass
class PSDSolution:
    """Result of the Dinkelbach solve over the lifted PSD set."""

    Vbar: np.ndarray
    lambda_star: float
    F_final: float
    rank_ratio: float
    dinkelbach_iterations: int
    converged: bool
    lambda_history: list = field(default_factory=list)


def _combined(system, lam):
    """Matrices/offsets of min_k [n_k - lam d_k] as min_k [Re tr(M_k V) + o_k]."""
    Cn, cn = system.numerator_terms()
    Cd, cd = system.denominator_terms()
    return Cn - lam * Cd, cn - lam * cd


def _factor_init(V0, rng):
    """Unit-column factor of V0 with a small deterministic perturbation to
    avoid starting exactly on a low-rank saddle."""
    n = V0.shape[0]
    w, U = np.linalg.eigh(0.5 * (V0 + V0.conj().T))
    w = np.clip(w, 0.0, None)
    Y = np.sqrt(w)[:, None] * U.conj().T
    Y = Y + 1e-3 * (rng.standard_normal((n, n))
                    + 1j * rng.standard_normal((n, n)))
    return np.ascontiguousarray(Y, dtype=complex)


def inner_maxmin_psd(system, lam, tol=1e-9, max_iter=5000, V0=None,
                     anneal="full", rng=None):
    """Maximize min_k [n_k(V) - lam d_k(V)] over {V PSD, diag = 1}.

    Returns (Vbar, F, info); F is the attained min at Vbar in raw units.
    info["converged"] is False when the iteration budget was exhausted; the
    best iterate is still returned."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = system.n
    if rng is None:
        rng = np.random.default_rng(0)
    if V0 is None:
        V0 = np.ones((n, n), dtype=complex)
    Mk, offs = _combined(system, lam)
    scale = max(float(np.max(np.abs(Mk))) * n, float(np.max(np.abs(offs))),
                1e-300)
    Ms = np.ascontiguousarray(Mk / scale, dtype=complex)
    off_n = np.ascontiguousarray(offs / scale, dtype=float)
    temps = np.asarray(FULL_ANNEAL if anneal == "full" else WARM_ANNEAL,
                       dtype=float)

    V0 = np.asarray(V0, dtype=complex)
    val0 = float(np.min(np.real(np.einsum("kij,ji->k", Ms, V0)) + off_n))
    Y0 = _factor_init(V0, rng)
    Yf, val_f, it_f = _kernel.lse_ascent(Ms, off_n, Y0, temps, max_iter, tol,
                                         60, 0.1)
    Vf = Yf.conj().T @ Yf
    # rank-one polish from the principal eigenvector
    w, U = np.linalg.eigh(0.5 * (Vf + Vf.conj().T))
    y1 = np.ascontiguousarray(U[:, -1].conj()[None, :])
    Y1, val_1, it_1 = _kernel.lse_ascent(Ms, off_n, y1, temps,
                                         max(max_iter - it_f, 200), tol, 60,
                                         0.1)
    if val_1 > val_f:
        V = Y1.conj().T @ Y1
        val = val_1
    else:
        V = Vf
        val = val_f
    # the ascent starts from a perturbed factor; never return worse than V0
    val = float(np.min(np.real(np.einsum("kij,ji->k", Ms, V)) + off_n))
    if val < val0:
        V, val = V0, val0
    iters = it_f + it_1
    info = {"iterations": iters, "converged": iters < max_iter,
            "value": val * scale}
    return 0.5 * (V + V.conj().T), float(val * scale), info


def dinkelbach_solve(system, eps1=1e-4, max_outer=30, V0=None, rng=None,
                     inner_tol=1e-9, inner_max_iter=5000):
    """Generalized Dinkelbach iteration for the max-min of affine ratios.

    lambda starts at 0 and is updated to the min ratio at each inner solution;
    terminates when the residual F = min_k [n_k - lambda d_k], normalized by
    the largest denominator at the iterate, drops below eps1. Warm starts keep
    the lambda sequence non-decreasing."""
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    n = system.n
    if rng is None:
        rng = np.random.default_rng(0)
    if V0 is None:
        V0 = np.ones((n, n), dtype=complex)
    lam = 0.0
    V = V0
    history = []
    converged = False
    F_norm = np.inf
    for it in range(max_outer):
        anneal = "full" if it == 0 else "warm"
        V, F, _ = inner_maxmin_psd(system, lam, tol=inner_tol,
                                   max_iter=inner_max_iter, V0=V,
                                   anneal=anneal, rng=rng)
        num, den = system.ratio_values(V)
        F_norm = F / float(den.max())
        lam_new = float(np.min(num / den))
        if history and lam_new < history[-1] - 1e-12 * (1.0 + abs(history[-1])):
            raise RuntimeError("Dinkelbach lambda sequence decreased; "
                               "inner solver returned a worse iterate")
        history.append(lam_new)
        lam = lam_new
        if F_norm < eps1:
            converged = True
            break
    w = np.linalg.eigvalsh(V)
    rank_ratio = float(w[-2] / w[-1]) if n > 1 and w[-1] > 0 else 0.0
    return PSDSolution(Vbar=V, lambda_star=lam, F_final=float(F_norm),
                       rank_ratio=rank_ratio,
                       dinkelbach_iterations=len(history),
                       converged=converged, lambda_history=history)


def extract_vector(Vbar, system, L=1000, rng=None, rank_one_threshold=1e-6):
    """Lifted vector from the PSD solution: principal eigenvector when the
    solution is (numerically) rank one, otherwise the best of L Gaussian
    randomization candidates.

    Randomized candidates carry amplitude freedom the unit-modulus constraint
    forbids, so each candidate is scored at its feasibility projection (unit
    phases, auxiliary entry fixed at one) and the winner is returned raw;
    recover_phases reproduces the same projection."""
    Vbar = np.asarray(Vbar)
    w, U = np.linalg.eigh(0.5 * (Vbar + Vbar.conj().T))
    w = np.clip(w, 0.0, None)
    if w[-1] <= 0:
        raise ValueError("PSD solution is zero")
    ratio = w[-2] / w[-1] if Vbar.shape[0] > 1 else 0.0
    if ratio < rank_one_threshold:
        return np.sqrt(w[-1]) * U[:, -1]
    if L < 1:
        raise ValueError("randomization requires L >= 1 for rank > 1")
    if rng is None:
        rng = np.random.default_rng(0)
    n = Vbar.shape[0]
    r = (rng.standard_normal((L, n)) + 1j * rng.standard_normal((L, n))) \
        / np.sqrt(2)
    cands = r @ (np.sqrt(w)[:, None] * U.conj().T).conj().T
    cands = np.vstack([np.sqrt(w[-1]) * U[:, -1], cands])
    last = cands[:, -1:].copy()
    last[np.abs(last) < 1e-300] = 1.0
    proj = np.exp(1j * np.angle(cands / last))
    vals = np.atleast_1d(system.min_ratio_at(proj))
    return cands[int(np.argmax(vals))]


def recover_phases(vbar):
    """Unit-modulus reflect vector from a lifted solution: fix the auxiliary
    last entry to one, keep only the phases of the first N entries."""
    vbar = np.asarray(vbar, dtype=complex)
    if abs(vbar[-1]) < 1e-12:
        raise ValueError("degenerate lifted solution: auxiliary entry is zero")
    return np.exp(1j * np.angle(vbar[:-1] / vbar[-1]))


def solve_reflect(system, v_init, eps1=1e-4, max_outer=30, L=1000, rng=None,
                  V0=None):
    """Full reflect-vector update for fixed G, p: Dinkelbach + extraction +
    phase recovery, never returning a vector worse than v_init under the
    system objective. Returns (v, PSDSolution)."""
    vbar0 = np.concatenate([v_init, [1.0]])
    if V0 is None:
        V0 = np.outer(vbar0, vbar0.conj())
    sol = dinkelbach_solve(system, eps1=eps1, max_outer=max_outer, V0=V0,
                           rng=rng)
    vbar = extract_vector(sol.Vbar, system, L=L, rng=rng)
    v = recover_phases(vbar)
    if system.min_ratio_at(np.concatenate([v, [1.0]])) \
            < system.min_ratio_at(vbar0):
        v = np.asarray(v_init, dtype=complex)
    return v, sol
