"""Pure numpy fallback for the smoothed max-min ascent kernel.

Mirrors irsmiso._ascent.lse_ascent: maximize min_k [Re tr(M_k Y^H Y) + offs_k]
over factors Y with unit-norm columns (V = Y^H Y then is PSD with unit
diagonal), via log-sum-exp smoothed gradient ascent with backtracking line
search on the oblique manifold.
"""

import numpy as np


def _colnormalize(Y):
    nrm = np.linalg.norm(Y, axis=0)
    zero = nrm == 0.0
    if np.any(zero):
        Y[0, zero] = 1.0
        nrm[zero] = 1.0
    Y /= nrm[None, :]
    return Y


def _tvals(Ms, offs, Y):
    V = Y.conj().T @ Y
    return np.real(np.einsum("kij,ji->k", Ms, V)) + offs


def _lse(t, T):
    m = t.min()
    return m - T * np.log(np.sum(np.exp(-(t - m) / T)))


def lse_ascent(Ms, offs, Y0, temps, max_iter, tol, patience, alpha0):
    """Returns (Ybest, best_min_value, iterations)."""
    n = Ms.shape[1]
    Y = _colnormalize(np.array(Y0, dtype=complex, order="C"))
    t = _tvals(Ms, offs, Y)
    best = t.min()
    Ybest = Y.copy()
    it = 0
    alpha = alpha0
    for T in temps:
        Y = Ybest.copy()
        t = _tvals(Ms, offs, Y)
        f0 = _lse(t, T)
        stall = 0
        while it < max_iter:
            it += 1
            m = t.min()
            w = np.exp(-(t - m) / T)
            w /= w.sum()
            G = np.einsum("k,kij->ij", w, Ms)
            D = Y @ G
            ip = np.real(np.sum(Y.conj() * D, axis=0))
            D -= Y * ip[None, :]
            gn = np.linalg.norm(D)
            if gn < 1e-300:
                break
            ss = np.sqrt(n) / gn
            accepted = False
            for _ in range(40):
                Yt = _colnormalize(Y + (alpha * ss) * D)
                tt = _tvals(Ms, offs, Yt)
                f1 = _lse(tt, T)
                if f1 > f0:
                    accepted = True
                    break
                alpha *= 0.5
                if alpha < 1e-18:
                    break
            if not accepted:
                break
            Y, t, f0 = Yt, tt, f1
            alpha = min(alpha * 1.3, 1e3)
            fmin = t.min()
            if fmin > best + tol * (1.0 + abs(best)):
                best = fmin
                Ybest = Y.copy()
                stall = 0
            else:
                stall += 1
                if stall > patience:
                    break
    return Ybest, float(best), it
