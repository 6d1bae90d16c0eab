"""MMSE and LS channel estimation from reduced training observations.

Per user the training phase yields one length-M observation per channel
vector: block 0 observes the direct channel hd, block n+1 the cascaded column
h0_n = h1_n h2[n]. With reduced-observation noise variance c per entry, the
Bayesian filters are

  direct:    hd_hat = beta R (beta R + c I)^{-1} robs,
             Psi = beta^2 R (beta R + c I)^{-1} R,  Psi_err = beta R - Psi
  cascaded:  h0_hat = a h1 h1^H (a h1 h1^H + c I)^{-1} robs
           = [a / (c + a ||h1||^2)] h1 (h1^H robs),  a = r_nn beta2,

where the second form follows from Sherman-Morrison and is the one computed.
The LS estimates are the reduced observations unchanged.

Closed-form NMSE values for every protocol/channel combination live in
nmse_theory; the DFT-protocol reduced noise variance is c = sigma^2 /
(S P_C tau_S).
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ChannelEstimate:
    """Per-user estimates of the direct and N cascaded channel vectors with
    estimate covariances Psi and error covariances PsiTilde."""

    hd_hat: np.ndarray                 # (M,)
    h0_hat: np.ndarray                 # (N, M)
    Psi_d: np.ndarray                  # (M, M)
    PsiTilde_d: np.ndarray             # (M, M)
    Psi_n: np.ndarray                  # (N, M, M)
    PsiTilde_n: np.ndarray             # (N, M, M)
    estimator: str                     # "mmse-dft" | "ls-dft" | "mmse-onoff" | "ls-onoff"

    @property
    def H0_hat(self):
        """Cascaded-matrix estimate (M, N) with column n = h0_hat[n]."""
        return self.h0_hat.T.copy()

    def overall(self, v):
        """Estimated overall channel hd_hat + H0_hat v."""
        return self.hd_hat + self.h0_hat.T @ v


def mmse_direct(obs, R_bs, beta_d, c):
    """MMSE estimate of the direct channel from its reduced observation.

    Returns (hd_hat, Psi, PsiTilde). c = 0 degenerates to the identity filter
    (noiseless observation), with zero error covariance."""
    if c < 0:
        raise ValueError("noise scale c must be nonnegative")
    R_bs = np.asarray(R_bs, dtype=complex)
    M = R_bs.shape[0]
    prior = beta_d * R_bs
    if c == 0.0:
        return np.asarray(obs, dtype=complex).copy(), prior.copy(), np.zeros((M, M), dtype=complex)
    A = prior + c * np.eye(M)
    W = prior @ np.linalg.solve(A, np.eye(M))
    hd_hat = W @ np.asarray(obs, dtype=complex)
    Psi = prior @ np.linalg.solve(A, prior)
    Psi = 0.5 * (Psi + Psi.conj().T)
    PsiTilde = prior - Psi
    return hd_hat, Psi, PsiTilde


def mmse_cascaded(obs, h1_n, beta2, r_nk, c):
    """MMSE estimate of one cascaded column via the Sherman-Morrison form.

    Returns (h0_hat, Psi, PsiTilde); Psi has rank at most one. A zero prior
    (beta2 r_nk = 0 or h1_n = 0) yields the zero estimate."""
    if c < 0:
        raise ValueError("noise scale c must be nonnegative")
    h1_n = np.asarray(h1_n, dtype=complex)
    M = h1_n.shape[0]
    a = r_nk * beta2
    e1 = float(np.real(h1_n.conj() @ h1_n))
    outer = np.outer(h1_n, h1_n.conj())
    denom = c + a * e1
    if a * e1 == 0.0 or denom == 0.0:
        z = np.zeros((M, M), dtype=complex)
        return np.zeros(M, dtype=complex), z, a * outer
    coef = a / denom
    h0_hat = coef * h1_n * (h1_n.conj() @ np.asarray(obs, dtype=complex))
    Psi = (a * coef * e1) * outer
    PsiTilde = (a * c / denom) * outer
    return h0_hat, Psi, PsiTilde


def ls_estimate(reduced, block_noise_vars, H1=None, R_bs=None, beta_d=None,
                beta2=None, r_nn=None, protocol="dft"):
    """LS estimates: the reduced observation blocks verbatim.

    block_noise_vars gives the per-entry noise variance of each block; the
    error covariance of block i is that variance times I. Prior statistics, if
    supplied, fill the estimate covariances Psi = prior + noise."""
    reduced = np.asarray(reduced)
    N = reduced.shape[0] - 1
    M = reduced.shape[1]
    eye = np.eye(M, dtype=complex)
    PsiTilde_d = block_noise_vars[0] * eye
    Psi_d = PsiTilde_d.copy()
    if R_bs is not None and beta_d is not None:
        Psi_d = beta_d * np.asarray(R_bs, dtype=complex) + PsiTilde_d
    PsiTilde_n = np.stack([block_noise_vars[n + 1] * eye for n in range(N)])
    Psi_n = PsiTilde_n.copy()
    if H1 is not None and beta2 is not None:
        r = np.ones(N) if r_nn is None else np.asarray(r_nn)
        Psi_n = np.stack([
            beta2 * r[n] * np.outer(H1[:, n], H1[:, n].conj())
            + PsiTilde_n[n] for n in range(N)])
    return ChannelEstimate(hd_hat=reduced[0].copy(), h0_hat=reduced[1:].copy(),
                           Psi_d=Psi_d, PsiTilde_d=PsiTilde_d,
                           Psi_n=Psi_n, PsiTilde_n=PsiTilde_n,
                           estimator=f"ls-{protocol}")


def estimate_channels(obs, channels, design, estimator,
                      with_covariances=True):
    """Run the selected estimator for every user.

    obs is a PilotObservation from the matching design; channels supplies the
    prior statistics (R_bs, betas, H1, diag of R_irs). Returns a list of
    ChannelEstimate, one per user. Monte Carlo loops that only consume the
    point estimates can pass with_covariances=False to skip assembling the
    per-column covariance stacks (fields left as None); the cascaded filters
    then run as one vectorized scaled-projection sweep, identical to the
    per-column path.

    Under the ON/OFF schedule the direct block carries noise variance
    sigma^2/(P_C tau_S). Its MMSE cascaded estimator subtracts the direct
    MMSE estimate from the raw sub-phase observation, so the effective noise
    seen by block n is the sub-phase noise plus the residual direct error,
    approximated as white at variance tr(PsiTilde_d)/M."""
    est = estimator.lower().replace("_", "-")
    if est not in ("mmse-dft", "ls-dft", "mmse-onoff", "ls-onoff"):
        raise ValueError(f"unknown estimator {estimator!r}")
    kind, proto = est.split("-")
    if proto != design.protocol:
        raise ValueError(f"estimator {est} does not match design protocol "
                         f"{design.protocol!r}")
    K = channels.K
    N = channels.N
    M = channels.M
    out = []
    r_diag = np.stack([np.real(np.diag(channels.R_irs[k])) for k in range(K)])
    block_vars = design.block_noise_vars()
    h1_energy = np.sum(np.abs(channels.H1) ** 2, axis=0)
    for k in range(K):
        red = obs.reduced[k]
        if kind == "ls":
            if with_covariances:
                out.append(ls_estimate(red, block_vars, H1=channels.H1,
                                       R_bs=channels.R_bs[k],
                                       beta_d=channels.beta_d[k],
                                       beta2=channels.beta2[k],
                                       r_nn=r_diag[k], protocol=proto))
            else:
                out.append(ChannelEstimate(
                    hd_hat=red[0].copy(), h0_hat=red[1:].copy(),
                    Psi_d=None, PsiTilde_d=None, Psi_n=None, PsiTilde_n=None,
                    estimator=est))
            continue
        c_dir = block_vars[0]
        hd_hat, Psi_d, PsiTilde_d = mmse_direct(
            red[0], channels.R_bs[k], channels.beta_d[k], c_dir)
        if proto == "dft":
            c_cas = design.noise_scale
            blocks = red[1:]
        else:
            c_cas = design.raw_noise_var + float(np.real(np.trace(PsiTilde_d))) / M
            blocks = obs.raw[k][1:] - hd_hat[None, :]
        if with_covariances:
            h0_hat = np.empty((N, M), dtype=complex)
            Psi_n = np.empty((N, M, M), dtype=complex)
            PsiTilde_n = np.empty((N, M, M), dtype=complex)
            for n in range(N):
                h0_hat[n], Psi_n[n], PsiTilde_n[n] = mmse_cascaded(
                    blocks[n], channels.H1[:, n], channels.beta2[k],
                    r_diag[k][n], c_cas)
        else:
            a = channels.beta2[k] * r_diag[k]
            denom = c_cas + a * h1_energy
            coef = np.divide(a, denom, out=np.zeros(N),
                             where=(a * h1_energy) != 0.0)
            dots = np.einsum("mn,nm->n", channels.H1.conj(), blocks)
            h0_hat = (coef * dots)[:, None] * channels.H1.T
            Psi_n = PsiTilde_n = None
        out.append(ChannelEstimate(hd_hat=hd_hat, h0_hat=h0_hat,
                                   Psi_d=Psi_d, PsiTilde_d=PsiTilde_d,
                                   Psi_n=Psi_n, PsiTilde_n=PsiTilde_n,
                                   estimator=est))
    return out


def _noise_ratio(protocol, S, P_C, tau_S, sigma_sq):
    if protocol.endswith("dft"):
        return sigma_sq / (S * P_C * tau_S)
    return sigma_sq / (P_C * tau_S)


def nmse_theory(protocol, role, *, M, S, P_C, tau_S, sigma_sq, beta_d=None,
                beta_k=None):
    """Closed-form NMSE for each protocol and channel role.

    With c = sigma^2/(S P_C tau_S) and x = sigma^2/(P_C tau_S):

      ls-dft     direct c/beta_d            cascaded c/beta_k
      mmse-dft   direct c/(beta_d + c)      cascaded c/(M beta_k + c)
      ls-onoff   direct x/beta_d            cascaded 2x/beta_k
      mmse-onoff direct x/(beta_d + x)
                 cascaded 1/(1 + M beta_k (1+x) / (x^2 + x (beta_d + 1)))

    The mmse-onoff cascaded form is used as stated even though the beta_d + 1
    term sums a gain and a pure number; it coincides with the estimator
    implemented in estimate_channels when beta_d = 1.
    """
    proto = protocol.lower().replace("_", "-")
    for name, val in (("M", M), ("S", S), ("P_C", P_C), ("tau_S", tau_S)):
        if val <= 0:
            raise ValueError(f"{name} must be positive")
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be nonnegative")
    q = _noise_ratio(proto, S, P_C, tau_S, sigma_sq)
    if role == "direct":
        if beta_d is None or beta_d <= 0:
            raise ValueError("direct role requires beta_d > 0")
        if proto == "ls-dft" or proto == "ls-onoff":
            return q / beta_d
        if proto == "mmse-dft" or proto == "mmse-onoff":
            return q / (beta_d + q)
    elif role == "cascaded":
        if beta_k is None or beta_k <= 0:
            raise ValueError("cascaded role requires beta_k > 0")
        if proto == "ls-dft":
            return q / beta_k
        if proto == "mmse-dft":
            return q / (M * beta_k + q)
        if proto == "ls-onoff":
            return 2.0 * q / beta_k
        if proto == "mmse-onoff":
            if beta_d is None or beta_d <= 0:
                raise ValueError("mmse-onoff cascaded requires beta_d > 0")
            return 1.0 / (1.0 + M * beta_k * (1.0 + q)
                          / (q * q + q * (beta_d + 1.0)))
    raise ValueError(f"unknown protocol/role combination {protocol!r}/{role!r}")


def nmse_gap(protocol_pair, role, *, M, S, P_C, tau_S, sigma_sq, beta_d=None,
             beta_k=None):
    """LS NMSE minus MMSE NMSE for the given protocol family; nonnegative.

    For the DFT pair the closed forms are c^2/(beta_d (beta_d + c)) (direct)
    and (c^2 + c beta_k (M-1)) / (beta_k (c + M beta_k)) (cascaded)."""
    pair = protocol_pair.lower()
    if pair == "dft":
        c = sigma_sq / (S * P_C * tau_S)
        if role == "direct":
            return c * c / (beta_d * (beta_d + c))
        if role == "cascaded":
            return (c * c + c * beta_k * (M - 1)) / (beta_k * (c + M * beta_k))
        raise ValueError(f"unknown role {role!r}")
    if pair == "onoff":
        kw = dict(M=M, S=S, P_C=P_C, tau_S=tau_S, sigma_sq=sigma_sq,
                  beta_d=beta_d, beta_k=beta_k)
        return (nmse_theory("ls-onoff", role, **kw)
                - nmse_theory("mmse-onoff", role, **kw))
    raise ValueError(f"unknown protocol pair {protocol_pair!r}")


def empirical_nmse(estimates, truths):
    """Monte Carlo NMSE: averaged squared error norm over averaged squared
    channel norm. Arrays must stack trials along the first axis."""
    estimates = np.asarray(estimates)
    truths = np.asarray(truths)
    if estimates.shape != truths.shape or estimates.shape[0] < 1:
        raise ValueError("need matching nonempty trial stacks")
    energy = float(np.sum(np.abs(truths) ** 2))
    if energy == 0.0:
        raise ValueError("zero-energy truth makes NMSE undefined")
    return float(np.sum(np.abs(estimates - truths) ** 2)) / energy
