"""Uplink pilot training: reflection designs and observation processing.

The coherence interval starts with S uplink training sub-phases. In sub-phase
s the IRS applies reflect vector v_s and every user sends an orthogonal pilot
of energy P_C tau_S. Correlating with user k's pilot gives the per-sub-phase
observation

    r_sk = hd_k + H0_k v_s + n_sk / (P_C tau_S),

with effective noise variance sigma^2 / (P_C tau_S) per complex entry.
Stacking sub-phases, r_k = (Vtr kron I_M) hbar_k + noise, where row s of Vtr
is [1, v_s^T] and hbar_k stacks hd_k and the N cascaded columns. Applying the
left pseudo-inverse of (Vtr kron I_M) reduces to one length-M observation per
channel vector.

Pilot sequences are not materialized: orthogonality makes the post-correlation
observation exact in distribution, so the per-sub-phase noise is drawn
directly at variance sigma^2 / (P_C tau_S).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainingDesign:
    """Reflection schedule for the training phase.

    Vtr is S x (N+1) with an all-ones first column; entries bounded by 1 in
    magnitude. noise_scale is c = sigma^2 / (S P_C tau_S), the per-entry
    variance of the reduced-observation noise under the DFT design.
    """

    Vtr: np.ndarray
    protocol: str                      # "dft" | "onoff"
    S: int
    tau_S: float
    P_C: float
    sigma_sq: float

    @property
    def N(self):
        return self.Vtr.shape[1] - 1

    @property
    def noise_scale(self):
        return self.sigma_sq / (self.S * self.P_C * self.tau_S)

    @property
    def raw_noise_var(self):
        """Per-entry variance of the pre-reduction observation noise."""
        return self.sigma_sq / (self.P_C * self.tau_S)

    def block_noise_vars(self):
        """Per-entry noise variance of each reduced block (length N+1)."""
        return self.raw_noise_var * np.real(
            np.diag(processed_noise_covariance_factor(self)))


def dft_training_matrix(S, N, tau_S=1.0, P_C=1.0, sigma_sq=0.0):
    """Leading N+1 columns of the S x S DFT matrix: entry (s, n) =
    exp(-j 2 pi (s-1)(n-1) / S). Achieves the minimal noise scale 1/S."""
    if S < N + 1:
        raise ValueError("DFT design requires S >= N+1")
    s = np.arange(S)[:, None]
    n = np.arange(N + 1)[None, :]
    Vtr = np.exp(-2j * np.pi * s * n / S)
    return TrainingDesign(Vtr=Vtr, protocol="dft", S=S, tau_S=tau_S,
                          P_C=P_C, sigma_sq=sigma_sq)


def onoff_training_matrix(N, tau_S=1.0, P_C=1.0, sigma_sq=0.0):
    """One-element-at-a-time schedule: S = N+1, first sub-phase all elements
    off, then element n on alone in sub-phase n+1."""
    if N < 1:
        raise ValueError("ON/OFF design requires N >= 1")
    Vtr = np.zeros((N + 1, N + 1), dtype=complex)
    Vtr[:, 0] = 1.0
    Vtr[1:, 1:] = np.eye(N)
    return TrainingDesign(Vtr=Vtr, protocol="onoff", S=N + 1, tau_S=tau_S,
                          P_C=P_C, sigma_sq=sigma_sq)


def processed_noise_covariance_factor(design):
    """(Vtr^H Vtr)^(-1); scaled by sigma^2/(P_C tau_S) it is the per-block
    covariance factor of the reduced-observation noise.

    Both named schedules have closed forms: the DFT Gram is S I, and the
    ON/OFF Gram [[N+1, 1^T], [1, I]] inverts to [[1, -1^T], [-1, I + 1 1^T]]
    by the block inversion lemma. Other matrices go through a dense inverse."""
    N = design.N
    if design.protocol == "dft":
        return np.eye(N + 1) / design.S
    if design.protocol == "onoff":
        out = np.eye(N + 1) + 1.0
        out[0, 0] = 1.0
        out[0, 1:] = -1.0
        out[1:, 0] = -1.0
        return out.astype(complex)
    gram = design.Vtr.conj().T @ design.Vtr
    if np.linalg.matrix_rank(gram) < N + 1:
        raise np.linalg.LinAlgError("training matrix is rank deficient")
    return np.linalg.inv(gram)


@dataclass
class PilotObservation:
    """Per-user raw (K, S, M) and reduced (K, N+1, M) training observations.

    Reduced block 0 observes hd_k; block n+1 observes the cascaded column
    h0_nk."""

    raw: np.ndarray
    reduced: np.ndarray


def simulate_uplink(channels, design, rng):
    """Simulate the S-sub-phase uplink training. Returns raw observations of
    shape (K, S, M): r_sk = hd_k + H0_k v_s + effective noise."""
    K, M = channels.hd.shape
    S = design.S
    V = design.Vtr[:, 1:]              # (S, N) reflect vectors per sub-phase
    raw = np.empty((K, S, M), dtype=complex)
    std = np.sqrt(design.raw_noise_var / 2.0)
    for k in range(K):
        means = channels.hd[k][None, :] + V @ channels.H0[k].T
        noise = std * (rng.standard_normal((S, M))
                       + 1j * rng.standard_normal((S, M)))
        raw[k] = means + noise
    return raw


def process_observations(raw, design):
    """Reduce raw observations with the left pseudo-inverse of Vtr kron I_M.

    Uses (Vtr kron I)^+ = Vtr^+ kron I, so only the S x (N+1) factor is
    inverted; verified against the dense pseudo-inverse in tests."""
    pinv = processed_noise_covariance_factor(design) @ design.Vtr.conj().T
    reduced = np.einsum("ns,ksm->knm", pinv, raw)
    return PilotObservation(raw=raw, reduced=reduced)
