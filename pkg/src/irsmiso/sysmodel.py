"""System and channel model for an IRS-assisted multi-user MISO downlink.

A base station with M antennas serves K single-antenna users, assisted by an
IRS with N passive reflecting elements. Links:

  H1   (M x N)  deterministic LoS BS-to-IRS matrix, per-entry magnitude sqrt(beta1)
  h2_k (N,)     correlated Rayleigh IRS-to-user-k channel
  hd_k (M,)     correlated Rayleigh direct BS-to-user-k channel
  H0_k (M x N)  cascaded channel H1 diag(h2_k^T); column n = h1_n * h2_k[n]

The overall downlink channel for reflect vector v is h_k = hd_k + H0_k v.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one scenario. Powers in W, durations in s."""

    M: int = 8
    N: int = 16
    K: int = 4
    P_max: float = 5.0
    sigma_n_sq: float = 1e-11          # downlink noise, -80 dBm
    P_C: float = 1.0                   # uplink pilot power per user
    sigma_sq: float = 1e-4             # uplink training noise (J)
    tau: float = 0.05                  # coherence interval
    tau_S: float = 2e-4                # training sub-phase duration (50K us)
    S: int = 17                        # number of training sub-phases
    carrier_wavelength: float = 0.11992
    d_BS: float = 0.05996              # half wavelength at 2.5 GHz
    d_IRS: float = 0.05996
    bs_gain_dBi: float = 5.0
    irs_gain_dBi: float = 5.0
    direct_penetration_loss_dB: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.K < 1:
            raise ValueError("M, N, K must be positive integers")
        for name in ("P_max", "sigma_n_sq", "P_C", "sigma_sq", "tau", "tau_S"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.S < self.N + 1:
            raise ValueError("S >= N+1 required for the training pseudo-inverse")


@dataclass(frozen=True)
class PathLossModel:
    """Distance-based loss 10^(-C_dB/10) / d^alpha."""

    C_dB: float
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("path-loss exponent must be nonnegative")


def path_loss(model, d):
    """Linear power gain at distance d (m). d must be positive."""
    if np.any(np.asarray(d) <= 0):
        raise ValueError("distance must be positive")
    return 10.0 ** (-model.C_dB / 10.0) / d ** model.alpha


@dataclass(frozen=True)
class CorrelationSpec:
    """Spatial correlation matrix spec: identity, exponential(eta), or custom."""

    kind: str
    dimension: int
    eta: float = 0.0
    matrix: np.ndarray | None = None


def correlation_matrix(spec):
    """Hermitian PSD correlation matrix with unit diagonal (trace = dimension)."""
    d = spec.dimension
    if spec.kind == "identity":
        return np.eye(d)
    if spec.kind == "exponential":
        if not 0 <= spec.eta < 1:
            raise ValueError("exponential correlation requires 0 <= eta < 1")
        idx = np.arange(d)
        return spec.eta ** np.abs(idx[:, None] - idx[None, :]) + 0.0j
    if spec.kind == "custom":
        R = np.asarray(spec.matrix)
        if R.shape != (d, d):
            raise ValueError("custom correlation has wrong shape")
        if not np.allclose(R, R.conj().T, atol=1e-10):
            raise ValueError("custom correlation must be Hermitian")
        if not np.allclose(np.diag(R).real, 1.0, atol=1e-10):
            raise ValueError("custom correlation must have unit diagonal")
        if np.linalg.eigvalsh(R).min() < -1e-10:
            raise ValueError("custom correlation must be PSD")
        return R.astype(complex)
    raise ValueError(f"unknown correlation kind {spec.kind!r}")


def matrix_sqrt(R):
    """Hermitian PSD square root; eigenvalues below 1e-12 clipped to zero."""
    w, U = np.linalg.eigh(np.asarray(R, dtype=complex))
    w = np.where(w < 1e-12, 0.0, w)
    return (U * np.sqrt(w)) @ U.conj().T


@dataclass(frozen=True)
class LosAngles:
    """LoS geometry of the BS-IRS link.

    For the high-rank model: per-IRS-element departure angles at the BS
    (theta_dep, phi_dep, length N) and per-BS-antenna arrival angles at the
    IRS (theta_arr, phi_arr, length M). For the rank-one model all four are
    scalars shared across elements.
    """

    theta_dep: np.ndarray
    phi_dep: np.ndarray
    theta_arr: np.ndarray
    phi_arr: np.ndarray


def draw_los_angles(M, N, rng):
    """Per-element angles, elevation uniform in [-pi/2, pi/2], azimuth in [-pi, pi]."""
    return LosAngles(
        theta_dep=rng.uniform(-np.pi / 2, np.pi / 2, N),
        phi_dep=rng.uniform(-np.pi, np.pi, N),
        theta_arr=rng.uniform(-np.pi / 2, np.pi / 2, M),
        phi_arr=rng.uniform(-np.pi, np.pi, M),
    )


def gen_los_channel(cfg, beta1, angles, rank_mode="high_rank"):
    """Deterministic LoS BS-to-IRS matrix, entry magnitudes exactly sqrt(beta1).

    Entry (m, n) has phase (2 pi / lambda) [(m-1) d_BS sin(theta_dep_n) sin(phi_dep_n)
    + (n-1) d_IRS sin(theta_arr_m) sin(phi_arr_m)]. rank_one shares a single
    angle pair across elements, which factorizes the matrix.
    """
    M, N = cfg.M, cfg.N
    if angles is None:
        raise ValueError("LoS angles are required")
    if rank_mode == "rank_one":
        s_dep = np.full(N, np.sin(np.ravel(angles.theta_dep)[0])
                        * np.sin(np.ravel(angles.phi_dep)[0]))
        s_arr = np.full(M, np.sin(np.ravel(angles.theta_arr)[0])
                        * np.sin(np.ravel(angles.phi_arr)[0]))
    elif rank_mode == "high_rank":
        if len(angles.theta_dep) != N or len(angles.theta_arr) != M:
            raise ValueError("high_rank needs N departure and M arrival angle pairs")
        s_dep = np.sin(angles.theta_dep) * np.sin(angles.phi_dep)
        s_arr = np.sin(angles.theta_arr) * np.sin(angles.phi_arr)
    else:
        raise ValueError(f"unknown rank_mode {rank_mode!r}")
    two_pi_ovl = 2.0 * np.pi / cfg.carrier_wavelength
    phase = two_pi_ovl * (
        cfg.d_BS * np.outer(np.arange(M), s_dep)
        + cfg.d_IRS * s_arr[:, None] * np.arange(N)[None, :]
    )
    return np.sqrt(beta1) * np.exp(1j * phase)


def complex_gaussian(rng, shape):
    """Standard circular complex Gaussian, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def gen_user_channels(R_irs_sqrts, R_bs_sqrts, beta2, beta_d, rng):
    """Correlated Rayleigh draws h2_k = sqrt(beta2_k) R_irs_k^(1/2) z_k and
    hd_k = sqrt(beta_d_k) R_bs_k^(1/2) z_dk. Returns (h2, hd, z, z_d)."""
    K = len(beta2)
    N = R_irs_sqrts[0].shape[0]
    M = R_bs_sqrts[0].shape[0]
    if np.any(np.asarray(beta2) < 0) or np.any(np.asarray(beta_d) < 0):
        raise ValueError("path-loss factors must be nonnegative")
    z = complex_gaussian(rng, (K, N))
    z_d = complex_gaussian(rng, (K, M))
    h2 = np.stack([np.sqrt(beta2[k]) * (R_irs_sqrts[k] @ z[k]) for k in range(K)])
    hd = np.stack([np.sqrt(beta_d[k]) * (R_bs_sqrts[k] @ z_d[k]) for k in range(K)])
    return h2, hd, z, z_d


def cascade(H1, h2_k):
    """Cascaded matrix H0_k = H1 diag(h2_k^T); column n = h1_n * h2_k[n]."""
    H1 = np.asarray(H1)
    h2_k = np.asarray(h2_k)
    if H1.shape[1] != h2_k.shape[0]:
        raise ValueError("H1 columns must match h2 length")
    return H1 * h2_k[None, :]


def overall_channel(hd_k, H0_k, v):
    """Overall downlink channel hd_k + H0_k v for reflect vector v."""
    hd_k = np.asarray(hd_k)
    H0_k = np.asarray(H0_k)
    v = np.asarray(v)
    if H0_k.shape != (hd_k.shape[0], v.shape[0]):
        raise ValueError("dimension mismatch between hd, H0 and v")
    return hd_k + H0_k @ v


@dataclass
class ChannelSet:
    """One realization of all links plus the statistics that generated it."""

    H1: np.ndarray                     # (M, N)
    h2: np.ndarray                     # (K, N)
    hd: np.ndarray                     # (K, M)
    H0: np.ndarray                     # (K, M, N)
    beta1: float
    beta2: np.ndarray                  # (K,)
    beta_d: np.ndarray                 # (K,)
    R_bs: np.ndarray                   # (K, M, M)
    R_irs: np.ndarray                  # (K, N, N)
    z: np.ndarray = field(repr=False, default=None)      # (K, N) fading draws
    z_d: np.ndarray = field(repr=False, default=None)    # (K, M)

    @property
    def M(self):
        return self.H1.shape[0]

    @property
    def N(self):
        return self.H1.shape[1]

    @property
    def K(self):
        return self.h2.shape[0]

    def overall(self, v):
        """Stacked overall channels (K, M) for a reflect vector v."""
        return self.hd + np.einsum("kmn,n->km", self.H0, v)


def build_channel_set(cfg, beta1, beta2, beta_d, R_bs, R_irs, rng,
                      rank_mode="high_rank", angles=None):
    """Draw a full ChannelSet. Correlation inputs are per-user matrices."""
    K = cfg.K
    beta2 = np.asarray(beta2, dtype=float)
    beta_d = np.asarray(beta_d, dtype=float)
    R_bs = np.asarray(R_bs, dtype=complex)
    R_irs = np.asarray(R_irs, dtype=complex)
    if angles is None:
        angles = draw_los_angles(cfg.M, cfg.N, rng)
    H1 = gen_los_channel(cfg, beta1, angles, rank_mode)
    bs_sqrts = [matrix_sqrt(R_bs[k]) for k in range(K)]
    irs_sqrts = [matrix_sqrt(R_irs[k]) for k in range(K)]
    h2, hd, z, z_d = gen_user_channels(irs_sqrts, bs_sqrts, beta2, beta_d, rng)
    H0 = np.stack([cascade(H1, h2[k]) for k in range(K)])
    return ChannelSet(H1=H1, h2=h2, hd=hd, H0=H0, beta1=float(beta1),
                      beta2=beta2, beta_d=beta_d, R_bs=R_bs, R_irs=R_irs,
                      z=z, z_d=z_d)
