"""Monte Carlo harness: scenario runners, link budgets, BER, CSV output.

Scenarios (CLI subcommand names):

  nmse        estimator NMSE vs training noise, all four protocols + theory
  ber         single-user BPSK error rate vs SNR under estimated beamformers
  rate-single single-user rate vs BS-user distance, perfect and imperfect CSI
  subphase    net min-rate vs number of training sub-phases S (multi-user AO)
  minrate-n   min-rate vs IRS size N, with a no-IRS large-array baseline
  converge    per-iteration objective of the alternating optimization

Every trial draws from an rng keyed by (seed, grid index, trial index), so
results are independent of execution order and reproducible byte-for-byte.
Default geometry: BS at (0, 0); multi-user scenarios place the IRS at
(0, 100) with users uniform in [-30, 30] x [70, 130]; the single-user sweep
places the IRS at (50, 10) and the user at (d_u, 0). Antenna gains and the
direct-link penetration loss are folded into the per-link path gains.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .sysmodel import (ChannelSet, CorrelationSpec, PathLossModel,
                       SystemConfig, cascade, complex_gaussian,
                       correlation_matrix, draw_los_angles, gen_los_channel,
                       matrix_sqrt, path_loss)
from .training import dft_training_matrix, onoff_training_matrix, \
    process_observations, simulate_uplink
from .estimation import estimate_channels, mmse_direct, nmse_theory
from .beamforming import ao_maxmin, olp_solve, single_user_closed_form, \
    sinr_values

LOS_PATH_LOSS = PathLossModel(C_dB=26.0, alpha=2.2)
NLOS_PATH_LOSS = PathLossModel(C_dB=28.0, alpha=3.67)
BS_POS = np.array([0.0, 0.0])
IRS_POS_MULTI = np.array([0.0, 100.0])
IRS_POS_SINGLE = np.array([50.0, 10.0])

PROTOCOLS = ("mmse-dft", "ls-dft", "mmse-onoff", "ls-onoff")


def trial_rng(seed, *key):
    """Deterministic per-trial generator keyed by (seed, *key)."""
    return np.random.default_rng([int(seed)] + [int(k) for k in key])


def net_rate(gamma, S, tau_S, tau):
    """Training-discounted rate (1 - S tau_S / tau) log2(1 + gamma)."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    if S * tau_S > tau:
        raise ValueError("training exceeds the coherence interval")
    return (1.0 - S * tau_S / tau) * math.log2(1.0 + gamma)


@dataclass
class LinkBudget:
    """Per-link large-scale gains with antenna gains and penetration folded in."""

    beta1: float
    beta2: np.ndarray                  # (K,)
    beta_d: np.ndarray                 # (K,)


def _gains(cfg):
    g_bs = 10.0 ** (cfg.bs_gain_dBi / 10.0)
    g_irs = 10.0 ** (cfg.irs_gain_dBi / 10.0)
    pen = 10.0 ** (-cfg.direct_penetration_loss_dB / 10.0)
    return g_bs, g_irs, pen


def multiuser_budget(cfg, rng, irs_pos=IRS_POS_MULTI):
    """Random user drop in the square [-30, 30] x [70, 130]."""
    users = np.column_stack([rng.uniform(-30.0, 30.0, cfg.K),
                             rng.uniform(70.0, 130.0, cfg.K)])
    return _budget_from_positions(cfg, users, irs_pos)


def single_user_budget(cfg, d_u, irs_pos=IRS_POS_SINGLE):
    """User on the x-axis at distance d_u from the BS."""
    return _budget_from_positions(cfg, np.array([[d_u, 0.0]]), irs_pos)


def _budget_from_positions(cfg, users, irs_pos):
    g_bs, g_irs, pen = _gains(cfg)
    d_bi = np.linalg.norm(irs_pos - BS_POS)
    beta1 = path_loss(LOS_PATH_LOSS, d_bi) * g_bs * g_irs
    d_iu = np.linalg.norm(users - irs_pos[None, :], axis=1)
    d_bu = np.linalg.norm(users - BS_POS[None, :], axis=1)
    beta2 = path_loss(NLOS_PATH_LOSS, d_iu) * g_irs
    beta_d = path_loss(NLOS_PATH_LOSS, d_bu) * g_bs * pen
    return LinkBudget(beta1=beta1, beta2=beta2, beta_d=beta_d)


def flat_budget(cfg, beta):
    """Identical gain on every link (used by the BER study)."""
    return LinkBudget(beta1=beta, beta2=np.full(cfg.K, beta),
                      beta_d=np.full(cfg.K, beta))


class ChannelSampler:
    """Draws ChannelSets with fixed statistics; correlation roots cached."""

    def __init__(self, cfg, eta=0.0, rank_mode="high_rank"):
        self.cfg = cfg
        self.rank_mode = rank_mode
        kind = "exponential" if eta > 0 else "identity"
        self.R_bs = correlation_matrix(
            CorrelationSpec(kind, cfg.M, eta)).astype(complex)
        self.R_irs = correlation_matrix(
            CorrelationSpec(kind, cfg.N, eta)).astype(complex)
        self._bs_sqrt = matrix_sqrt(self.R_bs)
        self._irs_sqrt = matrix_sqrt(self.R_irs)

    def draw(self, budget, rng):
        cfg = self.cfg
        K = cfg.K
        angles = draw_los_angles(cfg.M, cfg.N, rng)
        H1 = gen_los_channel(cfg, budget.beta1, angles, self.rank_mode)
        z = complex_gaussian(rng, (K, cfg.N))
        z_d = complex_gaussian(rng, (K, cfg.M))
        h2 = np.sqrt(budget.beta2)[:, None] * (z @ self._irs_sqrt.T)
        hd = np.sqrt(budget.beta_d)[:, None] * (z_d @ self._bs_sqrt.T)
        H0 = np.stack([cascade(H1, h2[k]) for k in range(K)])
        return ChannelSet(H1=H1, h2=h2, hd=hd, H0=H0,
                          beta1=float(budget.beta1), beta2=budget.beta2,
                          beta_d=budget.beta_d,
                          R_bs=np.broadcast_to(self.R_bs, (K, cfg.M, cfg.M)),
                          R_irs=np.broadcast_to(self.R_irs, (K, cfg.N, cfg.N)),
                          z=z, z_d=z_d)


def bpsk_ber_trial(hd, H0, est_hd, est_H0, power, sigma_n_sq, n_symbols,
                   rng=None, noise_re=None):
    """Symbol error fraction for one channel realization.

    Beamformers come from the (possibly mismatched) estimates: matched-filter
    precoding and reflect phases aligned to the estimated direct channel.
    Detection is coherent on the true effective channel; by symmetry only the
    +1 symbol is simulated. A shared noise_re array pairs protocols."""
    if n_symbols < 1:
        raise ValueError("need at least one symbol")
    v, g = single_user_closed_form(est_hd, est_H0)
    h = np.asarray(hd) + np.asarray(H0) @ v
    heff = abs(h.conj() @ g)
    if noise_re is None:
        noise_re = rng.normal(0.0, np.sqrt(sigma_n_sq / 2.0), n_symbols)
    errors = int(np.count_nonzero(np.sqrt(power) * heff + noise_re < 0.0))
    return errors / len(noise_re)


@dataclass
class ResultTable:
    """Rectangular result set; one row per grid point."""

    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row width does not match schema")
        self.rows.append(list(values))


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def write_csv(table, path):
    """UTF-8 CSV, declared column order, floats at 12 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(table.columns) + "\n")
            for row in table.rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write result table to {path!r}: {exc}") from exc


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def read_config(path):
    """Parse a key = value config file; '#' starts a comment.

    Values become int, float, bool, or comma-separated numeric lists when the
    text allows it, strings otherwise. Key validity is checked against the
    scenario's allowed set when the Scenario is built, so typos fail loudly."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            out[key.strip()] = _parse_value(text.strip())
    return out


def _parse_value(text):
    if "," in text:
        return tuple(_parse_value(part.strip())
                     for part in text.split(",") if part.strip())
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


@dataclass
class Scenario:
    """One experiment: a named runner plus its validated parameters."""

    name: str
    params: dict
    trials: int
    seed: int

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        allowed, defaults = SCENARIOS[self.name][1:]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ValueError(
                f"unknown keys for scenario {self.name!r}: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.params)
        self.params = merged
        for key in allowed:
            if key.endswith("_grid") and len(np.atleast_1d(merged[key])) == 0:
                raise ValueError(f"{key} must be non-empty")


def run_scenario(scenario):
    """Execute a scenario; deterministic given (name, params, trials, seed)."""
    runner = SCENARIOS[scenario.name][0]
    return runner(scenario.params, scenario.trials, scenario.seed)


# --------------------------------------------------------------------------
# nmse: estimator accuracy vs training noise (all four protocols + theory)

def _nmse_config(p, sigma_sq):
    return SystemConfig(M=int(p["m"]), N=int(p["n_irs"]), K=1,
                        P_C=float(p["p_c"]), sigma_sq=float(sigma_sq),
                        tau_S=float(p["tau_s"]), S=int(p["s"]),
                        tau=1.0, bs_gain_dBi=0.0, irs_gain_dBi=0.0,
                        direct_penetration_loss_dB=0.0)


def run_nmse(p, trials, seed):
    beta = float(p["beta"])
    cols = ["sigma_sq"]
    for proto in PROTOCOLS:
        tag = proto.replace("-", "_")
        for role in ("direct", "cascaded"):
            cols += [f"{tag}_{role}", f"{tag}_{role}_se", f"{tag}_{role}_theory"]
    table = ResultTable(cols)
    for gi, sigma_sq in enumerate(np.atleast_1d(p["sigma_grid"])):
        cfg = _nmse_config(p, sigma_sq)
        sampler = ChannelSampler(cfg, eta=float(p["eta"]))
        budget = flat_budget(cfg, beta)
        designs = {
            "dft": dft_training_matrix(cfg.S, cfg.N, cfg.tau_S, cfg.P_C,
                                       cfg.sigma_sq),
            "onoff": onoff_training_matrix(cfg.N, cfg.tau_S, cfg.P_C,
                                           cfg.sigma_sq),
        }
        acc = {key: [] for key in
               [f"{pr}:{role}" for pr in PROTOCOLS
                for role in ("direct", "cascaded")]}
        for t in range(trials):
            rng = trial_rng(seed, gi, t)
            ch = sampler.draw(budget, rng)
            e_dir = cfg.M * beta
            e_cas = cfg.N * cfg.M * beta * beta
            for proto_name, design in designs.items():
                raw = simulate_uplink(ch, design, rng)
                obs = process_observations(raw, design)
                for kind in ("mmse", "ls"):
                    est = estimate_channels(obs, ch, design,
                                            f"{kind}-{proto_name}",
                                            with_covariances=False)[0]
                    key = f"{kind}-{proto_name}"
                    acc[f"{key}:direct"].append(
                        float(np.sum(np.abs(est.hd_hat - ch.hd[0]) ** 2))
                        / e_dir)
                    acc[f"{key}:cascaded"].append(
                        float(np.sum(np.abs(est.h0_hat - ch.H0[0].T) ** 2))
                        / e_cas)
        row = [float(sigma_sq)]
        for proto in PROTOCOLS:
            for role in ("direct", "cascaded"):
                mean, se = _mean_se(acc[f"{proto}:{role}"])
                theory = nmse_theory(proto, role, M=cfg.M, S=cfg.S,
                                     P_C=cfg.P_C, tau_S=cfg.tau_S,
                                     sigma_sq=float(sigma_sq), beta_d=beta,
                                     beta_k=beta * beta)
                row += [mean, se, theory]
        table.add(*row)
    return table


# --------------------------------------------------------------------------
# ber: single-user BPSK vs SNR; perfect CSI, both DFT estimators, no IRS

def run_ber(p, trials, seed):
    M = int(p["m"])
    N = int(p["n_irs"])
    n_symbols = int(p["n_symbols"])
    power = 1.0
    schemes = ("perfect", "mmse_dft", "ls_dft", "no_irs")
    cols = ["snr_db"]
    for s in schemes:
        cols += [f"ber_{s}", f"ber_{s}_se"]
    table = ResultTable(cols)
    for gi, snr_db in enumerate(np.atleast_1d(p["snr_grid_db"])):
        sigma_sq = power / 10.0 ** (float(snr_db) / 10.0)
        cfg = SystemConfig(M=M, N=N, K=1, sigma_n_sq=sigma_sq,
                           sigma_sq=sigma_sq, P_C=1.0, tau_S=1.0,
                           S=int(p["s"]), bs_gain_dBi=0.0, irs_gain_dBi=0.0,
                           direct_penetration_loss_dB=0.0)
        sampler = ChannelSampler(cfg, rank_mode="rank_one")
        budget = flat_budget(cfg, float(p["beta_override"]))
        design = dft_training_matrix(cfg.S, N, cfg.tau_S, cfg.P_C, sigma_sq)
        acc = {s: [] for s in schemes}
        for t in range(trials):
            rng = trial_rng(seed, gi, t)
            ch = sampler.draw(budget, rng)
            obs = process_observations(simulate_uplink(ch, design, rng),
                                       design)
            noise_re = rng.normal(0.0, np.sqrt(sigma_sq / 2.0), n_symbols)
            ests = {
                "perfect": (ch.hd[0], ch.H0[0]),
                "mmse_dft": None,
                "ls_dft": None,
            }
            for kind in ("mmse", "ls"):
                e = estimate_channels(obs, ch, design, f"{kind}-dft",
                                      with_covariances=False)[0]
                ests[f"{kind}_dft"] = (e.hd_hat, e.H0_hat)
            for s in ("perfect", "mmse_dft", "ls_dft"):
                ehd, eH0 = ests[s]
                acc[s].append(bpsk_ber_trial(ch.hd[0], ch.H0[0], ehd, eH0,
                                             power, sigma_sq, n_symbols,
                                             noise_re=noise_re))
            acc["no_irs"].append(bpsk_ber_trial(
                ch.hd[0], ch.H0[0][:, :0], ch.hd[0], ch.H0[0][:, :0],
                power, sigma_sq, n_symbols, noise_re=noise_re))
        row = [float(snr_db)]
        for s in schemes:
            mean, se = _mean_se(acc[s])
            row += [mean, se]
        table.add(*row)
    return table


# --------------------------------------------------------------------------
# rate-single: single-user rate vs distance (closed-form design)

def run_rate_single(p, trials, seed):
    M = int(p["m"])
    N = int(p["n_irs"])
    S = int(p["s"]) if p["s"] else N + 1
    protocol = p["protocol"]
    cfg0 = SystemConfig(M=M, N=N, K=1, sigma_sq=float(p["sigma_sq"]),
                        tau_S=float(p["tau_s"]), S=S,
                        P_max=float(p["p_max"]),
                        sigma_n_sq=float(p["sigma_n_sq"]))
    sampler = ChannelSampler(cfg0, eta=float(p["eta"]), rank_mode="rank_one")
    make_design = (dft_training_matrix if protocol.endswith("dft")
                   else lambda S_, N_, *a: onoff_training_matrix(N_, *a))
    design = make_design(S, N, cfg0.tau_S, cfg0.P_C, cfg0.sigma_sq)
    table = ResultTable(["d_u", "rate_perfect", "rate_perfect_se",
                         "rate_imperfect", "rate_imperfect_se"])
    for gi, d_u in enumerate(np.atleast_1d(p["d_u_grid"])):
        budget = single_user_budget(cfg0, float(d_u))
        perf, imperf = [], []
        for t in range(trials):
            rng = trial_rng(seed, gi, t)
            ch = sampler.draw(budget, rng)
            v, g = single_user_closed_form(ch.hd[0], ch.H0[0])
            gamma = cfg0.P_max * abs((ch.hd[0] + ch.H0[0] @ v).conj()
                                     @ g) ** 2 / cfg0.sigma_n_sq
            perf.append(math.log2(1.0 + gamma))
            obs = process_observations(simulate_uplink(ch, design, rng),
                                       design)
            est = estimate_channels(obs, ch, design, protocol,
                                    with_covariances=False)[0]
            v, g = single_user_closed_form(est.hd_hat, est.H0_hat)
            gamma = cfg0.P_max * abs((ch.hd[0] + ch.H0[0] @ v).conj()
                                     @ g) ** 2 / cfg0.sigma_n_sq
            imperf.append(net_rate(gamma, design.S, cfg0.tau_S, cfg0.tau))
        mp, sp = _mean_se(perf)
        mi, si = _mean_se(imperf)
        table.add(float(d_u), mp, sp, mi, si)
    return table


# --------------------------------------------------------------------------
# multi-user helpers shared by subphase / minrate-n / converge

def _ao_solve(cfg, ch, rng, csi, protocol, ao_kw=None):
    """AO solve for one channel realization; returns min true SINR."""
    ao_kw = ao_kw or {}
    if csi == "perfect":
        sol = ao_maxmin(ch.hd, ch.H0, cfg.sigma_n_sq, cfg.P_max, rng=rng,
                        **ao_kw)
        return float(sol.gamma.min()), sol
    design = (dft_training_matrix(cfg.S, cfg.N, cfg.tau_S, cfg.P_C,
                                  cfg.sigma_sq)
              if protocol.endswith("dft")
              else onoff_training_matrix(cfg.N, cfg.tau_S, cfg.P_C,
                                         cfg.sigma_sq))
    obs = process_observations(simulate_uplink(ch, design, rng), design)
    ests = estimate_channels(obs, ch, design, protocol,
                             with_covariances=False)
    hd_hat = np.stack([e.hd_hat for e in ests])
    H0_hat = np.stack([e.H0_hat for e in ests])
    sol = ao_maxmin(hd_hat, H0_hat, cfg.sigma_n_sq, cfg.P_max, rng=rng,
                    true_hd=ch.hd, true_H0=ch.H0, **ao_kw)
    return float(sol.gamma_true.min()), sol


def _ao_trial(cfg, sampler, rng, csi, protocol, ao_kw=None):
    """One multi-user draw and AO solve; returns min true SINR."""
    ch = sampler.draw(multiuser_budget(cfg, rng), rng)
    return _ao_solve(cfg, ch, rng, csi, protocol, ao_kw)


def run_subphase(p, trials, seed):
    """Net min-rate against the sub-phase count; one channel realization per
    trial is shared by every S value so the sweep is paired."""
    N = int(p["n_irs"])
    K = int(p["k"])
    csi = p["csi"]
    s_grid = np.atleast_1d(p["s_grid"]).astype(int)
    cfgs = [SystemConfig(M=int(p["m"]), N=N, K=K, S=int(S),
                         sigma_sq=float(p["sigma_sq"]),
                         tau_S=float(p["tau_s"]) * K) for S in s_grid]
    sampler = ChannelSampler(cfgs[0], eta=float(p["eta"]))
    rates = [[] for _ in s_grid]
    failures = [0 for _ in s_grid]
    for t in range(trials):
        ch = sampler.draw(multiuser_budget(cfgs[0], trial_rng(seed, t)),
                          trial_rng(seed, t))
        for gi, cfg in enumerate(cfgs):
            rng = trial_rng(seed, gi, t)
            try:
                gamma_min, _ = _ao_solve(cfg, ch, rng, csi, p["protocol"])
                rates[gi].append(net_rate(gamma_min, cfg.S, cfg.tau_S,
                                          cfg.tau))
            except (RuntimeError, np.linalg.LinAlgError):
                failures[gi] += 1
    table = ResultTable(["s", "net_min_rate", "net_min_rate_se", "failures"])
    for gi, S in enumerate(s_grid):
        mean, se = _mean_se(rates[gi])
        table.add(int(S), mean, se, failures[gi])
    return table


def _no_irs_rate(cfg, rng, csi):
    """Large-array baseline without an IRS: OLP on the direct channels only;
    imperfect CSI estimates them from a single training sub-phase."""
    budget = multiuser_budget(cfg, rng)
    hd = np.sqrt(budget.beta_d)[:, None] * complex_gaussian(rng, (cfg.K, cfg.M))
    if csi == "perfect":
        h = hd
        S_used = 0
    else:
        x = cfg.sigma_sq / (cfg.P_C * cfg.tau_S)
        noise = np.sqrt(x / 2) * (rng.standard_normal(hd.shape)
                                  + 1j * rng.standard_normal(hd.shape))
        obs = hd + noise
        h = np.stack([mmse_direct(obs[k], np.eye(cfg.M), budget.beta_d[k],
                                  x)[0] for k in range(cfg.K)])
        S_used = 1
    G, pw, _, _ = olp_solve(h, cfg.sigma_n_sq, cfg.P_max)
    gamma = sinr_values(hd, G, pw, cfg.sigma_n_sq)
    return net_rate(float(gamma.min()), S_used, cfg.tau_S, cfg.tau)


def run_minrate_n(p, trials, seed):
    K = int(p["k"])
    m_list = [int(m) for m in np.atleast_1d(p["m_list"])]
    cols = ["n_irs"]
    for m in m_list:
        cols += [f"rate_perfect_m{m}", f"rate_perfect_m{m}_se",
                 f"rate_imperfect_m{m}", f"rate_imperfect_m{m}_se"]
    cols += ["rate_noirs_perfect", "rate_noirs_perfect_se",
             "rate_noirs_imperfect", "rate_noirs_imperfect_se", "failures"]
    table = ResultTable(cols)
    m_base = int(p["m_baseline"])
    for gi, N in enumerate(np.atleast_1d(p["n_grid"]).astype(int)):
        acc = {}
        failures = 0
        for mi, m in enumerate(m_list):
            cfg = SystemConfig(M=m, N=int(N), K=K, S=int(N) + 1,
                               sigma_sq=float(p["sigma_sq"]),
                               tau_S=float(p["tau_s"]) * K)
            sampler = ChannelSampler(cfg, eta=float(p["eta"]))
            for csi in ("perfect", "imperfect"):
                rates = []
                for t in range(trials):
                    rng = trial_rng(seed, gi, mi, 0 if csi == "perfect" else 1, t)
                    try:
                        g_min, _ = _ao_trial(cfg, sampler, rng, csi,
                                             p["protocol"])
                        rates.append(net_rate(
                            g_min, 0 if csi == "perfect" else cfg.S,
                            cfg.tau_S, cfg.tau))
                    except (RuntimeError, np.linalg.LinAlgError):
                        failures += 1
                acc[(m, csi)] = _mean_se(rates)
        cfg_b = SystemConfig(M=m_base, N=1, K=K, S=2,
                             sigma_sq=float(p["sigma_sq"]),
                             tau_S=float(p["tau_s"]) * K)
        for csi in ("perfect", "imperfect"):
            rates = []
            for t in range(trials):
                rng = trial_rng(seed, gi, 99, 0 if csi == "perfect" else 1, t)
                try:
                    rates.append(_no_irs_rate(cfg_b, rng, csi))
                except (RuntimeError, np.linalg.LinAlgError):
                    failures += 1
            acc[("base", csi)] = _mean_se(rates)
        row = [int(N)]
        for m in m_list:
            row += list(acc[(m, "perfect")]) + list(acc[(m, "imperfect")])
        row += list(acc[("base", "perfect")]) + list(acc[("base", "imperfect")])
        row.append(failures)
        table.add(*row)
    return table


def run_converge(p, trials, seed):
    K = int(p["k"])
    N = int(p["n_irs"])
    cfg = SystemConfig(M=int(p["m"]), N=N, K=K, S=N + 1,
                       sigma_sq=float(p["sigma_sq"]),
                       tau_S=float(p["tau_s"]) * K)
    sampler = ChannelSampler(cfg, eta=float(p["eta"]))
    ao_kw = {"eps": float(p["eps"]), "max_outer": int(p["max_outer"])}
    histories = {"perfect": [], "imperfect": []}
    failures = 0
    for t in range(trials):
        for ci, csi in enumerate(("perfect", "imperfect")):
            rng = trial_rng(seed, ci, t)
            try:
                _, sol = _ao_trial(cfg, sampler, rng, csi, p["protocol"],
                                   ao_kw=ao_kw)
            except (RuntimeError, np.linalg.LinAlgError):
                failures += 1
                continue
            hist = (sol.objective_history if csi == "perfect"
                    else sol.true_history)
            histories[csi].append([net_rate(g, cfg.S, cfg.tau_S, cfg.tau)
                                   for g in hist])
    table = ResultTable(["iteration", "min_rate_perfect",
                         "min_rate_imperfect", "failures"])
    depth = max((len(h) for hs in histories.values() for h in hs), default=0)
    for it in range(depth):
        row = [it + 1]
        for csi in ("perfect", "imperfect"):
            vals = [h[min(it, len(h) - 1)] for h in histories[csi]]
            row.append(_mean_se(vals)[0] if vals else math.nan)
        row.append(failures if it == 0 else 0)
        table.add(*row)
    return table


_FIG2_SIGMA_GRID = (5e-7, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3,
                    1e-2, 5e-2)

SCENARIOS = {
    "nmse": (run_nmse,
             ("m", "n_irs", "s", "p_c", "tau_s", "sigma_grid", "eta", "beta"),
             {"m": 4, "n_irs": 10, "s": 11, "p_c": 1.0, "tau_s": 5e-5,
              "sigma_grid": _FIG2_SIGMA_GRID, "eta": 0.0, "beta": 1.0}),
    "ber": (run_ber,
            ("m", "n_irs", "s", "snr_grid_db", "n_symbols", "beta_override"),
            {"m": 4, "n_irs": 10, "s": 11,
             "snr_grid_db": tuple(range(-15, 21)), "n_symbols": 1000,
             "beta_override": 0.25}),
    "rate-single": (run_rate_single,
                    ("m", "n_irs", "s", "d_u_grid", "sigma_sq", "tau_s",
                     "p_max", "sigma_n_sq", "eta", "protocol"),
                    {"m": 4, "n_irs": 40, "s": 0,
                     "d_u_grid": tuple(range(10, 125, 5)),
                     "sigma_sq": 1e-16, "tau_s": 5e-5, "p_max": 5.0,
                     "sigma_n_sq": 1e-11, "eta": 0.0,
                     "protocol": "mmse-dft"}),
    "subphase": (run_subphase,
                 ("m", "n_irs", "k", "s_grid", "sigma_sq", "tau_s", "eta",
                  "protocol", "csi"),
                 {"m": 8, "n_irs": 8, "k": 4, "s_grid": (9, 20, 100),
                  "sigma_sq": 1e-16, "tau_s": 5e-5, "eta": 0.0,
                  "protocol": "mmse-dft", "csi": "imperfect"}),
    "minrate-n": (run_minrate_n,
                  ("k", "n_grid", "m_list", "m_baseline", "sigma_sq",
                   "tau_s", "eta", "protocol"),
                  {"k": 4, "n_grid": (8, 16, 32, 48), "m_list": (12, 15),
                   "m_baseline": 20, "sigma_sq": 1e-16, "tau_s": 5e-5,
                   "eta": 0.0, "protocol": "mmse-dft"}),
    "converge": (run_converge,
                 ("m", "n_irs", "k", "sigma_sq", "tau_s", "eta", "protocol",
                  "eps", "max_outer"),
                 {"m": 8, "n_irs": 16, "k": 4, "sigma_sq": 1e-16,
                  "tau_s": 5e-5, "eta": 0.0, "protocol": "mmse-dft",
                  "eps": 1e-4, "max_outer": 30}),
}
