import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsmiso.estimation import (empirical_nmse, estimate_channels,
                                ls_estimate, mmse_cascaded, mmse_direct,
                                nmse_gap, nmse_theory)
from irsmiso.sysmodel import (CorrelationSpec, build_channel_set,
                              correlation_matrix)
from irsmiso.training import dft_training_matrix, onoff_training_matrix, \
    process_observations, simulate_uplink
from conftest import rng_for, small_config


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2)


def mmse_cascaded_explicit(obs, h1_n, beta2, r_nk, c):
    """Filter with the matrix inverse written out; oracle for the
    Sherman-Morrison path."""
    M = h1_n.shape[0]
    prior = r_nk * beta2 * np.outer(h1_n, h1_n.conj())
    Q = np.linalg.inv(prior + c * np.eye(M))
    return prior @ Q @ obs


class TestMmseDirect:
    def test_zero_noise_identity_filter(self, rng):
        obs = cn(rng, 4)
        R = correlation_matrix(CorrelationSpec("exponential", 4, eta=0.5))
        hd, Psi, PsiT = mmse_direct(obs, R, 0.8, 0.0)
        assert np.allclose(hd, obs)
        assert np.allclose(PsiT, 0.0)
        assert np.allclose(Psi, 0.8 * R)

    def test_identity_prior_scalar_filter(self, rng):
        obs = cn(rng, 5)
        beta, c = 0.7, 0.2
        hd, _, _ = mmse_direct(obs, np.eye(5), beta, c)
        assert np.allclose(hd, beta / (beta + c) * obs)

    def test_error_trace_identity_prior(self):
        beta, c, M = 1.3, 0.4, 6
        _, _, PsiT = mmse_direct(np.zeros(M), np.eye(M), beta, c)
        nmse = np.real(np.trace(PsiT)) / (M * beta)
        assert nmse == pytest.approx(c / (beta + c), rel=1e-12)

    def test_covariance_decomposition(self, rng):
        R = correlation_matrix(CorrelationSpec("exponential", 4, eta=0.9))
        _, Psi, PsiT = mmse_direct(cn(rng, 4), R, 0.5, 0.1)
        assert np.allclose(Psi + PsiT, 0.5 * R, atol=1e-14)
        assert np.linalg.eigvalsh(Psi).min() > -1e-12
        assert np.linalg.eigvalsh(PsiT).min() > -1e-12

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            mmse_direct(np.zeros(2), np.eye(2), 1.0, -0.1)


class TestMmseCascaded:
    def test_matches_explicit_inverse(self, rng):
        for _ in range(10):
            h1 = cn(rng, 4)
            obs = cn(rng, 4)
            got, _, _ = mmse_cascaded(obs, h1, 0.6, 0.9, 0.05)
            want = mmse_cascaded_explicit(obs, h1, 0.6, 0.9, 0.05)
            assert np.max(np.abs(got - want)) < 1e-10

    def test_zero_noise_projection(self, rng):
        h1 = cn(rng, 4)
        obs = cn(rng, 4)
        got, _, _ = mmse_cascaded(obs, h1, 1.0, 1.0, 0.0)
        proj = h1 * (h1.conj() @ obs) / np.real(h1.conj() @ h1)
        assert np.allclose(got, proj)

    def test_error_trace(self, rng):
        # columns of the LoS matrix have squared norm beta1 M
        M, beta1, beta2, c = 4, 0.5, 0.8, 0.3
        h1 = np.sqrt(beta1) * np.exp(1j * rng.uniform(0, 2 * np.pi, M))
        beta_k = beta1 * beta2
        _, _, PsiT = mmse_cascaded(np.zeros(M), h1, beta2, 1.0, c)
        nmse = np.real(np.trace(PsiT)) / (M * beta_k)
        assert nmse == pytest.approx(c / (M * beta_k + c), rel=1e-12)

    def test_zero_prior_degenerates(self, rng):
        got, Psi, PsiT = mmse_cascaded(cn(rng, 3), np.zeros(3), 1.0, 1.0, 0.1)
        assert np.all(got == 0) and np.all(Psi == 0) and np.all(PsiT == 0)

    def test_estimate_covariance_rank_one(self, rng):
        h1 = cn(rng, 5)
        _, Psi, _ = mmse_cascaded(cn(rng, 5), h1, 0.7, 1.0, 0.2)
        assert np.linalg.matrix_rank(Psi, tol=1e-12) <= 1


class TestLsEstimate:
    def test_zero_noise_exact(self, rng):
        cfg = small_config(M=3, N=3, K=1, S=4, sigma_sq=1e-9)
        ch = _channels(cfg, 1)
        d = dft_training_matrix(4, 3, cfg.tau_S, cfg.P_C, 0.0)
        obs = process_observations(simulate_uplink(ch, d, rng_for(2)), d)
        est = estimate_channels(obs, ch, d, "ls-dft")[0]
        assert np.allclose(est.hd_hat, ch.hd[0], atol=1e-12)
        assert np.allclose(est.h0_hat, ch.H0[0].T, atol=1e-12)

    def test_unbiased(self):
        cfg = small_config(M=2, N=2, K=1, S=3, sigma_sq=1e-3)
        ch = _channels(cfg, 3)
        d = dft_training_matrix(3, 2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        rng = rng_for(4)
        acc = np.zeros(2, dtype=complex)
        T = 10_000
        for _ in range(T):
            obs = process_observations(simulate_uplink(ch, d, rng), d)
            acc += estimate_channels(obs, ch, d, "ls-dft")[0].hd_hat
        tol = 6 * np.sqrt(d.noise_scale / T)
        assert np.max(np.abs(acc / T - ch.hd[0])) < tol

    def test_empirical_nmse_matches_theory(self):
        # channel redrawn per trial: the NMSE averages over fading too
        cfg = small_config(M=4, N=2, K=1, S=3, sigma_sq=2e-4, tau_S=1e-4)
        d = dft_training_matrix(3, 2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        rng = rng_for(6)
        ests, truths = [], []
        for t in range(10_000):
            ch = _channels(cfg, (5, t))
            obs = process_observations(simulate_uplink(ch, d, rng), d)
            ests.append(estimate_channels(obs, ch, d, "ls-dft")[0].hd_hat)
            truths.append(ch.hd[0])
        got = empirical_nmse(np.stack(ests), np.stack(truths))
        want = nmse_theory("ls-dft", "direct", M=4, S=3, P_C=cfg.P_C,
                           tau_S=cfg.tau_S, sigma_sq=cfg.sigma_sq, beta_d=1.0)
        assert abs(got - want) / want < 0.05


def _channels(cfg, seed, eta=0.0, beta=(1.0, 1.0, 1.0)):
    K = cfg.K
    kind = "exponential" if eta else "identity"
    R_bs = correlation_matrix(CorrelationSpec(kind, cfg.M, eta)).astype(complex)
    R_irs = correlation_matrix(CorrelationSpec(kind, cfg.N, eta)).astype(complex)
    return build_channel_set(
        cfg, beta[0], np.full(K, beta[1]), np.full(K, beta[2]),
        np.stack([R_bs] * K), np.stack([R_irs] * K), rng_for(seed))


class TestNmseTheory:
    FIG2 = dict(M=4, S=11, P_C=1.0, tau_S=5e-5, beta_d=1.0, beta_k=1.0)

    def test_ls_dft_direct_value(self):
        got = nmse_theory("ls-dft", "direct", sigma_sq=5e-7, **self.FIG2)
        assert got == pytest.approx(9.0909e-4, rel=1e-4)
        assert got == pytest.approx(5e-7 / (11 * 5e-5), rel=1e-12)

    def test_mmse_dft_direct_value(self):
        got = nmse_theory("mmse-dft", "direct", sigma_sq=5e-7, **self.FIG2)
        assert got == pytest.approx(9.0827e-4, rel=1e-4)
        c = 5e-7 / (11 * 5e-5)
        assert got == pytest.approx(c / (1 + c), rel=1e-12)

    def test_mmse_dft_cascaded_value(self):
        got = nmse_theory("mmse-dft", "cascaded", sigma_sq=5e-2, **self.FIG2)
        c = 5e-2 / (11 * 5e-5)
        assert got == pytest.approx(c / (4 + c), rel=1e-12)
        assert got == pytest.approx(0.95785, rel=1e-4)

    def test_ls_dft_cascaded_equals_direct_form(self):
        kw = dict(sigma_sq=3e-4, **self.FIG2)
        assert nmse_theory("ls-dft", "cascaded", **kw) == pytest.approx(
            nmse_theory("ls-dft", "direct", **kw), rel=1e-12)

    def test_onoff_factor_identities(self):
        # one-at-a-time training pays a factor S on the direct link and 2S
        # on the cascaded links relative to the DFT schedule
        for sigma_sq in (1e-6, 1e-4, 1e-2):
            kw = dict(sigma_sq=sigma_sq, **self.FIG2)
            assert nmse_theory("ls-onoff", "direct", **kw) == pytest.approx(
                11 * nmse_theory("ls-dft", "direct", **kw), rel=1e-12)
            assert nmse_theory("ls-onoff", "cascaded", **kw) == pytest.approx(
                2 * 11 * nmse_theory("ls-dft", "cascaded", **kw), rel=1e-12)

    def test_mmse_onoff_forms(self):
        kw = dict(sigma_sq=5e-5, **self.FIG2)
        x = 5e-5 / 5e-5
        assert nmse_theory("mmse-onoff", "direct", **kw) == pytest.approx(
            x / (1 + x), rel=1e-12)
        want = 1.0 / (1.0 + 4 * (1 + x) / (x * x + x * 2.0))
        assert nmse_theory("mmse-onoff", "cascaded", **kw) == pytest.approx(
            want, rel=1e-12)

    def test_unknown_combination(self):
        with pytest.raises(ValueError):
            nmse_theory("mmse-dft", "sideways", sigma_sq=1e-4, **self.FIG2)
        with pytest.raises(ValueError):
            nmse_theory("zf-dft", "direct", sigma_sq=1e-4, **self.FIG2)

    @given(st.floats(1e-8, 1e-1), st.floats(0.05, 2.0), st.floats(0.05, 2.0),
           st.integers(1, 16), st.integers(2, 64))
    @settings(max_examples=100, deadline=None)
    def test_mmse_never_worse_dft(self, sigma_sq, beta_d, beta_k, M, S):
        kw = dict(M=M, S=S, P_C=1.0, tau_S=5e-5, sigma_sq=sigma_sq,
                  beta_d=beta_d, beta_k=beta_k)
        for role in ("direct", "cascaded"):
            ls = nmse_theory("ls-dft", role, **kw)
            mm = nmse_theory("mmse-dft", role, **kw)
            assert mm <= ls
            assert 0.0 < mm < 1.0
            gap = nmse_gap("dft", role, **kw)
            assert gap >= 0.0
            assert ls - mm == pytest.approx(gap, rel=1e-12)


class TestNmseGap:
    def test_zero_noise_zero_gap(self):
        kw = dict(M=4, S=11, P_C=1.0, tau_S=5e-5, sigma_sq=0.0, beta_d=1.0,
                  beta_k=1.0)
        assert nmse_gap("dft", "direct", **kw) == 0.0

    def test_single_antenna_cascaded_matches_direct_form(self):
        # at M = 1 the cascaded gap collapses to c^2 / (beta_k (c + beta_k))
        kw = dict(M=1, S=9, P_C=1.0, tau_S=1e-4, sigma_sq=3e-4, beta_k=0.7,
                  beta_d=0.7)
        c = 3e-4 / (9 * 1e-4)
        assert nmse_gap("dft", "cascaded", **kw) == pytest.approx(
            c * c / (0.7 * (c + 0.7)), rel=1e-12)

    def test_direct_gap_value(self):
        kw = dict(M=4, S=11, P_C=1.0, tau_S=5e-5, sigma_sq=5e-7, beta_d=1.0,
                  beta_k=1.0)
        c = 9.0909090909e-4
        assert nmse_gap("dft", "direct", **kw) == pytest.approx(
            c * c / (1.0 * (1.0 + c)), rel=1e-8)
        assert nmse_gap("dft", "direct", **kw) == pytest.approx(8.26e-7,
                                                                rel=1e-2)

    def test_onoff_pair(self):
        kw = dict(M=4, S=11, P_C=1.0, tau_S=5e-5, sigma_sq=1e-4, beta_d=1.0,
                  beta_k=1.0)
        want = (nmse_theory("ls-onoff", "direct", **kw)
                - nmse_theory("mmse-onoff", "direct", **kw))
        assert nmse_gap("onoff", "direct", **kw) == pytest.approx(want)
        assert nmse_gap("onoff", "direct", **kw) >= 0.0


class TestEmpiricalNmse:
    def test_perfect_estimate(self, rng):
        x = cn(rng, 10, 4)
        assert empirical_nmse(x, x) == 0.0

    def test_zero_estimate(self, rng):
        x = cn(rng, 10, 4)
        assert empirical_nmse(np.zeros_like(x), x) == pytest.approx(1.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            empirical_nmse(np.ones((3, 2)), np.zeros((3, 2)))


class TestEstimateChannels:
    def test_protocol_mismatch(self):
        cfg = small_config(M=2, N=2, K=1, S=3)
        ch = _channels(cfg, 7)
        d = dft_training_matrix(3, 2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        obs = process_observations(simulate_uplink(ch, d, rng_for(8)), d)
        with pytest.raises(ValueError):
            estimate_channels(obs, ch, d, "mmse-onoff")
        with pytest.raises(ValueError):
            estimate_channels(obs, ch, d, "kalman-dft")

    def test_mmse_ignores_irs_cross_correlation(self):
        # the cascaded filter reads only the diagonal of R_irs: scrambling
        # the off-diagonal entries must not change a single bit
        cfg = small_config(M=3, N=4, K=1, S=5, sigma_sq=1e-4)
        ch = _channels(cfg, 9, eta=0.8)
        d = dft_training_matrix(5, 4, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        obs = process_observations(simulate_uplink(ch, d, rng_for(10)), d)
        est1 = estimate_channels(obs, ch, d, "mmse-dft")[0]
        scrambled = ch.R_irs.copy()
        noise = rng_for(11).standard_normal((4, 4)) * 0.3
        noise = noise + noise.T
        np.fill_diagonal(noise, 0.0)
        scrambled = scrambled + noise[None, :, :]
        ch2 = type(ch)(H1=ch.H1, h2=ch.h2, hd=ch.hd, H0=ch.H0,
                       beta1=ch.beta1, beta2=ch.beta2, beta_d=ch.beta_d,
                       R_bs=ch.R_bs, R_irs=scrambled, z=ch.z, z_d=ch.z_d)
        est2 = estimate_channels(obs, ch2, d, "mmse-dft")[0]
        assert np.array_equal(est1.h0_hat, est2.h0_hat)
        assert np.array_equal(est1.hd_hat, est2.hd_hat)

    def test_mmse_decomposition_invariant(self):
        cfg = small_config(M=3, N=2, K=2, S=4, sigma_sq=1e-3)
        ch = _channels(cfg, 12, eta=0.5, beta=(2.0, 0.5, 1.5))
        d = dft_training_matrix(4, 2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        obs = process_observations(simulate_uplink(ch, d, rng_for(13)), d)
        for k, est in enumerate(estimate_channels(obs, ch, d, "mmse-dft")):
            prior_d = ch.beta_d[k] * ch.R_bs[k]
            assert np.allclose(est.Psi_d + est.PsiTilde_d, prior_d,
                               atol=1e-14)
            for n in range(cfg.N):
                prior_n = ch.beta2[k] * np.real(ch.R_irs[k][n, n]) \
                    * np.outer(ch.H1[:, n], ch.H1[:, n].conj())
                assert np.allclose(est.Psi_n[n] + est.PsiTilde_n[n], prior_n,
                                   atol=1e-12)

    def test_orthogonality_principle_quick(self):
        # E[hhat (h - hhat)^H] vanishes for the Bayesian filters when the
        # average runs over fading and noise jointly
        cfg = small_config(M=3, N=2, K=1, S=3, sigma_sq=2e-4, tau_S=1e-4)
        d = dft_training_matrix(3, 2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        rng = rng_for(15)
        cross_d = np.zeros((3, 3), dtype=complex)
        cross_c = np.zeros((3, 3), dtype=complex)
        Psi_d = Psi_c = None
        T = 20_000
        for t in range(T):
            ch = _channels(cfg, (14, t), eta=0.6)
            obs = process_observations(simulate_uplink(ch, d, rng), d)
            est = estimate_channels(obs, ch, d, "mmse-dft")[0]
            cross_d += np.outer(est.hd_hat, (ch.hd[0] - est.hd_hat).conj())
            cross_c += np.outer(est.h0_hat[0],
                                (ch.H0[0][:, 0] - est.h0_hat[0]).conj())
            Psi_d, Psi_c = est.Psi_d, est.Psi_n[0]
        for cross, Psi in ((cross_d, Psi_d), (cross_c, Psi_c)):
            rel = np.linalg.norm(cross / T) / np.real(np.trace(Psi))
            assert rel < 0.1

    @pytest.mark.parametrize("estimator,make", [
        ("mmse-dft", "dft"), ("ls-dft", "dft"),
        ("mmse-onoff", "onoff"), ("ls-onoff", "onoff")])
    def test_fast_path_matches_reference(self, estimator, make):
        # covariance-free sweep must reproduce the per-column estimates
        cfg = small_config(M=3, N=5, K=2, S=6, sigma_sq=2e-4)
        ch = _channels(cfg, 20, eta=0.4, beta=(1.2, 0.6, 0.9))
        d = (dft_training_matrix(6, 5, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
             if make == "dft"
             else onoff_training_matrix(5, cfg.tau_S, cfg.P_C, cfg.sigma_sq))
        obs = process_observations(simulate_uplink(ch, d, rng_for(21)), d)
        ref = estimate_channels(obs, ch, d, estimator)
        fast = estimate_channels(obs, ch, d, estimator,
                                 with_covariances=False)
        for r, f in zip(ref, fast):
            assert np.allclose(f.hd_hat, r.hd_hat, atol=1e-14)
            assert np.allclose(f.h0_hat, r.h0_hat, atol=1e-14)
            assert f.Psi_n is None and f.PsiTilde_n is None

    def test_mmse_onoff_direct_uses_raw_noise_scale(self):
        cfg = small_config(M=3, N=2, K=1, S=3, sigma_sq=1e-4)
        ch = _channels(cfg, 16)
        d = onoff_training_matrix(2, cfg.tau_S, cfg.P_C, cfg.sigma_sq)
        obs = process_observations(simulate_uplink(ch, d, rng_for(17)), d)
        est = estimate_channels(obs, ch, d, "mmse-onoff")[0]
        x = d.raw_noise_var
        want, _, _ = mmse_direct(obs.reduced[0][0], ch.R_bs[0], 1.0, x)
        assert np.allclose(est.hd_hat, want)
