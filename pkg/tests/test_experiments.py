import math

import numpy as np
import pytest

from irsmiso.cli import main as cli_main
from irsmiso.experiments import (ChannelSampler, ResultTable, Scenario,
                                 bpsk_ber_trial, flat_budget,
                                 multiuser_budget, net_rate, read_config,
                                 run_scenario, single_user_budget, trial_rng,
                                 write_csv)
from irsmiso.estimation import nmse_theory
from irsmiso.sysmodel import SystemConfig, path_loss, PathLossModel
from conftest import rng_for


class TestNetRate:
    def test_training_fills_interval(self):
        assert net_rate(3.0, 10, 0.005, 0.05) == 0.0

    def test_zero_sinr(self):
        assert net_rate(0.0, 9, 2e-4, 0.05) == 0.0

    def test_scalar_example(self):
        # S = 9 sub-phases of 200 us inside a 50 ms interval at SINR 3
        got = net_rate(3.0, 9, 2e-4, 0.05)
        assert got == pytest.approx((1 - 0.036) * 2.0, rel=1e-12)
        assert got == pytest.approx(1.928, rel=1e-12)

    def test_infeasible_training(self):
        with pytest.raises(ValueError):
            net_rate(1.0, 300, 2e-4, 0.05)
        with pytest.raises(ValueError):
            net_rate(-0.5, 9, 2e-4, 0.05)


class TestLinkBudgets:
    def test_multiuser_geometry(self):
        cfg = SystemConfig(M=8, N=8, K=4, S=9)
        budget = multiuser_budget(cfg, rng_for(0))
        # BS-IRS distance is 100 m with 5 dBi at both ends
        want = path_loss(PathLossModel(26.0, 2.2), 100.0) * 10.0
        assert budget.beta1 == pytest.approx(want, rel=1e-12)
        assert budget.beta2.shape == (4,)
        assert np.all(budget.beta2 > 0) and np.all(budget.beta_d > 0)

    def test_single_user_geometry_peaks_near_irs(self):
        cfg = SystemConfig(M=4, N=8, K=1, S=9)
        b_near = single_user_budget(cfg, 50.0)
        b_far = single_user_budget(cfg, 120.0)
        assert b_near.beta2[0] > b_far.beta2[0]

    def test_direct_link_penetration(self):
        cfg = SystemConfig(M=4, N=8, K=1, S=9)
        b = single_user_budget(cfg, 50.0)
        bare = path_loss(PathLossModel(28.0, 3.67), 50.0)
        # 5 dBi BS gain minus 15 dB penetration = -10 dB net
        assert b.beta_d[0] == pytest.approx(bare * 0.1, rel=1e-12)


class TestBpskBer:
    def test_awgn_matches_q_function(self):
        # M = 1, no IRS, perfect knowledge: textbook coherent BPSK
        hd = np.array([1.0 + 0j])
        H0 = np.zeros((1, 0), dtype=complex)
        snr = 10 ** 0.4
        n = 200_000
        ber = bpsk_ber_trial(hd, H0, hd, H0, snr, 1.0, n, rng=rng_for(1))
        want = 0.5 * math.erfc(math.sqrt(snr))
        sigma = math.sqrt(want * (1 - want) / n)
        assert abs(ber - want) <= 3 * sigma

    def test_noiseless_no_errors(self):
        hd = np.array([1.0 + 0j, 0.5 + 0j])
        H0 = np.zeros((2, 0), dtype=complex)
        ber = bpsk_ber_trial(hd, H0, hd, H0, 1.0, 1e-12, 10_000,
                             rng=rng_for(2))
        assert ber == 0.0

    def test_reflect_gain_lowers_error_rate(self):
        cfg = SystemConfig(M=4, N=10, K=1, S=11)
        sampler = ChannelSampler(cfg, rank_mode="rank_one")
        ch = sampler.draw(flat_budget(cfg, 0.25), rng_for(3))
        noise = rng_for(4).normal(0.0, np.sqrt(0.5), 50_000)
        with_irs = bpsk_ber_trial(ch.hd[0], ch.H0[0], ch.hd[0], ch.H0[0],
                                  1.0, 1.0, 50_000, noise_re=noise)
        without = bpsk_ber_trial(ch.hd[0], ch.H0[0][:, :0], ch.hd[0],
                                 ch.H0[0][:, :0], 1.0, 1.0, 50_000,
                                 noise_re=noise)
        assert with_irs <= without


class TestCsv:
    def test_header_only_for_empty_table(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(ResultTable(["a", "b"]), path)
        assert path.read_text(encoding="utf-8") == "a,b\n"

    def test_round_trip_twelve_digits(self, tmp_path):
        path = tmp_path / "vals.csv"
        table = ResultTable(["x", "y"])
        values = [math.pi, 1.23456789012e-7]
        table.add(*values)
        write_csv(table, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        parsed = [float(tok) for tok in lines[1].split(",")]
        for got, want in zip(parsed, values):
            assert format(got, ".12g") == format(want, ".12g")

    def test_column_order(self, tmp_path):
        path = tmp_path / "cols.csv"
        table = ResultTable(["first", "second", "third"])
        table.add(1, 2, 3)
        write_csv(table, path)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "first,second,third"

    def test_row_width_checked(self):
        table = ResultTable(["a", "b"])
        with pytest.raises(ValueError):
            table.add(1)

    def test_write_error_carries_path(self, tmp_path):
        table = ResultTable(["a"])
        with pytest.raises(OSError, match="no/such"):
            write_csv(table, str(tmp_path / "no" / "such" / "file.csv"))


class TestConfigParsing:
    def test_values_and_comments(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("""
# commented line
m = 8
sigma_sq = 1e-16   # trailing comment
protocol = mmse-dft
s_grid = 9, 20, 100
flag = true
""", encoding="utf-8")
        got = read_config(cfg)
        assert got == {"m": 8, "sigma_sq": 1e-16, "protocol": "mmse-dft",
                       "s_grid": (9, 20, 100), "flag": True}

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just some words\n", encoding="utf-8")
        with pytest.raises(ValueError, match="key = value"):
            read_config(cfg)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown keys"):
            Scenario(name="nmse", params={"bogus": 1}, trials=2, seed=0)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            Scenario(name="nmse", params={"sigma_grid": ()}, trials=2, seed=0)

    def test_bad_trials_rejected(self):
        with pytest.raises(ValueError):
            Scenario(name="nmse", params={}, trials=0, seed=0)

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ValueError):
            Scenario(name="does-not-exist", params={}, trials=1, seed=0)


class TestDeterminism:
    def test_identical_bytes_for_same_seed(self, tmp_path):
        sc = {"name": "nmse", "params": {"sigma_grid": (1e-4,)},
              "trials": 1, "seed": 7}
        paths = []
        for i in range(2):
            table = run_scenario(Scenario(**sc))
            path = tmp_path / f"run{i}.csv"
            write_csv(table, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_seed_changes_output(self, tmp_path):
        t1 = run_scenario(Scenario(name="nmse",
                                   params={"sigma_grid": (1e-4,)},
                                   trials=3, seed=1))
        t2 = run_scenario(Scenario(name="nmse",
                                   params={"sigma_grid": (1e-4,)},
                                   trials=3, seed=2))
        assert t1.rows != t2.rows

    def test_trial_rng_keyed_independently(self):
        a = trial_rng(5, 0, 1).standard_normal(4)
        b = trial_rng(5, 0, 2).standard_normal(4)
        c = trial_rng(5, 0, 1).standard_normal(4)
        assert not np.allclose(a, b)
        assert np.array_equal(a, c)


class TestNmseScenario:
    def test_theory_columns_exact(self):
        table = run_scenario(Scenario(
            name="nmse", params={"sigma_grid": (1e-5, 1e-3)}, trials=2,
            seed=0))
        cols = table.columns
        for row in table.rows:
            sigma_sq = row[0]
            for proto in ("mmse-dft", "ls-dft", "mmse-onoff", "ls-onoff"):
                for role in ("direct", "cascaded"):
                    idx = cols.index(
                        f"{proto.replace('-', '_')}_{role}_theory")
                    want = nmse_theory(proto, role, M=4, S=11, P_C=1.0,
                                       tau_S=5e-5, sigma_sq=sigma_sq,
                                       beta_d=1.0, beta_k=1.0)
                    assert row[idx] == want

    def test_standard_error_shrinks_with_trials(self):
        # doubling the trials should shrink the SE by about 1/sqrt(2)
        ses = []
        for trials in (600, 1200):
            table = run_scenario(Scenario(
                name="nmse", params={"sigma_grid": (1e-4,)}, trials=trials,
                seed=3))
            idx = table.columns.index("mmse_dft_direct_se")
            ses.append(table.rows[0][idx])
        ratio = ses[1] / ses[0]
        assert 1 / np.sqrt(2) - 0.1 <= ratio <= 1 / np.sqrt(2) + 0.1


class TestCli:
    def test_nmse_run_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = cli_main(["nmse", "--trials", "2", "--seed", "1",
                         "--out", str(out), "sigma_grid=1e-4"])
        assert code == 0
        assert out.exists()
        header = out.read_text(encoding="utf-8").splitlines()[0]
        assert header.startswith("sigma_sq,")

    def test_bad_override_fails(self, tmp_path, capsys):
        code = cli_main(["nmse", "--trials", "1",
                         "--out", str(tmp_path / "x.csv"), "bogus=3"])
        assert code != 0
        assert "error" in capsys.readouterr().err

    def test_protocol_flag_rejected_when_inapplicable(self, tmp_path,
                                                      capsys):
        code = cli_main(["nmse", "--trials", "1", "--protocol", "mmse-dft",
                         "--out", str(tmp_path / "x.csv")])
        assert code != 0

    def test_config_file_used(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("sigma_grid = 1e-4\ntrials = 2\n", encoding="utf-8")
        out = tmp_path / "cfg_out.csv"
        code = cli_main(["nmse", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 2
