"""Tests for round sampling and the seeded protocol simulation."""

import csv

import numpy as np
import pytest
from scipy.stats import chisquare

from monogamy_qkd.boxes import isotropic_box, pr_box, white_noise_bipartite, white_noise_tripartite
from monogamy_qkd.config import TSIRELSON_BOUND
from monogamy_qkd.errors import ConfigError
from monogamy_qkd.monogamy import NS_MONOGAMY, QM_MONOGAMY
from monogamy_qkd.protocol import ProtocolConfig, run_protocol, sample_round, simulate_attack
from monogamy_qkd.protocol.sampling import block_seeds, block_sizes, sample_block
from monogamy_qkd.security import EveProcedure, secure


def make_config(source, rounds=100_000, fraction=0.5, seed=42, adversary="ns"):
    return ProtocolConfig(
        source=source,
        rounds=rounds,
        estimation_fraction=fraction,
        seed=seed,
        adversary=adversary,
    )


@pytest.fixture(scope="module")
def isotropic_report():
    return run_protocol(make_config(isotropic_box(0.85)), workers=1)


class TestSampling:
    def test_pr_box_rounds_win(self):
        rng = np.random.default_rng(3)
        box = pr_box(0.0)
        for _ in range(500):
            record = sample_round(box, rng)
            assert record.A ^ record.B == record.a & record.b

    def test_replay_is_identical(self):
        box = isotropic_box(0.8)
        rng_a, rng_b = np.random.default_rng(11), np.random.default_rng(11)
        run_a = [sample_round(box, rng_a, 0.5) for _ in range(200)]
        run_b = [sample_round(box, rng_b, 0.5) for _ in range(200)]
        assert run_a == run_b
        assert len({(r.a, r.b) for r in run_a}) == 4

    def test_white_noise_outcomes_are_uniform(self):
        block = sample_block(white_noise_bipartite(), 100_000, 0.5, np.random.default_rng(5))
        counts = np.bincount(2 * block.A + block.B, minlength=4)
        assert chisquare(counts).pvalue > 0.001

    def test_settings_are_uniform_and_independent(self):
        block = sample_block(white_noise_bipartite(), 100_000, 0.5, np.random.default_rng(6))
        counts = np.bincount(2 * block.a + block.b, minlength=4)
        assert chisquare(counts).pvalue > 0.001

    def test_block_sizes(self):
        assert block_sizes(120_000) == [50_000, 50_000, 20_000]
        assert block_sizes(100) == [100]
        assert len(block_seeds(42, 120_000)) == 3


class TestConfig:
    def test_selector_is_parsed(self):
        cfg = make_config(pr_box(0.0), rounds=1000, adversary="p:1.1")
        assert cfg.adversary.exponent == 1.1

    @pytest.mark.parametrize(
        "overrides",
        [
            {"rounds": 50},
            {"fraction": 0.0},
            {"fraction": 1.0},
            {"rounds": 200, "fraction": 0.1},
            {"seed": -1},
            {"adversary": "gpt"},
        ],
    )
    def test_rejects_bad_values(self, overrides):
        params = {"rounds": 1000, **overrides}
        with pytest.raises(ConfigError):
            make_config(pr_box(0.0), **params)

    def test_rejects_tripartite_source(self):
        with pytest.raises(ConfigError):
            make_config(white_noise_tripartite(), rounds=1000)

    def test_echo(self):
        cfg = make_config(pr_box(0.0), rounds=1000, seed=7)
        echo = cfg.echo()
        assert echo["seed"] == 7
        assert echo["adversary"] == "ns"
        assert echo["source"]["arity"] == 2


class TestRunProtocol:
    def test_isotropic_estimate(self, isotropic_report):
        report = isotropic_report
        assert abs(report.beta_hat - 0.85) < 5 * report.beta_stderr
        assert report.p_b_hat == report.beta_hat
        assert report.estimation_rounds + report.key_bits == 100_000

    def test_verdict_matches_direct_evaluation(self, isotropic_report):
        expected = secure(NS_MONOGAMY, isotropic_report.beta_hat)
        assert isotropic_report.verdict.secure == expected.secure
        assert isotropic_report.p_e_bound == pytest.approx(expected.p_e_max)

    def test_pr_box_source(self):
        report = run_protocol(make_config(pr_box(0.0), rounds=1000, seed=123))
        assert report.beta_hat == 1.0
        assert report.secure
        assert report.p_e_bound == pytest.approx(0.5)
        assert report.key_rate_proxy == pytest.approx(1.0)

    def test_below_threshold_is_insecure(self):
        report = run_protocol(make_config(isotropic_box(0.80)))
        assert report.verdict is not None
        assert not report.secure

    def test_out_of_range_is_reported(self):
        report = run_protocol(make_config(pr_box(0.0), rounds=1000, adversary="qm"))
        assert report.out_of_range
        assert report.verdict is None
        assert not report.secure

    def test_deterministic_across_runs_and_threads(self):
        cfg = make_config(isotropic_box(0.85), rounds=120_000, seed=7)
        serial = run_protocol(cfg, workers=1).model_dump_json()
        assert run_protocol(cfg, workers=1).model_dump_json() == serial
        assert run_protocol(cfg, workers=4).model_dump_json() == serial

    def test_different_seeds_differ(self):
        a = run_protocol(make_config(isotropic_box(0.85), rounds=10_000, seed=1))
        b = run_protocol(make_config(isotropic_box(0.85), rounds=10_000, seed=2))
        assert (a.beta_hat, a.estimation_rounds) != (b.beta_hat, b.estimation_rounds)

    def test_report_echoes_config(self, isotropic_report):
        assert isotropic_report.config["seed"] == 42
        assert isotropic_report.config["rounds"] == 100_000

    def test_estimator_consistency_over_seeds(self):
        hits = 0
        for seed in range(100):
            report = run_protocol(make_config(isotropic_box(0.85), rounds=4_000, seed=seed))
            bound = 5 * np.sqrt(0.85 * 0.15 / report.estimation_rounds)
            hits += abs(report.beta_hat - 0.85) < bound
        assert hits >= 99

    def test_stderr_scales_with_inverse_root(self):
        stderrs = [
            run_protocol(make_config(isotropic_box(0.85), rounds=2 * n, seed=9)).beta_stderr
            for n in (1_000, 10_000, 100_000)
        ]
        for coarse, fine in zip(stderrs, stderrs[1:]):
            assert coarse / fine == pytest.approx(np.sqrt(10), rel=0.2)

    def test_rounds_csv(self, tmp_path):
        path = tmp_path / "rounds.csv"
        report = run_protocol(make_config(isotropic_box(0.9), rounds=500, seed=3), rounds_csv=path)
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0].keys()) == ["a", "b", "A", "B", "is_estimation"]
        assert len(rows) == 500
        assert sum(int(r["is_estimation"]) for r in rows) == report.estimation_rounds


class TestSimulateAttack:
    def test_ns_attack_at_090(self):
        report = simulate_attack(make_config(isotropic_box(0.9)))
        attack = report.attack
        assert attack.p_e_bound == pytest.approx(0.7, abs=1e-12)
        assert abs(attack.eve_rate - 0.7) < 5 * attack.eve_stderr
        assert attack.consistent
        assert attack.eve_rounds == report.key_bits

    def test_qm_attack_at_tsirelson(self):
        report = simulate_attack(make_config(isotropic_box(TSIRELSON_BOUND), adversary=QM_MONOGAMY))
        assert abs(report.attack.eve_rate - 0.5) < 5 * report.attack.eve_stderr

    def test_random_guessing(self):
        cfg = make_config(isotropic_box(0.9), rounds=50_000)
        report = simulate_attack(cfg, procedure=EveProcedure.symmetric(0.5))
        assert abs(report.attack.eve_rate - 0.5) < 5 * report.attack.eve_stderr

    def test_attack_does_not_change_estimation(self):
        cfg = make_config(isotropic_box(0.9), rounds=20_000, seed=5)
        plain = run_protocol(cfg)
        attacked = simulate_attack(cfg)
        assert attacked.beta_hat == plain.beta_hat
        assert attacked.key_bits == plain.key_bits
