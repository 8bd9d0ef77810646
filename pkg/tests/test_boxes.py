"""Tests for box construction, CHSH evaluation and signaling detection."""

import itertools
import json
import math
import os

import numpy as np
import pytest

from monogamy_qkd.box_store import box_from_json, read_box_file, write_box_file
from monogamy_qkd.boxes import (
    BipartiteBox,
    Party,
    PartyPair,
    bipartite_from_table,
    chsh_value,
    chsh_value_by_setting,
    deterministic_box,
    eve_example_box,
    extend_with_noise,
    flip_outcome,
    isotropic_box,
    mix,
    pair_marginal,
    pr_box,
    signaling_deficit,
    tripartite_from_table,
    white_noise_bipartite,
    white_noise_tripartite,
)
from monogamy_qkd.config import TSIRELSON_BOUND
from monogamy_qkd.errors import (
    ArityMismatch,
    BoxFormatError,
    DomainError,
    NegativeProbability,
    NormalizationError,
)

GRID = [0.0, 0.125, 0.25, 0.375, 0.5]


class TestConstruction:
    def test_uniform_table(self):
        box = bipartite_from_table([0.25] * 16)
        assert chsh_value(box) == pytest.approx(0.5, abs=1e-12)

    def test_bad_normalization_names_setting(self):
        table = [0.25] * 16
        table[4] = 0.15  # settings (0,1) now sum to 0.9
        with pytest.raises(NormalizationError) as err:
            bipartite_from_table(table)
        assert err.value.index == 1

    def test_deterministic_all_zero_outcomes(self):
        table = np.zeros((2, 2, 2, 2))
        table[:, :, 0, 0] = 1.0
        box = bipartite_from_table(table.ravel())
        assert chsh_value(box) == pytest.approx(0.75, abs=1e-12)

    def test_negative_entry_is_reported_by_index(self):
        table = [0.25] * 16
        table[5], table[6] = -0.1, 0.6
        with pytest.raises(NegativeProbability) as err:
            bipartite_from_table(table)
        assert err.value.index == 5

    def test_tiny_negative_is_clamped(self):
        table = [0.25] * 16
        table[0] = -1e-13
        table[1] = 0.5 + 1e-13
        box = bipartite_from_table(table)
        assert box.probs[0, 0, 0, 0] == 0.0

    def test_wrong_length(self):
        with pytest.raises(BoxFormatError):
            bipartite_from_table([0.25] * 15)

    def test_non_finite(self):
        table = [0.25] * 16
        table[3] = math.nan
        with pytest.raises(BoxFormatError):
            bipartite_from_table(table)

    def test_boxes_are_read_only(self):
        box = pr_box(0.0)
        with pytest.raises(ValueError):
            box.probs[0, 0, 0, 0] = 0.3

    def test_tripartite_table_round_trip(self):
        tri = eve_example_box(0.3, 0.1, 0.2)
        assert tripartite_from_table(tri.to_table()).allclose(tri)


class TestPRBox:
    @pytest.mark.parametrize("q", GRID)
    def test_chsh_is_one_for_every_bias(self, q):
        assert chsh_value(pr_box(q)) == pytest.approx(1.0, abs=1e-12)

    def test_support(self):
        box = pr_box(0.3)
        for x, y, X, Y in itertools.product(range(2), repeat=4):
            if X ^ Y != x & y:
                assert box.probs[x, y, X, Y] == 0.0
            else:
                assert box.probs[x, y, X, Y] == pytest.approx(0.5 + (0.3 if Y == 0 else -0.3))

    def test_signaling_deficit_is_twice_the_bias(self):
        assert signaling_deficit(pr_box(0.25)) == pytest.approx(0.5, abs=1e-12)

    def test_unbiased_box_does_not_signal(self):
        assert signaling_deficit(pr_box(0.0)) <= 1e-9

    @pytest.mark.parametrize("q", [-0.01, 0.51])
    def test_bias_domain(self, q):
        with pytest.raises(DomainError):
            pr_box(q)


class TestWhiteNoiseAndIsotropic:
    def test_white_noise(self):
        noise = white_noise_bipartite()
        assert chsh_value(noise) == pytest.approx(0.5)
        assert signaling_deficit(noise) == 0.0
        assert flip_outcome(noise, Party.B).allclose(noise)

    def test_isotropic_endpoints(self):
        assert isotropic_box(1.0).allclose(pr_box(0.0))
        assert isotropic_box(0.5).allclose(white_noise_bipartite())

    def test_isotropic_at_tsirelson(self):
        assert chsh_value(isotropic_box(TSIRELSON_BOUND)) == pytest.approx(TSIRELSON_BOUND, abs=1e-12)

    @pytest.mark.parametrize("beta", np.linspace(0.5, 1.0, 11))
    def test_isotropic_hits_target_and_does_not_signal(self, beta):
        box = isotropic_box(beta)
        assert chsh_value(box) == pytest.approx(beta, abs=1e-12)
        assert signaling_deficit(box) <= 1e-9

    @pytest.mark.parametrize("beta", [0.49, 1.01])
    def test_isotropic_domain(self, beta):
        with pytest.raises(DomainError):
            isotropic_box(beta)


class TestMix:
    def test_idempotent(self):
        box = pr_box(0.2)
        assert mix(box, box, 0.37).allclose(box)

    def test_pr_and_noise(self):
        assert chsh_value(mix(pr_box(0.0), white_noise_bipartite(), 0.5)) == pytest.approx(0.75)

    @pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 0.9, 1.0])
    def test_chsh_is_affine(self, p):
        b1, b2 = pr_box(0.1), deterministic_box((0, 1), (1, 1))
        expected = p * chsh_value(b1) + (1 - p) * chsh_value(b2)
        assert abs(chsh_value(mix(b1, b2, p)) - expected) < 1e-12

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            mix(pr_box(0.0), white_noise_tripartite(), 0.5)

    def test_weight_domain(self):
        with pytest.raises(DomainError):
            mix(pr_box(0.0), pr_box(0.0), 1.5)

    def test_mixtures_of_no_signaling_boxes_do_not_signal(self):
        box = mix(isotropic_box(0.8), deterministic_box((1, 0), (0, 0)), 0.3)
        assert signaling_deficit(box) <= 1e-9


class TestExtension:
    def test_ab_extension(self):
        tri = extend_with_noise(pr_box(0.0), PartyPair.AB)
        assert chsh_value(tri, PartyPair.AB) == pytest.approx(1.0)
        assert chsh_value(tri, PartyPair.AE) == pytest.approx(0.5)

    def test_ae_extension(self):
        tri = extend_with_noise(pr_box(0.0), PartyPair.AE)
        assert chsh_value(tri, PartyPair.AE) == pytest.approx(1.0)
        assert chsh_value(tri, PartyPair.AB) == pytest.approx(0.5)

    @pytest.mark.parametrize("pair", list(PartyPair))
    def test_marginal_recovers_input(self, pair):
        bip = pr_box(0.3)
        tri = extend_with_noise(bip, pair)
        for setting in (0, 1):
            assert pair_marginal(tri, pair, setting).allclose(bip)

    def test_swap_hands_x_side_to_second_party(self):
        bip = pr_box(0.3)
        tri = extend_with_noise(bip, PartyPair.AE, swap=True)
        marginal = pair_marginal(tri, PartyPair.AE)
        np.testing.assert_allclose(marginal.probs, bip.probs.transpose(1, 0, 3, 2), atol=1e-12)

    def test_third_party_outcome_is_uniform(self):
        tri = extend_with_noise(pr_box(0.2), PartyPair.AB)
        e_marginal = tri.probs.sum(axis=(3, 4))
        np.testing.assert_allclose(e_marginal, 0.5, atol=1e-12)

    def test_extensions_of_no_signaling_boxes_do_not_signal(self):
        for pair in PartyPair:
            assert signaling_deficit(extend_with_noise(isotropic_box(0.9), pair)) <= 1e-9


class TestEveExampleBox:
    @pytest.mark.parametrize("p,q1,q2", itertools.product(GRID, GRID, GRID))
    def test_ns_monogamy_with_equality(self, p, q1, q2):
        tri = eve_example_box(p, q1, q2)
        ab = chsh_value(tri, PartyPair.AB)
        ae = chsh_value(tri, PartyPair.AE)
        assert ab == pytest.approx((1 + p) / 2, abs=1e-12)
        assert ae == pytest.approx(1 - p / 2, abs=1e-12)
        assert abs(ab + ae - 1.5) < 1e-12

    def test_signals_for_generic_parameters(self):
        assert signaling_deficit(eve_example_box(0.5, 0.25, 0.1)) > 0.01

    @pytest.mark.parametrize("p", GRID)
    def test_unbiased_components_do_not_signal(self, p):
        assert signaling_deficit(eve_example_box(p, 0.0, 0.0)) <= 1e-9

    def test_pairwise_chsh_independent_of_third_setting(self):
        tri = eve_example_box(0.4, 0.3, 0.2)
        for pair in (PartyPair.AB, PartyPair.AE):
            first, second = chsh_value_by_setting(tri, pair)
            assert first == pytest.approx(second, abs=1e-12)


class TestFlip:
    @pytest.mark.parametrize("party", [Party.A, Party.B])
    def test_flip_complements_chsh(self, party):
        box = isotropic_box(0.83)
        assert chsh_value(flip_outcome(box, party)) == pytest.approx(1 - 0.83, abs=1e-12)

    def test_flipped_pr_box(self):
        assert chsh_value(flip_outcome(pr_box(0.0), Party.B)) == pytest.approx(0.0, abs=1e-12)

    def test_double_flip_is_identity(self):
        tri = eve_example_box(0.3, 0.1, 0.4)
        for party in Party:
            assert flip_outcome(flip_outcome(tri, party), party).allclose(tri)

    def test_flipping_e_leaves_ab_untouched(self):
        tri = eve_example_box(0.6, 0.2, 0.1)
        flipped = flip_outcome(tri, Party.E)
        assert chsh_value(flipped, PartyPair.AB) == pytest.approx(chsh_value(tri, PartyPair.AB), abs=1e-12)

    def test_bipartite_box_has_no_e(self):
        with pytest.raises(ArityMismatch):
            flip_outcome(pr_box(0.0), Party.E)


class TestChshArguments:
    def test_best_deterministic_box(self):
        values = [
            chsh_value(deterministic_box(fx, fy))
            for fx, fy in itertools.product([(0, 0), (0, 1), (1, 0), (1, 1)], repeat=2)
        ]
        assert max(values) == pytest.approx(0.75)

    def test_tripartite_needs_pair(self):
        with pytest.raises(ArityMismatch):
            chsh_value(white_noise_tripartite())

    def test_bipartite_rejects_pair(self):
        with pytest.raises(ArityMismatch):
            chsh_value(pr_box(0.0), PartyPair.AB)

    @pytest.mark.parametrize("beta", [0.5, 0.7, 1.0])
    def test_chsh_in_unit_interval(self, beta):
        value = chsh_value(isotropic_box(beta))
        assert 0.0 <= value <= 1.0


class TestBoxFiles:
    def test_write_then_read(self, tmp_path):
        tri = eve_example_box(0.5, 0.25, 0.1)
        path = write_box_file(tri, tmp_path / "eve.json")
        loaded = read_box_file(path)
        assert loaded.allclose(tri)

    def test_schema_rejects_bad_arity(self):
        with pytest.raises(BoxFormatError):
            box_from_json({"arity": 4, "probs": [0.25] * 16})

    def test_schema_rejects_length_mismatch(self):
        with pytest.raises(BoxFormatError):
            box_from_json({"arity": 3, "probs": [0.25] * 16})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(BoxFormatError):
            read_box_file(path)

    def test_bipartite_document(self, tmp_path):
        path = tmp_path / "pr.json"
        path.write_text(json.dumps({"arity": 2, "probs": pr_box(0.0).to_table()}))
        box = read_box_file(path)
        assert isinstance(box, BipartiteBox)
        assert chsh_value(box) == pytest.approx(1.0)

    @pytest.fixture
    def parse_count(self, monkeypatch):
        calls = []

        def counting(document):
            calls.append(document)
            return box_from_json(document)

        monkeypatch.setattr("monogamy_qkd.box_store.box_from_json", counting)
        return calls

    def test_repeated_reads_parse_once(self, tmp_path, parse_count):
        path = write_box_file(pr_box(0.1), tmp_path / "cached.json")
        first = read_box_file(path)
        second = read_box_file(path)
        assert second is first
        assert len(parse_count) == 1

    def test_rewrite_invalidates_cache(self, tmp_path, parse_count):
        path = write_box_file(pr_box(0.0), tmp_path / "rewritten.json")
        read_box_file(path)
        write_box_file(isotropic_box(0.75), path)
        stat = path.stat()
        os.utime(path, ns=(stat.st_atime_ns, stat.st_mtime_ns + 1_000_000_000))
        box = read_box_file(path)
        assert len(parse_count) == 2
        assert chsh_value(box) == pytest.approx(0.75)
