import itertools

import numpy as np
import pytest

from oracles import make_psd, make_stable

from sensact.covariance import steady_augmented_cov, steady_error_cov
from sensact.exceptions import DimensionError, DomainError
from sensact.plant import SystemModel, mode_matrices, synthesize_gains
from sensact.search import (
    CostWeights,
    SearchOptions,
    SequenceEvaluator,
    search_fixed_length,
    search_up_to,
    sequence_cost,
)
from sensact.sequence import admissibility, irreducible_core


@pytest.fixture(scope="module")
def est_weights():
    return CostWeights.estimation(6)


class TestSequenceCost:
    def test_error_weight_is_mean_trace(self, cw_model, cw_mm, est_weights):
        err = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        j = sequence_cost("0011", err, None, est_weights)
        assert j == pytest.approx(np.mean([np.trace(p) for p in err]), rel=1e-12)

    def test_duty_cycle_cost(self):
        w = CostWeights(r_eta=1.0)
        assert sequence_cost("00111", None, None, w) == pytest.approx(3.0 / 5.0)

    def test_repetition_invariance(self, cw_model, cw_mm, est_weights):
        err1 = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        err2 = steady_error_cov("00110011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        j1 = sequence_cost("0011", err1, None, est_weights)
        j2 = sequence_cost("00110011", err2, None, est_weights)
        assert j2 == pytest.approx(j1, rel=1e-10)

    def test_phase_count_mismatch(self, cw_model, cw_mm, est_weights):
        err = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        with pytest.raises(DimensionError):
            sequence_cost("001", err, None, est_weights)

    def test_state_weight_uses_state_phases(self, cw_model, cw_gains):
        _, state = steady_augmented_cov("0011", cw_model, cw_gains)
        w = CostWeights(r_state=np.eye(6))
        j = sequence_cost("0011", None, state, w)
        assert j == pytest.approx(np.mean([np.trace(p) for p in state]), rel=1e-12)


class TestFixedLengthSearch:
    def test_n4_optimum_class(self, cw_model, cw_gains, est_weights):
        res = search_fixed_length(4, cw_model, cw_gains, est_weights)
        assert res.feasible
        tied = {str(s) for s in res.tied}
        assert tied == {"0011", "0110", "1001", "1100"}
        assert str(res.sequence) == "0011"  # lexicographic representative
        assert res.report.admissible

    def test_n7_optimum_class_contains_reported(self, cw_model, cw_gains, est_weights):
        res = search_fixed_length(7, cw_model, cw_gains, est_weights)
        tied = {str(s) for s in res.tied}
        assert "0011100" in tied
        assert len(tied) == 7  # full rotation class
        assert str(res.sequence) == min(tied)

    def test_n8_reducible_winner(self, cw_model, cw_gains, est_weights):
        res4 = search_fixed_length(4, cw_model, cw_gains, est_weights)
        res8 = search_fixed_length(8, cw_model, cw_gains, est_weights)
        assert str(res8.core) == "0011"
        assert str(res8.sequence) == "00110011"
        assert res8.cost == pytest.approx(res4.cost, rel=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_short_lengths_infeasible(self, n, cw_model, cw_gains, est_weights):
        res = search_fixed_length(n, cw_model, cw_gains, est_weights)
        assert not res.feasible
        assert res.sequence is None

    def test_extremes_never_returned(self, cw_model, cw_gains, est_weights):
        # all-zeros and all-ones are inadmissible here (coast at rho = 1)
        for n in (4, 5, 6):
            res = search_fixed_length(n, cw_model, cw_gains, est_weights)
            assert str(res.sequence) not in ("0" * n, "1" * n)
            assert len(set(res.sequence.bits)) == 2

    def test_deterministic(self, cw_model, cw_gains, est_weights):
        a = search_fixed_length(6, cw_model, cw_gains, est_weights)
        b = search_fixed_length(6, cw_model, cw_gains, est_weights)
        assert str(a.sequence) == str(b.sequence)
        assert a.cost == b.cost
        assert [str(s) for s in a.tied] == [str(s) for s in b.tied]

    def test_thread_pool_same_answer(self, cw_model, cw_gains, est_weights):
        serial = search_fixed_length(6, cw_model, cw_gains, est_weights)
        pooled = search_fixed_length(6, cw_model, cw_gains, est_weights,
                                     SearchOptions(threads=4))
        assert str(serial.sequence) == str(pooled.sequence)
        assert serial.cost == pooled.cost
        assert [str(s) for s in serial.tied] == [str(s) for s in pooled.tied]

    @pytest.mark.parametrize("length", range(1, 7))
    def test_dedup_matches_direct_evaluation(self, length, cw_model, cw_gains,
                                             cw_mm, est_weights):
        # cost and verdict computed through the core must equal direct
        # evaluation of the full word
        evaluator = SequenceEvaluator(cw_model, cw_gains, est_weights)
        for word in itertools.product((0, 1), repeat=length):
            core = irreducible_core(word).bits
            _, core_cost = evaluator.evaluate(core)
            direct_report = admissibility(word, cw_mm)
            if not direct_report.admissible:
                assert not np.isfinite(core_cost)
                continue
            err = steady_error_cov(word, cw_mm, cw_model.sigma_v, cw_model.sigma_w)
            direct_cost = sequence_cost(word, err, None, est_weights)
            assert core_cost == pytest.approx(direct_cost, rel=1e-9)

    def test_screen_prefilter_equals_off(self, cw_model, cw_gains, est_weights):
        for n in (4, 5, 6, 7):
            off = search_fixed_length(n, cw_model, cw_gains, est_weights,
                                      SearchOptions(prefilter="off"))
            screen = search_fixed_length(n, cw_model, cw_gains, est_weights,
                                         SearchOptions(prefilter="screen"))
            assert str(off.sequence) == str(screen.sequence)
            assert off.cost == pytest.approx(screen.cost, rel=1e-12)

    def test_screen_accepts_are_sound(self, cw_model, cw_gains, est_weights):
        # every screen-accepted core must be genuinely admissible; with
        # sequences this short the conservative screen may accept none
        opts = SearchOptions(prefilter="screen")
        evaluator = SequenceEvaluator(cw_model, cw_gains, est_weights, opts)
        res = search_fixed_length(8, cw_model, cw_gains, est_weights, opts, evaluator)
        assert res.counts.screen_rejects == 0
        assert res.feasible

    def test_heuristic_mode_is_explicit(self, cw_model, cw_gains, est_weights):
        res = search_fixed_length(4, cw_model, cw_gains, est_weights,
                                  SearchOptions(prefilter="heuristic"))
        # the screen is conservative: S4 fails it, so heuristic mode
        # misses the true optimum; that risk is the documented contract
        if res.feasible:
            assert str(res.sequence) != "0011"

    def test_bad_prefilter_rejected(self):
        with pytest.raises(DomainError):
            SearchOptions(prefilter="sometimes")

    def test_memoization_across_calls(self, cw_model, cw_gains, est_weights):
        # within one length the word -> core map is a bijection, so the
        # cache pays off only when an evaluator is shared across lengths
        evaluator = SequenceEvaluator(cw_model, cw_gains, est_weights)
        res4 = search_fixed_length(4, cw_model, cw_gains, est_weights,
                                   evaluator=evaluator)
        assert res4.counts.cores_evaluated == 16
        assert res4.counts.memo_hits == 0
        res8 = search_fixed_length(8, cw_model, cw_gains, est_weights,
                                   evaluator=evaluator)
        # all 16 cores of lengths dividing 4 come back from the cache
        assert res8.counts.memo_hits == 16
        assert res8.counts.cores_evaluated == 256 - 16

    def test_table_option(self, cw_model, cw_gains, est_weights):
        res = search_fixed_length(3, cw_model, cw_gains, est_weights,
                                  SearchOptions(include_table=True))
        assert len(res.table) == 8
        assert all(cost is None for _, _, cost in res.table)  # nothing admissible


class TestSearchUpTo:
    def test_first_feasible_length_is_four(self, cw_model, cw_gains, est_weights):
        res = search_up_to(8, cw_model, cw_gains, est_weights)
        assert res.feasible
        assert res.length == 4
        assert str(res.sequence) == "0011"

    def test_infeasible_up_to_three(self, cw_model, cw_gains, est_weights):
        res = search_up_to(3, cw_model, cw_gains, est_weights)
        assert not res.feasible
        assert res.cost == float("inf")
        assert res.counts.enumerated == 2 + 4 + 8

    def test_single_mode_feasibility(self):
        # both single-mode schedules work when every closed loop is stable
        rng = np.random.default_rng(11)
        model = SystemModel(
            a=make_stable(rng, 3, 0.8),
            b=rng.standard_normal((3, 1)),
            c=rng.standard_normal((1, 3)),
            sigma_w=make_psd(rng, 3, 0.1),
            sigma_v=make_psd(rng, 1, 0.1),
        )
        gains = synthesize_gains(model, np.eye(3), np.eye(1))
        mm = mode_matrices(model, gains)
        assert admissibility("0", mm).admissible
        assert admissibility("1", mm).admissible
        res = search_up_to(4, model, gains, CostWeights.estimation(3))
        assert res.feasible and res.length == 1

    def test_memo_shared_across_lengths(self, cw_model, cw_gains, est_weights):
        res = search_up_to(4, cw_model, cw_gains, est_weights)
        # lengths 1, 2 and 4 share the all-zero / all-one cores
        assert res.counts.memo_hits > 0

    def test_all_lengths_option(self, cw_model, cw_gains, est_weights):
        first = search_up_to(8, cw_model, cw_gains, est_weights)
        best = search_up_to(8, cw_model, cw_gains, est_weights,
                            SearchOptions(all_lengths=True))
        # the estimation-only cost rewards extra sensing, so the global
        # optimum over all lengths beats the first-feasible length-4 one
        assert best.cost < first.cost
        assert best.length == 5
        assert str(best.sequence) == "00011"
        assert best.cost == pytest.approx(1.84090, abs=1e-4)
