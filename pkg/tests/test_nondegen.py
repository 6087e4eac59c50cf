"""Tests for essential determinants and non-degeneracy verdicts."""
import numpy as np
import pytest
import sympy

from crncert import corpus
from crncert.certificates import certify_soc
from crncert.common.errors import MinorBudgetExceeded
from crncert.graphmods import Modification, ReductionTrace, Target, TraceStep, apply_modification
from crncert.nondegen import (METHOD_PROPAGATION, METHOD_SAMPLED, METHOD_SINGLE_SAMPLE, METHOD_SYMBOLIC,
                              JacobianSample, NondegeneracyVerdict, Verdict, essential_determinant,
                              p0_sample_check, principal_minor_sum, propagate_nondegeneracy,
                              reduced_jacobian, robust_nondegenerate, sample_jacobian,
                              symbolic_essential_determinant)


def test_reduced_jacobian_of_reversible_pair(sp):
    """Test that S <-> P with unit entries reduces to [2]."""
    V = JacobianSample.for_network(sp, [[1.0, 0.0], [0.0, 1.0]])
    assert reduced_jacobian(sp, V).tolist() == pytest.approx([[2.0]])
    assert essential_determinant(sp, V).value == pytest.approx(2.0)


def test_jacobian_sample_validation(sp):
    """Test that samples must follow the reactant pattern."""
    with pytest.raises(ValueError):
        JacobianSample.for_network(sp, [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        JacobianSample.for_network(sp, [[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        JacobianSample.for_network(sp, [[1.0]])


def test_sample_jacobian_pattern(ptm_cycle):
    """Test sampled entries against the reactant pattern and range."""
    V = sample_jacobian(ptm_cycle, seed=1).V
    pattern = ptm_cycle.alpha.T > 0
    assert np.all((V[pattern] >= 0.1) & (V[pattern] <= 10.0))
    assert np.all(V[~pattern] == 0)


@pytest.mark.parametrize("name", ["sp", "ptm_cycle", "ptm_star_1", "mckeithan_2", "rfm_3"])
def test_cauchy_binet_matches_direct_sum(name):
    """Test the minor expansion against direct principal minors."""
    net = corpus.load(name)
    for seed in range(3):
        V = sample_jacobian(net, seed)
        expansion = essential_determinant(net, V).value
        direct = principal_minor_sum(net, V, net.rank)
        assert expansion == pytest.approx(direct, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("name", ["sp", "ptm_cycle", "mckeithan_2", "rfm_3"])
def test_reduced_block_determinant_is_essential_determinant(name):
    """Test that det of the reduced Jacobian equals the essential determinant."""
    net = corpus.load(name)
    for seed in range(50):
        V = sample_jacobian(net, seed)
        block = reduced_jacobian(net, V)
        assert block.shape == (net.rank, net.rank)
        assert np.linalg.det(block) == pytest.approx(essential_determinant(net, V).value, rel=1e-8)


@pytest.mark.parametrize("name", ["ptm_cycle", "mckeithan_2", "rfm_3"])
def test_certified_minor_terms_are_nonnegative(name):
    """Test that every expansion term is nonnegative for certified networks."""
    net = corpus.load(name)
    for seed in range(5):
        terms = essential_determinant(net, sample_jacobian(net, seed)).terms
        assert min(t.product for t in terms) >= -1e-12


def test_minor_budget(ptm_cycle):
    """Test that the pair cap is enforced."""
    with pytest.raises(MinorBudgetExceeded):
        essential_determinant(ptm_cycle, sample_jacobian(ptm_cycle, 0), cap=10)


def test_single_sample_verdict(sp):
    """Test a certified network with a positive sample."""
    verdict = robust_nondegenerate(sp, cert_present=True, seed=4)
    assert verdict.verdict == Verdict.ROBUSTLY_NONDEGENERATE
    assert verdict.method == METHOD_SINGLE_SAMPLE
    assert verdict.det_ess_value > 0


def test_inflow_outflow_of_one_species(crn):
    """Test 0 -> X -> 0, whose only minor is the outflow entry."""
    net = crn("0 -> X\nX -> 0")
    V = sample_jacobian(net, 2)
    assert essential_determinant(net, V).value == pytest.approx(V.V[1, 0])
    assert robust_nondegenerate(net, cert_present=True).verdict == Verdict.ROBUSTLY_NONDEGENERATE


def test_uncertified_positive_is_only_sampled(sp):
    """Test that without a certificate a positive sample proves nothing."""
    verdict = robust_nondegenerate(sp, cert_present=False)
    assert verdict.verdict == Verdict.UNKNOWN
    assert verdict.method == METHOD_SAMPLED


def test_degenerate_branch_is_confirmed_symbolically():
    """Test that A -> B, A -> C has an identically vanishing determinant."""
    net = corpus.load("degenerate_branch")
    assert symbolic_essential_determinant(net) == 0
    verdict = robust_nondegenerate(net, cert_present=False)
    assert verdict.verdict == Verdict.DEGENERATE
    assert verdict.method == METHOD_SYMBOLIC


def test_symbolic_determinant_of_reversible_pair(sp):
    """Test the polynomial of S <-> P."""
    polynomial = symbolic_essential_determinant(sp)
    v0, v1 = sympy.Symbol("v_0_0", positive=True), sympy.Symbol("v_1_1", positive=True)
    assert sympy.simplify(polynomial - (v0 + v1)) == 0


def test_budget_fallback_is_flagged(ptm_cycle):
    """Test the reduced Jacobian fallback when the pair cap is hit."""
    verdict = robust_nondegenerate(ptm_cycle, cert_present=True, cap=10)
    assert verdict.method == METHOD_SAMPLED
    assert "minor_budget_exceeded" in verdict.flags
    assert verdict.verdict == Verdict.UNKNOWN


def test_propagation_through_enzymatic_trace():
    """Test that a non-degenerate linear star carries over to the PTM star."""
    net = corpus.load("ptm_star_2")
    trace = certify_soc(net).trace
    base = robust_nondegenerate(trace.base, cert_present=True)
    assert base.verdict == Verdict.ROBUSTLY_NONDEGENERATE
    propagated = propagate_nondegeneracy(trace, base)
    assert propagated.verdict == Verdict.ROBUSTLY_NONDEGENERATE
    assert propagated.method == METHOD_PROPAGATION


def test_feedback_blocks_propagation(crn):
    """Test that a feedback species step declines propagation."""
    base = crn("A -> B\nB -> A")
    m = Modification.feedback(0, 1, "Z")
    trace = ReductionTrace(base, (TraceStep(m, "maxmin_preserving"),), apply_modification(base, m),
                           Target.MAXMIN_BASE)
    verdict = NondegeneracyVerdict(Verdict.ROBUSTLY_NONDEGENERATE, METHOD_SINGLE_SAMPLE, 0, 2.0)
    assert propagate_nondegeneracy(trace, verdict) is None


def test_p0_holds_for_certified_network(ptm_cycle):
    """Test that sampled principal minors of a certified network stay nonnegative."""
    report = p0_sample_check(ptm_cycle, trials=30, seed=3)
    assert report.exhaustive
    assert not report.falsified
    assert report.min_minor >= -1e-9


def test_p0_falsified_for_bistable(bistable):
    """Test that the autocatalytic network has a negative principal minor."""
    report = p0_sample_check(bistable, trials=30, seed=0)
    assert report.falsified
    assert report.argmin == (0,)
    assert report.to_dict(bistable)["argmin"] == ["A"]


@pytest.mark.slow
@pytest.mark.parametrize("name", ["sp", "ptm_cycle", "ptm_star_1", "mckeithan_2", "rfm_3"])
def test_certified_determinant_keeps_its_sign(name):
    """Test that a certified network's essential determinant stays positive over many samples."""
    net = corpus.load(name)
    assert certify_soc(net) is not None
    verdict = robust_nondegenerate(net, cert_present=True, seed=0)
    assert verdict.verdict == Verdict.ROBUSTLY_NONDEGENERATE
    values = [essential_determinant(net, sample_jacobian(net, seed)).value for seed in range(1, 1001)]
    assert min(values) > 1e-9
    report = p0_sample_check(net, trials=200, seed=0)
    assert not report.falsified
