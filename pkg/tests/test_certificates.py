"""Tests for certificate construction and Lyapunov evaluation."""
import numpy as np
import pytest

from crncert import const, corpus
from crncert.certificates import (RLFFamily, candidate_certificate, certify_maxmin, certify_soc,
                                  dini_derivative, eval_maxmin, eval_soc, evaluate, find_dini_violation,
                                  lyapunov_value)
from crncert.graphmods import ModificationKind
from crncert.kinetics import mass_action, sample_kinetics


@pytest.fixture
def cycle(crn):
    """Linear three-cycle A -> B -> C -> A."""
    return crn("A -> B\nB -> C\nC -> A")


def test_linear_network_sums_every_species(sp):
    """Test that a linear network is certified with an empty trace."""
    cert = certify_soc(sp)
    assert cert.family == RLFFamily.SOC
    assert not cert.trace.steps
    assert cert.summed_names == ("S", "P")


def test_ptm_chain_sums_substrates_and_complexes():
    """Test that enzymes are left out of the sum-of-currents function."""
    net = corpus.load("ptm_chain_2")
    cert = certify_soc(net)
    assert cert is not None
    assert set(cert.summed_names) == {"S0", "S1", "S2", "C1", "D1", "C2", "D2"}
    assert set(cert.trace.kinds) == {ModificationKind.ENZYMATIC}


def test_mckeithan_certified_by_dimer():
    """Test that the dimer partner is dropped from the summed species."""
    cert = certify_soc(corpus.load("mckeithan_3"))
    assert cert is not None
    assert cert.trace.kinds == (ModificationKind.ADD_DIMER,)
    assert "L" not in cert.summed_names
    assert "R" in cert.summed_names


def test_no_certificate_without_positive_flux():
    """Test that isolated irreversible bindings are not certified."""
    net = corpus.load("disconnected")
    assert certify_soc(net) is None
    assert certify_maxmin(net) is None


def test_maxmin_for_ptm_cycle(ptm_cycle):
    """Test that the PTM cycle also has a max-min certificate."""
    cert = certify_maxmin(ptm_cycle)
    assert cert.family == RLFFamily.MAXMIN
    assert cert.forward == (0, 2, 3, 5)
    assert cert.reverse == (1, None, 4, None)
    assert cert.flux_weights == (1, 1, 1, 1)


def test_maxmin_for_processive_cycle():
    """Test the processive cycle through processive peels."""
    cert = certify_maxmin(corpus.load("processive"))
    assert cert is not None
    assert set(cert.trace.kinds) == {ModificationKind.PROCESSIVE}


def test_no_maxmin_for_linear_star(linear_star):
    """Test that a hub consumed twice has no max-min certificate."""
    assert certify_maxmin(linear_star) is None


def test_no_certificate_for_bistable(bistable):
    """Test that the autocatalytic network is not certified."""
    assert certify_soc(bistable) is None
    assert certify_maxmin(bistable) is None


def test_eval_soc_by_hand(sp):
    """Test S <-> P with k = (1, 1) at x = (2, 0)."""
    cert = certify_soc(sp)
    kinetics = mass_action(sp, [1.0, 1.0])
    evaluation = eval_soc(cert, [2.0, 0.0], kinetics)
    assert evaluation.value == pytest.approx(4.0)
    assert evaluation.active_pattern == (-1, 1)
    assert evaluation.dini == pytest.approx(-8.0)
    assert eval_soc(cert, [1.0, 1.0], kinetics).value == 0.0


def test_eval_soc_matches_direct_sum(ptm_cycle):
    """Test the sum-of-currents value against a direct computation."""
    cert = certify_soc(ptm_cycle)
    kinetics = sample_kinetics(ptm_cycle, const.MASS_ACTION, seed=2)
    x = np.random.default_rng(8).uniform(0.1, 3.0, ptm_cycle.n)
    xdot = ptm_cycle.gamma @ kinetics.rates(x)
    expected = sum(abs(xdot[ptm_cycle.species_index(s)]) for s in ("S", "C", "P", "D"))
    assert eval_soc(cert, x, kinetics).value == pytest.approx(expected, rel=1e-12)


def test_eval_maxmin_by_hand(cycle):
    """Test the rate spread on a three-cycle with k = 1."""
    cert = certify_maxmin(cycle)
    kinetics = mass_action(cycle, [1.0, 1.0, 1.0])
    assert eval_maxmin(cert, [1.0, 1.0, 1.0], kinetics).value == 0.0
    evaluation = eval_maxmin(cert, [3.0, 1.0, 1.0], kinetics)
    assert evaluation.value == pytest.approx(2.0)
    assert evaluation.active_pattern == ((0,), (1, 2))
    assert evaluation.dini == pytest.approx(-2.0)


def test_evaluate_serves_both_families(sp, cycle):
    """Test that evaluate agrees with the family-specific evaluators."""
    kinetics = mass_action(sp, [1.0, 1.0])
    assert evaluate(certify_soc(sp), [2.0, 0.0], kinetics) == eval_soc(certify_soc(sp), [2.0, 0.0], kinetics)
    kinetics = mass_action(cycle, [1.0] * 3)
    evaluation = evaluate(certify_maxmin(cycle), [3.0, 1.0, 1.0], kinetics)
    assert evaluation.value == pytest.approx(2.0)
    assert evaluation.dini == pytest.approx(-2.0)


def test_family_mismatch_and_dimension(sp, cycle):
    """Test argument validation of the evaluators."""
    kinetics = mass_action(sp, [1.0, 1.0])
    with pytest.raises(ValueError):
        eval_maxmin(certify_soc(sp), [1.0, 1.0], kinetics)
    with pytest.raises(ValueError):
        eval_soc(certify_soc(sp), [1.0, 1.0, 1.0], kinetics)
    with pytest.raises(ValueError):
        eval_soc(certify_maxmin(cycle), [1.0, 1.0, 1.0], mass_action(cycle, [1.0] * 3))


def test_dini_estimates_agree(sp, cycle):
    """Test analytic and finite difference Dini derivatives on linear networks."""
    estimate = dini_derivative(certify_soc(sp), [2.0, 0.0], mass_action(sp, [1.0, 1.0]))
    assert estimate.unique_pattern
    assert estimate.agree
    estimate = dini_derivative(certify_maxmin(cycle), [3.0, 1.0, 0.5], mass_action(cycle, [1.0] * 3))
    assert estimate.agree
    assert estimate.analytic < 0


def test_broken_network_violates_candidate(crn):
    """Test that A + B -> C, C -> 2A breaks the sum-of-currents candidate."""
    net = crn("A + B -> C\nC -> 2 A")
    assert certify_soc(net) is None
    cert = candidate_certificate(net)
    assert not cert.certified
    kinetics = mass_action(net, [1.0, 1.0])
    assert eval_soc(cert, [0.15, 10.0, 1.0], kinetics).dini > 0
    rng = np.random.default_rng(0)
    kinetics_list = [sample_kinetics(net, const.MASS_ACTION, seed=s) for s in range(5)]
    states = rng.uniform(0.0, 10.0, size=(200, net.n))
    assert find_dini_violation(cert, kinetics_list, states) is not None


@pytest.mark.slow
@pytest.mark.parametrize("name", ["ptm_cycle", "ptm_star_2", "mckeithan_2", "rfm_3", "processive"])
@pytest.mark.parametrize("family", const.KINETICS_FAMILIES)
def test_certified_functions_never_increase(name, family):
    """Test that no sampled state has a positive Dini derivative."""
    net = corpus.load(name)
    cert = certify_soc(net) or certify_maxmin(net)
    assert cert is not None
    kinetics_list = [sample_kinetics(net, family, seed=s) for s in range(20)]
    states = np.random.default_rng(1).uniform(0.01, 5.0, size=(20, net.n))
    assert find_dini_violation(cert, kinetics_list, states) is None
    x = states[0]
    assert lyapunov_value(cert, x, kinetics_list[0]) >= 0
