"""Tests for tier conclusion and the analysis pipeline."""
from itertools import product

import pytest

from crncert import corpus
from crncert.conclude import (TIER_RANK, Tier, VerdictFlags, conclude_tier, explain, lasalle_check,
                              render_summary, run_analysis)
from crncert.certificates import certify_maxmin
from crncert.nondegen import Verdict
from crncert.persistence import Persistence

FLAG_NAMES = ("certificate", "lasalle", "nondegenerate", "persistent", "conservative")
ALL_FLAGS = [VerdictFlags(*values) for values in product((False, True), repeat=5)]


def test_tier_examples():
    """Test the tier of characteristic flag combinations."""
    assert conclude_tier(VerdictFlags(True, True, True, True, True)) == Tier.STAR
    assert conclude_tier(VerdictFlags(True, True, True, True, False)) == Tier.CONDITIONAL_STAR
    assert conclude_tier(VerdictFlags(True, True, False, True, True)) == Tier.STABLE_ONLY
    assert conclude_tier(VerdictFlags(True, True, True, False, True)) == Tier.STABLE_ONLY
    assert conclude_tier(VerdictFlags(True, False, True, True, True)) == Tier.NONE
    assert conclude_tier(VerdictFlags(False, True, True, True, True)) == Tier.NONE


@pytest.mark.parametrize("flags", ALL_FLAGS)
def test_tier_is_monotone(flags):
    """Test that setting another flag never lowers the tier."""
    tier = conclude_tier(flags)
    values = flags.as_dict()
    for name in FLAG_NAMES:
        if not values[name]:
            raised = VerdictFlags(**{**values, name: True})
            assert TIER_RANK[conclude_tier(raised)] >= TIER_RANK[tier]


@pytest.mark.parametrize("flags", ALL_FLAGS)
def test_explanations_only_use_set_flags(flags):
    """Test that each claim requires only flags that hold."""
    values = flags.as_dict()
    for explanation in explain(flags, conclude_tier(flags)):
        assert all(values[name] for name in explanation.requires)


def test_star_explanation():
    """Test that Star ends with the global stability claim."""
    flags = VerdictFlags(True, True, True, True, True)
    claims = [e.claim for e in explain(flags, Tier.STAR)]
    assert claims[-1] == "global_exponential_stability"
    assert "unique_positive_steady_state" in claims
    assert explain(VerdictFlags(False, False, False, False, False), Tier.NONE) == []


def test_lasalle_for_maxmin(ptm_cycle):
    """Test that a conservative max-min certificate qualifies."""
    assert lasalle_check(ptm_cycle, certify_maxmin(ptm_cycle))


def test_reversible_pair_is_star(sp, config):
    """Test the full pipeline on S <-> P."""
    report = run_analysis(sp, config)
    assert report.tier == Tier.STAR
    assert report.certificate.summed_names == ("S", "P")
    assert report.nondegeneracy.verdict == Verdict.ROBUSTLY_NONDEGENERATE
    assert report.persistence.verdict == Persistence.YES
    assert report.conservation_witness == {"S": 1, "P": 1}
    assert not report.budget_exceeded
    data = report.to_dict()
    assert data["certificates"]["MaxMin"] is None
    assert data["p0"]["falsified"] is False


def test_irreversible_bindings_are_none(config):
    """Test that uncertified networks get no tier."""
    report = run_analysis(corpus.load("disconnected"), config)
    assert report.tier == Tier.NONE
    assert report.certificate is None
    assert report.persistence.verdict == Persistence.NO
    assert not report.assumptions.as1


def test_open_ptm_star_is_conditional(config):
    """Test that a PTM star with substrate inflow lacks only conservativity."""
    report = run_analysis(corpus.load("ptm_star_inflow"), config)
    assert not report.conservative
    assert report.tier == Tier.CONDITIONAL_STAR
    assert report.explanations[-1].claim == "conditional_global_stability"


def test_bistable_is_none(bistable, config):
    """Test that the autocatalytic network is not certified and fails P0."""
    report = run_analysis(bistable, config)
    assert report.tier == Tier.NONE
    assert report.p0.falsified
    assert "tier: None" in render_summary(report)


def test_summary_lists_critical_siphon(config):
    """Test that the text summary names the critical siphon."""
    summary = render_summary(run_analysis(corpus.load("disconnected"), config))
    assert "critical siphon: {A}" in summary
    assert "certificate: none" in summary


EXPECTED_TIERS = {
    "ptm_star_inflow": Tier.CONDITIONAL_STAR,
    "bistable": Tier.NONE,
    "degenerate_branch": Tier.NONE,
    "disconnected": Tier.NONE,
}


@pytest.mark.slow
@pytest.mark.parametrize("name", corpus.names())
def test_corpus_tiers(name, config):
    """Test the tier of every shipped network; all but the listed ones reach Star."""
    report = run_analysis(corpus.load(name), config)
    assert report.tier == EXPECTED_TIERS.get(name, Tier.STAR), render_summary(report)
