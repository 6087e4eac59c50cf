"""Tests for network modifications and the reduction search."""
import numpy as np
import pytest

from crncert import corpus
from crncert.common.errors import ModificationError
from crncert.core import is_linear, maxmin_conditions
from crncert.graphmods import (ModificationKind, Modification, ReductionTrace, Target, TraceStep,
                               apply_enzymatic, apply_modification, apply_processive,
                               elementary_steps, find_isomorphism, is_isomorphic, licensing_violations,
                               peel_candidates, reduce)


def texts(net):
    return [net.reaction_text(j) for j in range(net.nu)]


def test_reversal_adds_linked_reaction(crn):
    """Test that reversing A -> B adds B -> A linked to it."""
    net = apply_modification(crn("A -> B"), Modification.reversal(0))
    assert texts(net) == ["A -> B", "B -> A"]
    assert net.reactions[0].reverse_of == 1


def test_reversal_of_reversible_reaction_fails(sp):
    """Test that a reversible reaction cannot be reversed again."""
    with pytest.raises(ModificationError):
        apply_modification(sp, Modification.reversal(0))


def test_intermediate_splits_reaction(crn):
    """Test that an intermediate routes A -> B through a fresh species."""
    net = apply_modification(crn("A -> B"), Modification.intermediate(0, "C"))
    assert texts(net) == ["A -> C", "C -> B"]


def test_intermediate_needs_fresh_name(crn):
    """Test that the new species name must be unused."""
    with pytest.raises(ModificationError):
        apply_modification(crn("A -> B"), Modification.intermediate(0, "A"))


def test_regulations(crn):
    """Test external and conserved regulation of a species."""
    base = crn("A -> B")
    external = apply_modification(base, Modification.external_regulation(0))
    assert texts(external) == ["A -> B", "A -> 0", "0 -> A"]
    assert external.reactions[1].reverse_of == 2
    conserved = apply_modification(base, Modification.conserved_regulation(1, "B*"))
    assert texts(conserved) == ["A -> B", "B -> B*", "B* -> B"]


def test_feedback_species(crn):
    """Test that a feedback species is produced by one reaction and consumed by another."""
    net = apply_modification(crn("A -> B\nB -> A"), Modification.feedback(0, 1, "Z"))
    assert texts(net) == ["A -> B + Z", "B + Z -> A"]


def test_catalyst_and_dimer(crn):
    """Test the two mirroring modifications on A -> B."""
    catalyst = apply_modification(crn("A -> B"), Modification.catalyst(0, "Y"))
    assert texts(catalyst) == ["A -> B + Y"]
    dimer = apply_modification(crn("A -> B"), Modification.dimer(0, "L"))
    assert texts(dimer) == ["A + L -> B"]


def test_enzymatic_on_star_edge(crn):
    """Test S -> P1 becoming S + E1 <-> C1 -> P1 + E1."""
    net = apply_enzymatic(crn("S -> P1"), 0, "E1", "C1")
    assert is_isomorphic(net, crn("S + E1 <-> C1\nC1 -> P1 + E1"))


def test_enzymatic_on_both_directions_gives_ptm_cycle(crn, ptm_cycle):
    """Test that enzymatic rewrites of S -> P and P -> S give the PTM cycle."""
    net = apply_enzymatic(crn("S -> P\nP -> S"), 0, "E", "C")
    net = apply_enzymatic(net, 1, "F", "D")
    assert is_isomorphic(net, ptm_cycle)
    mapping = find_isomorphism(net, ptm_cycle)
    assert sorted(mapping["species"].values()) == list(range(6))


def test_processive_expansion(crn):
    """Test a processive rewrite with two complexes."""
    m = Modification.processive(0, "E", ["C1", "C2"])
    kinds = [step.kind for step in elementary_steps(crn("A -> B"), m)]
    assert kinds == [ModificationKind.ADD_INTERMEDIATE, ModificationKind.REVERSAL,
                     ModificationKind.ADD_CATALYST, ModificationKind.ADD_INTERMEDIATE,
                     ModificationKind.REVERSAL]
    net = apply_processive(crn("A -> B"), 0, "E", 1, ["C1", "C2"])
    assert is_isomorphic(net, crn("A + E <-> C1\nC1 <-> C2\nC2 -> B + E"))


def test_processive_needs_positive_m(crn):
    """Test that m = 0 is rejected."""
    with pytest.raises(ModificationError):
        apply_processive(crn("A -> B"), 0, "E", 0)


def test_isomorphism_respects_reverse_links(crn):
    """Test that linked and unlinked opposite reactions differ."""
    assert not is_isomorphic(crn("A <-> B"), crn("A -> B\nB -> A"))
    assert is_isomorphic(crn("A <-> B"), crn("X <-> Y"))
    assert not is_isomorphic(crn("A -> B"), crn("2 A -> B"))


def test_reduce_ptm_cycle_to_linear(ptm_cycle):
    """Test that the PTM cycle peels to S -> P, P -> S by two enzymatic steps."""
    trace = reduce(ptm_cycle, Target.LINEAR)
    assert trace is not None
    assert trace.kinds == (ModificationKind.ENZYMATIC, ModificationKind.ENZYMATIC)
    assert trace.base.species_names == ("S", "P")
    assert is_linear(trace.base)
    assert trace.verify()
    assert not licensing_violations(trace, Target.LINEAR)


def test_reduce_ptm_star_3():
    """Test that the three-site PTM star peels to the linear star with six enzymatic steps."""
    net = corpus.load("ptm_star_3")
    trace = reduce(net, Target.LINEAR)
    assert trace is not None
    assert trace.kinds == (ModificationKind.ENZYMATIC,) * 6
    assert (trace.base.n, trace.base.nu) == (4, 6)
    assert is_linear(trace.base)
    assert trace.verify()


def test_reduce_mckeithan_by_dimer():
    """Test that proofreading peels to a linear network by one dimer step."""
    trace = reduce(corpus.load("mckeithan_2"), Target.LINEAR)
    assert trace is not None
    assert trace.kinds == (ModificationKind.ADD_DIMER,)
    assert trace.base.species_names == ("R", "C0", "C1", "C2")
    assert is_linear(trace.base)


def test_reduce_rfm_by_catalysts(crn, rfm3):
    """Test that the ribosome flow model peels to a unidirectional chain."""
    trace = reduce(rfm3, Target.LINEAR)
    assert trace is not None
    assert trace.kinds == (ModificationKind.ADD_CATALYST,) * 3
    assert is_isomorphic(trace.base, crn("0 -> A\nA -> B\nB -> C\nC -> 0"))
    assert trace.verify()


def test_reduce_processive_to_maxmin_cycle(crn):
    """Test that the processive cycle peels to the linear three-cycle."""
    trace = reduce(corpus.load("processive"), Target.MAXMIN_BASE)
    assert trace is not None
    assert trace.kinds == (ModificationKind.PROCESSIVE,) * 3
    assert is_isomorphic(trace.base, crn("S0 -> S1\nS1 -> S2\nS2 -> S0"))
    assert maxmin_conditions(trace.base).holds
    assert not licensing_violations(trace, Target.MAXMIN_BASE)


def test_reduce_fails_for_bistable(bistable):
    """Test that no base is found for the autocatalytic network."""
    assert reduce(bistable, Target.LINEAR) is None
    assert reduce(bistable, Target.MAXMIN_BASE) is None


def test_to_dict_names_steps(ptm_cycle):
    """Test the JSON form of a trace."""
    data = reduce(ptm_cycle, Target.LINEAR).to_dict()
    assert data["target"] == "linear"
    assert data["base_network"] == "S -> P\nP -> S\n"
    assert [step["kind"] for step in data["steps"]] == ["enzymatic", "enzymatic"]
    assert {step["params"]["enzyme"] for step in data["steps"]} == {"E", "F"}
    assert all(step["licensed_by"] == "enzymatic_replacement" for step in data["steps"])


def test_unlicensed_step_is_reported(crn):
    """Test that a feedback step cannot license a sum-of-currents function."""
    base = crn("A -> B\nB -> A")
    step = TraceStep(Modification.feedback(0, 1, "Z"), "unlicensed")
    final = apply_modification(base, step.modification)
    trace = ReductionTrace(base, (step,), final, Target.LINEAR)
    violations = licensing_violations(trace, Target.LINEAR)
    assert len(violations) == 1
    assert "add_feedback_species" in violations[0]


# Unimolecular networks where every species is consumed twice have no peels
# of their own, so any peel found undoes the modification under test.
def random_base(crn, rng):
    k = int(rng.integers(5, 8))
    labels = rng.permutation(k)
    edges = [(i, (i + 1) % k) for i in range(k)] + [(i, (i + 2) % k) for i in range(k)]
    lines = [f"X{labels[a]} -> X{labels[b]}" for a, b in (edges[o] for o in rng.permutation(len(edges)))]
    return crn("\n".join(lines))


def random_modification(kind, net, rng):
    j = int(rng.integers(net.nu))
    i = int(rng.integers(net.n))
    if kind == ModificationKind.REVERSAL:
        return Modification.reversal(j)
    if kind == ModificationKind.ADD_INTERMEDIATE:
        return Modification.intermediate(j, "D")
    if kind == ModificationKind.EXTERNAL_REGULATION:
        return Modification.external_regulation(i)
    if kind == ModificationKind.CONSERVED_REGULATION:
        return Modification.conserved_regulation(i, "Z")
    if kind == ModificationKind.ADD_FEEDBACK_SPECIES:
        return Modification.feedback(j, (j + 1 + int(rng.integers(net.nu - 1))) % net.nu, "Z")
    if kind == ModificationKind.ADD_CATALYST:
        return Modification.catalyst(i, "Y")
    if kind == ModificationKind.ADD_DIMER:
        return Modification.dimer(i, "L")
    if kind == ModificationKind.ENZYMATIC:
        return Modification.enzymatic(j, "E", "C")
    return Modification.processive(j, "E", [f"C{k}" for k in range(int(rng.integers(2, 4)))])


ROUND_TRIP_KINDS = [
    ModificationKind.REVERSAL, ModificationKind.ADD_INTERMEDIATE, ModificationKind.EXTERNAL_REGULATION,
    ModificationKind.CONSERVED_REGULATION, ModificationKind.ADD_CATALYST, ModificationKind.ADD_DIMER,
    ModificationKind.ENZYMATIC,
]

PEEL_GROUPS = {
    ModificationKind.REVERSAL: (ModificationKind.REVERSAL, Target.LINEAR),
    ModificationKind.ADD_INTERMEDIATE: (ModificationKind.ADD_INTERMEDIATE, Target.LINEAR),
    ModificationKind.EXTERNAL_REGULATION: (ModificationKind.EXTERNAL_REGULATION, Target.LINEAR),
    ModificationKind.CONSERVED_REGULATION: (ModificationKind.EXTERNAL_REGULATION, Target.LINEAR),
    ModificationKind.ADD_FEEDBACK_SPECIES: (ModificationKind.ADD_FEEDBACK_SPECIES, Target.MAXMIN_BASE),
    ModificationKind.ADD_CATALYST: (ModificationKind.ADD_CATALYST, Target.LINEAR),
    ModificationKind.ADD_DIMER: (ModificationKind.ADD_DIMER, Target.LINEAR),
    ModificationKind.ENZYMATIC: (ModificationKind.ENZYMATIC, Target.LINEAR),
    ModificationKind.PROCESSIVE: (ModificationKind.ENZYMATIC, Target.MAXMIN_BASE),
}


@pytest.mark.parametrize("case", range(50))
def test_reduce_undoes_random_modification(crn, case):
    """Test that reducing a modified random network recovers the network."""
    rng = np.random.default_rng(case)
    base = random_base(crn, rng)
    m = random_modification(ROUND_TRIP_KINDS[case % len(ROUND_TRIP_KINDS)], base, rng)
    modified = apply_modification(base, m)
    trace = reduce(modified, Target.LINEAR, minimal=True)
    assert trace is not None
    assert len(trace.steps) == 1
    assert find_isomorphism(trace.base, base) is not None
    assert trace.verify()


@pytest.mark.parametrize("kind", list(PEEL_GROUPS))
def test_peel_inverts_modification(crn, kind):
    """Test that some peel of a modified network gives back the original."""
    for seed in range(5):
        rng = np.random.default_rng([seed, list(PEEL_GROUPS).index(kind)])
        base = random_base(crn, rng)
        modified = apply_modification(base, random_modification(kind, base, rng))
        group, target = PEEL_GROUPS[kind]
        peels = peel_candidates(modified, [group], target)
        assert any(is_isomorphic(peel.network, base) for peel in peels)


def test_catalyst_and_dimer_rows(crn):
    """Test that a catalyst negates and a dimer copies the row of its partner."""
    rng = np.random.default_rng(11)
    base = random_base(crn, rng)
    for i in range(base.n):
        catalyst = apply_modification(base, Modification.catalyst(i, "Y"))
        assert np.array_equal(catalyst.gamma[catalyst.species_index("Y")], -catalyst.gamma[i])
        dimer = apply_modification(base, Modification.dimer(i, "L"))
        assert np.array_equal(dimer.gamma[dimer.species_index("L")], dimer.gamma[i])


def test_rank_under_intermediate_and_reversal(crn):
    """Test that an intermediate adds at most one to the rank and a reversal keeps it."""
    for seed in range(5):
        base = random_base(crn, np.random.default_rng(seed))
        for j in range(base.nu):
            assert apply_modification(base, Modification.reversal(j)).rank == base.rank
            assert apply_modification(base, Modification.intermediate(j, "D")).rank in (base.rank, base.rank + 1)
        assert apply_modification(crn("A -> B"), Modification.intermediate(0, "C")).rank == 2


@pytest.mark.parametrize("m, kind", [
    (Modification.conserved_regulation(0, "Z"), ModificationKind.CONSERVED_REGULATION),
    (Modification.external_regulation(0), ModificationKind.EXTERNAL_REGULATION),
])
def test_regulation_pair_is_peeled_whole(crn, m, kind):
    """Test that a minimal linear reduction removes a regulation pair rather than one reversal."""
    base = crn("A -> B\nB -> A")
    trace = reduce(apply_modification(base, m), Target.LINEAR, minimal=True)
    assert trace.kinds == (kind,)
    assert is_isomorphic(trace.base, base)
