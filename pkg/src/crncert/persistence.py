"""Siphons, critical siphon detection and graphical persistence."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import const
from .certificates import Certificate, RLFFamily
from .core import ConservationLaw, Network, conservation_laws, is_conservative, is_linear, positive_flux
from .graphmods import ModificationKind, ReductionTrace, Target, elementary_steps, licensing_violations

logger = logging.getLogger(__name__)

INVARIANT_KINDS = frozenset({
    ModificationKind.REVERSAL,
    ModificationKind.EXTERNAL_REGULATION,
    ModificationKind.CONSERVED_REGULATION,
    ModificationKind.ADD_INTERMEDIATE,
    ModificationKind.ADD_DIMER,
})


class SiphonClass(str, Enum):
    TRIVIAL = "Trivial"
    CRITICAL = "Critical"


class Persistence(str, Enum):
    YES = "Yes"
    NO = "No"
    INCOMPLETE = "Incomplete"


@dataclass(frozen=True)
class Siphon:
    members: FrozenSet[int]
    minimal: bool = True
    classification: Optional[SiphonClass] = None
    witness: Optional[ConservationLaw] = None

    def to_dict(self, net: Network) -> Dict:
        return {
            "members": sorted(net.species[i].name for i in self.members),
            "minimal": self.minimal,
            "classification": self.classification.value if self.classification else None,
            "witness_law": self.witness.as_dict(net) if self.witness else None,
        }


@dataclass(frozen=True)
class SiphonEnumeration:
    siphons: Tuple[Siphon, ...]
    complete: bool
    nodes: int


def _masks(net: Network) -> Tuple[List[int], List[int]]:
    produce, consume = [], []
    for reaction in net.reactions:
        produce.append(sum(1 << i for i in reaction.product_ids))
        consume.append(sum(1 << i for i in reaction.reactant_ids))
    return produce, consume


def _members(mask: int) -> FrozenSet[int]:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def _to_mask(members: Iterable[int]) -> int:
    return sum(1 << i for i in set(members))


def is_siphon(net: Network, members: Iterable[int]) -> bool:
    """Every reaction producing a member also consumes a member."""
    members = set(members)
    if not members:
        return False
    for reaction in net.reactions:
        if reaction.product_ids & members and not reaction.reactant_ids & members:
            return False
    return True


def enumerate_minimal_siphons(net: Network, species_cap: int = const.DEFAULT_SIPHON_CAP,
                              node_budget: int = const.DEFAULT_SIPHON_NODE_BUDGET) -> SiphonEnumeration:
    """All minimal siphons by seeded closure with branch and bound.

    Each seed species s is grown only inside species >= s. At every node the
    first violated reaction (it produces a member but consumes none) branches
    over its allowed reactants, earlier branches excluded from later ones.
    Sets containing a known siphon are pruned.
    """
    produce, consume = _masks(net)
    found: List[int] = []
    nodes = 0
    complete = net.n <= species_cap

    def violated(members: int) -> Optional[int]:
        best, best_count = None, None
        for j in range(net.nu):
            if produce[j] & members and not consume[j] & members:
                count = bin(consume[j]).count("1")
                if best is None or count < best_count:
                    best, best_count = j, count
        return best

    def grow(members: int, allowed: int) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            return False
        if any(s & members == s for s in found):
            return True
        j = violated(members)
        if j is None:
            found.append(members)
            return True
        candidates = consume[j] & allowed & ~members
        for i in range(net.n):
            if not candidates >> i & 1:
                continue
            if not grow(members | 1 << i, allowed):
                return False
            allowed &= ~(1 << i)
        return True

    everything = (1 << net.n) - 1
    for s in range(net.n):
        allowed = everything & ~((1 << s) - 1)
        if not grow(1 << s, allowed):
            logger.warning("Siphon enumeration stopped after %d nodes for %r", node_budget, net)
            complete = False
            break

    minimal = [m for m in found if not any(o != m and o & m == o for o in found)]
    minimal = sorted(set(minimal), key=lambda m: (bin(m).count("1"), m))
    if net.n > species_cap:
        logger.warning("%r has %d species, above the siphon cap %d; enumeration marked incomplete",
                       net, net.n, species_cap)
    return SiphonEnumeration(tuple(Siphon(_members(m)) for m in minimal), complete, nodes)


def _all_siphon_masks(net: Network) -> np.ndarray:
    masks = np.arange(1, 1 << net.n, dtype=np.int64)
    ok = np.ones(masks.shape, dtype=bool)
    produce, consume = _masks(net)
    for p, c in zip(produce, consume):
        ok &= ((masks & p) == 0) | ((masks & c) != 0)
    return masks[ok]


def exhaustive_minimal_siphons(net: Network) -> List[FrozenSet[int]]:
    """Brute force over all 2^n subsets; only for n <= 16."""
    if net.n > const.EXHAUSTIVE_SIPHON_LIMIT:
        raise ValueError(f"exhaustive siphon search limited to {const.EXHAUSTIVE_SIPHON_LIMIT} species")
    siphons = sorted(_all_siphon_masks(net).tolist(), key=lambda m: (bin(m).count("1"), m))
    kept: List[int] = []
    for m in siphons:
        if not any(k & m == k for k in kept):
            kept.append(m)
    return [_members(m) for m in kept]


def _law_masks(laws: Sequence[ConservationLaw]) -> List[Tuple[int, ConservationLaw]]:
    return [(_to_mask(law.support), law) for law in laws]


def classify_siphons(net: Network, siphons: Sequence[Siphon],
                     laws: Optional[Sequence[ConservationLaw]] = None) -> List[Siphon]:
    """Trivial iff the siphon contains the support of some extreme conservation law."""
    laws = conservation_laws(net) if laws is None else laws
    supports = _law_masks(laws)
    classified = []
    for siphon in siphons:
        mask = _to_mask(siphon.members)
        witness = next((law for support, law in supports if support & mask == support), None)
        label = SiphonClass.TRIVIAL if witness is not None else SiphonClass.CRITICAL
        classified.append(replace(siphon, classification=label, witness=witness))
    return classified


@dataclass(frozen=True)
class PersistenceVerdict:
    verdict: Persistence
    method: str
    witness: Optional[Siphon] = None
    siphons: Tuple[Siphon, ...] = ()
    flags: Tuple[str, ...] = ()

    def to_dict(self, net: Network) -> Dict:
        return {
            "verdict": self.verdict.value,
            "method": self.method,
            "witness": self.witness.to_dict(net) if self.witness else None,
            "siphons": [s.to_dict(net) for s in self.siphons],
            "flags": list(self.flags),
        }


def _exhaustive_critical(net: Network, laws: Sequence[ConservationLaw]) -> Optional[FrozenSet[int]]:
    """Smallest siphon, minimal or not, containing no conservation law support."""
    supports = [mask for mask, _ in _law_masks(laws)]
    for m in sorted(_all_siphon_masks(net).tolist(), key=lambda m: (bin(m).count("1"), m)):
        if not any(s & m == s for s in supports):
            return _members(m)
    return None


def graphically_persistent(net: Network, species_cap: int = const.DEFAULT_SIPHON_CAP,
                           exhaustive_limit: int = const.EXHAUSTIVE_SIPHON_LIMIT,
                           node_budget: int = const.DEFAULT_SIPHON_NODE_BUDGET) -> PersistenceVerdict:
    """Yes when no critical siphon exists, No with a witness, Incomplete past the budget."""
    laws = conservation_laws(net)
    enumeration = enumerate_minimal_siphons(net, species_cap, node_budget)
    siphons = classify_siphons(net, enumeration.siphons, laws)
    flags = []
    if not is_conservative(net)[0]:
        flags.append("bounded_trajectories_assumed")

    critical = [s for s in siphons if s.classification == SiphonClass.CRITICAL]
    if critical:
        return PersistenceVerdict(Persistence.NO, "enumeration", critical[0], tuple(siphons), tuple(flags))
    if not enumeration.complete:
        return PersistenceVerdict(Persistence.INCOMPLETE, "enumeration", None, tuple(siphons),
                                  tuple(flags + ["siphon_budget_exceeded"]))

    if net.n <= min(exhaustive_limit, const.EXHAUSTIVE_SIPHON_LIMIT):
        oracle = exhaustive_minimal_siphons(net)
        if set(oracle) != {s.members for s in siphons}:
            logger.warning("Minimal siphon enumeration disagrees with the exhaustive oracle for %r", net)
            siphons = classify_siphons(net, [Siphon(m) for m in oracle], laws)
            flags.append("oracle_disagreement")
        hidden = _exhaustive_critical(net, laws)
        if hidden is not None:
            witness = classify_siphons(net, [Siphon(hidden, minimal=False)], laws)[0]
            return PersistenceVerdict(Persistence.NO, "exhaustive", witness, tuple(siphons), tuple(flags))
        return PersistenceVerdict(Persistence.YES, "exhaustive", None, tuple(siphons), tuple(flags))
    flags.append("minimal_siphons_only")
    return PersistenceVerdict(Persistence.YES, "enumeration", None, tuple(siphons), tuple(flags))


def _expanded_kinds(trace: ReductionTrace) -> set:
    kinds = set()
    for step, pre in zip(trace.steps, trace.networks()):
        kinds |= {m.kind for m in elementary_steps(pre, step.modification)}
    return kinds


def propagate_persistence(trace: ReductionTrace, base_persistent: bool,
                          cert: Optional[Certificate] = None) -> Optional[PersistenceVerdict]:
    """Persistence from the trace structure alone, or None to fall back to enumeration.

    Three routes: a persistent base under siphon-invariant modifications; a
    linear base with a certified sum-of-currents trace; a conservative network
    with a max-min certificate.
    """
    final = trace.final
    kinds = _expanded_kinds(trace)
    if base_persistent and kinds <= INVARIANT_KINDS:
        return PersistenceVerdict(Persistence.YES, "invariance_propagation")
    if (cert is not None and cert.certified and trace.target == Target.LINEAR
            and is_linear(trace.base) and positive_flux(final) is not None
            and not licensing_violations(trace, Target.LINEAR)):
        return PersistenceVerdict(Persistence.YES, "linear_base_propagation")
    if cert is not None and cert.certified and cert.family == RLFFamily.MAXMIN and is_conservative(final)[0]:
        return PersistenceVerdict(Persistence.YES, "conservative_maxmin")
    return None
