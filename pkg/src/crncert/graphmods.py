"""Elementary network modifications, composite rewrites and the reduction search.

A reduction peels modifications off a network until a tractable base remains
(a linear network, or a network meeting the max-min structural conditions).
Peels are ordered deterministically, so the same network always yields the
same trace.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms import isomorphism as nx_iso

from .common.errors import ModificationError, NetworkError
from .core import (Network, NetworkBuilder, fold_reversible, is_linear, is_linear_reaction,
                   maxmin_conditions)

logger = logging.getLogger(__name__)


class ModificationKind(str, Enum):
    REVERSAL = "reversal"
    ADD_INTERMEDIATE = "add_intermediate"
    EXTERNAL_REGULATION = "external_regulation"
    CONSERVED_REGULATION = "conserved_regulation"
    ADD_FEEDBACK_SPECIES = "add_feedback_species"
    ADD_CATALYST = "add_catalyst"
    ADD_DIMER = "add_dimer"
    ENZYMATIC = "enzymatic"
    PROCESSIVE = "processive"


class Target(str, Enum):
    LINEAR = "linear"
    MAXMIN_BASE = "maxmin"


# Licence names recorded on trace steps
LINEAR_PRESERVING = "linear_preserving"
CATALYST_DIMER_EXTENSION = "catalyst_dimer_extension"
ENZYMATIC_REPLACEMENT = "enzymatic_replacement"
MAXMIN_PRESERVING = "maxmin_preserving"
MAXMIN_REVERSAL = "maxmin_reversal"
PROCESSIVE_REPLACEMENT = "processive_replacement"
UNLICENSED = "unlicensed"

LINEAR_PRESERVING_KINDS = frozenset({
    ModificationKind.REVERSAL,
    ModificationKind.ADD_INTERMEDIATE,
    ModificationKind.EXTERNAL_REGULATION,
    ModificationKind.CONSERVED_REGULATION,
})
MIRROR_KINDS = frozenset({ModificationKind.ADD_CATALYST, ModificationKind.ADD_DIMER})
COMPOSITE_KINDS = frozenset({ModificationKind.ENZYMATIC, ModificationKind.PROCESSIVE})

_LICENCES = {
    Target.LINEAR: {
        **{kind: LINEAR_PRESERVING for kind in LINEAR_PRESERVING_KINDS},
        ModificationKind.ADD_CATALYST: CATALYST_DIMER_EXTENSION,
        ModificationKind.ADD_DIMER: CATALYST_DIMER_EXTENSION,
        ModificationKind.ENZYMATIC: ENZYMATIC_REPLACEMENT,
    },
    Target.MAXMIN_BASE: {
        ModificationKind.ADD_INTERMEDIATE: MAXMIN_PRESERVING,
        ModificationKind.ADD_FEEDBACK_SPECIES: MAXMIN_PRESERVING,
        ModificationKind.ADD_CATALYST: MAXMIN_PRESERVING,
        ModificationKind.ADD_DIMER: MAXMIN_PRESERVING,
        ModificationKind.REVERSAL: MAXMIN_REVERSAL,
        ModificationKind.ENZYMATIC: PROCESSIVE_REPLACEMENT,
        ModificationKind.PROCESSIVE: PROCESSIVE_REPLACEMENT,
    },
}


def licence_for(kind: ModificationKind, target: Target) -> str:
    return _LICENCES[target].get(kind, UNLICENSED)


@dataclass(frozen=True)
class Modification:
    """One rewrite; ids refer to the network the modification is applied to."""

    kind: ModificationKind
    reaction: Optional[int] = None
    other_reaction: Optional[int] = None
    species: Optional[int] = None
    new_species: Optional[str] = None
    complexes: Tuple[str, ...] = ()

    @classmethod
    def reversal(cls, j: int) -> "Modification":
        return cls(ModificationKind.REVERSAL, reaction=j)

    @classmethod
    def intermediate(cls, j: int, name: str) -> "Modification":
        return cls(ModificationKind.ADD_INTERMEDIATE, reaction=j, new_species=name)

    @classmethod
    def external_regulation(cls, k: int) -> "Modification":
        return cls(ModificationKind.EXTERNAL_REGULATION, species=k)

    @classmethod
    def conserved_regulation(cls, k: int, name: str) -> "Modification":
        return cls(ModificationKind.CONSERVED_REGULATION, species=k, new_species=name)

    @classmethod
    def feedback(cls, j: int, k: int, name: str) -> "Modification":
        return cls(ModificationKind.ADD_FEEDBACK_SPECIES, reaction=j, other_reaction=k,
                   new_species=name)

    @classmethod
    def catalyst(cls, i: int, name: str) -> "Modification":
        return cls(ModificationKind.ADD_CATALYST, species=i, new_species=name)

    @classmethod
    def dimer(cls, i: int, name: str) -> "Modification":
        return cls(ModificationKind.ADD_DIMER, species=i, new_species=name)

    @classmethod
    def enzymatic(cls, j: int, enzyme: str, complex_name: str) -> "Modification":
        return cls(ModificationKind.ENZYMATIC, reaction=j, new_species=enzyme,
                   complexes=(complex_name,))

    @classmethod
    def processive(cls, j: int, enzyme: str, complexes: Sequence[str]) -> "Modification":
        return cls(ModificationKind.PROCESSIVE, reaction=j, new_species=enzyme,
                   complexes=tuple(complexes))

    def params(self, net: Network) -> Dict:
        """JSON parameters, naming species and reactions of ``net``."""
        params: Dict = {}
        if self.reaction is not None:
            params["reaction"] = net.reaction_text(self.reaction)
        if self.other_reaction is not None:
            params["other_reaction"] = net.reaction_text(self.other_reaction)
        if self.species is not None:
            params["species"] = net.species[self.species].name
        if self.new_species is not None:
            key = "enzyme" if self.kind in COMPOSITE_KINDS else "new_species"
            params[key] = self.new_species
        if self.complexes:
            params["complexes"] = list(self.complexes)
        return params


def _require_reaction(net: Network, j: Optional[int]) -> int:
    if j is None or not 0 <= j < net.nu:
        raise ModificationError(f"reaction {j} does not exist")
    return j


def _require_species(net: Network, i: Optional[int]) -> int:
    if i is None or not 0 <= i < net.n:
        raise ModificationError(f"species {i} does not exist")
    return i


def _require_fresh(builder: NetworkBuilder, name: Optional[str]) -> str:
    if not name:
        raise ModificationError("a name for the new species is required")
    if builder.has_species(name):
        raise ModificationError(f"species name {name!r} is already in use")
    return name


def _build(builder: NetworkBuilder) -> Network:
    try:
        return builder.build()
    except NetworkError as e:
        raise ModificationError(str(e)) from e


def elementary_steps(net: Network, m: Modification) -> List[Modification]:
    """Expand a composite into elementary modifications (elementary ones map to themselves)."""
    if m.kind not in COMPOSITE_KINDS:
        return [m]
    j = _require_reaction(net, m.reaction)
    if m.kind == ModificationKind.PROCESSIVE and len(m.complexes) < 2:
        raise ModificationError("a processive rewrite needs at least one step beyond the first complex")
    if not m.complexes:
        raise ModificationError("enzymatic rewrite needs a complex name")
    first = m.complexes[0]
    # A -> C0 stays at j, C0 -> B is appended at nu, C0 -> A at nu + 1
    steps = [Modification.intermediate(j, first), Modification.reversal(j)]
    steps.append(Modification(ModificationKind.ADD_CATALYST, species=net.n,
                              new_species=m.new_species))
    size = net.nu + 2
    last = net.nu
    for name in m.complexes[1:]:
        steps.append(Modification.intermediate(last, name))
        steps.append(Modification.reversal(last))
        last = size
        size += 2
    return steps


def apply_modification(net: Network, m: Modification) -> Network:
    """Apply one modification and return the new network."""
    if m.kind in COMPOSITE_KINDS:
        result = net
        for step in elementary_steps(net, m):
            result = apply_modification(result, step)
        return result

    builder = NetworkBuilder.from_network(net)
    kind = m.kind
    if kind == ModificationKind.REVERSAL:
        j = _require_reaction(net, m.reaction)
        if net.reactions[j].reverse_of is not None:
            raise ModificationError(f"reaction {net.reaction_text(j)} is already reversible")
        spec = builder.reactions[j]
        k = builder.add_reaction(spec["products"], spec["reactants"])
        builder.link_reverse(j, k)
    elif kind == ModificationKind.ADD_INTERMEDIATE:
        j = _require_reaction(net, m.reaction)
        name = _require_fresh(builder, m.new_species)
        spec = builder.reactions[j]
        if not spec["products"]:
            raise ModificationError(
                f"cannot add an intermediate to {net.reaction_text(j)}: the product side is empty")
        reactants, products = dict(spec["reactants"]), dict(spec["products"])
        builder.add_species(name)
        builder.replace_reaction(j, reactants, {name: 1})
        builder.add_reaction({name: 1}, products)
    elif kind == ModificationKind.EXTERNAL_REGULATION:
        name = net.species[_require_species(net, m.species)].name
        out = builder.add_reaction({name: 1}, {})
        inflow = builder.add_reaction({}, {name: 1})
        builder.link_reverse(out, inflow)
    elif kind == ModificationKind.CONSERVED_REGULATION:
        name = net.species[_require_species(net, m.species)].name
        fresh = _require_fresh(builder, m.new_species)
        builder.add_species(fresh)
        forward = builder.add_reaction({name: 1}, {fresh: 1})
        backward = builder.add_reaction({fresh: 1}, {name: 1})
        builder.link_reverse(forward, backward)
    elif kind == ModificationKind.ADD_FEEDBACK_SPECIES:
        j = _require_reaction(net, m.reaction)
        k = _require_reaction(net, m.other_reaction)
        if j == k:
            raise ModificationError("feedback species needs two distinct reactions")
        fresh = _require_fresh(builder, m.new_species)
        builder.add_species(fresh)
        builder.unlink(j)
        builder.unlink(k)
        builder.reactions[j]["products"][fresh] = 1
        builder.reactions[k]["reactants"][fresh] = 1
    elif kind in MIRROR_KINDS:
        target = net.species[_require_species(net, m.species)].name
        fresh = _require_fresh(builder, m.new_species)
        builder.add_species(fresh)
        mirrored = kind == ModificationKind.ADD_CATALYST
        for spec in builder.reactions:
            a = spec["reactants"].get(target, 0)
            b = spec["products"].get(target, 0)
            if mirrored:
                a, b = b, a
            if a:
                spec["reactants"][fresh] = a
            if b:
                spec["products"][fresh] = b
    else:
        raise ModificationError(f"unknown modification kind {kind}")
    return _build(builder)


def apply_enzymatic(net: Network, j: int, enzyme: str, complex_name: str) -> Network:
    """Replace reaction j (A -> B) by A + E <-> C -> B + E."""
    return apply_modification(net, Modification.enzymatic(j, enzyme, complex_name))


def apply_processive(net: Network, j: int, enzyme: str, m: int,
                     complexes: Optional[Sequence[str]] = None) -> Network:
    """Replace reaction j by A + E <-> C0 <-> ... <-> Cm -> B + E with m >= 1."""
    if m < 1:
        raise ModificationError(f"processive rewrite needs m >= 1, got {m}")
    if complexes is None:
        complexes = [f"{enzyme}_C{k}" for k in range(m + 1)]
    if len(complexes) != m + 1:
        raise ModificationError(f"expected {m + 1} complex names, got {len(complexes)}")
    return apply_modification(net, Modification.processive(j, enzyme, complexes))


# Isomorphism

def _labelled_graph(net: Network) -> nx.DiGraph:
    return net.petri_net.graph


def find_isomorphism(a: Network, b: Network) -> Optional[Dict[str, Dict[int, int]]]:
    """Species and reaction id maps from ``a`` to ``b``, or None.

    Weisfeiler-Lehman hashes reject most non-isomorphic pairs; VF2 settles ties.
    """
    if (a.n, a.nu) != (b.n, b.nu):
        return None
    ga, gb = _labelled_graph(a), _labelled_graph(b)
    if nx.weisfeiler_lehman_graph_hash(ga, node_attr="kind", edge_attr="label") != \
            nx.weisfeiler_lehman_graph_hash(gb, node_attr="kind", edge_attr="label"):
        return None
    matcher = nx_iso.DiGraphMatcher(
        ga, gb,
        node_match=nx_iso.categorical_node_match("kind", None),
        edge_match=nx_iso.categorical_edge_match("weight", None),
    )
    for mapping in matcher.isomorphisms_iter():
        species = {u[1]: v[1] for u, v in mapping.items() if u[0] == "s"}
        reactions = {u[1]: v[1] for u, v in mapping.items() if u[0] == "r"}
        # Reverse links are not arcs, so check them separately
        if all(
            b.reactions[reactions[j]].reverse_of
            == (None if a.reactions[j].reverse_of is None else reactions[a.reactions[j].reverse_of])
            for j in reactions
        ):
            return {"species": species, "reactions": reactions}
    return None


def is_isomorphic(a: Network, b: Network) -> bool:
    return find_isomorphism(a, b) is not None


# Traces

@dataclass(frozen=True)
class TraceStep:
    modification: Modification
    licensed_by: str
    maxmin_reversal_eligible: Optional[bool] = None

    def to_dict(self, pre: Network) -> Dict:
        data = {
            "kind": self.modification.kind.value,
            "params": self.modification.params(pre),
            "licensed_by": self.licensed_by,
        }
        if self.maxmin_reversal_eligible is not None:
            data["maxmin_reversal_eligible"] = self.maxmin_reversal_eligible
        return data


@dataclass(frozen=True)
class ReductionTrace:
    """base --steps--> final, up to renaming."""

    base: Network
    steps: Tuple[TraceStep, ...]
    final: Network
    target: Target = Target.LINEAR

    @property
    def kinds(self) -> Tuple[ModificationKind, ...]:
        return tuple(step.modification.kind for step in self.steps)

    def networks(self) -> List[Network]:
        """Networks along the replay, base first."""
        nets = [self.base]
        for step in self.steps:
            nets.append(apply_modification(nets[-1], step.modification))
        return nets

    def replay(self) -> Network:
        return self.networks()[-1]

    def verify(self) -> bool:
        """Replaying the steps reproduces the final network up to isomorphism."""
        try:
            return is_isomorphic(self.replay(), self.final)
        except ModificationError as e:
            logger.warning("Trace replay failed: %s", e)
            return False

    def to_dict(self) -> Dict:
        from .netio import serialize_network
        nets = self.networks()
        return {
            "target": self.target.value,
            "base_network": serialize_network(self.base),
            "steps": [step.to_dict(pre) for step, pre in zip(self.steps, nets)],
        }


def empty_trace(net: Network, target: Target) -> ReductionTrace:
    return ReductionTrace(net, (), net, target)


def _reversal_eligible(net: Network, j: int) -> bool:
    """Products of reaction j are produced by no other folded reaction."""
    forward, _ = fold_reversible(net)
    others = set()
    for other in forward:
        if other != j:
            others |= net.reactions[other].product_ids
    return not (net.reactions[j].product_ids & others)


def licensing_violations(trace: ReductionTrace, target: Target) -> List[str]:
    """Structural reasons the trace does not license the target's Lyapunov function."""
    violations: List[str] = []
    net = trace.base
    if target == Target.LINEAR and not is_linear(net):
        violations.append("base network is not linear")
    if target == Target.MAXMIN_BASE and not maxmin_conditions(net).holds:
        violations.append("base network does not meet the max-min conditions")
    for index, step in enumerate(trace.steps):
        m = step.modification
        if step.licensed_by != licence_for(m.kind, target) or step.licensed_by == UNLICENSED:
            violations.append(f"step {index}: {m.kind.value} is not licensed for {target.value}")
        elif target == Target.LINEAR:
            if m.kind in LINEAR_PRESERVING_KINDS and not is_linear(net):
                violations.append(f"step {index}: {m.kind.value} applied to a non-linear network")
            if m.kind == ModificationKind.ENZYMATIC and not is_linear_reaction(net.reactions[m.reaction]):
                violations.append(f"step {index}: enzymatic rewrite of a non-linear reaction")
        elif m.kind in COMPOSITE_KINDS or m.kind == ModificationKind.REVERSAL:
            if not maxmin_conditions(net).holds:
                violations.append(f"step {index}: {m.kind.value} applied outside the max-min conditions")
            elif m.kind == ModificationKind.REVERSAL and not _reversal_eligible(net, m.reaction):
                violations.append(f"step {index}: reversed reaction shares a product with another reaction")
        try:
            net = apply_modification(net, m)
        except ModificationError as e:
            violations.append(f"step {index}: {e}")
            break
    return violations


# Peels

@dataclass(frozen=True)
class Peel:
    """Inverse of one modification: ``apply_modification(network, modification)`` ~ source."""

    kind: ModificationKind
    network: Network
    modification: Modification
    order: Tuple = field(default=(), compare=False)


def _linear_count(net: Network) -> int:
    return sum(1 for r in net.reactions if is_linear_reaction(r))


def _make_peel(kind: ModificationKind, builder: NetworkBuilder, modification_factory,
               tie: int) -> Optional[Peel]:
    try:
        peeled = builder.build()
        modification = modification_factory(peeled)
    except (NetworkError, ModificationError, ValueError):
        return None
    return Peel(kind, peeled, modification, order=(-_linear_count(peeled), -tie))


def _without_species(net: Network, x: int) -> Optional[NetworkBuilder]:
    name = net.species[x].name
    builder = NetworkBuilder.from_network(net)
    for spec in builder.reactions:
        spec["reactants"].pop(name, None)
        spec["products"].pop(name, None)
        if not spec["reactants"] and not spec["products"]:
            return None
    builder.remove_species([name])
    return builder


def _mirror_peels(net: Network, kind: ModificationKind) -> List[Peel]:
    peels = []
    alpha, beta = net.alpha, net.beta
    for x in range(net.n):
        if not (alpha[x].any() or beta[x].any()):
            continue
        for y in range(net.n):
            if y == x:
                continue
            if kind == ModificationKind.ADD_CATALYST:
                match = np.array_equal(beta[x], alpha[y]) and np.array_equal(alpha[x], beta[y])
            else:
                # Equal rows are symmetric; keep the lower id as the original
                match = y < x and np.array_equal(alpha[x], alpha[y]) and np.array_equal(beta[x], beta[y])
            if not match:
                continue
            builder = _without_species(net, x)
            if builder is None:
                continue
            partner, name = net.species[y].name, net.species[x].name
            factory = (
                (lambda p, partner=partner, name=name: Modification.catalyst(p.species_index(partner), name))
                if kind == ModificationKind.ADD_CATALYST else
                (lambda p, partner=partner, name=name: Modification.dimer(p.species_index(partner), name))
            )
            peel = _make_peel(kind, builder, factory, x)
            if peel is not None:
                peels.append(peel)
            break
    return peels


def _occurrences(net: Network, x: int) -> Tuple[List[int], List[int]]:
    producers = [r.id for r in net.reactions if x in r.product_ids]
    consumers = [r.id for r in net.reactions if x in r.reactant_ids]
    return producers, consumers


def _intermediate_peels(net: Network) -> List[Peel]:
    peels = []
    for x in range(net.n):
        producers, consumers = _occurrences(net, x)
        if len(producers) != 1 or len(consumers) != 1:
            continue
        j, k = producers[0], consumers[0]
        rj, rk = net.reactions[j], net.reactions[k]
        if j == k or rj.products != ((x, 1),) or rk.reactants != ((x, 1),):
            continue
        if rj.reverse_of == k or not rk.products:
            continue
        if rj.reactant_ids & rk.product_ids:
            continue
        name = net.species[x].name
        builder = NetworkBuilder.from_network(net)
        reactants = dict(builder.reactions[j]["reactants"])
        products = dict(builder.reactions[k]["products"])
        builder.replace_reaction(j, reactants, products)
        builder.remove_reactions([k])
        builder.remove_species([name])
        merged = j if j < k else j - 1
        peel = _make_peel(ModificationKind.ADD_INTERMEDIATE, builder,
                          lambda p, merged=merged, name=name: Modification.intermediate(merged, name), x)
        if peel is not None:
            peels.append(peel)
    return peels


def _reversal_peels(net: Network, target: Target) -> List[Peel]:
    peels = []
    for reaction in net.reactions:
        k = reaction.reverse_of
        if k is None or k < reaction.id:
            continue
        j = reaction.id
        for keep, drop in ((j, k), (k, j)):
            builder = NetworkBuilder.from_network(net)
            builder.remove_reactions([drop])
            kept = keep if keep < drop else keep - 1
            peel = _make_peel(ModificationKind.REVERSAL, builder,
                              lambda p, kept=kept: Modification.reversal(kept), drop)
            if peel is None:
                continue
            if target == Target.MAXMIN_BASE and not _reversal_eligible(peel.network, kept):
                continue
            peels.append(peel)
            if target == Target.LINEAR:
                break
    return peels


def _regulation_peels(net: Network) -> List[Peel]:
    peels = []
    for reaction in net.reactions:
        k = reaction.reverse_of
        if k is None or k < reaction.id:
            continue
        partner = net.reactions[k]
        pair = (reaction, partner)
        # x -> 0 with 0 -> x
        for out, inflow in (pair, pair[::-1]):
            if len(out.reactants) == 1 and out.reactants[0][1] == 1 and not out.products:
                x = out.reactants[0][0]
                name = net.species[x].name
                builder = NetworkBuilder.from_network(net)
                builder.remove_reactions([out.id, inflow.id])
                peel = _make_peel(ModificationKind.EXTERNAL_REGULATION, builder,
                                  lambda p, name=name: Modification.external_regulation(p.species_index(name)), x)
                if peel is not None:
                    peels.append(peel)
                break
        # x -> z with z -> x, z private to the pair
        if (len(reaction.reactants) == 1 and len(reaction.products) == 1
                and reaction.reactants[0][1] == 1 and reaction.products[0][1] == 1):
            a, b = reaction.reactants[0][0], reaction.products[0][0]
            for keep, fresh in ((a, b), (b, a)):
                producers, consumers = _occurrences(net, fresh)
                if set(producers) | set(consumers) != {reaction.id, k}:
                    continue
                keep_name, fresh_name = net.species[keep].name, net.species[fresh].name
                builder = NetworkBuilder.from_network(net)
                builder.remove_reactions([reaction.id, k])
                builder.remove_species([fresh_name])
                peel = _make_peel(
                    ModificationKind.CONSERVED_REGULATION, builder,
                    lambda p, keep_name=keep_name, fresh_name=fresh_name:
                        Modification.conserved_regulation(p.species_index(keep_name), fresh_name),
                    fresh)
                if peel is not None:
                    peels.append(peel)
                break
    return peels


def _feedback_peels(net: Network) -> List[Peel]:
    peels = []
    for x in range(net.n):
        producers, consumers = _occurrences(net, x)
        if len(producers) != 1 or len(consumers) != 1:
            continue
        j, k = producers[0], consumers[0]
        rj, rk = net.reactions[j], net.reactions[k]
        if j == k or rj.product_map.get(x) != 1 or rk.reactant_map.get(x) != 1:
            continue
        if rj.reverse_of is not None or rk.reverse_of is not None:
            continue
        if rj.products == ((x, 1),) and rk.reactants == ((x, 1),):
            continue
        name = net.species[x].name
        builder = _without_species(net, x)
        if builder is None:
            continue
        peel = _make_peel(ModificationKind.ADD_FEEDBACK_SPECIES, builder,
                          lambda p, j=j, k=k, name=name: Modification.feedback(j, k, name), x)
        if peel is not None:
            peels.append(peel)
    return peels


@dataclass(frozen=True)
class EnzymeChain:
    enzyme: int
    complexes: Tuple[int, ...]
    first: int
    reactions: Tuple[int, ...]
    last: int


def _enzyme_chains(net: Network) -> Iterator[EnzymeChain]:
    """Find A + E <-> C0 (<-> C1 ...) -> B + E patterns with a private enzyme."""
    for e in range(net.n):
        producers, consumers = _occurrences(net, e)
        if len(consumers) != 1:
            continue
        r1 = net.reactions[consumers[0]]
        if r1.reactant_map.get(e) != 1 or r1.reverse_of is None or e in r1.product_ids:
            continue
        if len(r1.products) != 1 or r1.products[0][1] != 1:
            continue
        others = [p for p in producers if p != r1.reverse_of]
        if len(others) != 1 or len(producers) != 2:
            continue
        last = others[0]
        if net.reactions[last].product_map.get(e) != 1 or e in net.reactions[last].reactant_ids:
            continue

        complexes = [r1.products[0][0]]
        chain = [r1.id, r1.reverse_of]
        current, back = complexes[0], r1.reverse_of
        found = False
        while True:
            _, cons = _occurrences(net, current)
            forward = [c for c in cons if c != back]
            if len(forward) != 1:
                break
            step = net.reactions[forward[0]]
            if step.reactants != ((current, 1),):
                break
            if step.id == last:
                chain.append(step.id)
                found = True
                break
            if (len(step.products) != 1 or step.products[0][1] != 1 or step.reverse_of is None
                    or step.products[0][0] in complexes or step.products[0][0] == e):
                break
            complexes.append(step.products[0][0])
            chain.extend([step.id, step.reverse_of])
            current, back = complexes[-1], step.reverse_of
        if not found:
            continue
        members = set(chain)
        private = all(
            set(p) | set(c) <= members for p, c in (_occurrences(net, s) for s in complexes)
        )
        if private:
            yield EnzymeChain(e, tuple(complexes), r1.id, tuple(chain), last)


def _composite_peels(net: Network, allow_processive: bool) -> List[Peel]:
    peels = []
    for chain in _enzyme_chains(net):
        if len(chain.complexes) > 1 and not allow_processive:
            continue
        enzyme = net.species[chain.enzyme].name
        names = [net.species[c].name for c in chain.complexes]
        builder = NetworkBuilder.from_network(net)
        reactants = {s: c for s, c in builder.reactions[chain.first]["reactants"].items() if s != enzyme}
        products = {s: c for s, c in builder.reactions[chain.last]["products"].items() if s != enzyme}
        if not reactants and not products:
            continue
        if set(reactants) & set(products):
            continue
        builder.replace_reaction(chain.first, reactants, products)
        drop = [r for r in chain.reactions if r != chain.first]
        builder.remove_reactions(drop)
        builder.remove_species([enzyme] + names)
        merged = chain.first - sum(1 for r in drop if r < chain.first)
        if len(names) == 1:
            kind = ModificationKind.ENZYMATIC
            factory = lambda p, merged=merged, enzyme=enzyme, names=names: \
                Modification.enzymatic(merged, enzyme, names[0])
        else:
            kind = ModificationKind.PROCESSIVE
            factory = lambda p, merged=merged, enzyme=enzyme, names=names: \
                Modification.processive(merged, enzyme, names)
        peel = _make_peel(kind, builder, factory, chain.enzyme)
        if peel is not None:
            peels.append(peel)
    return peels


def _composite_peels_for(net: Network, target: Target) -> List[Peel]:
    peels = _composite_peels(net, target == Target.MAXMIN_BASE)
    if target == Target.LINEAR:
        # Enzymatic replacement is only licensed on linear reactions
        peels = [p for p in peels
                 if is_linear_reaction(p.network.reactions[p.modification.reaction])]
    return peels


# EXTERNAL_REGULATION stands for both regulation peels
_PEELERS = {
    ModificationKind.ENZYMATIC: _composite_peels_for,
    ModificationKind.ADD_CATALYST: lambda net, target: _mirror_peels(net, ModificationKind.ADD_CATALYST),
    ModificationKind.ADD_DIMER: lambda net, target: _mirror_peels(net, ModificationKind.ADD_DIMER),
    ModificationKind.ADD_FEEDBACK_SPECIES: lambda net, target: _feedback_peels(net),
    ModificationKind.ADD_INTERMEDIATE: lambda net, target: _intermediate_peels(net),
    ModificationKind.REVERSAL: lambda net, target: _reversal_peels(net, target),
    ModificationKind.EXTERNAL_REGULATION: lambda net, target: _regulation_peels(net),
}

# Search phases per target: peels used before the target holds, then the
# optional continuation used while it keeps holding. Peeling runs backwards,
# so steps that must come last in a trace are peeled first. Regulation pairs
# go before reversals so a pair is removed whole.
_SEARCH_ORDER = {
    Target.LINEAR: (ModificationKind.ENZYMATIC, ModificationKind.ADD_CATALYST,
                    ModificationKind.ADD_DIMER),
    Target.MAXMIN_BASE: (ModificationKind.ADD_CATALYST, ModificationKind.ADD_DIMER,
                         ModificationKind.ADD_FEEDBACK_SPECIES, ModificationKind.ADD_INTERMEDIATE),
}
_CONTINUATION_ORDER = {
    Target.LINEAR: (ModificationKind.EXTERNAL_REGULATION, ModificationKind.ADD_INTERMEDIATE,
                    ModificationKind.REVERSAL),
    Target.MAXMIN_BASE: (ModificationKind.ENZYMATIC, ModificationKind.REVERSAL),
}


def peel_candidates(net: Network, kinds: Optional[Sequence[ModificationKind]] = None,
                    target: Target = Target.LINEAR) -> List[Peel]:
    """All peels of the given kinds, grouped by kind in the given order, best first."""
    kinds = list(kinds) if kinds is not None else [
        ModificationKind.ENZYMATIC, ModificationKind.ADD_CATALYST, ModificationKind.ADD_DIMER,
        ModificationKind.ADD_FEEDBACK_SPECIES, ModificationKind.ADD_INTERMEDIATE,
        ModificationKind.REVERSAL, ModificationKind.EXTERNAL_REGULATION,
    ]
    result: List[Peel] = []
    for kind in kinds:
        result.extend(sorted(_PEELERS[kind](net, target), key=lambda p: p.order))
    return result


def target_holds(net: Network, target: Target) -> bool:
    if target == Target.LINEAR:
        return is_linear(net)
    return maxmin_conditions(net).holds


def _remap(m: Modification, mapping: Dict[str, Dict[int, int]]) -> Modification:
    reactions, species = mapping["reactions"], mapping["species"]
    return replace(
        m,
        reaction=None if m.reaction is None else reactions[m.reaction],
        other_reaction=None if m.other_reaction is None else reactions[m.other_reaction],
        species=None if m.species is None else species[m.species],
    )


def _trace_from(path: List[Peel], source: Network, target: Target) -> ReductionTrace:
    """Turn a peel path (outermost first) into a trace replayed from its base.

    Each peel names reactions in its own numbering; replay appends reactions
    in a different order, so every step is carried over by an isomorphism.
    """
    base = path[-1].network if path else source
    current = base
    steps = []
    for peel in reversed(path):
        m = peel.modification
        if peel.network != current:
            mapping = find_isomorphism(peel.network, current)
            if mapping is None:
                raise ModificationError(f"replay diverged before a {peel.kind.value} step")
            m = _remap(m, mapping)
        eligible = None
        if target == Target.MAXMIN_BASE and peel.kind == ModificationKind.REVERSAL:
            eligible = _reversal_eligible(current, m.reaction)
        steps.append(TraceStep(m, licence_for(peel.kind, target), eligible))
        current = apply_modification(current, m)
    return ReductionTrace(base, tuple(steps), source, target)


class _Search:
    def __init__(self, root: Network, target: Target, branches: int, budget: int):
        self.root = root
        self.target = target
        self.branches = branches
        self.budget = budget
        self.expansions = 0
        self.failed = set()

    def run(self, net: Network, path: Tuple[Peel, ...] = ()) -> Optional[List[Peel]]:
        if self.expansions >= self.budget:
            return None
        self.expansions += 1
        if target_holds(net, self.target):
            if path:
                try:
                    trace = _trace_from(list(path), self.root, self.target)
                except ModificationError as e:
                    logger.debug("Peel path does not replay: %s", e)
                    return None
                if licensing_violations(trace, self.target):
                    return None
            return []
        if net.key in self.failed:
            return None
        candidates = peel_candidates(net, _SEARCH_ORDER[self.target], self.target)
        for peel in candidates[:self.branches]:
            logger.debug("Peel %s -> %d species, %d reactions",
                         peel.kind.value, peel.network.n, peel.network.nu)
            rest = self.run(peel.network, path + (peel,))
            if rest is not None:
                return [peel] + rest
        self.failed.add(net.key)
        return None

    def continuation(self, net: Network) -> List[Peel]:
        path: List[Peel] = []
        while True:
            candidates = [
                p for p in peel_candidates(net, _CONTINUATION_ORDER[self.target], self.target)
                if target_holds(p.network, self.target)
            ]
            if not candidates:
                return path
            path.append(candidates[0])
            net = candidates[0].network


def reduce(net: Network, target: Target, branches: int = 3, budget: int = 2000,
           minimal: Optional[bool] = None) -> Optional[ReductionTrace]:
    """Express ``net`` as a modification of a base network meeting ``target``.

    ``minimal`` keeps peeling while the target keeps holding; it defaults to
    True for the max-min target and False for the linear one. None means no
    reduction was found, which proves nothing about stability.
    """
    target = Target(target)
    if minimal is None:
        minimal = target == Target.MAXMIN_BASE
    search = _Search(net, target, branches, budget)
    path = search.run(net)
    if path is None:
        logger.debug("No %s reduction for %r after %d expansions", target.value, net,
                     search.expansions)
        return None
    if minimal:
        path = path + search.continuation(path[-1].network if path else net)

    try:
        trace = _trace_from(path, net, target)
    except ModificationError as e:
        logger.warning("Discarding %s trace for %r: %s", target.value, net, e)
        return None
    if trace.steps and not trace.verify():
        logger.warning("Discarding %s trace for %r: replay is not isomorphic", target.value, net)
        return None
    return trace


def mirror_partner_flags(trace: ReductionTrace) -> List[str]:
    """Species mirrored by more than one catalyst or dimer along the trace."""
    counts: Dict[str, int] = {}
    for step, pre in zip(trace.steps, trace.networks()):
        m = step.modification
        if m.kind in MIRROR_KINDS:
            name = pre.species[m.species].name
            counts[name] = counts.get(name, 0) + 1
    flags = [f"multiple_mirror_partners:{name}" for name, c in sorted(counts.items()) if c > 1]
    for flag in flags:
        logger.warning("Trace flag %s", flag)
    return flags
