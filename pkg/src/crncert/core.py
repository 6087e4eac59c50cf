"""Network model, stoichiometry, conservation laws, fluxes and the Petri net."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from . import linalg
from .common.errors import NetworkError

logger = logging.getLogger(__name__)

Terms = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class Species:
    """A species with a dense integer id."""

    id: int
    name: str


@dataclass(frozen=True)
class Reaction:
    """A directed reaction; reactants and products are sorted (species id, coefficient) pairs."""

    id: int
    reactants: Terms
    products: Terms
    reverse_of: Optional[int] = None

    @property
    def reactant_map(self) -> Dict[int, int]:
        return dict(self.reactants)

    @property
    def product_map(self) -> Dict[int, int]:
        return dict(self.products)

    @property
    def reactant_ids(self) -> FrozenSet[int]:
        return frozenset(s for s, _ in self.reactants)

    @property
    def product_ids(self) -> FrozenSet[int]:
        return frozenset(s for s, _ in self.products)

    @property
    def is_catalytic(self) -> bool:
        """True if some species appears on both sides."""
        return bool(self.reactant_ids & self.product_ids)


def _normalize_terms(terms: Mapping[int, int] | Iterable[Tuple[int, int]]) -> Terms:
    items = terms.items() if isinstance(terms, Mapping) else terms
    merged: Dict[int, int] = {}
    for species, coeff in items:
        merged[int(species)] = merged.get(int(species), 0) + int(coeff)
    return tuple(sorted(merged.items()))


class Network:
    """Immutable reaction network.

    Species ids are dense 0..n-1 in declaration order. Reversible reactions
    are two directed reactions linked through ``reverse_of``.
    """

    def __init__(self, species: Sequence[str], reactions: Sequence[Reaction], name: str = ""):
        names = [str(s) for s in species]
        if len(set(names)) != len(names):
            raise NetworkError(f"duplicate species names in {names}")
        self.name = name
        self.species: Tuple[Species, ...] = tuple(Species(i, s) for i, s in enumerate(names))
        self.reactions: Tuple[Reaction, ...] = tuple(reactions)
        self._index = {s: i for i, s in enumerate(names)}
        self._validate()

        n, nu = len(self.species), len(self.reactions)
        alpha = np.zeros((n, nu), dtype=np.int64)
        beta = np.zeros((n, nu), dtype=np.int64)
        for reaction in self.reactions:
            for s, c in reaction.reactants:
                alpha[s, reaction.id] = c
            for s, c in reaction.products:
                beta[s, reaction.id] = c
        gamma = beta - alpha
        for matrix in (alpha, beta, gamma):
            matrix.setflags(write=False)
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma

    def _validate(self) -> None:
        n = len(self.species)
        for j, reaction in enumerate(self.reactions):
            if reaction.id != j:
                raise NetworkError(f"reaction ids must be dense, found {reaction.id} at {j}")
            if not reaction.reactants and not reaction.products:
                raise NetworkError(f"reaction {j} has both sides empty")
            for s, c in reaction.reactants + reaction.products:
                if not 0 <= s < n:
                    raise NetworkError(f"reaction {j} references unknown species {s}")
                if c <= 0:
                    raise NetworkError(f"reaction {j} has non-positive coefficient {c}")
            k = reaction.reverse_of
            if k is not None:
                if not 0 <= k < len(self.reactions) or k == j:
                    raise NetworkError(f"reaction {j} has invalid reverse link {k}")
                partner = self.reactions[k]
                if partner.reverse_of != j:
                    raise NetworkError(f"reverse link {j} -> {k} is not symmetric")
                if partner.reactants != reaction.products or partner.products != reaction.reactants:
                    raise NetworkError(f"reactions {j} and {k} are linked but not mutually reverse")

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def nu(self) -> int:
        return len(self.reactions)

    @property
    def species_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.species)

    def species_index(self, name: str) -> int:
        """Return the id of the named species."""
        try:
            return self._index[name]
        except KeyError:
            raise NetworkError(f"unknown species {name!r}") from None

    def side_text(self, terms: Terms) -> str:
        if not terms:
            return "0"
        return " + ".join(
            self.species[s].name if c == 1 else f"{c} {self.species[s].name}" for s, c in terms
        )

    def reaction_text(self, j: int) -> str:
        """Human readable form of reaction j."""
        reaction = self.reactions[j]
        return f"{self.side_text(reaction.reactants)} -> {self.side_text(reaction.products)}"

    def with_name(self, name: str) -> "Network":
        return Network(self.species_names, self.reactions, name=name)

    @cached_property
    def key(self) -> Tuple:
        """Structural identity: species names plus reaction tuples."""
        return (self.species_names, self.reactions)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Network) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"Network({self.name or '<anonymous>'}: {self.n} species, {self.nu} reactions)"

    @cached_property
    def gamma_rows(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(int(v) for v in row) for row in self.gamma)

    @cached_property
    def rank(self) -> int:
        """Exact rank of the stoichiometry matrix."""
        return linalg.exact_rank(self.gamma_rows)

    @cached_property
    def left_rays(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(linalg.left_kernel_rays(self.gamma_rows, self.n))

    @cached_property
    def petri_net(self) -> "PetriNet":
        return PetriNet(self)


class NetworkBuilder:
    """Name-keyed mutable staging area for building and rewriting networks."""

    def __init__(self, name: str = ""):
        self.name = name
        self.species: List[str] = []
        self.reactions: List[Dict] = []

    @classmethod
    def from_network(cls, net: Network) -> "NetworkBuilder":
        builder = cls(net.name)
        builder.species = list(net.species_names)
        for reaction in net.reactions:
            builder.reactions.append({
                "reactants": {net.species[s].name: c for s, c in reaction.reactants},
                "products": {net.species[s].name: c for s, c in reaction.products},
                "reverse": reaction.reverse_of,
            })
        return builder

    def has_species(self, name: str) -> bool:
        return name in self.species

    def ensure_species(self, name: str) -> None:
        if name not in self.species:
            self.species.append(name)

    def add_species(self, name: str) -> None:
        """Add a fresh species; an existing name is an error."""
        if name in self.species:
            raise NetworkError(f"species {name!r} already exists")
        self.species.append(name)

    def add_reaction(self, reactants: Mapping[str, int], products: Mapping[str, int]) -> int:
        for name in list(reactants) + list(products):
            self.ensure_species(name)
        self.reactions.append({"reactants": dict(reactants), "products": dict(products),
                               "reverse": None})
        return len(self.reactions) - 1

    def link_reverse(self, j: int, k: int) -> None:
        self.reactions[j]["reverse"] = k
        self.reactions[k]["reverse"] = j

    def unlink(self, j: int) -> None:
        k = self.reactions[j]["reverse"]
        if k is not None:
            self.reactions[k]["reverse"] = None
        self.reactions[j]["reverse"] = None

    def replace_reaction(self, j: int, reactants: Mapping[str, int],
                         products: Mapping[str, int]) -> None:
        """Overwrite reaction j in place; any reverse link of j is dropped."""
        self.unlink(j)
        for name in list(reactants) + list(products):
            self.ensure_species(name)
        self.reactions[j]["reactants"] = dict(reactants)
        self.reactions[j]["products"] = dict(products)

    def remove_reactions(self, indices: Iterable[int]) -> None:
        drop = set(indices)
        for j in drop:
            self.unlink(j)
        mapping: Dict[int, int] = {}
        kept = []
        for j, reaction in enumerate(self.reactions):
            if j not in drop:
                mapping[j] = len(kept)
                kept.append(reaction)
        for reaction in kept:
            if reaction["reverse"] is not None:
                reaction["reverse"] = mapping[reaction["reverse"]]
        self.reactions = kept

    def remove_species(self, names: Iterable[str]) -> None:
        """Remove species that no longer occur in any reaction."""
        drop = set(names)
        for j, reaction in enumerate(self.reactions):
            if drop & (set(reaction["reactants"]) | set(reaction["products"])):
                raise NetworkError(f"cannot remove species still used by reaction {j}")
        self.species = [s for s in self.species if s not in drop]

    def build(self) -> Network:
        index = {name: i for i, name in enumerate(self.species)}
        reactions = []
        for j, spec in enumerate(self.reactions):
            reactants = _normalize_terms((index[s], c) for s, c in spec["reactants"].items() if c)
            products = _normalize_terms((index[s], c) for s, c in spec["products"].items() if c)
            reactions.append(Reaction(j, reactants, products, spec["reverse"]))
        return Network(self.species, reactions, name=self.name)


@dataclass(frozen=True)
class ConservationLaw:
    """Nonnegative left-kernel vector of the stoichiometry matrix, as coprime integers."""

    d: Tuple[int, ...]

    @property
    def support(self) -> FrozenSet[int]:
        return frozenset(i for i, v in enumerate(self.d) if v)

    def as_dict(self, net: Network) -> Dict[str, int]:
        return {net.species[i].name: v for i, v in enumerate(self.d) if v}


@dataclass(frozen=True)
class Flux:
    """Positive right-kernel vector; ``unique`` means unique up to scaling."""

    v: Tuple[int, ...]
    unique: bool


@dataclass(frozen=True)
class AssumptionReport:
    as1: bool
    as2: bool
    catalytic_reactions: Tuple[int, ...]
    degenerate: bool = False

    def to_dict(self, net: Network) -> Dict:
        return {
            "as1": self.as1,
            "as2": self.as2,
            "catalytic_reactions": [net.reaction_text(j) for j in self.catalytic_reactions],
            "degenerate": self.degenerate,
        }


class PetriNet:
    """Weighted bipartite species/reaction digraph.

    Nodes are ``("s", i)`` and ``("r", j)``; reactant arcs run species to
    reaction with weight alpha, product arcs reaction to species with weight beta.
    """

    def __init__(self, net: Network):
        graph = nx.DiGraph()
        for species in net.species:
            graph.add_node(("s", species.id), kind="species", name=species.name)
        for reaction in net.reactions:
            graph.add_node(("r", reaction.id), kind="reaction")
            for s, c in reaction.reactants:
                graph.add_edge(("s", s), ("r", reaction.id), weight=c, label=f"in{c}")
            for s, c in reaction.products:
                graph.add_edge(("r", reaction.id), ("s", s), weight=c, label=f"out{c}")
        self.graph = graph
        self.n = net.n
        self.nu = net.nu

    def incidence(self) -> np.ndarray:
        """Rebuild the stoichiometry matrix from the arcs."""
        gamma = np.zeros((self.n, self.nu), dtype=np.int64)
        for (u, v, weight) in self.graph.edges(data="weight"):
            if u[0] == "s":
                gamma[u[1], v[1]] -= weight
            else:
                gamma[v[1], u[1]] += weight
        return gamma

    def reaction_reachability(self) -> np.ndarray:
        """Boolean matrix; entry (k, j) is True when reaction k reaches reaction j (reflexive)."""
        reach = np.eye(self.nu, dtype=bool)
        for k in range(self.nu):
            for node in nx.descendants(self.graph, ("r", k)):
                if node[0] == "r":
                    reach[k, node[1]] = True
        return reach


def stoichiometry(net: Network) -> np.ndarray:
    """Return the stoichiometry matrix (a writable copy)."""
    return np.array(net.gamma, dtype=np.int64)


def conservation_laws(net: Network) -> List[ConservationLaw]:
    """Extreme rays of the nonnegative left-kernel cone."""
    return [ConservationLaw(d) for d in net.left_rays]


def is_conservative(net: Network) -> Tuple[bool, Optional[ConservationLaw]]:
    """Whether a strictly positive conservation law exists, with a witness."""
    rays = net.left_rays
    if net.n == 0 or not rays:
        return False, None
    total = [sum(ray[i] for ray in rays) for i in range(net.n)]
    if all(total):
        return True, ConservationLaw(linalg.primitive(total))
    return False, None


def _positive_flux(gamma_rows: Sequence[Sequence[int]], ncols: int) -> Optional[Flux]:
    if ncols == 0:
        return None
    rays = linalg.right_kernel_rays(gamma_rows, ncols)
    total = [sum(ray[j] for ray in rays) for j in range(ncols)]
    if not rays or not all(total):
        return None
    nullity = ncols - linalg.exact_rank(gamma_rows) if gamma_rows else ncols
    return Flux(linalg.primitive(total), unique=nullity == 1)


def positive_flux(net: Network) -> Optional[Flux]:
    """A strictly positive v with Gamma v = 0, or None."""
    return _positive_flux(net.gamma_rows, net.nu)


def check_assumptions(net: Network) -> AssumptionReport:
    catalytic = tuple(r.id for r in net.reactions if r.is_catalytic)
    degenerate = net.nu == 0 or net.n == 0
    return AssumptionReport(
        as1=positive_flux(net) is not None,
        as2=not catalytic,
        catalytic_reactions=catalytic,
        degenerate=degenerate,
    )


def is_linear_reaction(reaction: Reaction) -> bool:
    if len(reaction.reactants) > 1 or len(reaction.products) > 1:
        return False
    if any(c != 1 for _, c in reaction.reactants + reaction.products):
        return False
    if not reaction.reactants and not reaction.products:
        return False
    return not reaction.is_catalytic


def is_linear(net: Network) -> bool:
    """Every reaction is X -> Y, 0 -> X or X -> 0 with unit coefficients."""
    return all(is_linear_reaction(r) for r in net.reactions)


def ancestor_pairs(net: Network) -> bool:
    """Whether every pair of reactions has a common ancestor reaction."""
    if net.nu == 0:
        return True
    reach = net.petri_net.reaction_reachability().astype(np.int64)
    shared = reach.T @ reach
    return bool(np.all(shared > 0))


def fold_reversible(net: Network) -> Tuple[Tuple[int, ...], Tuple[Optional[int], ...]]:
    """Forward reaction ids (lower id of each reversible pair) and their reverse partners."""
    forward = tuple(r.id for r in net.reactions if r.reverse_of is None or r.id < r.reverse_of)
    reverse = tuple(net.reactions[j].reverse_of for j in forward)
    return forward, reverse


@dataclass(frozen=True)
class MaxMinConditions:
    """Structural conditions for a max-min rate Lyapunov function on the folded network."""

    forward: Tuple[int, ...]
    reverse: Tuple[Optional[int], ...]
    flux: Optional[Tuple[int, ...]]
    flux_unique: bool
    multi_reactant_species: Tuple[int, ...]
    zero_reactant_species: Tuple[int, ...]
    ineligible_reversals: Tuple[int, ...]

    @property
    def holds(self) -> bool:
        return (self.flux is not None and self.flux_unique
                and not self.multi_reactant_species and not self.ineligible_reversals)


def maxmin_conditions(net: Network) -> MaxMinConditions:
    forward, reverse = fold_reversible(net)
    rows = [[int(net.gamma[i, j]) for j in forward] for i in range(net.n)]
    flux = _positive_flux(rows, len(forward)) if forward else None

    consumers: Dict[int, int] = {i: 0 for i in range(net.n)}
    for j in forward:
        for s in net.reactions[j].reactant_ids:
            consumers[s] += 1
    multi = tuple(i for i, c in consumers.items() if c > 1)
    zero = tuple(i for i, c in consumers.items() if c == 0)

    ineligible = []
    for j, k in zip(forward, reverse):
        if k is None:
            continue
        others = set()
        for other in forward:
            if other != j:
                others |= net.reactions[other].product_ids
        if net.reactions[j].product_ids & others:
            ineligible.append(j)
    return MaxMinConditions(
        forward=forward,
        reverse=reverse,
        flux=flux.v if flux else None,
        flux_unique=bool(flux and flux.unique),
        multi_reactant_species=multi,
        zero_reactant_species=zero,
        ineligible_reversals=tuple(ineligible),
    )
