"""Reduced Jacobian, essential determinant and robust non-degeneracy.

Everything is standardized on -Gamma V. With T built from a completed
left-kernel basis, T(-Gamma V)T^-1 is block upper triangular with a zero
bottom block, so det of the reduced block equals the essential determinant.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from . import const, linalg
from .common.errors import MinorBudgetExceeded
from .core import Network
from .graphmods import ModificationKind, ReductionTrace, elementary_steps

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    ROBUSTLY_NONDEGENERATE = "RobustlyNondegenerate"
    DEGENERATE = "Degenerate"
    UNKNOWN = "Unknown"


METHOD_SINGLE_SAMPLE = "single_sample"
METHOD_PROPAGATION = "trace_propagation"
METHOD_SAMPLED = "sampled_only"
METHOD_SYMBOLIC = "symbolic_confirmation"

PROPAGATING_KINDS = frozenset({
    ModificationKind.REVERSAL,
    ModificationKind.ADD_INTERMEDIATE,
    ModificationKind.EXTERNAL_REGULATION,
    ModificationKind.CONSERVED_REGULATION,
    ModificationKind.ADD_CATALYST,
    ModificationKind.ADD_DIMER,
})


def reactant_pattern(net: Network) -> np.ndarray:
    """Boolean nu x n mask of the admissible Jacobian pattern."""
    return np.asarray(net.alpha.T > 0)


@dataclass(frozen=True, eq=False)
class JacobianSample:
    """A matrix V in the admissible pattern: positive on reactant entries, zero elsewhere."""

    V: np.ndarray
    seed: Optional[int] = None

    @classmethod
    def for_network(cls, net: Network, V, seed: Optional[int] = None) -> "JacobianSample":
        V = np.asarray(V, dtype=float)
        if V.shape != (net.nu, net.n):
            raise ValueError(f"Jacobian sample must be {net.nu}x{net.n}, got {V.shape}")
        pattern = reactant_pattern(net)
        if np.any(V[pattern] <= 0):
            raise ValueError("Jacobian sample must be positive on every reactant entry")
        if np.any(V[~pattern] != 0):
            raise ValueError("Jacobian sample must vanish off the reactant pattern")
        return cls(V, seed)


def sample_jacobian(net: Network, seed: Optional[int] = None) -> JacobianSample:
    """Entries log-uniform in [0.1, 10] on the reactant pattern."""
    rng = np.random.default_rng(seed)
    low, high = const.JACOBIAN_ENTRY_RANGE
    values = np.exp(rng.uniform(np.log(low), np.log(high), size=(net.nu, net.n)))
    V = np.where(reactant_pattern(net), values, 0.0)
    return JacobianSample(V, seed)


@dataclass(frozen=True)
class MinorTerm:
    I: Tuple[int, ...]
    J: Tuple[int, ...]
    gamma_minor: int
    v_minor: float

    @property
    def product(self) -> float:
        return self.gamma_minor * self.v_minor


@dataclass(frozen=True)
class EssentialDeterminant:
    value: float
    terms: Tuple[MinorTerm, ...]


@lru_cache(maxsize=64)
def _transform(net: Network, order: Optional[Tuple[int, ...]] = None) -> Tuple[np.ndarray, int]:
    columns = [[int(net.gamma[i, j]) for i in range(net.n)] for j in range(net.nu)]
    kernel = linalg.kernel_basis(columns, net.n) if columns else [
        tuple(1 if k == i else 0 for k in range(net.n)) for i in range(net.n)
    ]
    rows, r = linalg.completed_basis(kernel, net.n, order)
    T = np.array([[float(v) for v in row] for row in rows])
    return T, r


def reduced_jacobian(net: Network, V: JacobianSample, order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Top-left r x r block of T(-Gamma V)T^-1."""
    T, r = _transform(net, tuple(order) if order is not None else None)
    if r != net.rank:
        raise AssertionError(f"basis completion produced {r} rows for rank {net.rank}")
    M = -np.asarray(net.gamma, dtype=float) @ V.V
    if abs(np.linalg.det(T)) < 1e-12:
        raise AssertionError("singular basis transform")
    # (T M) T^-1 without forming the inverse
    similar = np.linalg.solve(T.T, (T @ M).T).T
    return similar[:r, :r]


def minor_pairs(net: Network) -> int:
    r = net.rank
    return comb(net.n, r) * comb(net.nu, r)


@lru_cache(maxsize=32)
def _gamma_minors(net: Network) -> Tuple[Tuple[Tuple[int, ...], Tuple[int, ...], int], ...]:
    """Nonzero det(-Gamma_IJ) over all r-subsets, kinetics independent."""
    r = net.rank
    neg = -np.asarray(net.gamma, dtype=np.int64)
    columns = np.array(list(combinations(range(net.nu), r)), dtype=np.intp).reshape(-1, r)
    minors = []
    for I in combinations(range(net.n), r):
        blocks = neg[list(I)][:, columns].transpose(1, 0, 2)
        live = blocks.any(axis=2).all(axis=1) & blocks.any(axis=1).all(axis=1)
        if not live.any():
            continue
        stack = blocks[live].astype(float)
        values = np.rint(np.linalg.det(stack)).astype(np.int64)
        # rounding is exact only well below 2**52
        bound = np.prod(np.linalg.norm(stack, axis=2), axis=1)
        for index in np.flatnonzero(bound >= const.EXACT_MINOR_BOUND):
            values[index] = linalg.integer_det(blocks[live][index].tolist())
        for J, value in zip(columns[live], values):
            if value:
                minors.append((I, tuple(int(j) for j in J), int(value)))
    logger.debug("Cached %d nonzero stoichiometric minors of size %d for %r", len(minors), r, net)
    return tuple(minors)


def essential_determinant(net: Network, V: JacobianSample,
                          cap: int = const.DEFAULT_MINOR_CAP) -> EssentialDeterminant:
    """Sum of all r x r principal minors of -Gamma V via Cauchy-Binet.

    Raises:
        MinorBudgetExceeded: when C(n, r) * C(nu, r) exceeds ``cap``.
    """
    r = net.rank
    if r == 0:
        return EssentialDeterminant(1.0, ())
    pairs = minor_pairs(net)
    if pairs > cap:
        raise MinorBudgetExceeded(pairs, cap)
    minors = _gamma_minors(net)
    if not minors:
        return EssentialDeterminant(0.0, ())
    I = np.array([m[0] for m in minors])
    J = np.array([m[1] for m in minors])
    blocks = V.V[J[:, :, None], I[:, None, :]]
    v_minors = np.linalg.det(blocks)
    terms = tuple(MinorTerm(m[0], m[1], m[2], float(v)) for m, v in zip(minors, v_minors))
    value = float(sum(m[2] * v for m, v in zip(minors, v_minors)))
    return EssentialDeterminant(value, terms)


def principal_minor_sum(net: Network, V: JacobianSample, size: int) -> float:
    """Direct sum of principal minors of -Gamma V of the given size."""
    M = -np.asarray(net.gamma, dtype=float) @ V.V
    if size == 0:
        return 1.0
    subsets = np.array(list(combinations(range(net.n), size)))
    if subsets.size == 0:
        return 0.0
    return float(np.linalg.det(M[subsets[:, :, None], subsets[:, None, :]]).sum())


@dataclass(frozen=True)
class NondegeneracyVerdict:
    verdict: Verdict
    method: str
    seed: Optional[int]
    det_ess_value: Optional[float]
    flags: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict.value,
            "method": self.method,
            "seed": self.seed,
            "det_ess_value": self.det_ess_value,
            "flags": list(self.flags),
        }


def symbolic_essential_determinant(net: Network) -> sympy.Expr:
    """det_ess(-Gamma V) as a polynomial in the pattern entries of V."""
    pattern = reactant_pattern(net)
    V = sympy.zeros(net.nu, net.n)
    for j, i in zip(*np.nonzero(pattern)):
        V[int(j), int(i)] = sympy.Symbol(f"v_{int(j)}_{int(i)}", positive=True)
    total = sympy.Integer(0)
    for I, J, value in _gamma_minors(net):
        total += value * V.extract(list(J), list(I)).det(method="berkowitz")
    return sympy.expand(total)


def _seed_stream(seed: int, count: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def robust_nondegenerate(net: Network, cert_present: bool, seed: int = const.DEFAULT_SEED,
                         cap: int = const.DEFAULT_MINOR_CAP,
                         retries: int = const.NONDEGEN_RETRIES,
                         symbolic_limit: int = const.SYMBOLIC_SPECIES_LIMIT) -> NondegeneracyVerdict:
    """One-sample robust non-degeneracy test.

    With a certificate the network is robustly P0, and then a single sample
    with a positive essential determinant settles non-degeneracy for every
    admissible Jacobian. Without one the result is sampled evidence only.
    """
    if net.rank == 0:
        return NondegeneracyVerdict(Verdict.ROBUSTLY_NONDEGENERATE if cert_present else Verdict.UNKNOWN,
                                    METHOD_SINGLE_SAMPLE if cert_present else METHOD_SAMPLED, seed, 1.0)
    sample = sample_jacobian(net, seed)
    try:
        value = essential_determinant(net, sample, cap).value
    except MinorBudgetExceeded as e:
        logger.warning("%s; using det of the reduced Jacobian at one sample", e)
        value = float(np.linalg.det(reduced_jacobian(net, sample)))
        verdict = Verdict.UNKNOWN if abs(value) > const.DET_ESS_TOL else Verdict.DEGENERATE
        return NondegeneracyVerdict(verdict, METHOD_SAMPLED, seed, value, ("minor_budget_exceeded",))

    if value > const.DET_ESS_TOL:
        if cert_present:
            return NondegeneracyVerdict(Verdict.ROBUSTLY_NONDEGENERATE, METHOD_SINGLE_SAMPLE, seed, value)
        return NondegeneracyVerdict(Verdict.UNKNOWN, METHOD_SAMPLED, seed, value)
    if value < -const.DET_ESS_TOL:
        if cert_present:
            logger.warning("Negative essential determinant %.3g for certified %r", value, net)
        return NondegeneracyVerdict(Verdict.UNKNOWN, METHOD_SAMPLED, seed, value,
                                    ("negative_essential_determinant",))

    for retry_seed in _seed_stream(seed, retries):
        retry = essential_determinant(net, sample_jacobian(net, retry_seed), cap).value
        if abs(retry) > const.DET_ESS_TOL:
            logger.debug("Essential determinant nonzero on retry seed %d", retry_seed)
            verdict = Verdict.ROBUSTLY_NONDEGENERATE if cert_present and retry > 0 else Verdict.UNKNOWN
            method = METHOD_SINGLE_SAMPLE if verdict == Verdict.ROBUSTLY_NONDEGENERATE else METHOD_SAMPLED
            return NondegeneracyVerdict(verdict, method, retry_seed, retry)

    if net.n <= symbolic_limit:
        polynomial = symbolic_essential_determinant(net)
        if polynomial == 0:
            return NondegeneracyVerdict(Verdict.DEGENERATE, METHOD_SYMBOLIC, seed, value)
        logger.warning("Sampled essential determinants vanish but the polynomial does not: %s", polynomial)
        return NondegeneracyVerdict(Verdict.UNKNOWN, METHOD_SYMBOLIC, seed, value)
    return NondegeneracyVerdict(Verdict.DEGENERATE, METHOD_SAMPLED, seed, value, ("unconfirmed",))


def propagate_nondegeneracy(trace: ReductionTrace,
                            base_verdict: NondegeneracyVerdict) -> Optional[NondegeneracyVerdict]:
    """Carry a base verdict through the trace, or None when a step blocks propagation."""
    if base_verdict.verdict != Verdict.ROBUSTLY_NONDEGENERATE:
        return None
    nets = trace.networks()
    for step, pre in zip(trace.steps, nets):
        kinds = {m.kind for m in elementary_steps(pre, step.modification)}
        blocked = kinds - PROPAGATING_KINDS
        if blocked:
            logger.debug("Non-degeneracy propagation blocked by %s",
                         ", ".join(sorted(k.value for k in blocked)))
            return None
    return NondegeneracyVerdict(Verdict.ROBUSTLY_NONDEGENERATE, METHOD_PROPAGATION,
                                base_verdict.seed, base_verdict.det_ess_value, base_verdict.flags)


@dataclass(frozen=True)
class P0Report:
    trials: int
    min_minor: float
    argmin: Tuple[int, ...]
    seed: int
    exhaustive: bool
    per_trial_min: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def falsified(self) -> bool:
        return self.min_minor < -const.P0_TOL

    def to_dict(self, net: Network) -> Dict:
        return {
            "trials": self.trials,
            "min_minor": self.min_minor,
            "argmin": [net.species[i].name for i in self.argmin],
            "seed": self.seed,
            "exhaustive": self.exhaustive,
            "falsified": self.falsified,
        }


def _index_sets(n: int, largest: int, rng: np.random.Generator, exhaustive: bool) -> Dict[int, np.ndarray]:
    if exhaustive:
        return {k: np.array(list(combinations(range(n), k))) for k in range(1, largest + 1)}
    grouped: Dict[int, List[Tuple[int, ...]]] = {}
    for _ in range(const.P0_RANDOM_SUBSETS):
        k = int(rng.integers(1, largest + 1))
        grouped.setdefault(k, []).append(tuple(sorted(rng.choice(n, size=k, replace=False).tolist())))
    return {k: np.array(v) for k, v in grouped.items()}


def p0_sample_check(net: Network, trials: int = const.DEFAULT_P0_TRIALS,
                    seed: int = const.DEFAULT_SEED) -> P0Report:
    """Minimum principal minor of -Gamma V over sampled V.

    Minors larger than the rank vanish identically and are skipped. Each minor
    is divided by its Hadamard bound, so the -1e-9 threshold is scale free.
    All index sets are checked for n <= 12, a random subset otherwise. A
    negative minimum falsifies robust P0, and with it any claimed
    piecewise-linear Lyapunov function.
    """
    exhaustive = net.n <= const.P0_FULL_ENUMERATION_LIMIT
    rng = np.random.default_rng(seed)
    best, argmin = np.inf, ()
    per_trial = []
    gamma = -np.asarray(net.gamma, dtype=float)
    largest = net.rank
    for trial_seed in _seed_stream(seed, trials):
        M = gamma @ sample_jacobian(net, trial_seed).V
        trial_min = np.inf
        for k, subsets in _index_sets(net.n, largest, rng, exhaustive).items():
            blocks = M[subsets[:, :, None], subsets[:, None, :]]
            bound = np.prod(np.linalg.norm(blocks, axis=2), axis=1)
            minors = np.linalg.det(blocks) / np.where(bound > 0, bound, 1.0)
            index = int(np.argmin(minors))
            if minors[index] < trial_min:
                trial_min = float(minors[index])
            if minors[index] < best:
                best, argmin = float(minors[index]), tuple(int(i) for i in subsets[index])
        per_trial.append(trial_min)
    if best < -const.P0_TOL:
        logger.info("Robust P0 falsified for %r: principal minor %.3g on %s", net, best, argmin)
    return P0Report(trials, float(best) if largest else 0.0, argmin, seed, exhaustive, tuple(per_trial))
