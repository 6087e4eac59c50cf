"""Robust Lyapunov function certificates and their numerical evaluation.

Two piecewise-linear families are supported. The sum-of-currents function is
the 1-norm of the species derivatives over a certified set of species; the
max-min function is the spread of flux-weighted reaction rates, with
reversible pairs entering as net rates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import const
from .core import Network, is_linear, maxmin_conditions, positive_flux
from .graphmods import (ModificationKind, ReductionTrace, Target, empty_trace, licensing_violations,
                        mirror_partner_flags, reduce)
from .kinetics import KineticsSample

logger = logging.getLogger(__name__)


class RLFFamily(str, Enum):
    SOC = "SoC"
    MAXMIN = "MaxMin"


@dataclass(frozen=True)
class Certificate:
    family: RLFFamily
    network: Network
    trace: ReductionTrace
    summed_species: Tuple[int, ...] = ()
    forward: Tuple[int, ...] = ()
    reverse: Tuple[Optional[int], ...] = ()
    flux_weights: Tuple[int, ...] = ()
    flags: Tuple[str, ...] = ()
    certified: bool = True

    @property
    def base(self) -> Network:
        return self.trace.base

    @property
    def summed_names(self) -> Tuple[str, ...]:
        return tuple(self.network.species[i].name for i in self.summed_species)

    def to_dict(self) -> Dict:
        data = {
            "family": self.family.value,
            "certified": self.certified,
            "flags": list(self.flags),
        }
        data.update(self.trace.to_dict())
        if self.family == RLFFamily.SOC:
            data["summed_species"] = list(self.summed_names)
        else:
            data["flux_weights"] = {
                self.network.reaction_text(j): w for j, w in zip(self.forward, self.flux_weights)
            }
            data["reversible_pairing"] = [
                [self.network.reaction_text(j), self.network.reaction_text(k)]
                for j, k in zip(self.forward, self.reverse) if k is not None
            ]
        return data


@dataclass(frozen=True)
class LyapunovEvaluation:
    value: float
    active_pattern: Tuple
    dini: float


@dataclass(frozen=True)
class DiniEstimate:
    analytic: float
    finite_difference: float
    unique_pattern: bool

    @property
    def agree(self) -> bool:
        scale = max(1.0, abs(self.analytic), abs(self.finite_difference))
        return abs(self.analytic - self.finite_difference) <= 1e-4 * scale


def certify_soc(net: Network, branches: int = const.DEFAULT_BACKTRACK_BRANCHES,
                budget: int = const.DEFAULT_SEARCH_BUDGET) -> Optional[Certificate]:
    """Sum-of-currents certificate from a linear base, or None."""
    if positive_flux(net) is None:
        logger.debug("No sum-of-currents certificate for %r: no positive flux", net)
        return None
    if is_linear(net):
        trace = empty_trace(net, Target.LINEAR)
    else:
        trace = reduce(net, Target.LINEAR, branches=branches, budget=budget)
        if trace is None:
            return None
    violations = licensing_violations(trace, Target.LINEAR)
    if violations:
        logger.debug("Sum-of-currents trace rejected: %s", "; ".join(violations))
        return None

    excluded = set()
    for step in trace.steps:
        m = step.modification
        if m.kind in (ModificationKind.ADD_CATALYST, ModificationKind.ADD_DIMER,
                      ModificationKind.ENZYMATIC):
            excluded.add(m.new_species)
    summed = tuple(s.id for s in net.species if s.name not in excluded)
    return Certificate(
        family=RLFFamily.SOC,
        network=net,
        trace=trace,
        summed_species=summed,
        flags=tuple(mirror_partner_flags(trace)),
    )


def certify_maxmin(net: Network, branches: int = const.DEFAULT_BACKTRACK_BRANCHES,
                   budget: int = const.DEFAULT_SEARCH_BUDGET) -> Optional[Certificate]:
    """Max-min certificate from a base meeting the structural conditions, or None."""
    conditions = maxmin_conditions(net)
    trace = reduce(net, Target.MAXMIN_BASE, branches=branches, budget=budget)
    if trace is None:
        if not conditions.holds:
            return None
        trace = empty_trace(net, Target.MAXMIN_BASE)
    violations = licensing_violations(trace, Target.MAXMIN_BASE)
    if violations:
        logger.debug("Max-min trace rejected: %s", "; ".join(violations))
        return None
    if conditions.flux is None or not conditions.flux_unique:
        logger.debug("Max-min weights undefined for %r: folded flux not unique", net)
        return None

    flags = list(mirror_partner_flags(trace))
    flags.extend(f"zero_reactant_species:{net.species[i].name}"
                 for i in conditions.zero_reactant_species)
    return Certificate(
        family=RLFFamily.MAXMIN,
        network=net,
        trace=trace,
        forward=conditions.forward,
        reverse=conditions.reverse,
        flux_weights=conditions.flux,
        flags=tuple(flags),
    )


def candidate_certificate(net: Network) -> Certificate:
    """Uncertified sum-of-currents candidate over every species, for falsification runs."""
    return Certificate(
        family=RLFFamily.SOC,
        network=net,
        trace=empty_trace(net, Target.LINEAR),
        summed_species=tuple(range(net.n)),
        flags=("uncertified_candidate",),
        certified=False,
    )


def _state(cert: Certificate, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (cert.network.n,):
        raise ValueError(f"dimension mismatch: expected {cert.network.n} species, got {x.shape}")
    return x


def _gamma(cert: Certificate) -> np.ndarray:
    return np.asarray(cert.network.gamma, dtype=float)


def _net_rates(cert: Certificate, rates: np.ndarray) -> np.ndarray:
    net = rates[list(cert.forward)].copy()
    for index, k in enumerate(cert.reverse):
        if k is not None:
            net[index] -= rates[k]
    return net / np.asarray(cert.flux_weights, dtype=float)


def _tie_tol(values: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)


def lyapunov_value(cert: Certificate, x: Sequence[float], kinetics: KineticsSample) -> float:
    """Value of the certified function at x."""
    x = _state(cert, x)
    rates = kinetics.rates(x)
    if cert.family == RLFFamily.SOC:
        xdot = _gamma(cert) @ rates
        return float(np.sum(np.abs(xdot[list(cert.summed_species)])))
    weighted = _net_rates(cert, rates)
    return float(weighted.max() - weighted.min()) if weighted.size else 0.0


def _analytic_dini(cert: Certificate, x: np.ndarray, kinetics: KineticsSample) -> Tuple[float, Tuple, bool]:
    gamma = _gamma(cert)
    rates = kinetics.rates(x)
    xdot = gamma @ rates
    rdot = kinetics.jacobian(x) @ xdot
    if cert.family == RLFFamily.SOC:
        summed = list(cert.summed_species)
        current = xdot[summed]
        accel = (gamma @ rdot)[summed]
        tol = _tie_tol(current)
        signs = np.where(current > tol, 1, np.where(current < -tol, -1, 0))
        ties = signs == 0
        dini = float(np.sum(signs * accel) + np.sum(np.abs(accel[ties])))
        return dini, tuple(int(s) for s in signs), not bool(np.any(ties))

    weighted = _net_rates(cert, rates)
    if not weighted.size:
        return 0.0, ((), ()), True
    dweighted = _net_rates(cert, rdot)
    tol = _tie_tol(weighted)
    top = np.flatnonzero(weighted >= weighted.max() - tol)
    bottom = np.flatnonzero(weighted <= weighted.min() + tol)
    dini = float(dweighted[top].max() - dweighted[bottom].min())
    pattern = (tuple(cert.forward[i] for i in top), tuple(cert.forward[i] for i in bottom))
    unique = len(top) == 1 and len(bottom) == 1 and top[0] != bottom[0]
    return dini, pattern, unique


def evaluate(cert: Certificate, x: Sequence[float], kinetics: KineticsSample) -> LyapunovEvaluation:
    """Value and Dini derivative of either certificate family at x."""
    x = _state(cert, x)
    value = lyapunov_value(cert, x, kinetics)
    dini, pattern, _ = _analytic_dini(cert, x, kinetics)
    return LyapunovEvaluation(value, pattern, dini)


def eval_soc(cert: Certificate, x: Sequence[float], kinetics: KineticsSample) -> LyapunovEvaluation:
    """Sum of |dx_i/dt| over the certified species, with its Dini derivative."""
    if cert.family != RLFFamily.SOC:
        raise ValueError("eval_soc needs a sum-of-currents certificate")
    return evaluate(cert, x, kinetics)


def eval_maxmin(cert: Certificate, x: Sequence[float], kinetics: KineticsSample) -> LyapunovEvaluation:
    """Spread of flux-weighted net reaction rates, with its Dini derivative."""
    if cert.family != RLFFamily.MAXMIN:
        raise ValueError("eval_maxmin needs a max-min certificate")
    return evaluate(cert, x, kinetics)


def dini_derivative(cert: Certificate, x: Sequence[float], kinetics: KineticsSample) -> DiniEstimate:
    """Upper right Dini derivative along the flow, analytic and by forward difference."""
    x = _state(cert, x)
    analytic, _, unique = _analytic_dini(cert, x, kinetics)
    xdot = _gamma(cert) @ kinetics.rates(x)
    h = const.FD_STEP * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    forward = (lyapunov_value(cert, x + h * xdot, kinetics) - lyapunov_value(cert, x, kinetics)) / h
    return DiniEstimate(analytic, float(forward), unique)


def find_dini_violation(cert: Certificate, kinetics_list: Sequence[KineticsSample],
                        states: Sequence[Sequence[float]]) -> Optional[Tuple[int, int, float]]:
    """First (kinetics index, state index, dini) with a positive Dini derivative beyond slack."""
    for a, kinetics in enumerate(kinetics_list):
        for b, x in enumerate(states):
            evaluation = evaluate(cert, x, kinetics)
            if evaluation.dini > const.DINI_SLACK * (1.0 + abs(evaluation.value)):
                return a, b, evaluation.dini
    return None
