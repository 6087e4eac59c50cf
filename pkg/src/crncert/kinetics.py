"""Admissible monotone kinetics: mass action and saturating Hill rates."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import const
from .core import Network

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KineticsSample:
    """Concrete rate functions R(x) for one network.

    Rates vanish when a reactant is absent and increase strictly in every
    reactant on the positive orthant. ``theta`` and ``hill`` are only read at
    reactant positions.
    """

    family: str
    k: np.ndarray
    exponents: np.ndarray
    theta: Optional[np.ndarray] = None
    hill: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.family not in const.KINETICS_FAMILIES:
            raise ValueError(f"unknown kinetics family {self.family!r}")
        if np.any(self.k <= 0):
            raise ValueError("rate constants must be positive")
        if self.family == const.HILL:
            if self.theta is None or self.hill is None:
                raise ValueError("Hill kinetics need theta and hill arrays")
            if np.any(self.theta[self.exponents > 0] <= 0):
                raise ValueError("half-saturation constants must be positive")

    @property
    def pairs(self) -> Tuple[Tuple[int, int], ...]:
        """(reaction, species) reactant positions."""
        rows, cols = np.nonzero(self.exponents)
        return tuple(zip(rows.tolist(), cols.tolist()))

    def _factors(self, xc: np.ndarray) -> np.ndarray:
        if self.family == const.MASS_ACTION:
            return np.broadcast_to(xc, self.exponents.shape)
        xh = xc[None, :] ** self.hill
        return xh / (self.theta ** self.hill + xh)

    def rates(self, x: Sequence[float]) -> np.ndarray:
        """Reaction rates at x; negative entries are treated as 0."""
        xc = np.clip(np.asarray(x, dtype=float), 0.0, None)
        return self.k * np.prod(self._factors(xc) ** self.exponents, axis=1)

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        """Partial derivatives dR_j/dx_i, a nu x n matrix on the reactant pattern."""
        xc = np.clip(np.asarray(x, dtype=float), 0.0, None)
        factors = self._factors(xc)
        powered = factors ** self.exponents
        jac = np.zeros(self.exponents.shape)
        for j, i in self.pairs:
            a = self.exponents[j, i]
            if self.family == const.MASS_ACTION:
                derivative = a * xc[i] ** (a - 1)
            else:
                h, th = self.hill[j, i], self.theta[j, i]
                g = factors[j, i]
                dg = h * xc[i] ** (h - 1) * th ** h / (th ** h + xc[i] ** h) ** 2
                derivative = a * g ** (a - 1) * dg
            others = np.prod(np.delete(powered[j], i))
            jac[j, i] = self.k[j] * derivative * others
        return jac


def _reactant_exponents(net: Network) -> np.ndarray:
    return np.asarray(net.alpha.T, dtype=float)


def _log_uniform(rng: np.random.Generator, bounds: Tuple[float, float], size) -> np.ndarray:
    low, high = bounds
    return np.exp(rng.uniform(np.log(low), np.log(high), size=size))


def mass_action(net: Network, k: Sequence[float]) -> KineticsSample:
    """Mass-action kinetics with explicit rate constants."""
    k = np.asarray(k, dtype=float)
    if k.shape != (net.nu,):
        raise ValueError(f"expected {net.nu} rate constants, got {k.shape}")
    return KineticsSample(const.MASS_ACTION, k, _reactant_exponents(net))


def hill_kinetics(net: Network, k: Sequence[float], theta: np.ndarray,
                  hill: np.ndarray) -> KineticsSample:
    return KineticsSample(const.HILL, np.asarray(k, dtype=float), _reactant_exponents(net),
                          theta=np.asarray(theta, dtype=float), hill=np.asarray(hill, dtype=float))


def sample_kinetics(net: Network, family: str = const.MASS_ACTION,
                    seed: Optional[int] = None) -> KineticsSample:
    """Draw admissible kinetics; parameters are log-uniform in [0.1, 10]."""
    rng = np.random.default_rng(seed)
    k = _log_uniform(rng, const.RATE_CONSTANT_RANGE, net.nu)
    exponents = _reactant_exponents(net)
    if family == const.MASS_ACTION:
        return KineticsSample(const.MASS_ACTION, k, exponents, seed=seed)
    if family == const.HILL:
        theta = _log_uniform(rng, const.RATE_CONSTANT_RANGE, exponents.shape)
        hill = rng.choice(np.asarray(const.HILL_EXPONENTS, dtype=float), size=exponents.shape)
        return KineticsSample(const.HILL, k, exponents, theta=theta, hill=hill, seed=seed)
    raise ValueError(f"unknown kinetics family {family!r}")
