"""ODE integration and numerical validation of certificates."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.linalg import orth

from . import const
from .certificates import Certificate, evaluate, lyapunov_value
from .common.config import Config
from .core import Network, conservation_laws
from .kinetics import KineticsSample, sample_kinetics

logger = logging.getLogger(__name__)

HORIZON = "horizon"
STEADY_STATE = "steady_state"
BLOWUP = "blowup"

# States per trajectory at which the analytic Dini derivative is sampled
DINI_POINTS = 50


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step_sizes: np.ndarray
    reason: str
    rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def tail(self, fraction: float = 0.1) -> np.ndarray:
        """States in the last ``fraction`` of the integrated time span."""
        cutoff = self.times[-1] * (1.0 - fraction)
        return self.states[self.times >= cutoff]


def _restart(rhs, t: float, y: np.ndarray, horizon: float, rtol: float, atol: float,
             step: Optional[float]) -> RK45:
    first = None if step is None else min(step, horizon - t)
    return RK45(rhs, t, y, horizon, rtol=rtol, atol=atol, first_step=first)


def integrate(net: Network, kinetics: KineticsSample, x0: Sequence[float],
              horizon: float = const.DEFAULT_HORIZON, atol: float = const.DEFAULT_ATOL,
              rtol: float = const.DEFAULT_RTOL,
              steady_tol: float = const.STEADY_STATE_TOL) -> Trajectory:
    """Integrate dx/dt = Gamma R(x) with an adaptive 4(5) Runge-Kutta pair.

    A step that would leave the orthant by more than atol (scaled) is redone
    from the previous state with half the step; smaller excursions are
    clipped to 0. Integration stops once ||Gamma R(x)||_inf < steady_tol.
    """
    gamma = np.asarray(net.gamma, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (net.n,):
        raise ValueError(f"initial state must have {net.n} entries, got {x0.shape}")
    if np.any(x0 < 0):
        raise ValueError("initial state must be nonnegative")

    def rhs(t, x):
        return gamma @ kinetics.rates(x)

    times, states, steps = [0.0], [x0.copy()], []
    if net.nu == 0 or np.max(np.abs(rhs(0.0, x0)), initial=0.0) < steady_tol:
        return Trajectory(np.array(times), np.array(states), np.array(steps), STEADY_STATE)

    solver = _restart(rhs, 0.0, x0, horizon, rtol, atol, None)
    reason = HORIZON
    rejected = 0
    while solver.status == "running":
        if len(steps) >= const.MAX_STEPS:
            logger.debug("Step limit reached at t=%.3g", solver.t)
            reason = BLOWUP
            break
        t_prev, y_prev = solver.t, solver.y.copy()
        solver.step()
        if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
            reason = BLOWUP
            break
        y = solver.y
        if np.max(np.abs(y)) > const.BLOWUP_LIMIT:
            reason = BLOWUP
            break
        floor = -atol * max(1.0, float(np.max(np.abs(y_prev))))
        if np.any(y < floor):
            rejected += 1
            h = (solver.t - t_prev) / 2
            if h < const.MIN_STEP:
                logger.debug("Step underflow at t=%.3g", t_prev)
                reason = BLOWUP
                break
            solver = _restart(rhs, t_prev, y_prev, horizon, rtol, atol, h)
            continue
        step = solver.t - t_prev
        if np.any(y < 0):
            y = np.clip(y, 0.0, None)
            if solver.t < horizon:
                solver = _restart(rhs, solver.t, y, horizon, rtol, atol, step)
        times.append(solver.t)
        states.append(y.copy())
        steps.append(step)
        if np.max(np.abs(rhs(solver.t, y))) < steady_tol:
            reason = STEADY_STATE
            break
    if rejected:
        logger.debug("Integration of %r rejected %d steps", net, rejected)
    return Trajectory(np.array(times), np.array(states), np.array(steps), reason, rejected)


def _log_uniform(rng: np.random.Generator, size=None):
    low, high = const.TOTAL_RANGE
    return np.exp(rng.uniform(np.log(low), np.log(high), size=size))


def reference_state(net: Network, rng: np.random.Generator) -> np.ndarray:
    """Positive state: each conserved total split over its support, Dirichlet style."""
    x = np.zeros(net.n)
    covered = np.zeros(net.n, dtype=bool)
    for law in conservation_laws(net):
        support = sorted(law.support)
        total = _log_uniform(rng)
        split = rng.dirichlet(np.ones(len(support)))
        for i, w in zip(support, split):
            x[i] += total * w / law.d[i]
        covered[support] = True
    x[~covered] = _log_uniform(rng, size=int((~covered).sum()))
    return x


def sample_class_states(net: Network, x_ref: Sequence[float], count: int,
                        rng: np.random.Generator, mixing: int = 20) -> List[np.ndarray]:
    """Positive states in the stoichiometric class of x_ref by hit-and-run."""
    x = np.asarray(x_ref, dtype=float).copy()
    if np.any(x <= 0):
        raise ValueError("hit-and-run needs a strictly positive starting state")
    basis = orth(np.asarray(net.gamma, dtype=float)) if net.nu else np.zeros((net.n, 0))
    if basis.shape[1] == 0:
        return [x.copy() for _ in range(count)]
    reach = 5.0 * max(1.0, float(np.max(x)))
    samples = []
    for _ in range(count):
        for _ in range(mixing):
            u = basis @ rng.standard_normal(basis.shape[1])
            u /= np.linalg.norm(u)
            pos, neg = u > 1e-12, u < -1e-12
            lo = max(float(np.max(-x[pos] / u[pos])) if pos.any() else -np.inf, -reach)
            hi = min(float(np.min(-x[neg] / u[neg])) if neg.any() else np.inf, reach)
            t = lo + (hi - lo) * rng.uniform(0.05, 0.95)
            x = x + t * u
        samples.append(x.copy())
    return samples


@dataclass(frozen=True)
class Violation:
    kind: str
    trial: int
    seed: int
    family: str
    initial_condition: int
    time: float
    detail: str

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "trial": self.trial,
            "seed": self.seed,
            "family": self.family,
            "initial_condition": self.initial_condition,
            "time": self.time,
            "detail": self.detail,
        }


@dataclass
class _TrialResult:
    index: int
    seed: int
    family: str
    violations: List[Violation] = field(default_factory=list)
    dini: List[float] = field(default_factory=list)
    reasons: Dict[str, int] = field(default_factory=dict)
    first: Optional[Trajectory] = None


@dataclass(frozen=True)
class ValidationReport:
    certified: bool
    trials: int
    initial_conditions: int
    seed: int
    violations: Tuple[Violation, ...]
    min_dini: float
    max_dini: float
    reasons: Dict[str, int]
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return not self.violations

    def counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for v in self.violations:
            counts[v.kind] = counts.get(v.kind, 0) + 1
        return counts

    def to_dict(self) -> Dict:
        return {
            "certified": self.certified,
            "trials": self.trials,
            "initial_conditions": self.initial_conditions,
            "seed": self.seed,
            "runs": self.trials * self.initial_conditions,
            "violation_counts": self.counts(),
            "violations": [v.to_dict() for v in self.violations],
            "min_dini": self.min_dini,
            "max_dini": self.max_dini,
            "termination": dict(sorted(self.reasons.items())),
            "coverage_note": "kinetics with vanishing partial derivatives are not sampled",
        }


def _check_trajectory(net: Network, cert: Certificate, kinetics: KineticsSample, traj: Trajectory,
                      laws, settings: Dict, found: List[Violation], dini: List[float], tag: Tuple):
    def report(kind: str, time: float, detail: str):
        found.append(Violation(kind, *tag, float(time), detail))

    values = np.array([lyapunov_value(cert, x, kinetics) for x in traj.states])
    rises = np.flatnonzero(values[1:] > values[:-1] + const.MONOTONE_SLACK * (1.0 + values[:-1]))
    if rises.size:
        k = int(rises[0])
        report("monotonicity", traj.times[k + 1], f"V rose from {values[k]:.6g} to {values[k + 1]:.6g}")

    for law in laws:
        d = np.asarray(law.d, dtype=float)
        totals = traj.states @ d
        drift = float(np.max(np.abs(totals - totals[0])) / totals[0]) if totals[0] > 0 else 0.0
        if drift > const.CONSERVATION_TOL:
            report("conservation", traj.times[-1], f"relative drift {drift:.3g} of {law.as_dict(net)}")

    if traj.states.min() < -const.CLIP_TOL:
        report("positivity", traj.times[int(np.argmin(traj.states.min(axis=1)))],
               f"state {traj.states.min():.3g} below zero")
    if traj.reason == BLOWUP:
        report("integration", traj.times[-1], "step underflow or blow-up")

    if settings.get("expect_convergence"):
        residual = float(np.max(np.abs(np.asarray(net.gamma, dtype=float) @ kinetics.rates(traj.final))))
        if residual > settings.get("convergence_tol", const.CONVERGENCE_TOL):
            report("convergence", traj.times[-1], f"residual {residual:.3g} at the horizon")
    if settings.get("expect_persistence"):
        floor = float(traj.tail().min())
        if floor <= const.PERSISTENCE_FLOOR:
            report("persistence", traj.times[-1], f"tail minimum {floor:.3g}")

    picks = np.unique(np.linspace(0, len(traj.states) - 1, min(DINI_POINTS, len(traj.states))).astype(int))
    for k in picks:
        evaluation = evaluate(cert, traj.states[k], kinetics)
        dini.append(evaluation.dini)
        if evaluation.dini > const.DINI_SLACK * (1.0 + abs(evaluation.value)):
            report("dini", traj.times[k], f"Dini derivative {evaluation.dini:.3g} at V={evaluation.value:.3g}")
            break


def validate_certificate(net: Network, cert: Certificate, trials: int = const.DEFAULT_TRIALS,
                         seed: int = const.DEFAULT_SEED, config: Optional[Config] = None,
                         expect_convergence: bool = False,
                         expect_persistence: bool = False) -> ValidationReport:
    """Simulate ``trials`` kinetics samples from several initial states each.

    Violations are findings, not errors; each one carries the trial seed that
    reproduces it. Kinetics families alternate across trials.
    """
    config = config or Config()
    settings = dict(config.dynamics, expect_convergence=expect_convergence,
                    expect_persistence=expect_persistence)
    families = config.families
    count = int(settings["initial_conditions"])
    laws = conservation_laws(net)
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)] if trials else []

    def run(index: int) -> _TrialResult:
        trial_seed = seeds[index]
        family = families[index % len(families)]
        kinetics = sample_kinetics(net, family, seed=trial_seed)
        rng = np.random.default_rng([trial_seed, index])
        result = _TrialResult(index, trial_seed, family)
        for ic in range(count):
            x0 = reference_state(net, rng)
            traj = integrate(net, kinetics, x0, float(settings["horizon"]),
                             float(settings["atol"]), float(settings["rtol"]))
            result.reasons[traj.reason] = result.reasons.get(traj.reason, 0) + 1
            if index == 0 and ic == 0:
                result.first = traj
            _check_trajectory(net, cert, kinetics, traj, laws, settings, result.violations,
                              result.dini, (index, trial_seed, family, ic))
        return result

    workers = max(1, min(config.max_workers, trials or 1))
    logger.debug("Validating %r with %d trials on %d workers", net, trials, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = sorted(pool.map(run, range(trials)), key=lambda r: r.index)

    violations = [v for r in results for v in r.violations]
    dini = [d for r in results for d in r.dini]
    reasons: Dict[str, int] = {}
    for r in results:
        for key, value in r.reasons.items():
            reasons[key] = reasons.get(key, 0) + value
    if violations:
        logger.info("%d violations in %d runs for %r", len(violations), trials * count, net)
    return ValidationReport(
        certified=cert.certified,
        trials=trials,
        initial_conditions=count,
        seed=seed,
        violations=tuple(violations),
        min_dini=float(min(dini)) if dini else 0.0,
        max_dini=float(max(dini)) if dini else 0.0,
        reasons=reasons,
        trajectory=results[0].first if results else None,
    )


def write_trajectory_csv(path: Path, net: Network, trajectory: Trajectory) -> None:
    """CSV with columns t followed by the species names."""
    data = np.column_stack([trajectory.times, trajectory.states])
    header = ",".join(["t", *net.species_names])
    np.savetxt(Path(path), data, delimiter=",", header=header, comments="", fmt="%.12g")
    logger.info("Trajectory written to %s", path)
