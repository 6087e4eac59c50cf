"""Combine certificate, non-degeneracy and persistence verdicts into a stability tier."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from . import const
from .certificates import Certificate, RLFFamily, certify_maxmin, certify_soc
from .common.config import Config
from .core import AssumptionReport, Network, ancestor_pairs, check_assumptions, conservation_laws, is_conservative
from .netio import serialize_network
from .nondegen import (NondegeneracyVerdict, P0Report, Verdict, p0_sample_check, propagate_nondegeneracy,
                       robust_nondegenerate)
from .persistence import Persistence, PersistenceVerdict, graphically_persistent, propagate_persistence

logger = logging.getLogger(__name__)


class Tier(str, Enum):
    STAR = "Star"
    CONDITIONAL_STAR = "ConditionalStar"
    STABLE_ONLY = "StableOnly"
    NONE = "None"


TIER_RANK = {Tier.NONE: 0, Tier.STABLE_ONLY: 1, Tier.CONDITIONAL_STAR: 2, Tier.STAR: 3}


@dataclass(frozen=True)
class VerdictFlags:
    certificate: bool
    lasalle: bool
    nondegenerate: bool
    persistent: bool
    conservative: bool

    def as_dict(self) -> Dict[str, bool]:
        return {
            "certificate": self.certificate,
            "lasalle": self.lasalle,
            "nondegenerate": self.nondegenerate,
            "persistent": self.persistent,
            "conservative": self.conservative,
        }


@dataclass(frozen=True)
class Explanation:
    claim: str
    statement: str
    requires: Tuple[str, ...]

    def to_dict(self) -> Dict:
        return {"claim": self.claim, "statement": self.statement, "requires": list(self.requires)}


def conclude_tier(flags: VerdictFlags) -> Tier:
    """Star needs all five flags; ConditionalStar all but conservativity."""
    if flags.certificate and flags.lasalle:
        if flags.nondegenerate and flags.persistent:
            return Tier.STAR if flags.conservative else Tier.CONDITIONAL_STAR
        return Tier.STABLE_ONLY
    return Tier.NONE


def explain(flags: VerdictFlags, tier: Tier) -> List[Explanation]:
    """Claims whose preconditions the flags satisfy."""
    explanations = []
    if flags.certificate:
        explanations.append(Explanation(
            "robust_lyapunov_function",
            "A piecewise-linear robust Lyapunov function exists; every steady state is stable for all admissible kinetics.",
            ("certificate",)))
    if flags.certificate and flags.lasalle:
        explanations.append(Explanation(
            "lasalle_principle",
            "Bounded trajectories converge to the set of steady states.",
            ("certificate", "lasalle")))
    if flags.certificate and flags.nondegenerate:
        explanations.append(Explanation(
            "unique_positive_steady_state",
            "Every positive steady state is unique in its stoichiometric class and exponentially stable.",
            ("certificate", "nondegenerate")))
    if flags.persistent:
        explanations.append(Explanation(
            "no_critical_siphons",
            "The network lacks critical siphons, so trajectories stay away from the boundary.",
            ("persistent",)))
    if flags.conservative:
        explanations.append(Explanation(
            "steady_state_existence",
            "Stoichiometric classes are compact, so each proper class contains a positive steady state.",
            ("conservative",)))
    if tier == Tier.STAR:
        explanations.append(Explanation(
            "global_exponential_stability",
            "Each proper stoichiometric class contains a unique globally exponentially stable positive steady state.",
            ("certificate", "lasalle", "nondegenerate", "persistent", "conservative")))
    elif tier == Tier.CONDITIONAL_STAR:
        explanations.append(Explanation(
            "conditional_global_stability",
            "If a proper stoichiometric class contains a steady state, then it is a unique globally "
            "exponentially stable positive steady state.",
            ("certificate", "lasalle", "nondegenerate", "persistent")))
    return explanations


def lasalle_check(net: Network, cert: Certificate) -> bool:
    """Sum-of-currents certificates always qualify; max-min ones need boundedness or shared ancestors."""
    if cert.family == RLFFamily.SOC:
        return True
    return is_conservative(net)[0] or ancestor_pairs(net)


@dataclass(frozen=True)
class CertificationReport:
    network: Network
    assumptions: AssumptionReport
    certificate: Optional[Certificate]
    certificates: Dict[str, Optional[Certificate]]
    conservative: bool
    conservation_witness: Optional[Dict[str, int]]
    lasalle: bool
    nondegeneracy: NondegeneracyVerdict
    persistence: PersistenceVerdict
    tier: Tier
    explanations: Tuple[Explanation, ...]
    p0: Optional[P0Report] = None
    seed: int = const.DEFAULT_SEED
    flags: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def budget_exceeded(self) -> bool:
        return any(flag.endswith("budget_exceeded") for flag in self.all_flags())

    def all_flags(self) -> List[str]:
        flags = list(self.flags) + list(self.nondegeneracy.flags) + list(self.persistence.flags)
        if self.certificate is not None:
            flags.extend(self.certificate.flags)
        return sorted(set(flags))

    def to_dict(self) -> Dict:
        net = self.network
        return {
            "schema": const.SCHEMA_VERSION,
            "network": {
                "name": net.name,
                "species": list(net.species_names),
                "reactions": net.nu,
                "rank": net.rank,
                "text": serialize_network(net),
            },
            "assumptions": self.assumptions.to_dict(net),
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "certificates": {
                family: cert.to_dict() if cert else None for family, cert in self.certificates.items()
            },
            "conservative": self.conservative,
            "conservation_witness": self.conservation_witness,
            "conservation_laws": [law.as_dict(net) for law in conservation_laws(net)],
            "lasalle": self.lasalle,
            "nondegeneracy": self.nondegeneracy.to_dict(),
            "p0": self.p0.to_dict(net) if self.p0 else None,
            "persistence": self.persistence.to_dict(net),
            "tier": self.tier.value,
            "explanations": [e.to_dict() for e in self.explanations],
            "flags": self.all_flags(),
            "seed": self.seed,
        }


def conclude(net: Network, assumptions: AssumptionReport, soc: Optional[Certificate],
             maxmin: Optional[Certificate], nondegeneracy: NondegeneracyVerdict,
             persistence: PersistenceVerdict, p0: Optional[P0Report] = None,
             seed: int = const.DEFAULT_SEED, flags: Tuple[str, ...] = ()) -> CertificationReport:
    """Assemble the report; the sum-of-currents certificate is primary when both exist."""
    primary = soc or maxmin
    conservative, witness = is_conservative(net)
    lasalle = lasalle_check(net, primary) if primary else False
    extra = list(flags)
    if primary is not None and p0 is not None and p0.falsified:
        logger.warning("Certified %r fails the sampled P0 check", net)
        extra.append("p0_falsified")
    verdicts = VerdictFlags(
        certificate=primary is not None,
        lasalle=lasalle,
        nondegenerate=nondegeneracy.verdict == Verdict.ROBUSTLY_NONDEGENERATE,
        persistent=persistence.verdict == Persistence.YES,
        conservative=conservative,
    )
    tier = conclude_tier(verdicts)
    logger.info("%s: tier %s (%s)", net.name or "network", tier.value,
                ", ".join(k for k, v in verdicts.as_dict().items() if v) or "no flags")
    return CertificationReport(
        network=net,
        assumptions=assumptions,
        certificate=primary,
        certificates={RLFFamily.SOC.value: soc, RLFFamily.MAXMIN.value: maxmin},
        conservative=conservative,
        conservation_witness=witness.as_dict(net) if witness else None,
        lasalle=lasalle,
        nondegeneracy=nondegeneracy,
        persistence=persistence,
        tier=tier,
        explanations=tuple(explain(verdicts, tier)),
        p0=p0,
        seed=seed,
        flags=tuple(extra),
    )


def _nondegeneracy(net: Network, cert: Optional[Certificate], config: Config) -> NondegeneracyVerdict:
    options = dict(seed=config.seed, cap=config.minor_cap, symbolic_limit=config.symbolic_limit)
    if cert is None:
        return robust_nondegenerate(net, cert_present=False, **options)
    trace = cert.trace
    if trace.steps:
        base = robust_nondegenerate(trace.base, cert_present=True, **options)
        propagated = propagate_nondegeneracy(trace, base)
        if propagated is not None:
            return propagated
    return robust_nondegenerate(net, cert_present=True, **options)


def _persistence(net: Network, cert: Optional[Certificate], config: Config) -> PersistenceVerdict:
    options = dict(species_cap=config.siphon_cap, exhaustive_limit=config.exhaustive_siphon_limit)
    if cert is None or not cert.trace.steps:
        return graphically_persistent(net, **options)
    trace = cert.trace
    propagated = propagate_persistence(trace, False, cert)
    if propagated is None:
        base = graphically_persistent(trace.base, **options)
        propagated = propagate_persistence(trace, base.verdict == Persistence.YES, cert)
    if propagated is None:
        return graphically_persistent(net, **options)
    if net.n <= config.exhaustive_siphon_limit:
        direct = graphically_persistent(net, **options)
        if direct.verdict != propagated.verdict:
            logger.warning("Persistence propagation (%s) disagrees with enumeration for %r",
                           propagated.method, net)
            return direct
        return PersistenceVerdict(propagated.verdict, propagated.method, None, direct.siphons, direct.flags)
    return propagated


def run_analysis(net: Network, config: Optional[Config] = None) -> CertificationReport:
    """Full pipeline: assumptions, certificates, non-degeneracy, persistence, conclusion."""
    config = config or Config()
    assumptions = check_assumptions(net)
    if not assumptions.as1:
        logger.info("%r has no positive flux; conclusions are about boundary behavior only", net)
    soc = certify_soc(net, config.backtrack_branches, config.search_budget)
    maxmin = certify_maxmin(net, config.backtrack_branches, config.search_budget)
    primary = soc or maxmin
    nondegeneracy = _nondegeneracy(net, primary, config)
    persistence = _persistence(net, primary, config)
    p0 = p0_sample_check(net, config.p0_trials, config.seed) if net.n else None
    return conclude(net, assumptions, soc, maxmin, nondegeneracy, persistence, p0, config.seed)


def render_summary(report: CertificationReport) -> str:
    """Short human-readable digest of a report."""
    net = report.network
    cert = report.certificate
    lines = [
        f"network: {net.name or '<unnamed>'} ({net.n} species, {net.nu} reactions, rank {net.rank})",
        f"certificate: {cert.family.value + ' via ' + str(len(cert.trace.steps)) + ' steps' if cert else 'none'}",
        f"conservative: {'yes' if report.conservative else 'no'}",
        f"lasalle: {'yes' if report.lasalle else 'no'}",
        f"non-degeneracy: {report.nondegeneracy.verdict.value} ({report.nondegeneracy.method})",
        f"persistence: {report.persistence.verdict.value} ({report.persistence.method})",
        f"tier: {report.tier.value}",
    ]
    if report.persistence.witness is not None:
        members = ", ".join(sorted(net.species[i].name for i in report.persistence.witness.members))
        lines.append(f"critical siphon: {{{members}}}")
    for flag in report.all_flags():
        lines.append(f"flag: {flag}")
    return "\n".join(lines) + "\n"
