"""Reading and writing the .crn reaction format and JSON reports."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput, VisitError

from .common.errors import NetworkParseError
from .core import Network, NetworkBuilder

if TYPE_CHECKING:
    from .conclude import CertificationReport

logger = logging.getLogger(__name__)

GRAMMAR_PATH = Path(__file__).parent / "grammar" / "crn.lark"


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(GRAMMAR_PATH.read_text(encoding="utf-8"), start="reaction", parser="lalr")


class _SideError(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(message)
        self.message = message
        self.token = token


class _ReactionTransformer(Transformer):
    def scaled(self, items):
        coeff, name = items
        if int(coeff) == 0:
            raise _SideError(f"coefficient 0 for species {name}", coeff)
        return int(coeff), str(name), coeff

    def unit(self, items):
        return 1, str(items[0]), items[0]

    def number(self, items):
        return int(items[0]), None, items[0]

    def side(self, items):
        if len(items) == 1 and items[0][1] is None:
            value, _, token = items[0]
            if value != 0:
                raise _SideError(f"bare number {value} where a species was expected", token)
            return {}
        terms: Dict[str, int] = {}
        for coeff, name, token in items:
            if name is None:
                raise _SideError("the empty side 0 cannot be combined with other terms", token)
            terms[name] = terms.get(name, 0) + coeff
        return terms

    def reaction(self, items):
        lhs, arrow, rhs = items
        return lhs, str(arrow), rhs


@dataclass(frozen=True)
class NetworkDocument:
    """Parsed source with the line each directed reaction came from."""

    source: str
    network: Network
    spans: Tuple[int, ...]
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    def line_of(self, reaction: int) -> int:
        return self.spans[reaction]


def parse_network(text: str, name: str = "") -> NetworkDocument:
    """Parse .crn source text.

    Raises:
        NetworkParseError: on syntax errors, zero coefficients or reactions
            with both sides empty; duplicate reactions only produce warnings.
    """
    builder = NetworkBuilder(name)
    spans: List[int] = []
    warnings: List[str] = []
    seen: Dict[Tuple, int] = {}
    transformer = _ReactionTransformer()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        try:
            tree = _parser().parse(line)
            lhs, arrow, rhs = transformer.transform(tree)
        except UnexpectedInput as e:
            detail = str(e).strip().splitlines()[0] if str(e).strip() else "syntax error"
            raise NetworkParseError(f"syntax error: {detail}", line_no, e.column) from None
        except VisitError as e:
            original = e.orig_exc
            if isinstance(original, _SideError):
                raise NetworkParseError(original.message, line_no, original.token.column) from None
            raise
        if not lhs and not rhs:
            raise NetworkParseError("reaction has both sides empty", line_no, 1)

        directions = [(lhs, rhs)] if arrow == "->" else [(lhs, rhs), (rhs, lhs)]
        ids = []
        for reactants, products in directions:
            signature = (tuple(sorted(reactants.items())), tuple(sorted(products.items())))
            if signature in seen:
                message = f"line {line_no}: duplicate of reaction on line {seen[signature]}"
                logger.warning("Duplicate reaction %s", message)
                warnings.append(message)
            else:
                seen[signature] = line_no
            ids.append(builder.add_reaction(reactants, products))
            spans.append(line_no)
        if len(ids) == 2:
            builder.link_reverse(*ids)

    network = builder.build()
    logger.debug("Parsed %s: %d species, %d reactions", name or "<text>", network.n, network.nu)
    return NetworkDocument(text, network, tuple(spans), tuple(warnings))


def load_network(path: Path) -> NetworkDocument:
    """Read and parse a .crn file; the network is named after the file stem."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_network(text, name=path.stem)


def serialize_network(net: Network) -> str:
    """Canonical text: reactions in id order, reversible pairs merged to <->."""
    lines = []
    for reaction in net.reactions:
        partner = reaction.reverse_of
        if partner is not None and partner < reaction.id:
            continue
        arrow = "<->" if partner is not None else "->"
        lines.append(f"{net.side_text(reaction.reactants)} {arrow} {net.side_text(reaction.products)}")
    return "\n".join(lines) + "\n" if lines else ""


def emit_report(report: "CertificationReport", indent: Optional[int] = 2) -> str:
    """Serialize a report as stable-key-order JSON."""
    return json.dumps(report.to_dict(), indent=indent, sort_keys=True) + "\n"
