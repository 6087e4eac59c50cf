"""Bundled regression networks in .crn format."""
from importlib import resources
from pathlib import Path
from typing import List

from ..core import Network
from ..netio import parse_network

SUFFIX = ".crn"


def names() -> List[str]:
    """Sorted names of the bundled networks."""
    return sorted(
        entry.name[:-len(SUFFIX)]
        for entry in resources.files(__name__).iterdir()
        if entry.name.endswith(SUFFIX)
    )


def path(name: str) -> Path:
    """Filesystem path of a bundled network."""
    entry = resources.files(__name__) / f"{name}{SUFFIX}"
    if not entry.is_file():
        raise KeyError(f"no bundled network named {name!r}")
    return Path(str(entry))


def load(name: str) -> Network:
    """Parse a bundled network; the network is named after the file."""
    text = path(name).read_text(encoding="utf-8")
    return parse_network(text, name=name).network
