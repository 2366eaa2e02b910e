"""Route-choice modeling toolkit: anchor-based cross-nested path-size
logit over road networks, from ingestion through maximum likelihood."""

__version__ = "0.1.0"

from . import (
    anchors,
    choiceset,
    cnpsl,
    complexity,
    features,
    geometry,
    hexgrid,
    netgraph,
    shortestpaths,
    synth,
    traffic,
)

__all__ = [
    "anchors",
    "choiceset",
    "cnpsl",
    "complexity",
    "features",
    "geometry",
    "hexgrid",
    "netgraph",
    "shortestpaths",
    "synth",
    "traffic",
    "__version__",
]
