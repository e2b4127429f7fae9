"""Log-determinants of twisted Dirichlet Laplacians on scaled lattice polygons."""

__version__ = "0.1.0"

from .geometry import (DomainGraph, GeometryError, LatticeRegion, build_graph,  # noqa: E402
                       make_region, parse_region, summarize_geometry)
from .connection import build_connection, make_punctures, scale_punctures  # noqa: E402
from .spectral import assemble, logdet  # noqa: E402

__all__ = [
    "DomainGraph", "GeometryError", "LatticeRegion", "build_graph", "make_region",
    "parse_region", "summarize_geometry", "build_connection", "make_punctures",
    "scale_punctures", "assemble", "logdet", "__version__",
]
