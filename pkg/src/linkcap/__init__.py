"""Link capacity in the SINR model under shadowing and Rayleigh fading."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    GainTable,
    Instance,
    Link,
    Params,
    Point,
    affectance,
    gpl_gains,
    is_feasible,
    length_partition,
    set_affectance,
)
from .shadowing import ShadowingSpec, gn, sample_realization, tail, quantile  # noqa: E402

__all__ = [
    "GainTable", "Instance", "Link", "Params", "Point", "ShadowingSpec",
    "affectance", "gn", "gpl_gains", "is_feasible", "length_partition",
    "quantile", "sample_realization", "set_affectance", "tail",
]
