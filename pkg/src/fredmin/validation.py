"""Input validation helpers shared by the solvers and estimators."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import ValidationError
from .expr import Domain


def as_point_map(points, domain: Domain) -> dict:
    """Normalize evaluation points to a named map over the domain's axes.

    Accepts a mapping axis name -> scalar/array (extra keys are ignored), or,
    for one-dimensional domains only, a bare scalar/array bound to the single
    axis. Positional tuples are rejected by construction: multi-dimensional
    points must be named.
    """
    if isinstance(points, Mapping):
        missing = [n for n in domain.names if n not in points]
        if missing:
            raise ValidationError(f"points do not bind axes {missing}")
        return {n: points[n] for n in domain.names}
    if domain.dim != 1:
        raise ValidationError(
            "bare arrays are only accepted for 1-axis domains; "
            f"pass a named map over {list(domain.names)}")
    return {domain.names[0]: points}


def as_float_vector(x, n: int, name: str) -> np.ndarray:
    vec = np.asarray(x, dtype=float)
    if vec.shape != (n,):
        raise ValidationError(f"{name} must be a length-{n} vector, "
                              f"got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name} contains non-finite entries")
    return vec
