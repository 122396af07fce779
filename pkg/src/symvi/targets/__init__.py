"""Target density zoo and CLI target specs."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter
from .base import BenchmarkMoments, SymmetryMeta, Target, shift
from .schools import (
    SCHOOLS_VARIANTS,
    SchoolsData,
    conditional_theta,
    default_schools_data,
    ingest_schools_data,
    make_schools,
)
from .synthetic import (
    make_crescent,
    make_extended_funnel,
    make_funnel,
    make_gaussian,
    make_skew_normal,
    make_student_t,
    make_student_t_1d,
)

__all__ = [
    "Target",
    "SymmetryMeta",
    "BenchmarkMoments",
    "shift",
    "make_gaussian",
    "make_student_t",
    "make_student_t_1d",
    "make_skew_normal",
    "make_funnel",
    "make_extended_funnel",
    "make_crescent",
    "SchoolsData",
    "ingest_schools_data",
    "default_schools_data",
    "make_schools",
    "conditional_theta",
    "from_spec",
]


def from_spec(spec: str, schools_data: SchoolsData | None = None) -> Target:
    """Build a target from a CLI spec string.

    Grammar: ``student:DF:RHO``, ``skewnormal:KAPPA`` (location 0, scale
    2), ``funnel:N_THETA``, ``extfunnel:N_THETA:C12``, ``crescent``,
    ``schools:centered|noncentered|marginalized``.
    """
    name, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if name == "student":
            if len(parts) != 2:
                raise InvalidParameter(f"expected student:DF:RHO, got {spec!r}")
            return make_student_t(float(parts[0]), float(parts[1]))
        if name == "skewnormal":
            if len(parts) != 1:
                raise InvalidParameter(f"expected skewnormal:KAPPA, got {spec!r}")
            return make_skew_normal(0.0, 2.0, float(parts[0]))
        if name == "funnel":
            if len(parts) != 1:
                raise InvalidParameter(f"expected funnel:N_THETA, got {spec!r}")
            n = int(parts[0])
            c = np.eye(n)
            if n >= 2:
                c[0, 1] = c[1, 0] = 0.5
            return make_funnel(n, c)
        if name == "extfunnel":
            if len(parts) != 2:
                raise InvalidParameter(f"expected extfunnel:N_THETA:C12, got {spec!r}")
            return make_extended_funnel(int(parts[0]), float(parts[1]))
        if name == "crescent":
            if parts:
                raise InvalidParameter(f"crescent takes no parameters, got {spec!r}")
            return make_crescent()
        if name == "schools":
            if len(parts) != 1 or parts[0] not in SCHOOLS_VARIANTS:
                raise InvalidParameter(
                    f"expected schools:centered|noncentered|marginalized, got {spec!r}"
                )
            data = schools_data if schools_data is not None else default_schools_data()
            return make_schools(data, parts[0])
    except ValueError as exc:
        raise InvalidParameter(f"could not parse target spec {spec!r}: {exc}") from exc
    raise InvalidParameter(f"unknown target {name!r} in spec {spec!r}")
