"""Scalar-flat Kahler metrics with prescribed varying cone angle along a divisor.

Construction by the circle-symmetric hyperbolic ansatz (harmonic potential on
hyperbolic 3-space plus a connection with curvature its Hodge-starred
differential) and a numerical verification battery for every checkable
property: harmonicity, barriers, flux quantization, scalar-flatness, the
Kahler condition, the measured cone angle, decay, and completeness probes.
"""

from ._core import backend_name
from .connection import ConnectionData, GaugeDescriptor, curvature_form, flux
from .dirichlet import ConeAngleSpec, HarmonicExtension, QuadratureConfig
from .hyperbolic import BallPoint, BoundaryPoint, HPoint
from .metric import MetricGrid, assemble_kahler_form, assemble_metric
from .potential import ChargeConfig, Potential, assemble_potential, green_function
from .verify import GeodesicState, cone_angle_probe, geodesic_integrate, scalar_curvature_scan

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    "HPoint",
    "BallPoint",
    "BoundaryPoint",
    "ConeAngleSpec",
    "HarmonicExtension",
    "QuadratureConfig",
    "ChargeConfig",
    "Potential",
    "assemble_potential",
    "green_function",
    "ConnectionData",
    "GaugeDescriptor",
    "curvature_form",
    "flux",
    "assemble_metric",
    "assemble_kahler_form",
    "MetricGrid",
    "GeodesicState",
    "scalar_curvature_scan",
    "cone_angle_probe",
    "geodesic_integrate",
]
