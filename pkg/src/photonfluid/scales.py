"""Optical parameters -> dimensionless fluid description.

Solver-facing quantities are dimensionless: transverse and longitudinal
coordinates are measured in units of 1/(n k0), so that the paraxial equation
reads ``i dpsi/dz = -1/2 lap psi + [V0 + g |psi|^2] psi`` with
``g = -chi3 / (2 n^2)``.

Two sound speeds coexist:

* ``cs_single = sqrt(g rho0)``, the Bogoliubov sound speed of one fluid,
  with healing length ``xi_single = 1 / cs_single``;
* ``cs_two = sqrt(2 g rho0)``, the speed entering the two-fluid dispersion
  relation, with ``xi_two = 1 / cs_two``.

The two-stream API (Mach number, ``Q = q xi``) always uses ``cs_two`` and
``xi_two``.  Keeping both avoids silent factor-of-sqrt(2) mistakes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

DEFOCUSING = "defocusing"
FOCUSING = "focusing"
LINEAR = "linear"

PARAXIAL_WARN_SPEED = 0.3


class ParaxialWarning(UserWarning):
    """Transverse flow speed is large enough to question the paraxial model."""


@dataclass(frozen=True)
class OpticalMedium:
    """Homogeneous Kerr medium.

    ``chi3`` is signed, in m^2/V^2; ``chi3 < 0`` is the self-defocusing
    (repulsive photon fluid) case.
    """

    wavelength_vacuum: float
    n_linear: float
    chi3: float

    def __post_init__(self):
        if not self.wavelength_vacuum > 0:
            raise ValueError(f"wavelength_vacuum must be > 0, got {self.wavelength_vacuum}")
        if not self.n_linear >= 1:
            raise ValueError(f"n_linear must be >= 1, got {self.n_linear}")
        if not math.isfinite(self.chi3):
            raise ValueError("chi3 must be finite")

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.wavelength_vacuum

    @property
    def regime(self) -> str:
        if self.chi3 < 0:
            return DEFOCUSING
        if self.chi3 > 0:
            return FOCUSING
        return LINEAR

    @property
    def focusing(self) -> bool:
        return self.regime == FOCUSING


@dataclass(frozen=True)
class FluidScales:
    """Fluid quantities in solver units.

    In the focusing regime the sound speeds and lengths are ``None``: the
    Bogoliubov spectrum has an imaginary branch there and no speed of sound
    exists.  A vanishing interaction gives ``cs = 0`` and infinite lengths,
    flagged by :attr:`divergent`.
    """

    rho0: float
    g: float
    cs_single: Optional[float]
    cs_two: Optional[float]
    xi_single: Optional[float]
    xi_two: Optional[float]
    xi_physical: Optional[float] = None
    regime: str = DEFOCUSING

    @property
    def divergent(self) -> bool:
        return self.xi_single is not None and math.isinf(self.xi_single)

    @property
    def has_sound(self) -> bool:
        return self.cs_two is not None and self.cs_two > 0


def _inverse(x: float) -> float:
    return math.inf if x == 0 else 1.0 / x


def fluid_scales(g: float, rho0: float = 1.0) -> FluidScales:
    """Sound speeds and healing lengths straight from solver parameters."""
    if rho0 < 0:
        raise ValueError(f"rho0 must be >= 0, got {rho0}")
    if g < 0:
        return FluidScales(rho0, g, None, None, None, None, None, FOCUSING)
    cs1 = math.sqrt(g * rho0)
    cs2 = math.sqrt(2.0) * cs1
    regime = DEFOCUSING if g > 0 else LINEAR
    return FluidScales(rho0, g, cs1, cs2, _inverse(cs1), _inverse(cs2), None, regime)


def derive_scales(medium: OpticalMedium, background_intensity: float) -> FluidScales:
    """Map a medium and a background field ``|E0|^2`` (V^2/m^2) to fluid scales.

    ``rho0`` keeps the physical units of ``|E0|^2`` so that ``g rho0`` is the
    dimensionless nonlinear phase rate.
    """
    if background_intensity < 0:
        raise ValueError(f"background_intensity must be >= 0, got {background_intensity}")
    n = medium.n_linear
    g = -medium.chi3 / (2 * n * n)
    if medium.focusing:
        return FluidScales(background_intensity, g, None, None, None, None, None, FOCUSING)

    nonlinear = medium.chi3 * background_intensity  # chi3 |E0|^2, <= 0 here
    cs1 = math.sqrt(-nonlinear / 2) / n
    cs2 = math.sqrt(2.0) * cs1
    if nonlinear == 0:
        xi_phys = math.inf
    else:
        xi_phys = math.sqrt(-2.0 / nonlinear) / medium.k0
    return FluidScales(
        rho0=background_intensity,
        g=g,
        cs_single=cs1,
        cs_two=cs2,
        xi_single=_inverse(cs1),
        xi_two=_inverse(cs2),
        xi_physical=xi_phys,
        regime=medium.regime if nonlinear != 0 else LINEAR,
    )


def physical_length(dimensionless: float, medium: OpticalMedium) -> float:
    """Undo the ``n k0`` coordinate rescaling."""
    return dimensionless / (medium.n_linear * medium.k0)


@dataclass(frozen=True)
class FlowGeometry:
    theta_internal: float
    theta_incidence: float
    v: float


def flow_speed(
    theta: Optional[float] = None,
    *,
    theta_incidence: Optional[float] = None,
    n: float = 1.0,
    warn_above: float = PARAXIAL_WARN_SPEED,
) -> FlowGeometry:
    """Transverse flow speed ``v = sin(theta) = sin(theta_i) / n``.

    Give exactly one of ``theta`` (internal propagation angle) or
    ``theta_incidence`` (with refractive index ``n``).  Angles in radians.
    """
    if (theta is None) == (theta_incidence is None):
        raise ValueError("give exactly one of theta or theta_incidence")
    if n < 1:
        raise ValueError(f"refractive index must be >= 1, got {n}")

    if theta is not None:
        _check_angle(theta, "theta")
        v = math.sin(theta)
        theta_i = math.asin(min(1.0, n * v))
        geometry = FlowGeometry(theta, theta_i, v)
    else:
        _check_angle(theta_incidence, "theta_incidence")
        v = math.sin(theta_incidence) / n
        geometry = FlowGeometry(math.asin(v), theta_incidence, v)

    if geometry.v > warn_above:
        warnings.warn(
            f"flow speed v={geometry.v:.3g} exceeds paraxial threshold {warn_above}",
            ParaxialWarning,
            stacklevel=2,
        )
    return geometry


def _check_angle(angle: float, name: str) -> None:
    if not (0 <= angle < math.pi / 2):
        raise ValueError(
            f"{name}={angle!r} rad outside [0, pi/2); grazing propagation "
            "breaks the paraxial approximation"
        )


def mach_number(v: float, scales: FluidScales) -> float:
    """Mach number ``beta = v / cs_two`` of a stream relative to the other fluid."""
    if v < 0:
        raise ValueError(f"flow speed must be >= 0, got {v}")
    if scales.regime == FOCUSING:
        raise ValueError("Mach number undefined in the focusing regime (no sound speed)")
    if not scales.cs_two:
        raise ValueError("Mach number undefined: two-fluid sound speed is zero")
    return v / scales.cs_two
