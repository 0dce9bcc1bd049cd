"""Two-level atomic vapor as a Kerr medium.

Everything is SI internally (rad/s, m^-3, W/m^2, m).  Converters for the
laboratory units used in the CLI (MHz, cm^-3, W/cm^2, mm) live at the bottom.

The susceptibility prefactor is ``mu^2 n_a / (hbar eps0)`` (linear in the
atomic density).  ``literal_prefactor=True`` switches to the quadratic
``mu^2 n_a^2`` form, which is inconsistent with the Kerr coefficients below
and with the 85Rb numbers; it exists only for comparison.

Intensity and field amplitude are related by ``I = c eps0 |E0|^2 / 2``; with
that convention ``I / I_s = Omega_R^2 / (2 delta^2)`` holds exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional

from scipy.constants import c, epsilon_0, hbar

from .scales import OpticalMedium

FAR_DETUNED = 10.0  # |delta| / Gamma
KERR_LIMIT = 0.2  # I / I_s
SAMPLE_LENGTH_FACTOR = 5.0


@dataclass(frozen=True)
class TwoLevelAtom:
    dipole_moment: float  # C m
    linewidth: float  # rad/s
    transition_wavelength: float  # m
    saturation_intensity_resonant: float  # W/m^2

    def __post_init__(self):
        expected = resonant_saturation_intensity(self.dipole_moment, self.linewidth)
        if abs(self.saturation_intensity_resonant / expected - 1) > 0.1:
            raise ValueError(
                f"I_s0={self.saturation_intensity_resonant:.4g} W/m^2 disagrees with "
                f"c eps0 hbar^2 Gamma^2 / (4 mu^2) = {expected:.4g} W/m^2 by more than 10%"
            )


def resonant_saturation_intensity(mu: float, gamma: float) -> float:
    return c * epsilon_0 * hbar**2 * gamma**2 / (4 * mu**2)


# D2 line of 85Rb with the effective far-detuned dipole moment (linear polarization).
RB85_D2 = TwoLevelAtom(
    dipole_moment=2.069e-29,
    linewidth=2 * math.pi * 6.06e6,
    transition_wavelength=780e-9,
    saturation_intensity_resonant=25.0,  # 2.5 mW/cm^2
)


@dataclass(frozen=True)
class VaporConditions:
    atomic_density: float  # m^-3
    detuning: float  # rad/s, delta = omega_0 - omega_a
    drive_intensity: float = 0.0  # W/m^2

    def far_detuned(self, atom: TwoLevelAtom) -> bool:
        return abs(self.detuning) >= FAR_DETUNED * atom.linewidth

    def kerr_valid(self, atom: TwoLevelAtom) -> bool:
        i_s = saturation_intensity(atom, self.detuning)
        if i_s == 0:
            return False
        return self.drive_intensity / i_s <= KERR_LIMIT


def field_amplitude_squared(intensity: float) -> float:
    """``|E0|^2`` in V^2/m^2 for intensity in W/m^2."""
    return 2 * intensity / (c * epsilon_0)


def rabi_frequency(atom: TwoLevelAtom, intensity: float) -> float:
    return atom.dipole_moment * math.sqrt(field_amplitude_squared(intensity)) / hbar


def susceptibility(atom: TwoLevelAtom, conditions: VaporConditions,
                   literal_prefactor: bool = False) -> complex:
    """Complex two-level susceptibility including power broadening."""
    mu = atom.dipole_moment
    gamma = atom.linewidth
    delta = conditions.detuning
    n_a = conditions.atomic_density
    density = n_a * n_a if literal_prefactor else n_a
    omega_r2 = rabi_frequency(atom, conditions.drive_intensity) ** 2
    prefactor = mu * mu * density / (hbar * epsilon_0)
    return -prefactor * (delta - 0.5j * gamma) / (delta**2 + gamma**2 / 4 + omega_r2 / 2)


def refractive_index(chi: complex, exact: bool = False) -> float:
    """``1 + Re(chi)/2`` for a dilute vapor, or ``Re sqrt(1 + chi)``."""
    if exact:
        return (complex(1 + chi) ** 0.5).real
    return 1 + chi.real / 2


def kerr_coefficients(atom: TwoLevelAtom, atomic_density: float, detuning: float):
    """Linear index ``n0`` and Kerr index ``n2`` (m^2/W) to first order in ``I/I_s``."""
    if detuning == 0:
        raise ValueError("Kerr expansion undefined on resonance (detuning = 0)")
    mu = atom.dipole_moment
    gamma = atom.linewidth
    ratio = detuning / gamma
    if abs(ratio) < FAR_DETUNED:
        warnings.warn(
            f"|delta|/Gamma = {abs(ratio):.3g} < {FAR_DETUNED}: absorption is not negligible",
            stacklevel=2,
        )
    n0 = 1 - atomic_density * mu**2 / (2 * epsilon_0 * hbar * gamma) / ratio
    n2 = atomic_density * mu**4 / (2 * c * epsilon_0**2 * hbar**3 * gamma**3) / ratio**3
    return n0, n2


def saturation_intensity(atom: TwoLevelAtom, detuning: float) -> float:
    """Far-detuned saturation intensity ``4 (delta/Gamma)^2 I_s0``; zero on resonance."""
    return 4 * (detuning / atom.linewidth) ** 2 * atom.saturation_intensity_resonant


@dataclass(frozen=True)
class FeasibilityReport:
    n0: float
    n2: float  # m^2/W
    saturation_intensity: float  # W/m^2
    intensity_ratio: float  # I / I_s
    delta_n: float
    length_scale: float  # lambda0 / |delta_n|, m (inf if delta_n = 0)
    recommended_length: float  # m
    chi3_field: float  # chi3 |E0|^2 = 2 n0 n2 I
    chi3: float  # m^2/V^2
    far_detuned: bool
    kerr_valid: bool
    notes: tuple = ()

    @property
    def divergent(self) -> bool:
        return math.isinf(self.length_scale)

    def medium(self, wavelength: float) -> OpticalMedium:
        """Kerr medium for :func:`photonfluid.scales.derive_scales`."""
        return OpticalMedium(wavelength, max(1.0, self.n0), self.chi3)

    def as_text(self) -> str:
        def fmt(x):
            return "inf" if isinstance(x, float) and math.isinf(x) else f"{x:.6g}"

        lines = [
            f"n0 = {fmt(self.n0)}",
            f"n2_cm2_per_W = {fmt(self.n2 * 1e4)}",
            f"saturation_intensity_W_per_cm2 = {fmt(self.saturation_intensity / 1e4)}",
            f"intensity_ratio = {fmt(self.intensity_ratio)}",
            f"delta_n = {fmt(self.delta_n)}",
            f"length_scale_mm = {fmt(self.length_scale * 1e3)}",
            f"recommended_length_mm = {fmt(self.recommended_length * 1e3)}",
            f"chi3_E0sq = {fmt(self.chi3_field)}",
            f"chi3_m2_per_V2 = {fmt(self.chi3)}",
            f"far_detuned = {str(self.far_detuned).lower()}",
            f"kerr_valid = {str(self.kerr_valid).lower()}",
        ]
        lines += [f"note = {n!r}" for n in self.notes]
        return "\n".join(lines) + "\n"


def feasibility_report(atom: TwoLevelAtom, conditions: VaporConditions,
                       wavelength: Optional[float] = None) -> FeasibilityReport:
    """Index modulation, Kerr validity and the sample length ``>> lambda0 / |dn|``.

    The medium handoff uses ``n = n0 + n2 I`` and ``dn = chi3 |E0|^2 / (2 n0)``,
    so ``chi3 |E0|^2 = 2 n0 n2 I`` and ``chi3 = n0 n2 c eps0``.
    """
    wavelength = atom.transition_wavelength if wavelength is None else wavelength
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        n0, n2 = kerr_coefficients(atom, conditions.atomic_density, conditions.detuning)
    intensity = conditions.drive_intensity
    i_s = saturation_intensity(atom, conditions.detuning)
    ratio = intensity / i_s
    delta_n = n2 * intensity
    length = math.inf if delta_n == 0 else wavelength / abs(delta_n)
    notes = []
    far = conditions.far_detuned(atom)
    kerr_ok = ratio <= KERR_LIMIT
    if not far:
        notes.append("detuning below 10 linewidths: losses not negligible")
    if not kerr_ok:
        notes.append("I/I_s above 0.2: Kerr expansion unreliable")
    if delta_n == 0:
        notes.append("no index modulation: required sample length diverges")
    return FeasibilityReport(
        n0=n0,
        n2=n2,
        saturation_intensity=i_s,
        intensity_ratio=ratio,
        delta_n=delta_n,
        length_scale=length,
        recommended_length=SAMPLE_LENGTH_FACTOR * length,
        chi3_field=2 * n0 * n2 * intensity,
        chi3=n0 * n2 * c * epsilon_0,
        far_detuned=far,
        kerr_valid=kerr_ok,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class ScanRow:
    detuning_over_gamma: float
    atomic_density: float
    n2: float
    saturation_intensity: float


def detuning_scan(atom: TwoLevelAtom, densities: Iterable[float],
                  detunings_over_gamma: Iterable[float]) -> List[ScanRow]:
    rows = []
    detunings = list(detunings_over_gamma)
    if any(d == 0 for d in detunings):
        raise ValueError("detuning scan must exclude delta = 0")
    for n_a in densities:
        for ratio in detunings:
            delta = ratio * atom.linewidth
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _, n2 = kerr_coefficients(atom, n_a, delta)
            rows.append(ScanRow(ratio, n_a, n2, saturation_intensity(atom, delta)))
    return rows


# -- laboratory units ---------------------------------------------------------

def mhz_to_rad_s(f_mhz: float) -> float:
    return 2 * math.pi * f_mhz * 1e6


def rad_s_to_mhz(w: float) -> float:
    return w / (2 * math.pi * 1e6)


def per_cm3(n: float) -> float:
    return n * 1e6


def w_per_cm2(i: float) -> float:
    return i * 1e4


def to_w_per_cm2(i: float) -> float:
    return i / 1e4


def to_cm2_per_w(n2: float) -> float:
    return n2 * 1e4
