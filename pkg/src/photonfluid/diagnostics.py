"""Observables extracted from field snapshots.

Madelung variables, far-field spectra, Fourier-mode histories with
growth-rate and frequency fits, plaquette vortex detection and synthetic
holograms.  All functions are pure and accept any :class:`FieldState`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from .solver import FieldState, Grid

SUM = "sum"
DIFF = "diff"

AMP_LO = 1e-5
AMP_HI = 1e-2
MIN_FIT_SAMPLES = 5


@dataclass
class HydroFields:
    density: np.ndarray
    velocity: np.ndarray  # (2, nx, ny); NaN where masked
    phase: np.ndarray
    mask: np.ndarray  # True where density > floor


def _field(state: FieldState) -> np.ndarray:
    """Single complex field; for several envelopes their coherent sum."""
    return state.psi[0] if state.ncomp == 1 else state.field


def spectral_gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    spec = np.fft.fft2(f)
    dfx = np.fft.ifft2(1j * grid.kx_deriv[:, None] * spec)
    dfy = np.fft.ifft2(1j * grid.ky_deriv[None, :] * spec)
    return np.stack([dfx, dfy])


def madelung(state: FieldState, density_floor: Optional[float] = None,
             component: Optional[int] = None) -> HydroFields:
    """Density ``|psi|^2`` and velocity ``Im(psi* grad psi) / rho``.

    The velocity comes from the gauge-invariant current, so no phase
    unwrapping is needed and vortices do not break it.  ``component`` picks
    one envelope; by default the coherent field is used.
    """
    psi = _field(state) if component is None else state.psi[component]
    rho = psi.real**2 + psi.imag**2
    if density_floor is None:
        density_floor = 1e-10 * rho.max()
    mask = rho > density_floor
    grad = spectral_gradient(psi, state.grid)
    current = np.imag(np.conj(psi)[None] * grad)
    with np.errstate(divide="ignore", invalid="ignore"):
        velocity = np.where(mask[None], current / np.where(mask, rho, 1.0)[None], np.nan)
    return HydroFields(rho, velocity, np.angle(psi), mask)


def far_field(state: FieldState, component: Optional[int] = None) -> np.ndarray:
    """``|psi_hat(q)|^2`` with DC at the raster center.

    Normalized so that ``spectrum.sum() * (2 pi)^2 / (lx ly)`` equals
    ``norm * (2 pi)^2 / (lx ly)``, i.e. ``spectrum.sum()`` equals the norm.
    """
    grid = state.grid
    psi = _field(state) if component is None else state.psi[component]
    spec = np.fft.fft2(psi)
    power = np.abs(spec) ** 2 * grid.dA / (grid.nx * grid.ny)
    return np.fft.fftshift(power)


def far_field_axes(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    return np.fft.fftshift(grid.kx), np.fft.fftshift(grid.ky)


def density_spectrum(state: FieldState, combination: str = SUM) -> np.ndarray:
    """Fourier coefficients of the density, divided by the cell count.

    ``combination`` is ``"sum"`` (total density) or ``"diff"``
    (``rho_0 - rho_1``, dual-envelope states only).
    """
    dens = np.abs(state.psi) ** 2
    if combination == SUM:
        rho = dens.sum(axis=0)
    elif combination == DIFF:
        if state.ncomp < 2:
            raise ValueError("difference mode needs two envelopes")
        rho = dens[0] - dens[1]
    else:
        raise ValueError(f"unknown combination {combination!r}")
    return np.fft.fft2(rho) / rho.size


def band_power(state: FieldState, c_s: float, q_lo: float, q_hi: float) -> float:
    """Relative density power in modes with ``q_lo < |q| / c_s < q_hi``.

    Used as the scalar "instability development" observable.
    """
    grid = state.grid
    spec = density_spectrum(state)
    background = spec[0, 0].real
    Q = np.sqrt(grid.kx_deriv[:, None] ** 2 + grid.ky_deriv[None, :] ** 2) / c_s
    sel = (Q > q_lo) & (Q < q_hi)
    if background == 0:
        return 0.0
    return float(np.sum(np.abs(spec[sel]) ** 2) / background**2)


# -- mode histories -----------------------------------------------------------

@dataclass
class ModeHistory:
    """Complex amplitude of one density Fourier mode versus ``z``.

    ``samples`` holds ``(z, amplitude)``; ``background`` is the mean density
    used to express amplitudes relative to it.  ``global_level`` optionally
    records the largest relative non-DC density amplitude at each sample.
    """

    q: Tuple[float, float]
    samples: List[Tuple[float, complex]] = field(default_factory=list)
    background: float = 1.0
    combination: str = SUM
    global_level: List[float] = field(default_factory=list)

    @property
    def z(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples], dtype=float)

    @property
    def amplitude(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=complex)

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.amplitude) / self.background

    def append(self, z: float, amp: complex, level: Optional[float] = None):
        if self.samples and not z > self.samples[-1][0]:
            raise ValueError("mode history samples must have strictly increasing z")
        self.samples.append((float(z), complex(amp)))
        if level is not None:
            self.global_level.append(float(level))


class ModeTracker:
    """Online accumulation of several mode histories (usable as a callback)."""

    def __init__(self, qs: Sequence[Tuple[float, float]], combination: str = SUM):
        self.qs = [tuple(map(float, q)) for q in qs]
        self.combination = combination
        self.histories = [ModeHistory(q, combination=combination) for q in self.qs]
        self._index = None

    def __call__(self, state: FieldState) -> None:
        if self._index is None:
            self._index = [state.grid.mode_index(q) for q in self.qs]
        spec = density_spectrum(state, self.combination)
        total = spec if self.combination == SUM else density_spectrum(state, SUM)
        background = total[0, 0].real
        rel = np.abs(total) / background if background else np.zeros(total.shape)
        rel[0, 0] = 0.0
        level = float(rel.max())
        for hist, (ix, iy) in zip(self.histories, self._index):
            if not hist.samples:
                hist.background = background
            hist.append(state.z, spec[ix, iy], level)


def mode_histories(snapshots: Iterable[FieldState], qs: Sequence[Tuple[float, float]],
                   combination: str = SUM) -> List[ModeHistory]:
    tracker = ModeTracker(qs, combination)
    for snap in snapshots:
        tracker(snap)
    return tracker.histories


def mode_history(snapshots: Iterable[FieldState], q: Tuple[float, float],
                 combination: str = SUM) -> ModeHistory:
    return mode_histories(snapshots, [q], combination)[0]


@dataclass(frozen=True)
class GrowthFit:
    gamma: Optional[float]
    uncertainty: Optional[float]
    n_samples: int
    z_range: Optional[Tuple[float, float]] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.gamma is not None


def linear_window(history: ModeHistory, window: Tuple[float, float] = (AMP_LO, AMP_HI),
                  global_hi: Optional[float] = None,
                  harmonic_margin: Optional[float] = None) -> np.ndarray:
    """Indices of samples in the linear regime.

    Samples before the mode (or, with ``global_hi``, any density mode) first
    exceeds the upper bound, and with relative amplitude at least the lower
    bound.  With ``harmonic_margin`` a sample is also dropped when its
    amplitude is below ``harmonic_margin * level^2``, ``level`` being the
    largest density mode: there quadratic products of the dominant modes
    swamp the linear signal.
    """
    lo, hi = window
    rel = history.relative
    stop = len(rel)
    over = np.nonzero(rel > hi)[0]
    if over.size:
        stop = over[0]
    if global_hi is not None and history.global_level:
        level = np.asarray(history.global_level)
        over = np.nonzero(level > global_hi)[0]
        if over.size:
            stop = min(stop, over[0])
    idx = np.arange(stop)
    keep = rel[:stop] >= lo
    if harmonic_margin is not None and history.global_level:
        level = np.asarray(history.global_level)[:stop]
        keep &= rel[:stop] >= harmonic_margin * level**2
    return idx[keep]


def fit_growth_rate(history: ModeHistory, window: Tuple[float, float] = (AMP_LO, AMP_HI),
                    global_hi: Optional[float] = None,
                    harmonic_margin: Optional[float] = None) -> GrowthFit:
    """Least-squares slope of ``ln |amplitude|`` over the linear window.

    The uncertainty is the standard error of the slope.
    """
    idx = linear_window(history, window, global_hi, harmonic_margin)
    if idx.size < MIN_FIT_SAMPLES:
        return GrowthFit(None, None, int(idx.size), None,
                         f"only {idx.size} samples in window {window}; need {MIN_FIT_SAMPLES}")
    z = history.z[idx]
    y = np.log(np.abs(history.amplitude[idx]))
    res = stats.linregress(z, y)
    return GrowthFit(float(res.slope), float(res.stderr), int(idx.size), (float(z[0]), float(z[-1])))


def fit_oscillation_frequency(history: ModeHistory) -> Tuple[float, float]:
    """Angular frequency of a real standing-wave mode amplitude.

    Fits ``a cos(w z) + b sin(w z) + c`` to the real part of the amplitude,
    starting from the peak of a zero-padded periodogram.  Returns
    ``(w, stderr)``.
    """
    z = history.z
    y = history.amplitude.real
    if len(z) < 8:
        raise ValueError("need at least 8 samples to fit a frequency")
    dz = np.diff(z)
    # The seed periodogram uses the leading uniformly spaced run; a shortened
    # final step (landing exactly on z_end) only enters the least-squares fit.
    uniform = np.isclose(dz, dz[0], rtol=1e-6)
    n_uniform = len(dz) + 1 if uniform.all() else int(np.argmin(uniform)) + 1
    if n_uniform < 8:
        raise ValueError("frequency fit needs at least 8 uniformly spaced samples")
    yc = y[:n_uniform] - y[:n_uniform].mean()
    pad = 16 * len(yc)
    freqs = 2 * np.pi * np.fft.rfftfreq(pad, d=dz[0])
    power = np.abs(np.fft.rfft(yc, n=pad))
    guess = freqs[1 + np.argmax(power[1:])]

    def model(zz, w, a, b, c):
        return a * np.cos(w * zz) + b * np.sin(w * zz) + c

    amp0 = np.max(np.abs(yc)) or 1.0
    popt, pcov = optimize.curve_fit(model, z, y, p0=[guess, amp0, 0.0, y.mean()])
    return float(abs(popt[0])), float(np.sqrt(pcov[0, 0]))


# -- vortices and holograms ---------------------------------------------------

@dataclass(frozen=True)
class VortexRecord:
    position: Tuple[float, float]  # cell coordinates (ix, iy) of the plaquette center
    charge: int


def _wrap(dphi: np.ndarray) -> np.ndarray:
    """Map phase differences into (-pi, pi]."""
    return -np.mod(-dphi + np.pi, 2 * np.pi) + np.pi


def winding_field(psi: np.ndarray, periodic: bool = True) -> np.ndarray:
    """Integer winding number of each 2x2 plaquette (anticlockwise in x-y)."""
    phase = np.angle(psi)
    if periodic:
        p00 = phase
        p10 = np.roll(phase, -1, axis=0)
        p11 = np.roll(np.roll(phase, -1, axis=0), -1, axis=1)
        p01 = np.roll(phase, -1, axis=1)
    else:
        p00 = phase[:-1, :-1]
        p10 = phase[1:, :-1]
        p11 = phase[1:, 1:]
        p01 = phase[:-1, 1:]
    total = _wrap(p10 - p00) + _wrap(p11 - p10) + _wrap(p01 - p11) + _wrap(p00 - p01)
    return np.rint(total / (2 * np.pi)).astype(int)


def detect_vortices(state: FieldState, density_floor: Optional[float] = None,
                    periodic: bool = True, component: Optional[int] = None) -> List[VortexRecord]:
    """Phase singularities from plaquette windings.

    Only plaquettes whose four corners exceed ``density_floor`` (default
    ``1e-10 max rho``) are counted.
    """
    psi = _field(state) if component is None else state.psi[component]
    rho = np.abs(psi) ** 2
    if density_floor is None:
        density_floor = 1e-10 * rho.max()
    above = rho > density_floor
    if periodic:
        corners = (above & np.roll(above, -1, 0) & np.roll(above, -1, 1)
                   & np.roll(np.roll(above, -1, 0), -1, 1))
    else:
        corners = above[:-1, :-1] & above[1:, :-1] & above[1:, 1:] & above[:-1, 1:]
    wind = winding_field(psi, periodic) * corners
    ix, iy = np.nonzero(wind)
    return [VortexRecord((float(i) + 0.5, float(j) + 0.5), int(wind[i, j]))
            for i, j in zip(ix, iy)]


def hologram(state: FieldState, reference_amplitude: float, reference_k=(0.0, 0.0),
             component: Optional[int] = None) -> np.ndarray:
    """Interference intensity ``|psi + A exp(i k_ref . r)|^2``."""
    grid = state.grid
    grid.mode_index(reference_k)
    psi = _field(state) if component is None else state.psi[component]
    X, Y = grid.mesh()
    ref = reference_amplitude * np.exp(1j * (reference_k[0] * X + reference_k[1] * Y))
    return np.abs(psi + ref) ** 2


def count_fringes(cut: np.ndarray) -> int:
    """Bright fringes along a 1-D intensity cut.

    Counts upward crossings of the cut's mean level, so a period of the
    fringe pattern contributes exactly one.
    """
    s = np.sign(cut - cut.mean())
    s = s[s != 0]
    return int(np.count_nonzero(np.diff(s) > 0))
