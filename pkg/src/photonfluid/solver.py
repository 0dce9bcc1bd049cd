"""Split-step spectral propagator for the dimensionless paraxial NLS.

    i dpsi_j/dz = -1/2 lap psi_j + [V0 + g rho] psi_j,   rho = sum_j |psi_j|^2

A :class:`FieldState` carries ``ncomp`` envelopes on a periodic lattice.
With ``ncomp == 1`` the two streams are a coherent superposition inside one
field; with ``ncomp == 2`` (``mode="dual"``) each stream has its own envelope
and they couple only through the total density, which is the two-fluid model
whose linearization gives the two-stream dispersion relation exactly.

Each step is Strang-split kinetic(dz/2) -> local phase(dz) -> kinetic(dz/2).
Both sub-steps are unitary, and the local step is exact because ``|psi|`` is
constant during it.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterator, List, Optional

import numpy as np
from scipy import fft as sfft

DUAL = "dual"
SINGLE = "single"

NOISE_CUTOFF = 0.9
DEALIAS_FRACTION = 2.0 / 3.0
NOISE_GENERATOR = "PCG64"


def fft_workers() -> int:
    """Thread count for transforms, capped by ``PHOTONFLUID_THREADS``."""
    raw = os.environ.get("PHOTONFLUID_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


class NumericalInstability(RuntimeError):
    """Non-finite field values after a step."""

    def __init__(self, z: float, state: Optional["FieldState"] = None):
        super().__init__(f"non-finite field detected at z={z:.6g}")
        self.z = z
        self.state = state


class IncommensurateFlow(ValueError):
    def __init__(self, v0: float, lx: float):
        unit = 2 * math.pi / lx
        lo = math.floor(v0 / unit) * unit
        hi = lo + unit
        super().__init__(
            f"v0={v0!r} is not a lattice wavenumber for lx={lx!r}; "
            f"nearest commensurate values: {lo!r}, {hi!r}"
        )
        self.suggestions = (lo, hi)


@dataclass(frozen=True)
class Grid:
    """Periodic lattice; ``x`` runs over ``[-lx/2, lx/2)``, arrays indexed ``[ix, iy]``."""

    nx: int
    ny: int
    lx: float
    ly: float
    dz: float = 0.01

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid needs nx, ny >= 8, got {self.nx}x{self.ny}")
        for name in ("lx", "ly", "dz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def dA(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def ky(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx[:, None] ** 2 + self.ky[None, :] ** 2

    @cached_property
    def kx_deriv(self) -> np.ndarray:
        """``kx`` with the unpaired Nyquist mode zeroed, for derivatives."""
        k = self.kx.copy()
        if self.nx % 2 == 0:
            k[self.nx // 2] = 0.0
        return k

    @cached_property
    def ky_deriv(self) -> np.ndarray:
        k = self.ky.copy()
        if self.ny % 2 == 0:
            k[self.ny // 2] = 0.0
        return k

    def spectral_mask(self, fraction: float) -> np.ndarray:
        """True for modes with ``|kx|, |ky| <= fraction * k_nyquist``."""
        kx_max = np.pi / self.dx
        ky_max = np.pi / self.dy
        return (np.abs(self.kx)[:, None] <= fraction * kx_max) & (
            np.abs(self.ky)[None, :] <= fraction * ky_max
        )

    def mode_index(self, q) -> tuple:
        """Lattice index ``(ix, iy)`` of wavevector ``q``; raises if off-lattice."""
        qx, qy = q
        mx = qx * self.lx / (2 * np.pi)
        my = qy * self.ly / (2 * np.pi)
        ix, iy = round(mx), round(my)
        if abs(mx - ix) > 1e-6 or abs(my - iy) > 1e-6:
            raise ValueError(f"wavevector {q!r} is not on the lattice")
        if not (-self.nx // 2 <= ix < self.nx // 2 and -self.ny // 2 <= iy < self.ny // 2):
            raise ValueError(f"wavevector {q!r} beyond the lattice Nyquist limit")
        return ix % self.nx, iy % self.ny

    def with_dz(self, dz: float) -> "Grid":
        return replace(self, dz=dz)


def default_dz(nx: int, lx: float, g: float, rho_max: float) -> float:
    """``min(0.1 dx^2, 0.01 / (g rho_max))``."""
    dx = lx / nx
    bound = 0.1 * dx * dx
    if g * rho_max > 0:
        bound = min(bound, 0.01 / (g * rho_max))
    return bound


@dataclass
class FieldState:
    """Envelopes ``psi[j, ix, iy]`` at propagation distance ``z``."""

    psi: np.ndarray
    z: float
    grid: Grid

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim == 2:
            psi = psi[None]
        if psi.shape[1:] != self.grid.shape:
            raise ValueError(f"field shape {psi.shape[1:]} does not match grid {self.grid.shape}")
        self.psi = psi

    @property
    def ncomp(self) -> int:
        return self.psi.shape[0]

    @property
    def density(self) -> np.ndarray:
        return np.sum(self.psi.real**2 + self.psi.imag**2, axis=0)

    @property
    def field(self) -> np.ndarray:
        """Coherent sum of the envelopes (what a camera would see)."""
        return self.psi.sum(axis=0)

    def copy(self) -> "FieldState":
        return FieldState(self.psi.copy(), self.z, self.grid)


@dataclass
class RunSpec:
    g: float = 0.5
    v0: float = 0.0
    rho0: float = 1.0
    potential: Optional[np.ndarray] = None
    noise_amplitude: float = 1e-6
    noise_seed: int = 0
    z_end: float = 0.0
    snapshot_every: int = 1
    mode: str = DUAL
    dealias: bool = False

    def __post_init__(self):
        if self.mode not in (DUAL, SINGLE):
            raise ValueError(f"mode must be {DUAL!r} or {SINGLE!r}, got {self.mode!r}")
        if not 0 <= self.noise_amplitude <= 1e-2:
            raise ValueError("noise_amplitude must lie in [0, 1e-2]")
        if self.rho0 < 0:
            raise ValueError("rho0 must be >= 0")
        if self.z_end < 0:
            raise ValueError("z_end must be >= 0")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if not 0 <= self.noise_seed < 2**64:
            raise ValueError("noise_seed must be an unsigned 64-bit integer")


def check_commensurate(v0: float, lx: float, tol: float = 1e-9) -> int:
    """Lattice index of the stream wavenumber; raises :class:`IncommensurateFlow`."""
    m = v0 * lx / (2 * math.pi)
    if abs(m - round(m)) > tol * max(1.0, abs(m)):
        raise IncommensurateFlow(v0, lx)
    return int(round(m))


def seeded_noise(grid: Grid, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """Complex white noise, high-``k`` filtered, rescaled to RMS ``amplitude``."""
    eta = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    spec = np.fft.fft2(eta) * grid.spectral_mask(NOISE_CUTOFF)
    eta = np.fft.ifft2(spec)
    rms = np.sqrt(np.mean(np.abs(eta) ** 2))
    if rms == 0 or amplitude == 0:
        return np.zeros(grid.shape, complex)
    return eta * (amplitude / rms)


def init_two_stream(grid: Grid, spec: RunSpec) -> FieldState:
    """One stream at rest and one flowing along ``x`` at ``spec.v0``, plus seed noise.

    Noise comes from ``numpy.random.Generator(PCG64(noise_seed))``; in dual
    mode each envelope gets its own draw, rest stream first.
    """
    m = check_commensurate(spec.v0, grid.lx)
    amp = math.sqrt(spec.rho0)
    X, _ = grid.mesh()
    rest = np.full(grid.shape, amp, dtype=complex)
    # exact lattice phase avoids roundoff in v0
    stream = amp * np.exp(2j * np.pi * m * (X / grid.lx))

    rng = np.random.Generator(np.random.PCG64(spec.noise_seed))
    scale = spec.noise_amplitude * amp
    if spec.mode == DUAL:
        rest = rest + seeded_noise(grid, scale, rng)
        stream = stream + seeded_noise(grid, scale, rng)
        psi = np.stack([rest, stream])
    else:
        psi = (rest + stream + seeded_noise(grid, scale, rng))[None]
    return FieldState(psi, 0.0, grid)


def init_seeded_mode(grid: Grid, rho0: float = 1.0, q=(0.0, 0.0), epsilon: float = 1e-3) -> FieldState:
    """Single fluid at rest with a standing density wave ``~ 2 epsilon cos(q . r)``."""
    grid.mode_index(q)
    X, Y = grid.mesh()
    psi = math.sqrt(rho0) * (1 + epsilon * np.cos(q[0] * X + q[1] * Y))
    return FieldState(psi.astype(complex), 0.0, grid)


class Propagator:
    """Precomputed Strang factors for fixed ``(grid, dz, g, potential)``."""

    def __init__(self, grid: Grid, g: float, potential=None, dz: Optional[float] = None,
                 dealias: bool = False, workers: Optional[int] = None):
        self.grid = grid
        self.g = g
        self.dz = grid.dz if dz is None else dz
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        if self.potential is not None and self.potential.shape != grid.shape:
            raise ValueError("potential shape does not match grid")
        self.workers = fft_workers() if workers is None else workers
        half = np.exp(-0.25j * grid.k2 * self.dz)
        if dealias:
            half = half * grid.spectral_mask(DEALIAS_FRACTION)
        self.half_kinetic = half
        self.full_kinetic = half * half

    def kinetic(self, psi: np.ndarray, factor: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(psi, axes=(-2, -1), workers=self.workers)
        spec *= factor
        return sfft.ifft2(spec, axes=(-2, -1), workers=self.workers)

    def local(self, psi: np.ndarray) -> np.ndarray:
        rho = np.sum(psi.real**2 + psi.imag**2, axis=0)
        phase = self.g * rho
        if self.potential is not None:
            phase = phase + self.potential
        return psi * np.exp(-1j * self.dz * phase)

    def step(self, state: FieldState) -> FieldState:
        psi = self.kinetic(state.psi, self.half_kinetic)
        psi = self.local(psi)
        psi = self.kinetic(psi, self.half_kinetic)
        z = state.z + self.dz
        out = FieldState(psi, z, state.grid)
        if not np.isfinite(psi).all():
            raise NumericalInstability(z, out)
        return out


def step(state: FieldState, g: float, potential=None, dz: Optional[float] = None,
         dealias: bool = False) -> FieldState:
    """Advance one Strang step (uses ``state.grid.dz`` unless ``dz`` given)."""
    return Propagator(state.grid, g, potential, dz, dealias).step(state)


def n_steps_for(z_span: float, dz: float) -> int:
    return int(math.ceil(z_span / dz - 1e-9)) if z_span > 0 else 0


def iter_propagate(state: FieldState, spec: RunSpec,
                   callback: Optional[Callable[[FieldState], None]] = None) -> Iterator[FieldState]:
    """Yield snapshots from ``state.z`` to ``state.z + spec.z_end``.

    The first snapshot is the initial state.  Adjacent half kinetic steps are
    fused between snapshots; the result equals repeated :func:`step` calls up
    to roundoff.  ``dz`` is shrunk, if needed, so that an integer number of
    steps lands exactly on ``z_end``.
    """
    grid = state.grid
    n = n_steps_for(spec.z_end, grid.dz)
    dz = spec.z_end / n if n else grid.dz
    prop = Propagator(grid, spec.g, spec.potential, dz, spec.dealias)
    z0 = state.z

    first = state.copy()
    if callback:
        callback(first)
    yield first
    if n == 0:
        return

    psi = prop.kinetic(state.psi, prop.half_kinetic)
    for i in range(1, n + 1):
        psi = prop.local(psi)
        z = z0 + i * dz
        emit = i % spec.snapshot_every == 0 or i == n
        if emit:
            psi = prop.kinetic(psi, prop.half_kinetic)
            if not np.isfinite(psi).all():
                raise NumericalInstability(z, FieldState(psi, z, grid))
            snap = FieldState(psi.copy(), z, grid)
            if callback:
                callback(snap)
            yield snap
            if i < n:
                psi = prop.kinetic(psi, prop.half_kinetic)
        else:
            psi = prop.kinetic(psi, prop.full_kinetic)
            if i % 64 == 0 and not np.isfinite(psi).all():
                raise NumericalInstability(z, FieldState(psi, z, grid))


def propagate(state: FieldState, spec: RunSpec,
              callback: Optional[Callable[[FieldState], None]] = None) -> List[FieldState]:
    """List of snapshots; see :func:`iter_propagate`."""
    return list(iter_propagate(state, spec, callback))


# -- conserved quantities ---------------------------------------------------

def _spectra(state: FieldState):
    return np.fft.fft2(state.psi, axes=(-2, -1))


def norm(state: FieldState) -> float:
    return float(np.sum(state.density) * state.grid.dA)


def momentum(state: FieldState) -> np.ndarray:
    """``sum Im(psi* grad psi) dA`` with spectral gradients."""
    grid = state.grid
    power = np.sum(np.abs(_spectra(state)) ** 2, axis=0)
    scale = grid.dA / (grid.nx * grid.ny)
    px = np.sum(grid.kx_deriv[:, None] * power) * scale
    py = np.sum(grid.ky_deriv[None, :] * power) * scale
    return np.array([px, py])


def hamiltonian(state: FieldState, g: float, potential=None) -> float:
    """``sum [1/2 |grad psi|^2 + V0 rho + g/2 rho^2] dA``."""
    grid = state.grid
    power = np.sum(np.abs(_spectra(state)) ** 2, axis=0)
    kinetic = 0.5 * np.sum(grid.k2 * power) * grid.dA / (grid.nx * grid.ny)
    rho = state.density
    energy = kinetic + 0.5 * g * np.sum(rho * rho) * grid.dA
    if potential is not None:
        energy += np.sum(np.asarray(potential) * rho) * grid.dA
    return float(energy)
