"""Linear stability of two interpenetrating photon fluids.

Units: frequencies are ``W = Omega xi^2`` and wavenumbers ``Q = q xi`` with
``xi = 1 / c_s`` and ``c_s = sqrt(2 rho0 g)`` (the two-fluid sound speed).
The Mach number is ``beta = v0 / c_s``.  Bogoliubov helpers for a single
fluid use their own normalization ``c_s' = 1``.

Two independent routes to the four mode frequencies exist:

``roots_closed_form``
    the explicit nested-radical solution
    ``W = (Q/2) [beta +- sqrt(2 + beta^2 + Q^2 +- 2 sqrt(1 + 2 beta^2 + beta^2 Q^2))]``.

``roots_quartic``
    the dispersion relation

        1 - (Q^2/2) [1/(W^2 - Q^4/4) + 1/((W - beta Q)^2 - Q^4/4)] = 0

    with denominators cleared.  Put ``u = W - s``, ``s = beta Q / 2``,
    ``m = Q^4/4``, ``K = Q^2``.  The two denominators become
    ``A = (u + s)^2 - m`` and ``B = (u - s)^2 - m`` and the relation reads
    ``A B = (K/2)(A + B)``.  Expanding,
    ``A + B = 2 (u^2 + s^2 - m)`` and
    ``A B = (u^2 - s^2)^2 - 2 m (u^2 + s^2) + m^2``, hence the even quartic

        u^4 - (2 m + 2 s^2 + K) u^2 + (s^2 - m)(s^2 - m - K) = 0.

    It is solved numerically (companion-matrix eigenvalues, Newton-polished)
    without reference to the closed form.

Clearing denominators can introduce roots sitting exactly on a pole
(``A = 0`` or ``B = 0``); at ``beta = 0`` the free-particle pair
``W = +-Q^2/2`` is such a case.  Those roots are returned and flagged.

Non-collinear flow enters only through ``v0 . q``, handled as
``beta_eff = beta * alignment``.  This generalization goes beyond the
collinear geometry usually considered.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

SUBSONIC = "subsonic"
SUPERSONIC = "supersonic"
MARGINAL = "marginal"

BRANCHES = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))  # (outer, inner) signs
POLE_TOL = 1e-6
IMAG_CLAMP = 1e-12


@dataclass(frozen=True)
class ModeQuery:
    Q: float
    beta: float
    alignment: float = 1.0

    def __post_init__(self):
        if not self.Q >= 0:
            raise ValueError(f"Q must be >= 0, got {self.Q}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not -1 <= self.alignment <= 1:
            raise ValueError(f"alignment must lie in [-1, 1], got {self.alignment}")

    @property
    def beta_eff(self) -> float:
        return self.beta * self.alignment


@dataclass(frozen=True)
class RootSet:
    """Four mode frequencies ``W = Omega xi^2`` at one ``(Q, beta)``."""

    Q: float
    beta: float
    roots: np.ndarray
    branch_labels: Tuple[Tuple[int, int], ...] = BRANCHES
    at_pole: np.ndarray = field(default_factory=lambda: np.zeros(4, bool))

    @property
    def unstable_index(self) -> int:
        return int(np.argmax(self.roots.imag))

    @property
    def unstable_mode(self) -> complex:
        """Root with the largest imaginary part."""
        return complex(self.roots[self.unstable_index])

    @property
    def growth(self) -> float:
        return max(0.0, float(self.roots.imag.max()))

    @property
    def is_unstable(self) -> bool:
        return self.growth > 0


@dataclass(frozen=True)
class StabilityBand:
    q_lo: float
    q_hi: float
    regime: str

    @property
    def empty(self) -> bool:
        return not self.q_hi > self.q_lo

    def contains(self, Q):
        Q = np.asarray(Q)
        return (Q > self.q_lo) & (Q < self.q_hi)


# -- single fluid -----------------------------------------------------------

def bogoliubov(q, sign: int = +1):
    """Bogoliubov frequency ``+-sqrt(q^2 + q^4/4)`` (units ``c_s' = 1``)."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("wavenumber must be >= 0")
    out = np.sign(sign) * np.sqrt(q * q + 0.25 * q**4)
    return out if out.ndim else float(out)


def doppler_bogoliubov(q, v0: float, alignment: float = 1.0):
    """Doppler-shifted pair ``v0 q alignment +- Omega_B(q)``."""
    shift = v0 * np.asarray(q, dtype=float) * alignment
    omega = bogoliubov(q)
    return shift + omega, shift - omega


# -- two fluids ---------------------------------------------------------------

def _as_arrays(Q, beta):
    Q = np.asarray(Q, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(Q < 0):
        raise ValueError("Q must be >= 0")
    return np.broadcast_arrays(Q, beta)


def _radicands(Q, beta):
    """Inner radicands (plus, minus) of the closed form, as real numbers.

    The minus radicand is rewritten as
    ``(Q^2 - beta^2)(Q^2 - beta^2 + 4) / (2 + beta^2 + Q^2 + 2 sqrt(...))``,
    which has the exact sign (no cancellation at the band edges).
    """
    b2 = beta * beta
    q2 = Q * Q
    root = np.sqrt(1 + 2 * b2 + b2 * q2)
    base = 2 + b2 + q2
    plus = base + 2 * root
    minus = (Q - beta) * (Q + beta) * (q2 - b2 + 4) / plus
    return plus, minus


def _signed_sqrt(r):
    """Principal sqrt of a real radicand, purely imaginary when negative."""
    mag = np.sqrt(np.abs(r))
    return np.where(r >= 0, mag + 0j, 1j * mag)


def roots_closed_form(Q, beta):
    """Closed-form roots, shape ``broadcast(Q, beta).shape + (4,)``.

    Order follows :data:`BRANCHES`.  ``beta`` may be negative (reversed or
    anti-aligned flow).
    """
    Q, beta = _as_arrays(Q, beta)
    plus, minus = _radicands(Q, beta)
    inner = {+1: _signed_sqrt(plus), -1: _signed_sqrt(minus)}
    out = np.empty(Q.shape + (4,), dtype=complex)
    for i, (outer, sign) in enumerate(BRANCHES):
        out[..., i] = 0.5 * Q * (beta + outer * inner[sign])
    return out


def _quartic_coefficients(Q, beta):
    m = 0.25 * Q**4
    s2 = 0.25 * (beta * Q) ** 2
    K = Q * Q
    a = -(2 * m + 2 * s2 + K)
    b = (s2 - m) * (s2 - m - K)
    return a, b


def roots_quartic(Q, beta, polish: int = 3):
    """Oracle roots from the cleared quartic, ordered like :data:`BRANCHES`.

    Eigenvalues of the companion matrix of ``u^4 + a u^2 + b`` followed by
    ``polish`` Newton iterations, then shifted back by ``beta Q / 2``.
    """
    Q, beta = _as_arrays(Q, beta)
    a, b = _quartic_coefficients(Q, beta)
    shape = Q.shape
    a = a.reshape(-1)
    b = b.reshape(-1)
    n = a.size

    companion = np.zeros((n, 4, 4))
    companion[:, 1, 0] = 1.0
    companion[:, 2, 1] = 1.0
    companion[:, 3, 2] = 1.0
    companion[:, 2, 3] = -a
    companion[:, 0, 3] = -b
    u = np.linalg.eigvals(companion).astype(complex)

    a_ = a[:, None]
    b_ = b[:, None]
    for _ in range(polish):
        u2 = u * u
        p = u2 * u2 + a_ * u2 + b_
        dp = 4 * u2 * u + 2 * a_ * u
        ok = np.abs(dp) > 1e-300
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        u = u - step

    u = _clamp(u)
    u = _order_like_branches(u)
    shift = (0.5 * beta * Q).reshape(-1, 1)
    return (u + shift).reshape(shape + (4,))


def _clamp(z):
    re = np.where(np.abs(z.real) < IMAG_CLAMP * np.maximum(1, np.abs(z)), 0.0, z.real)
    im = np.where(np.abs(z.imag) < IMAG_CLAMP * np.maximum(1, np.abs(z)), 0.0, z.imag)
    return re + 1j * im


def _order_like_branches(u):
    """Assign each oracle root to an (outer, inner) label.

    ``u^2`` is always real for this quartic (its discriminant in ``u^2`` is
    ``Q^4 (1 + 2 beta^2 + beta^2 Q^2) >= 0``), so the inner sign picks the
    larger ``u^2`` and the outer sign is the sign of the real part, or of the
    imaginary part for an imaginary ``u``.
    """
    w = (u * u).real
    order = np.argsort(-w, axis=1, kind="stable")  # two largest u^2 -> inner +
    u = np.take_along_axis(u, order, axis=1)
    out = np.empty_like(u)
    for pair, (ip, im) in enumerate(((0, 1), (2, 3))):
        x, y = u[:, ip], u[:, im]
        key_x = np.where(x.real != 0, x.real, x.imag)
        key_y = np.where(y.real != 0, y.real, y.imag)
        swap = key_x < key_y
        hi = np.where(swap, y, x)
        lo = np.where(swap, x, y)
        # BRANCHES order: (+,+), (+,-), (-,+), (-,-)
        if pair == 0:
            out[:, 0], out[:, 2] = hi, lo
        else:
            out[:, 1], out[:, 3] = hi, lo
    return out


def residual(Q, beta, W):
    """Left-hand side of the two-fluid dispersion relation at frequency ``W``."""
    Q = np.asarray(Q, dtype=float)
    beta = np.asarray(beta, dtype=float)
    W = np.asarray(W)
    m = 0.25 * Q**4
    A = W * W - m
    B = (W - beta * Q) ** 2 - m
    return 1 - 0.5 * Q * Q * (1 / A + 1 / B)


def pole_distance(Q, beta, W):
    """``min(|W^2 - Q^4/4|, |(W - beta Q)^2 - Q^4/4|)``."""
    m = 0.25 * np.asarray(Q, dtype=float) ** 4
    A = np.abs(W * W - m)
    B = np.abs((W - np.asarray(beta) * Q) ** 2 - m)
    return np.minimum(A, B)


def _rootset(query: ModeQuery, roots: np.ndarray) -> RootSet:
    beta = query.beta_eff
    at_pole = pole_distance(query.Q, beta, roots) < POLE_TOL
    return RootSet(query.Q, query.beta, roots, BRANCHES, at_pole)


def two_stream_roots(Q: float, beta: float, alignment: float = 1.0) -> RootSet:
    """All four mode frequencies from the closed form."""
    query = ModeQuery(Q, beta, alignment)
    return _rootset(query, roots_closed_form(query.Q, query.beta_eff))


def two_stream_roots_oracle(Q: float, beta: float, alignment: float = 1.0) -> RootSet:
    """Same contract as :func:`two_stream_roots`, via the quartic oracle."""
    query = ModeQuery(Q, beta, alignment)
    return _rootset(query, roots_quartic(query.Q, query.beta_eff))


def growth_rate(Q, beta, alignment: float = 1.0):
    """Largest imaginary part of the mode frequencies (``Omega xi^2`` units).

    Vectorized.  Exactly zero outside the open unstable band.
    """
    if not -1 <= alignment <= 1:
        raise ValueError("alignment must lie in [-1, 1]")
    Q, beta = _as_arrays(Q, beta)
    if np.any(beta < 0):
        raise ValueError("beta must be >= 0")
    beta = beta * alignment
    _, minus = _radicands(Q, beta)
    gamma = np.where(minus < 0, 0.5 * Q * np.sqrt(np.abs(minus)), 0.0)
    return gamma if gamma.ndim else float(gamma)


def unstable_band(beta: float) -> StabilityBand:
    """Open interval of unstable ``Q`` for Mach number ``beta``."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta < 2:
        regime = SUBSONIC
        lo = 0.0
    else:
        regime = MARGINAL if beta == 2 else SUPERSONIC
        lo = math.sqrt(beta * beta - 4)
    return StabilityBand(lo, float(beta), regime)


def resonance_wavenumber(beta: float) -> Optional[float]:
    """``Q`` where the stream line ``beta Q / 2`` meets the Bogoliubov branch.

    Bogoliubov here uses the two-fluid sound speed, ``W_B^2 = Q^2 + Q^4/4``.
    Solved by bracketing, so it independently checks the supersonic lower
    band edge ``sqrt(beta^2 - 4)``.  ``None`` for ``beta <= 2``.
    """
    if beta <= 2:
        return None

    def mismatch(Q):
        return 0.5 * beta * Q - math.sqrt(Q * Q + 0.25 * Q**4)

    # mismatch > 0 for small Q when beta > 2, < 0 at Q = beta
    return optimize.brentq(mismatch, 1e-12, beta, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def max_growth(beta: float, alignment: float = 1.0) -> Tuple[Optional[float], float]:
    """Fastest-growing ``Q`` and its growth rate; ``(None, 0.0)`` if stable."""
    beta_eff = abs(beta * alignment)
    band = unstable_band(beta_eff)
    if band.empty:
        return None, 0.0
    res = optimize.minimize_scalar(
        lambda Q: -growth_rate(Q, beta_eff),
        bounds=(band.q_lo, band.q_hi),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, band.q_hi)},
    )
    return float(res.x), float(-res.fun)


def stability_map(beta_grid, Q_grid) -> np.ndarray:
    """Boolean raster ``[i_beta, i_Q]``, True where some mode grows."""
    beta_grid = np.asarray(beta_grid, dtype=float)
    Q_grid = np.asarray(Q_grid, dtype=float)
    for name, grid in (("beta_grid", beta_grid), ("Q_grid", Q_grid)):
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError(f"{name} must be a strictly increasing 1-D array")
    B, Q = np.meshgrid(beta_grid, Q_grid, indexing="ij")
    return growth_rate(Q, B) > 0


def dispersion_curves(beta: float, Q) -> dict:
    """Columns for one curve set: Q, beta, roots, growth and the unstable branch."""
    Q = np.asarray(Q, dtype=float)
    roots = roots_closed_form(Q, beta)
    unstable = roots[np.arange(Q.size), np.argmax(roots.imag, axis=1)]
    return {
        "Q": Q,
        "beta": np.full_like(Q, beta),
        "roots": roots,
        "growth": growth_rate(Q, beta),
        "unstable": unstable,
        "bogoliubov": bogoliubov(Q),
        "stream": 0.5 * beta * Q,
    }
