"""Model parameters, Bloch-ball coordinate charts, and product coherent states.

Conventions used throughout the package (see docs/MATH.md):

* sigma_z = diag(1, -1), excited state at z = +1,
* sigma_plus = sigma_x + i sigma_y and sigma_minus = sigma_x - i sigma_y
  (operator norm 2, twice the unit raising/lowering operators),
* collective spin J_k = (1/2) sum_l sigma_k^(l) for k in {x, y, z} and
  J_pm = J_x +- i J_y.

All rates are expressed in units of an arbitrary reference rate; times are in
units of its inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Tolerance for |r| <= 1; vectors within it are renormalized onto the sphere.
BALL_TOL = 1e-9

# Dense 2^N storage guard for full tensor-product states.
MAX_DENSE_SITES = 12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = SIGMA_X + 1.0j * SIGMA_Y
SIGMA_MINUS = SIGMA_X - 1.0j * SIGMA_Y
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class SpindriftError(Exception):
    """Base class for package errors."""


class InvalidStateError(SpindriftError):
    """A Bloch vector or density matrix violates its invariants."""


class ChartSingularityError(SpindriftError):
    """Spherical-chart evaluation requested at a pole or the origin."""


@dataclass(frozen=True)
class ModelParams:
    """Rates and fields of the driven dissipative ensemble.

    B is the (Bx, By, Bz) drive field, kappa_* the collective rates of the
    J_+, J_- and J_z channels (entering as 2*kappa/N), gamma_* the identical
    per-site rates of the sigma_+, sigma_- and sigma_z channels (entering as
    gamma/2 per site), and N the number of two-level systems.
    """

    B: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kappa_plus: float = 0.0
    kappa_minus: float = 0.0
    kappa_z: float = 0.0
    gamma_plus: float = 0.0
    gamma_minus: float = 0.0
    gamma_z: float = 0.0
    N: int = 1

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(float(b) for b in self.B))
        if len(self.B) != 3 or not all(math.isfinite(b) for b in self.B):
            raise ValueError(f"B must be a finite 3-vector, got {self.B!r}")
        for name in ("kappa_plus", "kappa_minus", "kappa_z",
                     "gamma_plus", "gamma_minus", "gamma_z"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def b_vector(self) -> np.ndarray:
        return np.asarray(self.B, dtype=float)

    @property
    def local_rates_zero(self) -> bool:
        return self.gamma_plus == 0.0 and self.gamma_minus == 0.0 and self.gamma_z == 0.0

    @property
    def collective_rates_zero(self) -> bool:
        return self.kappa_plus == 0.0 and self.kappa_minus == 0.0 and self.kappa_z == 0.0

    def max_rate(self) -> float:
        """Largest rate/field magnitude, used for default step sizes."""
        return max(
            abs(self.B[0]), abs(self.B[1]), abs(self.B[2]),
            self.kappa_plus, self.kappa_minus, self.kappa_z,
            self.gamma_plus, self.gamma_minus, self.gamma_z,
        )


@dataclass(frozen=True)
class BlochVector:
    """Cartesian coherent-state label; valid states have x^2+y^2+z^2 <= 1."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    @staticmethod
    def from_array(v) -> "BlochVector":
        v = np.asarray(v, dtype=float)
        return BlochVector(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class SphericalPoint:
    """Spherical chart (eta, phi, r) with eta = cos(theta) = z/r.

    ``degenerate`` flags points produced by the Cartesian->spherical
    conversion at chart singularities (origin or poles), where phi is set
    to 0 by convention.
    """

    eta: float
    phi: float
    r: float
    degenerate: bool = False

    def __post_init__(self):
        if not (-1.0 - 1e-12 <= self.eta <= 1.0 + 1e-12):
            raise ValueError(f"eta must lie in [-1, 1], got {self.eta!r}")
        if not (0.0 <= self.r <= 1.0 + BALL_TOL):
            raise ValueError(f"r must lie in [0, 1], got {self.r!r}")
        object.__setattr__(self, "eta", float(min(1.0, max(-1.0, self.eta))))
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))
        object.__setattr__(self, "r", float(min(1.0, self.r)))

    def as_array(self) -> np.ndarray:
        return np.array([self.eta, self.phi, self.r], dtype=float)


def to_bloch(p: SphericalPoint) -> BlochVector:
    """Map (eta, phi, r) to Cartesian (x, y, z)."""
    s = math.sqrt(max(0.0, 1.0 - p.eta * p.eta))
    return BlochVector(p.r * s * math.cos(p.phi), p.r * s * math.sin(p.phi), p.r * p.eta)


def to_spherical(v: BlochVector) -> SphericalPoint:
    """Map Cartesian (x, y, z) to (eta, phi, r); phi = 0 at chart degeneracies."""
    r = v.norm
    if r <= 1e-15:
        return SphericalPoint(0.0, 0.0, 0.0, degenerate=True)
    eta = min(1.0, max(-1.0, v.z / r))
    transverse = math.hypot(v.x, v.y)
    if transverse <= 1e-15:
        return SphericalPoint(eta, 0.0, r, degenerate=True)
    return SphericalPoint(eta, math.atan2(v.y, v.x) % (2.0 * math.pi), r)


def convert_coords(point):
    """Convert between the Cartesian and spherical charts (either direction)."""
    if isinstance(point, BlochVector):
        return to_spherical(point)
    if isinstance(point, SphericalPoint):
        return to_bloch(point)
    raise TypeError(f"expected BlochVector or SphericalPoint, got {type(point)!r}")


def _checked_bloch(r, renormalize: bool = True) -> np.ndarray:
    v = np.asarray(r.as_array() if isinstance(r, BlochVector) else r, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"Bloch vector must have shape (3,), got {v.shape}")
    norm = float(np.linalg.norm(v))
    if norm > 1.0 + BALL_TOL:
        raise InvalidStateError(f"|r| = {norm} exceeds 1 beyond tolerance {BALL_TOL}")
    if renormalize and norm > 1.0:
        v = v / norm
    return v


def single_site_state(r) -> np.ndarray:
    """One-qubit state (1 + sigma . r) / 2."""
    v = _checked_bloch(r)
    return 0.5 * (IDENTITY_2 + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)


def coherent_state(r, N: int) -> np.ndarray:
    """N-fold tensor power of (1 + sigma . r)/2, as a dense 2^N x 2^N matrix.

    Pure exactly when |r| = 1; positive for every |r| <= 1.
    """
    if not 1 <= N <= MAX_DENSE_SITES:
        raise ValueError(f"N must lie in [1, {MAX_DENSE_SITES}] for dense storage, got {N}")
    mu = single_site_state(r)
    out = mu
    for _ in range(N - 1):
        out = np.kron(out, mu)
    return out


def coherent_moments(r, N: int):
    """First and second moments of the collective spin in a coherent state.

    Returns (first, second) with first[k] = <J_k> = (N/2) r_k and
    second[k, l] = <J_k J_l> = (N(N-1) r_k r_l + N(delta_kl + i eps_klm r_m))/4.
    The closed form is validated against brute-force traces in the test suite.
    """
    v = _checked_bloch(r)
    first = 0.5 * N * v
    eps_term = np.zeros((3, 3), dtype=complex)
    eps_term[0, 1] = 1.0j * v[2]
    eps_term[1, 0] = -1.0j * v[2]
    eps_term[1, 2] = 1.0j * v[0]
    eps_term[2, 1] = -1.0j * v[0]
    eps_term[2, 0] = 1.0j * v[1]
    eps_term[0, 2] = -1.0j * v[1]
    second = 0.25 * (N * (N - 1) * np.outer(v, v) + N * (np.eye(3) + eps_term))
    return first, second


@lru_cache(maxsize=64)
def site_operators(N: int):
    """Per-site Pauli operators embedded in the 2^N-dimensional space.

    Returns a tuple ops[site][k] for k in (x, y, z), each 2^N x 2^N.
    """
    if not 1 <= N <= MAX_DENSE_SITES:
        raise ValueError(f"N must lie in [1, {MAX_DENSE_SITES}], got {N}")
    ops = []
    for site in range(N):
        per_site = []
        for sigma in PAULI:
            mat = np.array([[1.0 + 0.0j]])
            for pos in range(N):
                mat = np.kron(mat, sigma if pos == site else IDENTITY_2)
            per_site.append(mat)
        ops.append(tuple(per_site))
    return tuple(ops)


@lru_cache(maxsize=64)
def total_spin_operators(N: int):
    """Collective J_x, J_y, J_z = (1/2) sum_l sigma_k^(l) in the full 2^N space."""
    ops = site_operators(N)
    dim = 2 ** N
    totals = []
    for k in range(3):
        acc = np.zeros((dim, dim), dtype=complex)
        for site in range(N):
            acc += ops[site][k]
        totals.append(0.5 * acc)
    return tuple(totals)


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-9) -> None:
    """Raise InvalidStateError unless rho is Hermitian, unit-trace, positive."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.linalg.norm(rho - rho.conj().T)
    if herm > tol:
        raise InvalidStateError(f"not Hermitian: ||rho - rho^dag|| = {herm:.3e}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > tol:
        raise InvalidStateError(f"trace = {tr} differs from 1 beyond {tol}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if min_eig < -tol:
        raise InvalidStateError(f"minimum eigenvalue {min_eig:.3e} < -{tol}")
