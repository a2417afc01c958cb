"""Drift and diffusion coefficients of the phase-space evolution equation.

The generator of the master equation acts on a product coherent state
alpha(r) as a second-order differential operator in the state label r:

    L[alpha(r)] = (a_i(r) d_i + (1/2N) D_ij(r) d_i d_j) alpha(r).

Single-site terms (the drive and the local channels) contribute pure drift.
Collective channels contribute drift plus diffusion through the two-site
cross terms; those are assembled here from the left/right multiplication
identities

    sigma_k (1 + sigma.r) = [r_k + (delta_ki - i eps_kij r_j - r_k r_i) d_i] (1 + sigma.r),
    (1 + sigma.r) sigma_k = [r_k + (delta_ki + i eps_kij r_j - r_k r_i) d_i] (1 + sigma.r).

Everything exported from this module is pinned by ``verify_coefficients``,
which checks the expansion above against a brute-force evaluation of the
generator on dense 2^N matrices. The closed forms in docs/MATH.md were
derived the same way and are cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .model import (
    ChartSingularityError,
    ModelParams,
    SphericalPoint,
    SpindriftError,
    _checked_bloch,
    coherent_state,
    site_operators,
    total_spin_operators,
)

EPS_POLE = 1e-9
EPS_RADIUS = 1e-9
PSD_TOL = -1e-10

# Channel vectors c with jump operator J_c = c . J (collective) - the same
# vectors define sigma_c = c . sigma for the local channels.
_CHANNEL_PLUS = np.array([1.0, 1.0j, 0.0])
_CHANNEL_MINUS = np.array([1.0, -1.0j, 0.0])
_CHANNEL_Z = np.array([0.0, 0.0, 1.0])


class NotPositiveSemidefiniteError(SpindriftError):
    """A diffusion matrix has an eigenvalue below the PSD tolerance."""


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift vector and symmetric diffusion matrix in a stated chart."""

    chart: str
    a: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(3))
        D = np.asarray(self.D, dtype=float).reshape(3, 3)
        object.__setattr__(self, "D", 0.5 * (D + D.T))


@dataclass(frozen=True)
class SphereEigen:
    """Nonzero eigenvalues of the diffusion matrix on the unit sphere."""

    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class PositivityReport:
    condition_holds: bool
    min_eigenvalue_found: float
    argmin: tuple[float, float, float]  # (eta, phi, r)
    resolution: int
    region: str


def _channels(params: ModelParams):
    return (
        (params.kappa_plus, _CHANNEL_PLUS),
        (params.kappa_minus, _CHANNEL_MINUS),
        (params.kappa_z, _CHANNEL_Z),
    )


# ---------------------------------------------------------------------------
# Cartesian coefficients
# ---------------------------------------------------------------------------

def drift_cartesian(params: ModelParams, points: np.ndarray) -> np.ndarray:
    """Exact drift a(r) at finite N, vectorized over points (..., 3).

    The mean-field module uses the same expression with the 1/N terms
    dropped; here they are kept so the sampled trajectories carry the full
    subleading structure.
    """
    pts = np.asarray(points, dtype=float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    bx, by, bz = params.B
    n = params.N
    kp, km, kz = params.kappa_plus, params.kappa_minus, params.kappa_z
    gp, gm, gz = params.gamma_plus, params.gamma_minus, params.gamma_z

    cross = km - kp
    lead = (n - 1) / n
    ksum = (kp + km + kz) / n
    gsum = gp + gm + gz

    ax = by * z - bz * y + cross * lead * x * z - ksum * x - gsum * x
    ay = bz * x - bx * z + cross * lead * y * z - ksum * y - gsum * y
    az = (bx * y - by * x
          - cross * lead * (x * x + y * y)
          + (2.0 * kp * (1.0 - z) - 2.0 * km * (1.0 + z)) / n
          - 2.0 * gm * (z + 1.0) - 2.0 * gp * (z - 1.0))
    return np.stack([ax, ay, az], axis=-1)


def _eps_matrix(pts: np.ndarray) -> np.ndarray:
    """E_ik = eps_ikj r_j, vectorized over points (..., 3)."""
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    zero = np.zeros_like(x)
    return np.stack([
        np.stack([zero, z, -y], axis=-1),
        np.stack([-z, zero, x], axis=-1),
        np.stack([y, -x, zero], axis=-1),
    ], axis=-2)


def diffusion_from_multiplication_identities(params: ModelParams,
                                             points: np.ndarray) -> np.ndarray:
    """Diffusion matrix assembled directly from the two-site cross terms of
    the collective dissipators, via the left/right multiplication matrices.

    This is the defining construction; ``diffusion_cartesian`` is its
    expanded polynomial form and is pinned to it in the test suite.
    """
    pts = np.asarray(points, dtype=float)
    eye = np.broadcast_to(np.eye(3), pts.shape[:-1] + (3, 3))
    eps = _eps_matrix(pts)
    rr = pts[..., :, None] * pts[..., None, :]
    left = eye - 1.0j * eps - rr    # row i: sigma_i acting from the left
    right = eye + 1.0j * eps - rr   # row i: sigma_i acting from the right

    D = np.zeros(pts.shape[:-1] + (3, 3), dtype=complex)
    for rate, c in _channels(params):
        if rate == 0.0:
            continue
        cl = np.einsum("i,...ik->...k", c, left)
        cr = np.einsum("i,...ik->...k", c, right)
        cbl = np.einsum("i,...ik->...k", c.conj(), left)
        cbr = np.einsum("i,...ik->...k", c.conj(), right)
        cross = (cl[..., :, None] * cbr[..., None, :]
                 - 0.5 * cl[..., :, None] * cbl[..., None, :]
                 - 0.5 * cr[..., :, None] * cbr[..., None, :])
        D = D + rate * 0.5 * (cross + np.swapaxes(cross, -1, -2))
    if np.abs(D.imag).max(initial=0.0) > 1e-12:
        raise SpindriftError("diffusion matrix developed an imaginary part")
    return D.real


def diffusion_cartesian(params: ModelParams, points: np.ndarray) -> np.ndarray:
    """Diffusion matrix D(r), vectorized over points (..., 3).

    Expanded polynomial form of ``diffusion_from_multiplication_identities``.
    Only the collective channels contribute; D carries no N dependence.
    """
    pts = np.asarray(points, dtype=float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    kp, km, kz = params.kappa_plus, params.kappa_minus, params.kappa_z
    transverse = x * x + y * y
    ladder = km * (transverse - (z + 1.0) ** 2) - kp * (transverse - (z - 1.0) ** 2)
    D = np.zeros(pts.shape[:-1] + (3, 3))
    D[..., 0, 0] = 2.0 * (km * z * (-x * x + z + 1.0)
                          + kp * z * (x * x + z - 1.0) + kz * y * y)
    D[..., 1, 1] = 2.0 * (kz * x * x + km * z * (-y * y + z + 1.0)
                          + kp * z * (y * y + z - 1.0))
    D[..., 2, 2] = 2.0 * transverse * ((1.0 + z) * km + (1.0 - z) * kp)
    D[..., 0, 1] = D[..., 1, 0] = -2.0 * x * y * (kz + z * (km - kp))
    D[..., 0, 2] = D[..., 2, 0] = x * ladder
    D[..., 1, 2] = D[..., 2, 1] = y * ladder
    return D


def drift_diffusion_cartesian(params: ModelParams, r) -> DriftDiffusion:
    """Drift and diffusion at one Bloch vector, in the Cartesian chart."""
    v = _checked_bloch(r)
    return DriftDiffusion("cartesian", drift_cartesian(params, v),
                          diffusion_cartesian(params, v))


# ---------------------------------------------------------------------------
# Spherical chart via the Ito change of variables
# ---------------------------------------------------------------------------

def _chart_derivatives(pts: np.ndarray):
    """Gradients and Hessians of (eta, phi, rho) at Cartesian points.

    Returns (J, H): J[..., b, i] = d u_b / d x_i with u = (eta, phi, rho),
    H[..., b, i, j] the corresponding Hessians.
    """
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    rho2 = x * x + y * y + z * z
    rho = np.sqrt(rho2)
    t2 = x * x + y * y
    rho3 = rho2 * rho
    rho5 = rho3 * rho2
    zero = np.zeros_like(x)

    grad_eta = np.stack([-z * x / rho3, -z * y / rho3, (rho2 - z * z) / rho3], axis=-1)
    grad_phi = np.stack([-y / t2, x / t2, zero], axis=-1)
    grad_rho = pts / rho[..., None]
    J = np.stack([grad_eta, grad_phi, grad_rho], axis=-2)

    eye = np.broadcast_to(np.eye(3), pts.shape[:-1] + (3, 3))
    rr = pts[..., :, None] * pts[..., None, :]
    H_rho = (eye - rr / rho2[..., None, None]) / rho[..., None, None]

    t4 = t2 * t2
    H_phi = np.zeros(pts.shape[:-1] + (3, 3))
    H_phi[..., 0, 0] = 2.0 * x * y / t4
    H_phi[..., 1, 1] = -2.0 * x * y / t4
    H_phi[..., 0, 1] = H_phi[..., 1, 0] = (y * y - x * x) / t4

    ez = np.zeros(pts.shape[:-1] + (3,))
    ez[..., 2] = 1.0
    H_eta = (3.0 * z[..., None, None] * rr / rho5[..., None, None]
             - (ez[..., :, None] * pts[..., None, :]
                + pts[..., :, None] * ez[..., None, :]
                + z[..., None, None] * eye) / rho3[..., None, None])

    H = np.stack([H_eta, H_phi, H_rho], axis=-3)
    return J, H


def spherical_coefficients(params: ModelParams, eta, phi, r):
    """Spherical-chart drift (n, 3) and diffusion (n, 3, 3), vectorized.

    Implements the Ito change of variables applied to the Cartesian
    coefficients: a_b = J a + (1/2N) D : Hess(u_b), D' = J D J^T.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    eta, phi, r = np.broadcast_arrays(eta, phi, r)
    s = np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
    pts = np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * eta], axis=-1)

    a_cart = drift_cartesian(params, pts)
    D_cart = diffusion_cartesian(params, pts)
    J, H = _chart_derivatives(pts)

    a_sph = (np.einsum("...bi,...i->...b", J, a_cart)
             + np.einsum("...ij,...bij->...b", D_cart, H) / (2.0 * params.N))
    D_sph = np.einsum("...bi,...ij,...cj->...bc", J, D_cart, J)
    return a_sph, D_sph


def drift_diffusion_spherical(params: ModelParams, p: SphericalPoint) -> DriftDiffusion:
    """Drift and diffusion in the (eta, phi, r) chart at one point.

    Raises ChartSingularityError within the pole/origin guard bands where
    the chart degenerates.
    """
    if 1.0 - abs(p.eta) < EPS_POLE:
        raise ChartSingularityError(f"|eta| = {abs(p.eta)} violates the pole guard")
    if p.r < EPS_RADIUS:
        raise ChartSingularityError(f"r = {p.r} violates the origin guard")
    a, D = spherical_coefficients(params, p.eta, p.phi, p.r)
    return DriftDiffusion("spherical", a[0], D[0])


# ---------------------------------------------------------------------------
# Positivity of the diffusion matrix
# ---------------------------------------------------------------------------

def sphere_eigenvalues(params: ModelParams, eta: float) -> SphereEigen:
    """Nonzero eigenvalues of D on the unit sphere at latitude eta.

    lambda1 = 2 (1 - eta^2)((1 + eta) kappa_minus + (1 - eta) kappa_plus) is
    never negative; lambda2 = 2 kappa_z + 2 eta kappa_minus / (1 - eta)
    - 2 eta kappa_plus / (1 + eta) can change sign.
    """
    eta = float(eta)
    if abs(eta) >= 1.0:
        raise ValueError(f"|eta| must be < 1, got {eta}")
    kp, km, kz = params.kappa_plus, params.kappa_minus, params.kappa_z
    lam1 = 2.0 * (1.0 - eta * eta) * ((1.0 + eta) * km + (1.0 - eta) * kp)
    lam2 = 2.0 * kz + 2.0 * eta * km / (1.0 - eta) - 2.0 * eta * kp / (1.0 + eta)
    return SphereEigen(lam1, lam2)


def fokker_planck_condition(params: ModelParams) -> bool:
    """True when the evolution equation is a proper Fokker-Planck equation.

    Two closed-form regimes are covered: with kappa_plus == kappa_minus the
    diffusion matrix is positive semidefinite on the whole ball for any
    local rates; with all local rates zero the dynamics stays on the unit
    sphere and positivity holds iff min_eta lambda2 >= 0, which evaluates to
    (sqrt(kappa_plus) - sqrt(kappa_minus))^2 <= 2 kappa_z.  The latter is
    implied by, and for a single nonzero kappa_pm equal to, the simpler
    sufficient bound kappa_plus + kappa_minus <= 2 kappa_z.  Other regimes
    have no positivity certificate and return False.
    """
    if params.kappa_plus == params.kappa_minus:
        return True
    if params.local_rates_zero:
        gap = (math.sqrt(params.kappa_plus) - math.sqrt(params.kappa_minus)) ** 2
        return gap <= 2.0 * params.kappa_z
    return False


def condition_summary(params: ModelParams) -> dict:
    """Inequality values backing fokker_planck_condition, for diagnostics."""
    gap = (math.sqrt(params.kappa_plus) - math.sqrt(params.kappa_minus)) ** 2
    return {
        "kappa_plus_plus_kappa_minus": params.kappa_plus + params.kappa_minus,
        "sqrt_rate_gap_squared": gap,
        "two_kappa_z": 2.0 * params.kappa_z,
        "rates_balanced": params.kappa_plus == params.kappa_minus,
        "local_rates_zero": params.local_rates_zero,
        "condition_holds": fokker_planck_condition(params),
    }


def _min_eig_cartesian(params: ModelParams, eta, phi, r) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    r = np.asarray(r, dtype=float)
    eta, phi, r = np.broadcast_arrays(eta, phi, r)
    s = np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
    pts = np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * eta], axis=-1)
    return np.linalg.eigvalsh(diffusion_cartesian(params, pts))[..., 0]


def scan_positivity(params: ModelParams, region: str = "sphere",
                    resolution: int = 1000) -> PositivityReport:
    """Grid scan of the minimum diffusion eigenvalue, refined locally.

    The scan works on the Cartesian D (a polynomial, regular everywhere);
    positive semidefiniteness is chart independent.  A bounded local
    minimization around the best grid point removes the discretization gap
    so the verdict can be compared against the closed-form classifier.
    """
    if region not in ("sphere", "ball"):
        raise ValueError(f"region must be 'sphere' or 'ball', got {region!r}")
    if resolution < 10:
        raise ValueError(f"resolution must be >= 10, got {resolution}")
    edge = 1e-7
    etas = np.linspace(-1.0 + edge, 1.0 - edge, resolution)
    # D carries no phi dependence (the collective channels are axially
    # symmetric and the drive does not enter D); a few phi values suffice.
    phis = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)

    if region == "sphere":
        grid_eta, grid_phi = np.meshgrid(etas, phis, indexing="ij")
        grid_r = np.ones_like(grid_eta)
    else:
        phis = phis[:2]
        rs = np.linspace(edge, 1.0, max(min(resolution // 32, 32), 16))
        grid_eta, grid_phi, grid_r = np.meshgrid(etas, phis, rs, indexing="ij")

    mins = _min_eig_cartesian(params, grid_eta, grid_phi, grid_r)
    flat = int(np.argmin(mins))
    best = (grid_eta.ravel()[flat], grid_phi.ravel()[flat], grid_r.ravel()[flat])
    best_val = float(mins.ravel()[flat])

    # Local refinement; D does not depend on phi, so only (eta, r) matter.
    if region == "sphere":
        res = minimize_scalar(
            lambda e: float(_min_eig_cartesian(params, e, best[1], 1.0)),
            bounds=(-1.0 + edge, 1.0 - edge), method="bounded",
            options={"xatol": 1e-12})
        if res.fun < best_val:
            best_val = float(res.fun)
            best = (float(res.x), best[1], 1.0)
    else:
        res = minimize(
            lambda u: float(_min_eig_cartesian(params, u[0], best[1], u[1])),
            x0=[best[0], best[2]], method="L-BFGS-B",
            bounds=[(-1.0 + edge, 1.0 - edge), (edge, 1.0)])
        if res.fun < best_val:
            best_val = float(res.fun)
            best = (float(res.x[0]), best[1], float(res.x[1]))

    return PositivityReport(
        condition_holds=bool(best_val >= PSD_TOL),
        min_eigenvalue_found=best_val,
        argmin=(float(best[0]), float(best[1]), float(best[2])),
        resolution=resolution,
        region=region,
    )


def factor_diffusion(D: np.ndarray, N: int) -> np.ndarray:
    """Symmetric matrix S with S S^T = D / N, via eigendecomposition.

    Eigenvalues in [PSD_TOL, 0) are clipped to zero; anything below the
    tolerance raises NotPositiveSemidefiniteError, in which case stochastic
    sampling must be refused.
    """
    D = np.asarray(D, dtype=float)
    if D.shape != (3, 3) or not np.allclose(D, D.T, atol=1e-12):
        raise ValueError("D must be a symmetric 3x3 matrix")
    w, V = np.linalg.eigh(0.5 * (D + D.T))
    if w.min() < PSD_TOL:
        raise NotPositiveSemidefiniteError(
            f"diffusion eigenvalue {w.min():.3e} below tolerance {PSD_TOL}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w / N)) @ V.T


# ---------------------------------------------------------------------------
# Brute-force generator oracle
# ---------------------------------------------------------------------------

def _site_channel_ops(N: int):
    ops = site_operators(N)
    per_site = []
    for site in range(N):
        sx, sy, sz = ops[site]
        per_site.append((sx + 1.0j * sy, sx - 1.0j * sy, sz))
    return per_site


def _dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    Ld = L.conj().T
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def generator_action(params: ModelParams, rho: np.ndarray, N: int) -> np.ndarray:
    """Full master-equation right-hand side on a dense 2^N matrix."""
    jx, jy, jz = total_spin_operators(N)
    jp = jx + 1.0j * jy
    jm = jx - 1.0j * jy
    H = params.B[0] * jx + params.B[1] * jy + params.B[2] * jz
    out = -1.0j * (H @ rho - rho @ H)
    for rate, jop in ((params.kappa_plus, jp), (params.kappa_minus, jm),
                      (params.kappa_z, jz)):
        if rate != 0.0:
            out = out + (2.0 * rate / N) * _dissipator(jop, rho)
    locals_ = ((params.gamma_plus, 0), (params.gamma_minus, 1), (params.gamma_z, 2))
    if any(rate != 0.0 for rate, _ in locals_):
        channel_ops = _site_channel_ops(N)
        for rate, idx in locals_:
            if rate == 0.0:
                continue
            for site in range(N):
                out = out + 0.5 * rate * _dissipator(channel_ops[site][idx], rho)
    return out


def generator_oracle(params: ModelParams, r, N: int) -> np.ndarray:
    """L[alpha(r)] evaluated exactly on the dense coherent state."""
    if N > 8:
        raise ValueError(f"generator oracle limited to N <= 8, got {N}")
    return generator_action(params, coherent_state(r, N), N)


def _product_with(factors: dict, mu: np.ndarray, N: int) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for site in range(N):
        out = np.kron(out, factors.get(site, mu))
    return out


def coherent_derivatives(r, N: int):
    """alpha, d_i alpha, and d_i d_j alpha by the exact product rule.

    alpha is multilinear in r across sites: first derivatives replace one
    factor by sigma_i / 2, second derivatives replace two distinct factors.
    """
    from .model import PAULI, single_site_state

    v = _checked_bloch(r)
    mu = single_site_state(v)
    half_sigma = [0.5 * s for s in PAULI]
    dim = 2 ** N
    alpha = _product_with({}, mu, N)
    first = np.zeros((3, dim, dim), dtype=complex)
    for i in range(3):
        for site in range(N):
            first[i] += _product_with({site: half_sigma[i]}, mu, N)
    second = np.zeros((3, 3, dim, dim), dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            acc = np.zeros((dim, dim), dtype=complex)
            for s1 in range(N):
                for s2 in range(N):
                    if s1 == s2:
                        continue
                    acc += _product_with({s1: half_sigma[i], s2: half_sigma[j]}, mu, N)
            second[i, j] = acc
            if i != j:
                second[j, i] = acc
    return alpha, first, second


def verify_coefficients(params: ModelParams, r, N: int) -> float:
    """Frobenius residual of the generator identity at one (params, r, N).

    Compares the brute-force L[alpha(r)] against the differential expansion
    with the Cartesian a and D from this module.  This is the acceptance
    oracle for every coefficient formula in the package.
    """
    if N > 6:
        raise ValueError(f"verify_coefficients limited to N <= 6, got {N}")
    from dataclasses import replace

    work = params if params.N == N else replace(params, N=N)
    v = _checked_bloch(r)
    lhs = generator_oracle(work, v, N)
    alpha, first, second = coherent_derivatives(v, N)
    a = drift_cartesian(work, v)
    D = diffusion_cartesian(work, v)
    rhs = np.einsum("i,iab->ab", a.astype(complex), first)
    rhs += np.einsum("ij,ijab->ab", D.astype(complex), second) / (2.0 * N)
    return float(np.linalg.norm(lhs - rhs))
