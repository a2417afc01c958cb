"""Mean-field flow on the Bloch ball: integration, fixed points, portraits.

The mean-field velocity is the N -> infinity limit of the phase-space drift;
diffusion and the 1/N drift corrections vanish there.  Collective dephasing
(kappa_z) never appears in this limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .model import ModelParams, SpindriftError, _checked_bloch

NEWTON_RESIDUAL = 1e-10
DEDUP_RADIUS = 1e-6
MARGINAL_TOL = 1e-8
RADIUS_SLACK = 1e-6


class IntegrationError(SpindriftError):
    """Mean-field integration failed (NaN or step-size underflow)."""


@dataclass(frozen=True)
class MeanFieldTrajectory:
    t: np.ndarray
    r: np.ndarray  # shape (len(t), 3)
    dt: float
    method: str = "rk4"

    def __post_init__(self):
        radii = np.linalg.norm(self.r, axis=1)
        if radii.max(initial=0.0) > 1.0 + RADIUS_SLACK:
            raise IntegrationError(
                f"trajectory left the ball: max |r| = {radii.max():.9f}")

    @property
    def endpoint(self) -> np.ndarray:
        return self.r[-1]


@dataclass(frozen=True)
class FixedPointResult:
    location: np.ndarray
    residual: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: str  # "stable" | "unstable" | "marginal"
    constraint: str = "ball"  # "ball" | "sphere"


def meanfield_rhs(params: ModelParams, r) -> np.ndarray:
    """Velocity of the mean-field flow at Bloch vector(s) r, shape (..., 3)."""
    pts = np.asarray(r, dtype=float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    bx, by, bz = params.B
    cross = params.kappa_minus - params.kappa_plus
    gsum = params.gamma_plus + params.gamma_minus + params.gamma_z
    gp, gm = params.gamma_plus, params.gamma_minus
    ax = by * z - bz * y + cross * x * z - gsum * x
    ay = bz * x - bx * z + cross * y * z - gsum * y
    az = (bx * y - by * x - cross * (x * x + y * y)
          - 2.0 * gm * (z + 1.0) - 2.0 * gp * (z - 1.0))
    return np.stack([ax, ay, az], axis=-1)


def meanfield_jacobian(params: ModelParams, r) -> np.ndarray:
    """Analytic Jacobian of meanfield_rhs at a single point."""
    x, y, z = np.asarray(r, dtype=float)
    bx, by, bz = params.B
    cross = params.kappa_minus - params.kappa_plus
    gsum = params.gamma_plus + params.gamma_minus + params.gamma_z
    gdecay = 2.0 * (params.gamma_plus + params.gamma_minus)
    return np.array([
        [cross * z - gsum, -bz, by + cross * x],
        [bz, cross * z - gsum, -bx + cross * y],
        [-by - 2.0 * cross * x, bx - 2.0 * cross * y, -gdecay],
    ])


def default_dt(params: ModelParams) -> float:
    rate = params.max_rate()
    return 1e-3 / rate if rate > 0.0 else 1e-3


def integrate_meanfield(params: ModelParams, r0, t_grid,
                        dt: float | None = None) -> MeanFieldTrajectory:
    """Classical fixed-step RK4 along the mean-field flow.

    The output is sampled on t_grid (must start at 0 and be increasing);
    internally the integrator subdivides each interval into uniform steps of
    at most dt.
    """
    v0 = _checked_bloch(r0)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or t_grid[0] < 0.0:
        raise ValueError("t_grid must be a 1-d array of times starting at >= 0")
    if np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be strictly increasing")
    if dt is None:
        dt = default_dt(params)
    if dt <= 0.0 or not np.isfinite(dt):
        raise IntegrationError(f"invalid step size {dt}")

    out = np.empty((len(t_grid), 3))
    state = v0.copy()
    t = 0.0
    idx = 0
    if t_grid[0] == 0.0:
        out[0] = state
        idx = 1
    while idx < len(t_grid):
        span = t_grid[idx] - t
        n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
        h = span / n_sub
        if h <= 1e-300:
            raise IntegrationError("step size underflow in mean-field integration")
        for _ in range(n_sub):
            k1 = meanfield_rhs(params, state)
            k2 = meanfield_rhs(params, state + 0.5 * h * k1)
            k3 = meanfield_rhs(params, state + 0.5 * h * k2)
            k4 = meanfield_rhs(params, state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise IntegrationError(f"NaN/inf at t = {t_grid[idx]}")
        t = t_grid[idx]
        out[idx] = state
        idx += 1
    return MeanFieldTrajectory(t=t_grid.copy(), r=out, dt=float(dt))


def _tangent_frame(p: np.ndarray):
    w = np.cross([0.0, 0.0, 1.0], p)
    norm = np.linalg.norm(w)
    u_phi = w / norm if norm > 1e-12 else np.array([0.0, 1.0, 0.0])
    u_eta = np.cross(p, u_phi)
    u_eta /= np.linalg.norm(u_eta)
    return u_eta, u_phi


def _classify(eigs: np.ndarray) -> str:
    top = float(np.max(eigs.real))
    if top > MARGINAL_TOL:
        return "unstable"
    if top < -MARGINAL_TOL:
        return "stable"
    return "marginal"


def _newton_ball(params: ModelParams, seed: np.ndarray):
    p = seed.copy()
    for _ in range(80):
        f = meanfield_rhs(params, p)
        norm = np.linalg.norm(f)
        if norm <= 1e-13:
            break
        J = meanfield_jacobian(params, p)
        step, *_ = np.linalg.lstsq(J, -f, rcond=None)
        scale = 1.0
        for _ in range(30):
            trial = p + scale * step
            if np.linalg.norm(meanfield_rhs(params, trial)) < norm:
                p = trial
                break
            scale *= 0.5
        else:
            return None
    residual = float(np.linalg.norm(meanfield_rhs(params, p)))
    if residual > NEWTON_RESIDUAL or np.linalg.norm(p) > 1.0 + RADIUS_SLACK:
        return None
    return p


def _newton_sphere(params: ModelParams, seed: np.ndarray):
    p = seed / np.linalg.norm(seed)
    for _ in range(80):
        f = meanfield_rhs(params, p)
        f_t = f - np.dot(f, p) * p
        if np.linalg.norm(f_t) <= 1e-13:
            break
        u_eta, u_phi = _tangent_frame(p)
        T = np.stack([u_eta, u_phi], axis=1)  # 3x2
        J2 = T.T @ meanfield_jacobian(params, p) @ T
        rhs2 = -T.T @ f_t
        try:
            delta = np.linalg.solve(J2, rhs2)
        except np.linalg.LinAlgError:
            delta, *_ = np.linalg.lstsq(J2, rhs2, rcond=None)
        norm = np.linalg.norm(f_t)
        scale = 1.0
        for _ in range(30):
            trial = p + scale * (T @ delta)
            trial /= np.linalg.norm(trial)
            g = meanfield_rhs(params, trial)
            if np.linalg.norm(g - np.dot(g, trial) * trial) < norm:
                p = trial
                break
            scale *= 0.5
        else:
            return None
    f = meanfield_rhs(params, p)
    residual = float(np.linalg.norm(f - np.dot(f, p) * p))
    return p if residual <= NEWTON_RESIDUAL else None


def find_fixed_points(params: ModelParams, n_seeds: int = 64,
                      constraint: str = "ball") -> list[FixedPointResult]:
    """Damped-Newton fixed-point search from Halton seeds.

    constraint="ball" searches the full ball and classifies by the 3x3
    Jacobian spectrum.  constraint="sphere" restricts the search to the unit
    sphere, which is an exact invariant manifold when all local rates vanish;
    there classification uses the spectrum of the Jacobian projected onto
    the tangent plane (flows like cooperative resonance fluorescence have a
    degenerate interior family of rest points in the ball, and the sphere
    restriction recovers the two isolated roots of physical interest).
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if constraint not in ("ball", "sphere"):
        raise ValueError(f"constraint must be 'ball' or 'sphere', got {constraint!r}")
    if constraint == "sphere" and not params.local_rates_zero:
        raise ValueError("sphere-constrained search requires all local rates zero "
                         "(the radius is not conserved otherwise)")

    halton = qmc.Halton(d=3, scramble=False, seed=0)
    u = halton.random(n_seeds + 1)[1:]  # drop the origin sample
    radius = np.cbrt(u[:, 0])
    eta = 2.0 * u[:, 1] - 1.0
    phi = 2.0 * np.pi * u[:, 2]
    s = np.sqrt(1.0 - eta ** 2)
    seeds = np.stack([radius * s * np.cos(phi), radius * s * np.sin(phi),
                      radius * eta], axis=1)
    if constraint == "sphere":
        seeds /= np.linalg.norm(seeds, axis=1, keepdims=True)

    roots: list[np.ndarray] = []
    for seed in seeds:
        p = _newton_ball(params, seed) if constraint == "ball" else _newton_sphere(params, seed)
        if p is None:
            continue
        if any(np.linalg.norm(p - q) < DEDUP_RADIUS for q in roots):
            continue
        roots.append(p)

    results = []
    for p in roots:
        J = meanfield_jacobian(params, p)
        if constraint == "sphere":
            u_eta, u_phi = _tangent_frame(p)
            T = np.stack([u_eta, u_phi], axis=1)
            eigs = np.linalg.eigvals(T.T @ J @ T)
            f = meanfield_rhs(params, p)
            residual = float(np.linalg.norm(f - np.dot(f, p) * p))
        else:
            eigs = np.linalg.eigvals(J)
            residual = float(np.linalg.norm(meanfield_rhs(params, p)))
        results.append(FixedPointResult(
            location=p, residual=residual, jacobian=J,
            eigenvalues=eigs, classification=_classify(eigs),
            constraint=constraint))
    results.sort(key=lambda fp: (fp.location[2], fp.location[1], fp.location[0]))
    return results


def phase_portrait(params: ModelParams, seed_grid, t_final: float,
                   n_times: int = 200, dt: float | None = None) -> list[MeanFieldTrajectory]:
    """Batch of mean-field trajectories from a deterministic seed grid."""
    seeds = np.asarray(seed_grid, dtype=float).reshape(-1, 3)
    t_grid = np.linspace(0.0, t_final, n_times)
    return [integrate_meanfield(params, seed, t_grid, dt=dt) for seed in seeds]


def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic quasi-uniform seed grid on the unit sphere."""
    k = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / n
    golden = np.pi * (3.0 - np.sqrt(5.0))
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([s * np.cos(golden * k), s * np.sin(golden * k), z], axis=1)
