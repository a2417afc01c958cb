"""Stochastic trajectory sampling of the phase-space distribution.

Each trajectory is an Euler-Maruyama path of the Ito system

    d eta = a_eta dt + sqrt(lambda1 / N) dxi_eta,
    d phi = a_phi dt + sqrt(lambda2 / N) dxi_phi,

(plus a radial component in ball mode).  Two step implementations exist:

* ``embedded`` (default): the step is taken on the Cartesian point with the
  exact finite-N drift and tangent-frame noise whose chart image is the
  system above.  The two are weakly equivalent, but the embedded form has no
  coordinate singularity, so trajectories may start at or cross the poles,
  which the figure-reproduction runs need (the canonical chart step is
  stiff in phi near the poles and cannot leave a polar start correctly).
* ``chart``: the literal chart-space step with pole clamping/reflection,
  kept as the reference scheme and exposed through ``sde_step``.

The per-step noise is a pure function of (seed, trajectory, step), so
ensembles are bit-identical under any execution schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import coeffs, rng
from .model import ModelParams, SphericalPoint, SpindriftError, _checked_bloch

POLE_CLAMP_DEFAULT = 1e-9


class ConditionRefusalError(SpindriftError):
    """Sampling refused because the diffusion matrix is not positive
    semidefinite in the requested mode (pass force=True to override)."""


@dataclass(frozen=True)
class SdeConfig:
    t_final: float
    n_traj: int
    seed: int
    dt: float | None = None
    n_output_times: int = 200
    mode: str = "sphere"  # "sphere" | "ball"
    force: bool = False
    pole_clamp: float = POLE_CLAMP_DEFAULT
    scheme: str = "embedded"  # "embedded" | "chart"

    def __post_init__(self):
        if self.t_final <= 0.0:
            raise ValueError("t_final must be > 0")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.n_output_times < 2:
            raise ValueError("n_output_times must be >= 2")
        if self.mode not in ("sphere", "ball"):
            raise ValueError(f"mode must be 'sphere' or 'ball', got {self.mode!r}")
        if self.scheme not in ("embedded", "chart"):
            raise ValueError(f"scheme must be 'embedded' or 'chart', got {self.scheme!r}")
        if not 0.0 < self.pole_clamp < 1e-2:
            raise ValueError("pole_clamp must lie in (0, 1e-2)")


@dataclass(frozen=True)
class Ensemble:
    """Sampled phase-space points at the stored output times.

    samples[k, i] = (eta, phi, r) of trajectory i at times[k]; in sphere
    mode r is identically 1.
    """

    times: np.ndarray
    samples: np.ndarray  # (n_times, n_traj, 3)
    params: ModelParams
    config: SdeConfig
    non_physical: bool = False
    n_boundary_clamps: int = 0
    n_psd_clamps: int = 0

    @property
    def n_traj(self) -> int:
        return self.samples.shape[1]

    def cartesian(self, time_index: int) -> np.ndarray:
        """Samples at one stored time as Cartesian points, shape (n_traj, 3)."""
        eta, phi, r = (self.samples[time_index, :, k] for k in range(3))
        s = np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
        return np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * eta], axis=1)


@dataclass(frozen=True)
class ObservableSeries:
    t: np.ndarray
    mean: np.ndarray      # <J_k>, shape (n_times, 3)
    mean_se: np.ndarray
    var: np.ndarray       # Var(J_k), shape (n_times, 3)
    var_se: np.ndarray


@dataclass(frozen=True)
class SphereDensity:
    eta_edges: np.ndarray
    phi_edges: np.ndarray
    weights: np.ndarray   # (n_eta, n_phi), sums to 1
    resultant_length: float

    @property
    def spread(self) -> float:
        return 1.0 - self.resultant_length


def default_dt(params: ModelParams) -> float:
    rate = params.max_rate()
    return 1e-3 / rate if rate > 0.0 else 1e-3


def check_sampling_allowed(params: ModelParams, mode: str, force: bool) -> bool:
    """Validate the positivity precondition; returns the non-physical flag.

    Sphere mode additionally requires all local rates to vanish, because
    local channels generate radial drift and the dynamics would leave the
    sphere; that is a structural error which force does not override.
    """
    if mode == "sphere" and not params.local_rates_zero:
        raise ValueError("sphere mode requires gamma_plus = gamma_minus = gamma_z = 0; "
                         "use ball mode for local channels")
    if mode == "sphere":
        ok = (math.sqrt(params.kappa_plus) - math.sqrt(params.kappa_minus)) ** 2 \
            <= 2.0 * params.kappa_z
    else:
        ok = params.kappa_plus == params.kappa_minus
    if ok:
        return False
    if not force:
        s = coeffs.condition_summary(params)
        raise ConditionRefusalError(
            f"diffusion matrix is not positive semidefinite in {mode} mode: "
            f"kappa_plus + kappa_minus = {s['kappa_plus_plus_kappa_minus']:.6g}, "
            f"(sqrt(kappa_plus) - sqrt(kappa_minus))^2 = {s['sqrt_rate_gap_squared']:.6g}, "
            f"2 kappa_z = {s['two_kappa_z']:.6g}; sphere positivity needs "
            "(sqrt(kappa_plus) - sqrt(kappa_minus))^2 <= 2 kappa_z and ball "
            "positivity needs kappa_plus == kappa_minus. Pass force=True to "
            "sample anyway with negative noise modes clipped (non-physical).")
    return True


# ---------------------------------------------------------------------------
# chart-space stepping (reference scheme, exposed as sde_step)
# ---------------------------------------------------------------------------

def _reflect(eta, bound):
    eta = np.where(eta > bound, 2.0 * bound - eta, eta)
    eta = np.where(eta < -bound, -2.0 * bound - eta, eta)
    return np.clip(eta, -bound, bound)


def _chart_step_sphere(params, eta, phi, dt, z_eta, z_phi, pole_clamp, force=False):
    a, _ = coeffs.spherical_coefficients(params, eta, phi, np.ones_like(eta))
    kp, km, kz = params.kappa_plus, params.kappa_minus, params.kappa_z
    lam1 = 2.0 * (1.0 - eta * eta) * ((1.0 + eta) * km + (1.0 - eta) * kp)
    lam2 = 2.0 * kz + 2.0 * eta * km / (1.0 - eta) - 2.0 * eta * kp / (1.0 + eta)
    lam1 = np.clip(lam1, 0.0, None)
    n_clip = int(np.sum(lam2 < 0.0))
    if n_clip and not force:
        raise coeffs.NotPositiveSemidefiniteError(
            "lambda2 < 0 reached during chart stepping")
    lam2 = np.clip(lam2, 0.0, None)
    root_dt = math.sqrt(dt)
    eta_new = _reflect(eta + a[..., 0] * dt + np.sqrt(lam1 / params.N) * root_dt * z_eta,
                       1.0 - pole_clamp)
    phi_new = (phi + a[..., 1] * dt + np.sqrt(lam2 / params.N) * root_dt * z_phi) \
        % (2.0 * math.pi)
    return eta_new, phi_new, n_clip


def sde_step(params: ModelParams, state: SphericalPoint, dt: float, noise,
             mode: str = "sphere", pole_clamp: float = POLE_CLAMP_DEFAULT) -> SphericalPoint:
    """One Euler-Maruyama step in the (eta, phi[, r]) chart.

    ``noise`` holds the standard-normal draws: two for sphere mode, three
    for ball mode.  With zeros it reduces to one explicit Euler drift step.
    """
    noise = np.asarray(noise, dtype=float).ravel()
    if mode == "sphere":
        if noise.shape != (2,):
            raise ValueError("sphere mode needs exactly 2 noise draws")
        eta = np.array([min(1.0 - pole_clamp, max(-1.0 + pole_clamp, state.eta))])
        phi = np.array([state.phi])
        eta_new, phi_new, _ = _chart_step_sphere(
            params, eta, phi, dt, noise[0], noise[1], pole_clamp)
        return SphericalPoint(float(eta_new[0]), float(phi_new[0]), 1.0)
    if mode == "ball":
        if noise.shape != (3,):
            raise ValueError("ball mode needs exactly 3 noise draws")
        guard = max(pole_clamp, 2.0 * coeffs.EPS_POLE)
        state = SphericalPoint(
            min(1.0 - guard, max(-1.0 + guard, state.eta)), state.phi,
            max(2.0 * coeffs.EPS_RADIUS, state.r))
        dd = coeffs.drift_diffusion_spherical(params, state)
        S = coeffs.factor_diffusion(dd.D, params.N)
        du = dd.a * dt + math.sqrt(dt) * (S @ noise)
        eta_new = float(_reflect(np.array([state.eta + du[0]]), 1.0 - pole_clamp)[0])
        phi_new = (state.phi + du[1]) % (2.0 * math.pi)
        r_new = min(1.0, max(coeffs.EPS_RADIUS, state.r + du[2]))
        return SphericalPoint(eta_new, phi_new, r_new)
    raise ValueError(f"mode must be 'sphere' or 'ball', got {mode!r}")


# ---------------------------------------------------------------------------
# embedded stepping (production scheme)
# ---------------------------------------------------------------------------

def _tangent_frames(P: np.ndarray):
    """Orthonormal tangent frame (u_eta, u_phi) at unit or ball points."""
    w = np.empty_like(P)
    w[:, 0] = -P[:, 1]
    w[:, 1] = P[:, 0]
    w[:, 2] = 0.0
    norm = np.linalg.norm(w, axis=1, keepdims=True)
    degenerate = norm[:, 0] < 1e-12
    w[degenerate] = [0.0, 1.0, 0.0]
    norm[degenerate] = 1.0
    u_phi = w / norm
    radial = P / np.linalg.norm(P, axis=1, keepdims=True)
    u_eta = np.cross(radial, u_phi)
    return u_eta, u_phi


def _tangent_noise_amplitudes(params: ModelParams, eta: np.ndarray, radius):
    """Position-space noise variances along (u_eta, u_phi), already / N.

    These are the chart variances lambda1/N and lambda2/N scaled by the
    metric factors r^2/(1-eta^2) and r^2 (1-eta^2); the products are
    regular at the poles.
    """
    kp, km, kz = params.kappa_plus, params.kappa_minus, params.kappa_z
    diff = km - kp
    tot = km + kp
    v_eta = 2.0 * radius * (eta * diff + radius * tot) / params.N
    v_phi = 2.0 * radius * (eta * diff + eta * eta * radius * (tot - kz)
                            + kz * radius) / params.N
    return v_eta, v_phi


def _run_embedded(params: ModelParams, start: np.ndarray, config: SdeConfig,
                  h: float, n_steps: int, out_steps: np.ndarray):
    n = start.shape[0]
    P = start.copy()
    sphere = config.mode == "sphere"
    # kappa_plus != kappa_minus in ball mode has a radial/latitude noise
    # coupling that the tangent-frame fast path cannot represent; under
    # force the full Cartesian D is factored (PSD-clamped) per sample.
    general_noise = (not sphere) and params.kappa_plus != params.kappa_minus
    root_h = math.sqrt(h)
    n_boundary = 0
    n_psd = 0
    out = np.empty((len(out_steps), n, 3))
    out_map = {int(s): k for k, s in enumerate(out_steps)}

    def record(k):
        rho = np.linalg.norm(P, axis=1)
        if sphere:
            rho = np.ones(n)
        eta = np.where(rho > 0, P[:, 2] / np.where(rho > 0, rho, 1.0), 0.0)
        eta = np.clip(eta, -1.0, 1.0)
        phi = np.arctan2(P[:, 1], P[:, 0]) % (2.0 * math.pi)
        out[k, :, 0] = eta
        out[k, :, 1] = phi
        out[k, :, 2] = rho

    if 0 in out_map:
        record(out_map[0])

    for step in range(n_steps):
        a = coeffs.drift_cartesian(params, P)
        if general_noise:
            Z = rng.step_normals(config.seed, step, n, 3)
            D = coeffs.diffusion_cartesian(params, P)
            w, V = np.linalg.eigh(D)
            n_psd += int(np.sum(w < coeffs.PSD_TOL))
            w = np.clip(w, 0.0, None) / params.N
            noise = np.einsum("nij,nj->ni", V, np.sqrt(w) * Z)
        else:
            Z = rng.step_normals(config.seed, step, n, 2)
            rho = np.ones(n) if sphere else np.linalg.norm(P, axis=1)
            eta = np.clip(P[:, 2] / np.where(rho > 0, rho, 1.0), -1.0, 1.0)
            v_eta, v_phi = _tangent_noise_amplitudes(params, eta, rho)
            n_psd += int(np.sum(v_phi < -1e-15)) + int(np.sum(v_eta < -1e-15))
            v_eta = np.clip(v_eta, 0.0, None)
            v_phi = np.clip(v_phi, 0.0, None)
            u_eta, u_phi = _tangent_frames(P)
            noise = (np.sqrt(v_eta)[:, None] * Z[:, 0:1] * u_eta
                     + np.sqrt(v_phi)[:, None] * Z[:, 1:2] * u_phi)
        P = P + a * h + root_h * noise
        if sphere:
            P /= np.linalg.norm(P, axis=1, keepdims=True)
        else:
            norms = np.linalg.norm(P, axis=1)
            over = norms > 1.0
            if np.any(over):
                n_boundary += int(np.sum(over))
                P[over] /= norms[over, None]
        k = out_map.get(step + 1)
        if k is not None:
            record(k)
    return out, n_boundary, n_psd


def _run_chart(params: ModelParams, start: np.ndarray, config: SdeConfig,
               h: float, n_steps: int, out_steps: np.ndarray):
    if config.mode != "sphere":
        raise ValueError("the chart scheme is implemented for sphere mode only")
    n = start.shape[0]
    rho = np.linalg.norm(start, axis=1)
    bound = 1.0 - config.pole_clamp
    eta = np.clip(start[:, 2] / rho, -bound, bound)
    phi = np.arctan2(start[:, 1], start[:, 0]) % (2.0 * math.pi)
    n_psd = 0
    out = np.empty((len(out_steps), n, 3))
    out_map = {int(s): k for k, s in enumerate(out_steps)}

    def record(k):
        out[k, :, 0] = eta
        out[k, :, 1] = phi
        out[k, :, 2] = 1.0

    if 0 in out_map:
        record(out_map[0])
    for step in range(n_steps):
        Z = rng.step_normals(config.seed, step, n, 2)
        eta, phi, clipped = _chart_step_sphere(
            params, eta, phi, h, Z[:, 0], Z[:, 1], config.pole_clamp,
            force=config.force)
        n_psd += clipped
        k = out_map.get(step + 1)
        if k is not None:
            record(k)
    return out, 0, n_psd


def run_ensemble(params: ModelParams, initial, config: SdeConfig) -> Ensemble:
    """Sample n_traj independent trajectories; a pure function of its inputs.

    ``initial`` is a single Bloch vector (coherent start: every trajectory
    begins at the same phase-space point) or an (n_traj, 3) array of
    Cartesian sample points.
    """
    non_physical = check_sampling_allowed(params, config.mode, config.force)

    init = np.asarray(initial.as_array() if hasattr(initial, "as_array") else initial,
                      dtype=float)
    if init.ndim == 1:
        start = np.broadcast_to(_checked_bloch(init), (config.n_traj, 3)).copy()
    else:
        if init.shape != (config.n_traj, 3):
            raise ValueError(f"explicit sample set must have shape "
                             f"({config.n_traj}, 3), got {init.shape}")
        start = init.copy()
    radii = np.linalg.norm(start, axis=1)
    if config.mode == "sphere":
        if np.any(np.abs(radii - 1.0) > 1e-6):
            raise ValueError("sphere mode requires |r| = 1 initial points")
        start /= radii[:, None]
    else:
        if np.any(radii > 1.0 + 1e-9):
            raise ValueError("initial points must lie in the unit ball")
        start[radii > 1.0] /= radii[radii > 1.0, None]

    dt = config.dt if config.dt is not None else default_dt(params)
    # choose the step count as a multiple of the output intervals, so the
    # stored times form an exactly uniform grid with spacing <= dt
    intervals = config.n_output_times - 1
    per_interval = max(1, int(np.ceil(config.t_final / (dt * intervals) - 1e-12)))
    n_steps = per_interval * intervals
    h = config.t_final / n_steps
    out_steps = np.arange(0, n_steps + 1, per_interval)
    times = np.linspace(0.0, config.t_final, config.n_output_times)

    runner = _run_embedded if config.scheme == "embedded" else _run_chart
    samples, n_boundary, n_psd = runner(params, start, config, h, n_steps, out_steps)
    return Ensemble(times=times, samples=samples, params=params, config=config,
                    non_physical=non_physical or (n_psd > 0),
                    n_boundary_clamps=n_boundary, n_psd_clamps=n_psd)


# ---------------------------------------------------------------------------
# observables and densities
# ---------------------------------------------------------------------------

def ensemble_observables(ens: Ensemble, N: int | None = None) -> ObservableSeries:
    """Collective-spin means and variances with Monte Carlo standard errors.

    Second moments use the exact coherent-state formula
    <J_k^2> = (N(N-1) r_k^2 + N) / 4 averaged over samples, so the quantum
    fluctuations of the coherent states are included, not just the spread
    of the sample cloud.
    """
    if N is None:
        N = ens.params.N
    n_times, n_traj, _ = ens.samples.shape
    mean = np.empty((n_times, 3))
    mean_se = np.empty((n_times, 3))
    var = np.empty((n_times, 3))
    var_se = np.empty((n_times, 3))
    ddof = 1 if n_traj > 1 else 0
    for k in range(n_times):
        eta, phi, r = (ens.samples[k, :, c] for c in range(3))
        s = np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
        comps = np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * eta], axis=0)
        for c in range(3):
            rc = comps[c]
            m = rc.mean()
            mean[k, c] = 0.5 * N * m
            mean_se[k, c] = 0.5 * N * rc.std(ddof=ddof) / math.sqrt(n_traj)
            q = 0.25 * (N * (N - 1) * rc ** 2 + N)
            var[k, c] = q.mean() - (0.5 * N * m) ** 2
            u = q - 0.5 * N * N * m * rc
            var_se[k, c] = u.std(ddof=ddof) / math.sqrt(n_traj)
    return ObservableSeries(t=ens.times.copy(), mean=mean, mean_se=mean_se,
                            var=var, var_se=var_se)


def density_estimate(ens: Ensemble, time_index: int,
                     n_eta: int = 60, n_phi: int = 120) -> SphereDensity:
    """Equal-area histogram of the samples at one stored time.

    Bins are uniform in (eta, phi), which is equal-area because the sphere
    measure is d eta d phi.  Weights are normalized to sum to 1.
    """
    if ens.config.mode != "sphere":
        raise ValueError("density_estimate requires sphere-mode samples")
    eta = ens.samples[time_index, :, 0]
    phi = ens.samples[time_index, :, 1]
    weights, eta_edges, phi_edges = np.histogram2d(
        eta, phi, bins=[n_eta, n_phi],
        range=[[-1.0, 1.0], [0.0, 2.0 * math.pi]])
    weights /= weights.sum()
    xyz = ens.cartesian(time_index)
    resultant = float(np.linalg.norm(xyz.mean(axis=0)))
    return SphereDensity(eta_edges=eta_edges, phi_edges=phi_edges,
                         weights=weights, resultant_length=resultant)
