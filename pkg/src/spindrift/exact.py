"""Reference Lindblad solvers.

Two bases are supported: the symmetric collective subspace of dimension
N + 1 (valid only for purely collective dynamics, which preserves it) and
the full 2^N product space (N <= 8) including the permutation-invariant
local channels.  Both share the operator conventions of the model module;
in particular the collective ladder operators are J_pm = J_x +- i J_y,
inherited from sigma_pm = sigma_x +- i sigma_y, so all rates mean the same
thing in every solver here and in the stochastic sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.special import gammaln

from .model import (
    ModelParams,
    SpindriftError,
    _checked_bloch,
    coherent_state,
    site_operators,
    to_spherical,
    total_spin_operators,
    validate_density_matrix,
    BlochVector,
)

MAX_FULL_SITES = 8
MAX_COLLECTIVE_SITES = 2000
MAX_NULLSPACE_DIM = 64
TRACE_DRIFT_BOUND = 1e-9
_PROPAGATOR_MAX_DIM = 50  # build the dense one-step map when N + 1 <= this


class StepSizeError(SpindriftError):
    """Trace drift exceeded its bound during integration."""


class BasisError(SpindriftError):
    """Requested basis cannot represent the requested dynamics."""


@dataclass(frozen=True)
class CollectiveOperators:
    """Dense (N+1)-dimensional J_z, J_+, J_- for the j = N/2 ladder."""

    N: int
    Jz: np.ndarray
    Jp: np.ndarray
    Jm: np.ndarray

    @property
    def Jx(self) -> np.ndarray:
        return 0.5 * (self.Jp + self.Jm)

    @property
    def Jy(self) -> np.ndarray:
        return -0.5j * (self.Jp - self.Jm)


@dataclass(frozen=True)
class EvolutionResult:
    t: np.ndarray
    mean: np.ndarray       # <J_x>, <J_y>, <J_z> per time, shape (n, 3)
    var: np.ndarray        # Var(J_x), Var(J_y), Var(J_z), shape (n, 3)
    trace_drift: float
    basis: str
    states: list | None = None


def dicke_operators(N: int) -> CollectiveOperators:
    """Angular momentum matrices for j = N/2, basis ordered m = j .. -j."""
    if not 1 <= N <= MAX_COLLECTIVE_SITES:
        raise ValueError(f"N must lie in [1, {MAX_COLLECTIVE_SITES}], got {N}")
    j = 0.5 * N
    m = j - np.arange(N + 1)
    Jz = np.diag(m).astype(complex)
    # raising coefficient from |m> to |m+1>: sqrt(j(j+1) - m(m+1))
    up = np.sqrt(j * (j + 1.0) - m[1:] * (m[1:] + 1.0))
    Jp = np.zeros((N + 1, N + 1), dtype=complex)
    Jp[np.arange(N), np.arange(1, N + 1)] = up
    return CollectiveOperators(N=N, Jz=Jz, Jp=Jp, Jm=Jp.conj().T)


def coherent_amplitudes(r, N: int) -> np.ndarray:
    """Dicke-basis amplitudes of the pure coherent state at |r| = 1."""
    v = _checked_bloch(r)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"collective coherent states require |r| = 1, got {norm}")
    p = to_spherical(BlochVector.from_array(v / norm))
    cos_half = math.sqrt(0.5 * (1.0 + p.eta))
    sin_half = math.sqrt(0.5 * (1.0 - p.eta))
    i = np.arange(N + 1)
    log_binom = gammaln(N + 1) - gammaln(i + 1) - gammaln(N - i + 1)
    with np.errstate(divide="ignore"):
        log_mag = (0.5 * log_binom
                   + (N - i) * np.log(cos_half if cos_half > 0 else 1e-300)
                   + i * np.log(sin_half if sin_half > 0 else 1e-300))
    amps = np.exp(log_mag) * np.exp(1.0j * i * p.phi)
    if cos_half == 0.0:
        amps = np.zeros(N + 1, complex)
        amps[N] = 1.0
    elif sin_half == 0.0:
        amps = np.zeros(N + 1, complex)
        amps[0] = 1.0
    return amps / np.linalg.norm(amps)


def collective_coherent_state(r, N: int) -> np.ndarray:
    amps = coherent_amplitudes(r, N)
    return np.outer(amps, amps.conj())


def _check_basis(params: ModelParams, basis: str) -> None:
    if basis == "collective":
        if not params.local_rates_zero:
            raise BasisError(
                "the collective basis only represents purely collective dynamics; "
                "local rates couple the symmetric subspace to the rest of the space")
    elif basis == "full":
        if params.N > MAX_FULL_SITES:
            raise BasisError(f"full basis limited to N <= {MAX_FULL_SITES}")
    else:
        raise ValueError(f"basis must be 'collective' or 'full', got {basis!r}")


def _collective_terms(params: ModelParams):
    ops = dicke_operators(params.N)
    H = (params.B[0] * ops.Jx + params.B[1] * ops.Jy + params.B[2] * ops.Jz)
    channels = []
    for rate, jop in ((params.kappa_plus, ops.Jp), (params.kappa_minus, ops.Jm),
                      (params.kappa_z, ops.Jz)):
        if rate != 0.0:
            channels.append((2.0 * rate / params.N, jop))
    return ops, H, channels


def _full_terms(params: ModelParams):
    N = params.N
    jx, jy, jz = total_spin_operators(N)
    H = params.B[0] * jx + params.B[1] * jy + params.B[2] * jz
    channels = []
    for rate, jop in ((params.kappa_plus, jx + 1.0j * jy),
                      (params.kappa_minus, jx - 1.0j * jy),
                      (params.kappa_z, jz)):
        if rate != 0.0:
            channels.append((2.0 * rate / N, jop))
    ops = site_operators(N)
    for rate, build in ((params.gamma_plus, lambda s: s[0] + 1.0j * s[1]),
                        (params.gamma_minus, lambda s: s[0] - 1.0j * s[1]),
                        (params.gamma_z, lambda s: s[2])):
        if rate != 0.0:
            for site in range(N):
                channels.append((0.5 * rate, build(ops[site])))
    return (jx, jy, jz), H, channels


def _rhs(H: np.ndarray, channels, rho: np.ndarray) -> np.ndarray:
    out = -1.0j * (H @ rho - rho @ H)
    for rate, L in channels:
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def lindblad_rhs(params: ModelParams, rho: np.ndarray, basis: str) -> np.ndarray:
    """d rho / dt under the master equation, in the requested basis."""
    _check_basis(params, basis)
    rho = np.asarray(rho, dtype=complex)
    expected = params.N + 1 if basis == "collective" else 2 ** params.N
    if rho.shape != (expected, expected):
        raise ValueError(f"state has shape {rho.shape}, expected {(expected, expected)}")
    if basis == "collective":
        _, H, channels = _collective_terms(params)
    else:
        _, H, channels = _full_terms(params)
    return _rhs(H, channels, rho)


def liouvillian_matrix(params: ModelParams, basis: str) -> np.ndarray:
    """Dense superoperator L with vec(L[rho]) = L @ vec(rho) (row-major vec)."""
    _check_basis(params, basis)
    if basis == "collective":
        _, H, channels = _collective_terms(params)
    else:
        _, H, channels = _full_terms(params)
    dim = H.shape[0]
    eye = np.eye(dim)
    sup = -1.0j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, L in channels:
        Ld = L.conj().T
        LdL = Ld @ L
        sup = sup + rate * (np.kron(L, Ld.T)
                            - 0.5 * np.kron(LdL, eye)
                            - 0.5 * np.kron(eye, LdL.T))
    return sup


def default_dt(params: ModelParams) -> float:
    """Conservative RK4 step: collective rates scale with N through the
    2 kappa / N prefactor and the O(N) operator norms."""
    rate = params.max_rate()
    return 1e-3 / (rate * params.N) if rate > 0.0 else 1e-3


def _rk4_step_matrix(L: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 map for the linear system rho' = L rho."""
    dim = L.shape[0]
    A = h * L
    phi = np.eye(dim, dtype=complex)
    term = np.eye(dim, dtype=complex)
    for k in (1, 2, 3, 4):
        term = term @ A / k
        phi = phi + term
    return phi


def evolve(params: ModelParams, rho0: np.ndarray, t_grid, basis: str,
           dt: float | None = None, store_states: bool = False) -> EvolutionResult:
    """Fixed-step RK4 integration of the master equation.

    Trace renormalization is off; the trace drift is monitored and must stay
    below 1e-9 (RK4 stages are exactly traceless, so drift is pure roundoff
    unless the step is unstable).  For collective runs of moderate dimension
    the one-step RK4 map is precomputed and squared across each uniform
    output interval, which is algebraically the same iteration.
    """
    _check_basis(params, basis)
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0, tol=1e-8)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or t_grid[0] != 0.0:
        raise ValueError("t_grid must be 1-d, start at 0, and contain >= 2 times")
    if np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be strictly increasing")
    if dt is None:
        dt = default_dt(params)

    dim = rho0.shape[0]
    spacings = np.diff(t_grid)
    uniform = np.allclose(spacings, spacings[0], rtol=1e-12, atol=1e-15)

    states = []
    mean = np.empty((len(t_grid), 3))
    var = np.empty((len(t_grid), 3))
    if basis == "collective":
        ops = dicke_operators(params.N)
        jops = (ops.Jx, ops.Jy, ops.Jz)
        _, H, channels = _collective_terms(params)
    else:
        jops, H, channels = _full_terms(params)
    j2ops = tuple(j @ j for j in jops)

    def record(idx, rho):
        for k in range(3):
            mk = float(np.trace(jops[k] @ rho).real)
            mean[idx, k] = mk
            var[idx, k] = float(np.trace(j2ops[k] @ rho).real) - mk * mk
        if store_states:
            states.append(rho.copy())

    record(0, rho0)
    worst_drift = abs(float(np.trace(rho0).real) - 1.0)

    if basis == "collective" and dim <= _PROPAGATOR_MAX_DIM and uniform:
        span = float(spacings[0])
        n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
        L = liouvillian_matrix(params, basis)
        phi = _rk4_step_matrix(L, span / n_sub)
        # binary exponentiation of the one-step map across each interval
        step_map = np.eye(dim * dim, dtype=complex)
        base = phi
        n = n_sub
        while n:
            if n & 1:
                step_map = step_map @ base
            n >>= 1
            if n:
                base = base @ base
        vec = rho0.reshape(-1)
        for idx in range(1, len(t_grid)):
            vec = step_map @ vec
            rho = vec.reshape(dim, dim)
            drift = abs(float(np.trace(rho).real) - 1.0)
            worst_drift = max(worst_drift, drift)
            if drift > TRACE_DRIFT_BOUND:
                raise StepSizeError(f"trace drift {drift:.3e} at t = {t_grid[idx]}; "
                                    "reduce dt")
            record(idx, rho)
    else:
        rho = rho0.copy()
        t = 0.0
        for idx in range(1, len(t_grid)):
            span = t_grid[idx] - t
            n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
            h = span / n_sub
            for _ in range(n_sub):
                k1 = _rhs(H, channels, rho)
                k2 = _rhs(H, channels, rho + 0.5 * h * k1)
                k3 = _rhs(H, channels, rho + 0.5 * h * k2)
                k4 = _rhs(H, channels, rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t_grid[idx]
            drift = abs(float(np.trace(rho).real) - 1.0)
            worst_drift = max(worst_drift, drift)
            if drift > TRACE_DRIFT_BOUND:
                raise StepSizeError(f"trace drift {drift:.3e} at t = {t}; reduce dt")
            record(idx, rho)

    return EvolutionResult(t=t_grid.copy(), mean=mean, var=var,
                           trace_drift=worst_drift, basis=basis,
                           states=states if store_states else None)


def steady_state(params: ModelParams, basis: str):
    """Stationary state and a uniqueness flag.

    For dimensions up to 64 the kernel of the dense vectorized generator is
    computed directly; a one-dimensional kernel certifies uniqueness.  For a
    degenerate kernel the returned state is the projection of the maximally
    mixed state onto the stationary subspace.  Larger problems fall back to
    long-time integration from two initial states.
    """
    _check_basis(params, basis)
    dim = params.N + 1 if basis == "collective" else 2 ** params.N
    if dim <= MAX_NULLSPACE_DIM:
        sup = liouvillian_matrix(params, basis)
        kernel = null_space(sup, rcond=1e-12)
        if kernel.shape[1] == 0:
            kernel = null_space(sup, rcond=1e-9)
        unique = kernel.shape[1] == 1
        if unique:
            rho = kernel[:, 0].reshape(dim, dim)
        else:
            target = (np.eye(dim, dtype=complex) / dim).reshape(-1)
            weights = kernel.conj().T @ target
            rho = (kernel @ weights).reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        tr = float(np.trace(rho).real)
        if abs(tr) < 1e-12:
            raise SpindriftError("stationary kernel vector has zero trace")
        rho = rho / tr
        validate_density_matrix(rho, tol=1e-7)
        return rho, unique

    # long-time integration from two starts
    def settle(rho):
        horizon = 4.0 / max(params.max_rate(), 1e-12)
        for _ in range(24):
            res = evolve(params, rho, np.array([0.0, horizon]), basis,
                         store_states=True)
            rho = res.states[-1]
            if np.linalg.norm(lindblad_rhs(params, rho, basis)) <= 1e-10:
                return rho
            horizon *= 2.0
        return rho

    mixed = np.eye(dim, dtype=complex) / dim
    if basis == "collective":
        pure = collective_coherent_state(np.array([1.0, 0.0, 0.0]), params.N)
    else:
        pure = coherent_state(np.array([1.0, 0.0, 0.0]), params.N)
    rho_a = settle(mixed)
    rho_b = settle(pure)
    unique = bool(np.linalg.norm(rho_a - rho_b) <= 1e-8)
    return rho_a, unique


def observables(rho: np.ndarray, params: ModelParams, basis: str):
    """(<J_k>, Var(J_k)) for k = x, y, z from a density matrix."""
    _check_basis(params, basis)
    if basis == "collective":
        ops = dicke_operators(params.N)
        jops = (ops.Jx, ops.Jy, ops.Jz)
    else:
        jops = total_spin_operators(params.N)
    mean = np.array([float(np.trace(j @ rho).real) for j in jops])
    second = np.array([float(np.trace(j @ j @ rho).real) for j in jops])
    return mean, second - mean ** 2
