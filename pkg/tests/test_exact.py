import numpy as np
import pytest

from spindrift import coeffs, exact
from spindrift.model import ModelParams, coherent_state


def test_dicke_operators_spin_half():
    ops = exact.dicke_operators(1)
    assert np.allclose(ops.Jz, np.diag([0.5, -0.5]))
    nz = ops.Jp[np.abs(ops.Jp) > 0]
    assert nz.shape == (1,) and nz[0] == pytest.approx(1.0)


@pytest.mark.parametrize("n_sites", [1, 2, 5, 40])
def test_dicke_casimir_and_algebra(n_sites):
    ops = exact.dicke_operators(n_sites)
    j = 0.5 * n_sites
    J2 = ops.Jx @ ops.Jx + ops.Jy @ ops.Jy + ops.Jz @ ops.Jz
    assert np.abs(J2 - j * (j + 1) * np.eye(n_sites + 1)).max() < 1e-12
    assert np.abs(ops.Jz @ ops.Jp - ops.Jp @ ops.Jz - ops.Jp).max() < 1e-12
    assert np.abs(ops.Jz @ ops.Jm - ops.Jm @ ops.Jz + ops.Jm).max() < 1e-12
    assert np.allclose(ops.Jp, ops.Jm.conj().T)


def test_dicke_n2_ladder_entries():
    ops = exact.dicke_operators(2)
    entries = np.abs(ops.Jp[np.abs(ops.Jp) > 0])
    assert np.allclose(np.sort(entries), [np.sqrt(2), np.sqrt(2)])


def test_collective_coherent_matches_full_space():
    """For |r| = 1 the product state lives in the symmetric subspace; its
    collective-basis moments must match the full tensor-product state."""
    gen = np.random.default_rng(0)
    for n_sites in (1, 2, 4):
        v = gen.normal(size=3)
        v /= np.linalg.norm(v)
        rho_c = exact.collective_coherent_state(v, n_sites)
        p = ModelParams(N=n_sites)
        mean_c, var_c = exact.observables(rho_c, p, "collective")
        rho_f = coherent_state(v, n_sites)
        mean_f, var_f = exact.observables(rho_f, p, "full")
        assert np.allclose(mean_c, mean_f, atol=1e-12)
        assert np.allclose(var_c, var_f, atol=1e-12)


def test_rhs_trace_free_and_oracle_consistent():
    gen = np.random.default_rng(1)
    p = ModelParams(B=(0.2, -0.7, 0.4), kappa_plus=0.8, kappa_minus=0.3,
                    kappa_z=0.5, gamma_plus=0.2, gamma_minus=0.6, gamma_z=0.4,
                    N=3)
    v = gen.normal(size=3) * 0.4
    rho = coherent_state(v, 3)
    out = exact.lindblad_rhs(p, rho, "full")
    assert abs(np.trace(out)) < 1e-13
    assert np.abs(out - coeffs.generator_oracle(p, v, 3)).max() < 1e-12


def test_rhs_infinite_temperature_fixed_point():
    for n_sites in (1, 2, 3, 4):
        p = ModelParams(kappa_plus=0.9, kappa_minus=0.9, N=n_sites)
        rho = np.eye(2 ** n_sites, dtype=complex) / 2 ** n_sites
        assert np.abs(exact.lindblad_rhs(p, rho, "full")).max() < 1e-13


def test_collective_basis_rejects_local_rates():
    p = ModelParams(kappa_plus=1.0, gamma_z=0.5, N=4)
    rho = np.eye(5, dtype=complex) / 5
    with pytest.raises(exact.BasisError):
        exact.lindblad_rhs(p, rho, "collective")


def test_evolve_rabi():
    p = ModelParams(B=(0.7, 0.0, 0.0), N=1)
    t = np.linspace(0.0, 6.0, 25)
    res = exact.evolve(p, coherent_state([0, 0, 1], 1), t, "full")
    assert np.abs(res.mean[:, 2] - 0.5 * np.cos(0.7 * t)).max() < 1e-8


def test_evolve_local_decay():
    p = ModelParams(gamma_minus=0.5, N=1)
    t = np.linspace(0.0, 4.0, 17)
    res = exact.evolve(p, coherent_state([0, 0, 1], 1), t, "full",
                       store_states=True)
    population = np.array([s[0, 0].real for s in res.states])
    assert np.abs(population - np.exp(-t)).max() < 1e-8


def test_evolve_collective_dephasing_decay():
    p = ModelParams(kappa_z=1.0, N=40)
    rho0 = exact.collective_coherent_state([1.0, 0.0, 0.0], 40)
    t = np.linspace(0.0, 20.0, 11)
    res = exact.evolve(p, rho0, t, "collective")
    assert np.abs(res.mean[:, 0] - 20.0 * np.exp(-t / 40.0)).max() < 1e-6
    assert res.trace_drift <= 1e-9


def test_full_vs_collective_consistency():
    p = ModelParams(B=(0.5, 0.2, -0.3), kappa_plus=0.7, kappa_minus=0.2,
                    kappa_z=0.4, N=4)
    v = np.array([0.6, 0.0, 0.8])
    t = np.linspace(0.0, 3.0, 13)
    res_c = exact.evolve(p, exact.collective_coherent_state(v, 4), t, "collective")
    res_f = exact.evolve(p, coherent_state(v, 4), t, "full")
    assert np.abs(res_c.mean - res_f.mean).max() < 1e-8
    assert np.abs(res_c.var - res_f.var).max() < 1e-8


def test_evolve_preserves_state_invariants():
    p = ModelParams(B=(0.4, 0.0, 0.8), kappa_plus=0.5, kappa_z=0.5,
                    gamma_minus=0.3, N=3)
    t = np.linspace(0.0, 5.0, 6)
    res = exact.evolve(p, coherent_state([0, 0, 1], 3), t, "full",
                       store_states=True)
    for rho in res.states:
        assert np.linalg.norm(rho - rho.conj().T) < 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-8


def test_steady_state_unique_decay():
    p = ModelParams(gamma_minus=0.8, N=2)
    rho, unique = exact.steady_state(p, "full")
    assert unique
    want = np.zeros((4, 4), dtype=complex)
    want[3, 3] = 1.0  # both sites in the ground state
    assert np.abs(rho - want).max() < 1e-8


def test_steady_state_dephasing_degenerate():
    p = ModelParams(kappa_z=1.0, N=4)
    rho, unique = exact.steady_state(p, "collective")
    assert not unique
    assert abs(np.trace(rho).real - 1.0) < 1e-9
    assert np.abs(exact.lindblad_rhs(p, rho, "collective")).max() < 1e-9


def test_steady_state_crf_small():
    p = ModelParams(B=(-0.8, 0.0, 0.0), kappa_plus=1.0, kappa_z=1.0, N=10)
    rho, unique = exact.steady_state(p, "collective")
    assert unique
    mean, _ = exact.observables(rho, p, "collective")
    # mean-field attractor at (0, 0.8, 0.6); N = 10 sits within ~0.15 of it
    assert abs(mean[0] / 5.0) < 0.05
    assert mean[1] / 5.0 > 0.5 and mean[2] / 5.0 > 0.35


def test_superradiant_burst_scaling():
    """Collective decay from the fully excited state shows a superradiant
    burst: with the intensive 2 kappa / N channel normalization the initial
    rate |d<Jz>/dt| is N-independent (= 2 kappa) while the peak rate grows
    ~ kappa N / 2, so the burst ratio peak/initial grows with N.
    Independent emitters would give a monotonically decaying rate
    (ratio 1) at every N."""
    burst = {}
    for n_sites in (4, 8, 16):
        p = ModelParams(kappa_minus=1.0, N=n_sites)
        rho0 = exact.collective_coherent_state([0.0, 0.0, 1.0], n_sites)
        t = np.linspace(0.0, 10.0, 1200)
        res = exact.evolve(p, rho0, t, "collective")
        rate = np.abs(np.gradient(res.mean[:, 2], t))
        assert rate[0] == pytest.approx(2.0, rel=0.02)
        burst[n_sites] = rate.max() / rate[0]
    assert 1.0 < burst[4] < burst[8] < burst[16]
    assert burst[16] > 3.0
    assert burst[16] / burst[4] > 1.5


def test_trace_drift_guard_raises_on_unstable_step():
    p = ModelParams(kappa_minus=1.0, N=30)
    rho0 = exact.collective_coherent_state([1.0, 0.0, 0.0], 30)
    with pytest.raises(exact.StepSizeError):
        exact.evolve(p, rho0, np.linspace(0.0, 50.0, 3), "collective", dt=2.0)
