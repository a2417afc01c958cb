"""Shared analysis helpers for the test suite."""

import numpy as np

from spindrift import sde


def log_slope(t, values):
    """Least-squares slope of -log(values) against t."""
    y = np.log(values)
    A = np.stack([np.ones_like(t), -t], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1])


def block_decay_rate(ens: sde.Ensemble, component: int, n_blocks: int = 20):
    """Decay rate of <J_component> with an honest Monte Carlo error bar.

    The ensemble mean has time-correlated noise (the same trajectories enter
    every output time), so a curve fit cannot use residual-based errors.
    Instead the trajectories are split into independent blocks, the rate is
    fitted per block, and the block scatter gives the standard error.
    """
    n_traj = ens.n_traj
    block = n_traj // n_blocks
    rates = []
    for b in range(n_blocks):
        sub = sde.Ensemble(
            times=ens.times,
            samples=ens.samples[:, b * block:(b + 1) * block],
            params=ens.params, config=ens.config)
        obs = sde.ensemble_observables(sub)
        rates.append(log_slope(obs.t, obs.mean[:, component]))
    rates = np.asarray(rates)
    return float(rates.mean()), float(rates.std(ddof=1) / np.sqrt(n_blocks))
