"""Configuration-driven command-line front end.

One JSON config drives every workflow; commands emit CSV data files plus a
JSON summary (and optional SVG plots).  Reruns with the same config and
seed are byte-identical: nothing time- or host-dependent is ever written.

Exit codes: 0 success, 2 config/validation error, 3 positivity refusal,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, coeffs, exact, meanfield, sde
from .model import ModelParams, SpindriftError
from .sde import ConditionRefusalError, SdeConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REFUSED = 3
EXIT_RUNTIME = 4

COMMANDS = ("coeffs", "meanfield", "fixed-points", "sample", "exact",
            "compare", "verify", "density")


class ConfigError(SpindriftError):
    """Invalid run configuration; the message names key and constraint."""


@dataclass
class RunConfig:
    model: ModelParams
    sim: SdeConfig
    initial_type: str           # "coherent" | "samples"
    initial_r: np.ndarray | None
    initial_path: str | None
    out_dir: str
    formats: tuple[str, ...]
    rate_unit: str
    extras: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


_MODEL_KEYS = {"N", "B", "kappa_plus", "kappa_minus", "kappa_z",
               "gamma_plus", "gamma_minus", "gamma_z"}
_SIM_KEYS = {"dt", "t_final", "n_output_times", "n_traj", "seed", "mode",
             "force", "scheme", "pole_clamp"}
_INITIAL_KEYS = {"type", "r", "path"}
_OUTPUT_KEYS = {"directory", "formats", "rate_unit"}
_EXTRA_SECTIONS = {
    "fixed_points": {"n_seeds", "constraint"},
    "density": {"n_eta", "n_phi"},
    "verify": {"n_param_sets", "n_points", "max_sites"},
    "exact": {"basis", "steady_state"},
}
_TOP_KEYS = {"model", "sim", "initial", "output"} | set(_EXTRA_SECTIONS)


def _require(cond: bool, key: str, constraint: str):
    if not cond:
        raise ConfigError(f"config key '{key}': {constraint}")


def _check_unknown(section: dict, allowed: set, prefix: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown config key '{prefix}{key}'")


def _number(section, key, prefix, default=None, minimum=None, allow_none=False):
    value = section.get(key, default)
    if value is None and allow_none:
        return None
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             prefix + key, f"must be a number, got {value!r}")
    if minimum is not None:
        _require(value >= minimum, prefix + key, f"must be >= {minimum}, got {value}")
    return float(value)


def _integer(section, key, prefix, default, minimum):
    value = section.get(key, default)
    _require(isinstance(value, int) and not isinstance(value, bool),
             prefix + key, f"must be an integer, got {value!r}")
    _require(value >= minimum, prefix + key, f"must be >= {minimum}, got {value}")
    return int(value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Unknown keys anywhere are rejected; every constraint violation names
    the offending key.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    _require(isinstance(raw, dict), "<root>", "must be a JSON object")
    _check_unknown(raw, _TOP_KEYS, "")
    _require("model" in raw, "model", "section is required")

    model_raw = raw["model"]
    _require(isinstance(model_raw, dict), "model", "must be an object")
    _check_unknown(model_raw, _MODEL_KEYS, "model.")
    n_sites = _integer(model_raw, "N", "model.", default=1, minimum=1)
    b_raw = model_raw.get("B", [0.0, 0.0, 0.0])
    _require(isinstance(b_raw, list) and len(b_raw) == 3
             and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                     for v in b_raw),
             "model.B", f"must be a list of 3 numbers, got {b_raw!r}")
    rates = {}
    for key in ("kappa_plus", "kappa_minus", "kappa_z",
                "gamma_plus", "gamma_minus", "gamma_z"):
        rates[key] = _number(model_raw, key, "model.", default=0.0, minimum=0.0)
    try:
        params = ModelParams(B=tuple(float(v) for v in b_raw), N=n_sites, **rates)
    except ValueError as err:
        raise ConfigError(f"config key 'model': {err}") from err

    sim_raw = raw.get("sim", {})
    _require(isinstance(sim_raw, dict), "sim", "must be an object")
    _check_unknown(sim_raw, _SIM_KEYS, "sim.")
    seed_val = sim_raw.get("seed", 0)
    _require(isinstance(seed_val, int) and not isinstance(seed_val, bool)
             and 0 <= seed_val < 2 ** 64,
             "sim.seed", f"must be an integer in [0, 2^64), got {seed_val!r}")
    mode = sim_raw.get("mode", "sphere")
    _require(mode in ("sphere", "ball"), "sim.mode",
             f"must be 'sphere' or 'ball', got {mode!r}")
    scheme = sim_raw.get("scheme", "embedded")
    _require(scheme in ("embedded", "chart"), "sim.scheme",
             f"must be 'embedded' or 'chart', got {scheme!r}")
    force = sim_raw.get("force", False)
    _require(isinstance(force, bool), "sim.force", f"must be a boolean, got {force!r}")
    try:
        sim = SdeConfig(
            t_final=_number(sim_raw, "t_final", "sim.", default=10.0, minimum=1e-12),
            n_traj=_integer(sim_raw, "n_traj", "sim.", default=1000, minimum=1),
            seed=seed_val,
            dt=_number(sim_raw, "dt", "sim.", default=None, minimum=1e-15,
                       allow_none=True),
            n_output_times=_integer(sim_raw, "n_output_times", "sim.",
                                    default=200, minimum=2),
            mode=mode, force=force, scheme=scheme,
            pole_clamp=_number(sim_raw, "pole_clamp", "sim.",
                               default=sde.POLE_CLAMP_DEFAULT, minimum=1e-15),
        )
    except ValueError as err:
        raise ConfigError(f"config key 'sim': {err}") from err

    init_raw = raw.get("initial", {"type": "coherent", "r": [0.0, 0.0, 1.0]})
    _require(isinstance(init_raw, dict), "initial", "must be an object")
    _check_unknown(init_raw, _INITIAL_KEYS, "initial.")
    init_type = init_raw.get("type", "coherent")
    _require(init_type in ("coherent", "samples"), "initial.type",
             f"must be 'coherent' or 'samples', got {init_type!r}")
    initial_r = None
    initial_path = None
    if init_type == "coherent":
        r_raw = init_raw.get("r", [0.0, 0.0, 1.0])
        _require(isinstance(r_raw, list) and len(r_raw) == 3
                 and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                         for v in r_raw),
                 "initial.r", f"must be a list of 3 numbers, got {r_raw!r}")
        initial_r = np.asarray(r_raw, dtype=float)
        _require(np.linalg.norm(initial_r) <= 1.0 + 1e-9, "initial.r",
                 f"must lie in the unit ball, |r| = {np.linalg.norm(initial_r):.6f}")
    else:
        initial_path = init_raw.get("path")
        _require(isinstance(initial_path, str) and initial_path,
                 "initial.path", "must be a non-empty string for type 'samples'")

    out_raw = raw.get("output", {})
    _require(isinstance(out_raw, dict), "output", "must be an object")
    _check_unknown(out_raw, _OUTPUT_KEYS, "output.")
    formats = out_raw.get("formats", ["csv", "json"])
    _require(isinstance(formats, list) and formats
             and all(f in ("csv", "json", "svg") for f in formats),
             "output.formats", f"must be a list drawn from csv/json/svg, got {formats!r}")
    if "csv" not in formats:
        formats = ["csv"] + formats  # CSV output is mandatory
    rate_unit = out_raw.get("rate_unit", "rate")
    _require(isinstance(rate_unit, str) and rate_unit, "output.rate_unit",
             "must be a non-empty string")

    extras = {}
    for section, allowed in _EXTRA_SECTIONS.items():
        sub = raw.get(section, {})
        _require(isinstance(sub, dict), section, "must be an object")
        _check_unknown(sub, allowed, section + ".")
        extras[section] = sub

    return RunConfig(model=params, sim=sim, initial_type=init_type,
                     initial_r=initial_r, initial_path=initial_path,
                     out_dir=str(out_raw.get("directory", ".")),
                     formats=tuple(dict.fromkeys(formats)), rate_unit=rate_unit,
                     extras=extras, raw=raw)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _params_dict(params: ModelParams) -> dict:
    return {"N": params.N, "B": list(params.B),
            "kappa_plus": params.kappa_plus, "kappa_minus": params.kappa_minus,
            "kappa_z": params.kappa_z, "gamma_plus": params.gamma_plus,
            "gamma_minus": params.gamma_minus, "gamma_z": params.gamma_z}


def _sim_dict(sim: SdeConfig) -> dict:
    return {"t_final": sim.t_final, "n_traj": sim.n_traj, "seed": sim.seed,
            "dt": sim.dt, "n_output_times": sim.n_output_times,
            "mode": sim.mode, "force": sim.force, "scheme": sim.scheme}


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_csv(path: Path, command: str, config: RunConfig,
              header: list[str], columns: list) -> None:
    """CSV with embedded parameter echo; byte-stable across reruns."""
    lines = [
        f"# spindrift {__version__}",
        f"# command: {command}",
        f"# params: {json.dumps(_params_dict(config.model), sort_keys=True)}",
        f"# sim: {json.dumps(_sim_dict(config.sim), sort_keys=True)}",
        f"# units: rates in {config.rate_unit}; time in 1/{config.rate_unit}",
        ",".join(header),
    ]
    rows = len(columns[0]) if columns else 0
    for i in range(rows):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n")


def write_summary(path: Path, command: str, config: RunConfig, payload: dict,
                  outputs: list[str]) -> None:
    doc = {
        "artifact": "spindrift",
        "version": __version__,
        "command": command,
        "params": _params_dict(config.model),
        "sim": _sim_dict(config.sim),
        "units": {"rates": config.rate_unit, "time": f"1/{config.rate_unit}"},
        "outputs": sorted(outputs),
        "results": payload,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2,
                               default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialize {type(obj)}")


def _load_samples(path: str, n_traj: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError(f"initial.path: sample file must have 3 columns (x,y,z), "
                          f"got {data.shape[1]}")
    if data.shape[0] != n_traj:
        raise ConfigError(f"initial.path: sample file has {data.shape[0]} rows "
                          f"but sim.n_traj = {n_traj}")
    return data


def _initial_array(config: RunConfig):
    if config.initial_type == "coherent":
        return config.initial_r
    return _load_samples(config.initial_path, config.sim.n_traj)


def _uniform_grid(config: RunConfig) -> np.ndarray:
    return np.linspace(0.0, config.sim.t_final, config.sim.n_output_times)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_coeffs(config: RunConfig, out: Path):
    params = config.model
    etas = np.linspace(-1.0 + 1e-6, 1.0 - 1e-6, 401)
    lam1 = np.empty_like(etas)
    lam2 = np.empty_like(etas)
    for i, eta in enumerate(etas):
        eig = coeffs.sphere_eigenvalues(params, eta)
        lam1[i], lam2[i] = eig.lambda1, eig.lambda2
    report = coeffs.scan_positivity(params, region=config.sim.mode, resolution=1000)
    point = config.initial_r if config.initial_r is not None else np.array([0., 0., 1.])
    dd = coeffs.drift_diffusion_cartesian(params, point)

    files = []
    csv_path = out / "coeffs.csv"
    write_csv(csv_path, "coeffs", config, ["eta", "lambda1", "lambda2"],
              [etas, lam1, lam2])
    files.append(csv_path.name)
    payload = {
        "condition": coeffs.condition_summary(params),
        "scan": {"condition_holds": report.condition_holds,
                 "min_eigenvalue_found": report.min_eigenvalue_found,
                 "argmin": list(report.argmin), "region": report.region,
                 "resolution": report.resolution},
        "point": {"r": point.tolist(), "drift": dd.a.tolist(),
                  "diffusion": dd.D.tolist()},
    }
    if "svg" in config.formats:
        from . import plots
        svg = out / "coeffs.svg"
        plots.line_series(svg, etas, {"lambda1": lam1, "lambda2": lam2},
                          "eta", "rate", "sphere diffusion eigenvalues")
        files.append(svg.name)
    return payload, files


def _cmd_meanfield(config: RunConfig, out: Path):
    t_grid = _uniform_grid(config)
    traj = meanfield.integrate_meanfield(config.model, config.initial_r, t_grid,
                                         dt=config.sim.dt)
    radius = np.linalg.norm(traj.r, axis=1)
    files = []
    csv_path = out / "meanfield.csv"
    write_csv(csv_path, "meanfield", config, ["t", "x", "y", "z", "radius"],
              [traj.t, traj.r[:, 0], traj.r[:, 1], traj.r[:, 2], radius])
    files.append(csv_path.name)
    payload = {"endpoint": traj.endpoint.tolist(),
               "endpoint_radius": float(radius[-1]), "dt": traj.dt}
    if "svg" in config.formats:
        from . import plots
        svg = out / "meanfield.svg"
        plots.line_series(svg, traj.t,
                          {"x": traj.r[:, 0], "y": traj.r[:, 1],
                           "z": traj.r[:, 2], "|r|": radius},
                          "t", "component", "mean-field trajectory")
        files.append(svg.name)
    return payload, files


def _cmd_fixed_points(config: RunConfig, out: Path):
    section = config.extras.get("fixed_points", {})
    n_seeds = int(section.get("n_seeds", 64))
    constraint = section.get("constraint", "ball")
    if constraint not in ("ball", "sphere"):
        raise ConfigError(f"config key 'fixed_points.constraint': must be "
                          f"'ball' or 'sphere', got {constraint!r}")
    points = meanfield.find_fixed_points(config.model, n_seeds=n_seeds,
                                         constraint=constraint)
    files = []
    cols = {"index": [], "x": [], "y": [], "z": [], "residual": [],
            "max_re_eig": [], "classification": []}
    payload_points = []
    for i, fp in enumerate(points):
        cols["index"].append(i)
        cols["x"].append(fp.location[0])
        cols["y"].append(fp.location[1])
        cols["z"].append(fp.location[2])
        cols["residual"].append(fp.residual)
        cols["max_re_eig"].append(float(np.max(fp.eigenvalues.real)))
        cols["classification"].append(fp.classification)
        payload_points.append({
            "location": fp.location.tolist(), "residual": fp.residual,
            "eigenvalues": [{"re": e.real, "im": e.imag} for e in fp.eigenvalues],
            "classification": fp.classification, "constraint": fp.constraint})
    csv_path = out / "fixed_points.csv"
    write_csv(csv_path, "fixed-points", config, list(cols.keys()),
              list(cols.values()))
    files.append(csv_path.name)
    payload = {"constraint": constraint, "n_seeds": n_seeds,
               "n_found": len(points), "fixed_points": payload_points,
               "n_stable": sum(fp.classification == "stable" for fp in points)}
    return payload, files


def _run_sample(config: RunConfig) -> sde.Ensemble:
    return sde.run_ensemble(config.model, _initial_array(config), config.sim)


def _observable_columns(obs: sde.ObservableSeries):
    header = ["t"]
    cols = [obs.t]
    for c, name in enumerate(("jx", "jy", "jz")):
        header += [name, f"{name}_se"]
        cols += [obs.mean[:, c], obs.mean_se[:, c]]
    for c, name in enumerate(("var_jx", "var_jy", "var_jz")):
        header += [name, f"{name}_se"]
        cols += [obs.var[:, c], obs.var_se[:, c]]
    return header, cols


def _cmd_sample(config: RunConfig, out: Path):
    ens = _run_sample(config)
    obs = sde.ensemble_observables(ens)
    header, cols = _observable_columns(obs)
    files = []
    csv_path = out / "sample.csv"
    write_csv(csv_path, "sample", config, header, cols)
    files.append(csv_path.name)
    payload = {
        "condition": coeffs.condition_summary(config.model),
        "non_physical": ens.non_physical,
        "n_boundary_clamps": ens.n_boundary_clamps,
        "n_psd_clamps": ens.n_psd_clamps,
        "final_mean": obs.mean[-1].tolist(),
        "final_var": obs.var[-1].tolist(),
    }
    if "svg" in config.formats:
        from . import plots
        svg = out / "sample.svg"
        plots.line_series(svg, obs.t,
                          {"<Jx>": obs.mean[:, 0], "<Jy>": obs.mean[:, 1],
                           "<Jz>": obs.mean[:, 2]},
                          "t", "collective spin", "sampled observables")
        files.append(svg.name)
    return payload, files


def _exact_basis(config: RunConfig) -> str:
    basis = config.extras.get("exact", {}).get("basis", "auto")
    if basis == "auto":
        basis = "collective" if config.model.local_rates_zero else "full"
    if basis not in ("collective", "full"):
        raise ConfigError(f"config key 'exact.basis': must be 'collective', "
                          f"'full' or 'auto', got {basis!r}")
    return basis


def _exact_initial(config: RunConfig, basis: str) -> np.ndarray:
    if config.initial_type != "coherent":
        raise ConfigError("config key 'initial.type': the exact solver needs a "
                          "coherent initial state")
    from .model import coherent_state
    if basis == "collective":
        return exact.collective_coherent_state(config.initial_r, config.model.N)
    return coherent_state(config.initial_r, config.model.N)


def _cmd_exact(config: RunConfig, out: Path):
    basis = _exact_basis(config)
    rho0 = _exact_initial(config, basis)
    t_grid = _uniform_grid(config)
    res = exact.evolve(config.model, rho0, t_grid, basis, dt=config.sim.dt)
    files = []
    header = ["t", "jx", "jy", "jz", "var_jx", "var_jy", "var_jz"]
    cols = [res.t] + [res.mean[:, c] for c in range(3)] \
        + [res.var[:, c] for c in range(3)]
    csv_path = out / "exact.csv"
    write_csv(csv_path, "exact", config, header, cols)
    files.append(csv_path.name)
    payload = {"basis": basis, "trace_drift": res.trace_drift,
               "final_mean": res.mean[-1].tolist(),
               "final_var": res.var[-1].tolist()}
    dim = config.model.N + 1 if basis == "collective" else 2 ** config.model.N
    want_steady = config.extras.get("exact", {}).get("steady_state",
                                                     dim <= exact.MAX_NULLSPACE_DIM)
    if want_steady:
        rho_ss, unique = exact.steady_state(config.model, basis)
        mean, var = exact.observables(rho_ss, config.model, basis)
        payload["steady_state"] = {"unique": unique, "mean": mean.tolist(),
                                   "var": var.tolist()}
    if "svg" in config.formats:
        from . import plots
        svg = out / "exact.svg"
        plots.line_series(svg, res.t,
                          {"<Jx>": res.mean[:, 0], "<Jy>": res.mean[:, 1],
                           "<Jz>": res.mean[:, 2]},
                          "t", "collective spin", f"exact ({basis}) observables")
        files.append(svg.name)
    return payload, files


def _cmd_compare(config: RunConfig, out: Path):
    basis = _exact_basis(config)
    ens = _run_sample(config)
    obs = sde.ensemble_observables(ens)
    rho0 = _exact_initial(config, basis)
    res = exact.evolve(config.model, rho0, obs.t, basis, dt=config.sim.dt)

    header = ["t"]
    cols = [obs.t]
    max_dev = {}
    for c, name in enumerate(("jx", "jy", "jz")):
        dev = np.abs(obs.mean[:, c] - res.mean[:, c])
        scale = np.maximum(obs.mean_se[:, c], 1e-12)
        header += [f"{name}_sde", f"{name}_se", f"{name}_exact", f"{name}_dev_se"]
        cols += [obs.mean[:, c], obs.mean_se[:, c], res.mean[:, c], dev / scale]
        max_dev[name] = float((dev / scale).max())
    for c, name in enumerate(("var_jx", "var_jy", "var_jz")):
        header += [f"{name}_sde", f"{name}_exact"]
        cols += [obs.var[:, c], res.var[:, c]]

    files = []
    csv_path = out / "compare.csv"
    write_csv(csv_path, "compare", config, header, cols)
    files.append(csv_path.name)
    payload = {"basis": basis, "max_abs_dev_in_se": max_dev,
               "max_over_components": max(max_dev.values()),
               "non_physical": ens.non_physical,
               "trace_drift": res.trace_drift}
    if "svg" in config.formats:
        from . import plots
        svg = out / "compare.svg"
        plots.line_series(svg, obs.t,
                          {"<Jx> sde": obs.mean[:, 0], "<Jx> exact": res.mean[:, 0],
                           "<Jz> sde": obs.mean[:, 2], "<Jz> exact": res.mean[:, 2]},
                          "t", "collective spin", "stochastic vs exact")
        files.append(svg.name)
    return payload, files


def _cmd_verify(config: RunConfig, out: Path):
    section = config.extras.get("verify", {})
    n_sets = int(section.get("n_param_sets", 20))
    n_points = int(section.get("n_points", 5))
    max_sites = int(section.get("max_sites", 4))
    gen = np.random.default_rng(config.sim.seed)
    rows = {"set": [], "N": [], "point": [], "residual": []}
    worst = 0.0
    for s in range(n_sets):
        params = ModelParams(
            B=tuple(gen.normal(scale=1.5, size=3)),
            kappa_plus=gen.uniform(0, 2), kappa_minus=gen.uniform(0, 2),
            kappa_z=gen.uniform(0, 2), gamma_plus=gen.uniform(0, 2),
            gamma_minus=gen.uniform(0, 2), gamma_z=gen.uniform(0, 2),
            N=int(gen.integers(1, max_sites + 1)))
        for k in range(n_points):
            v = gen.normal(size=3)
            v *= gen.uniform(0.05, 0.95) / np.linalg.norm(v)
            res = coeffs.verify_coefficients(params, v, params.N)
            rows["set"].append(s)
            rows["N"].append(params.N)
            rows["point"].append(k)
            rows["residual"].append(res)
            worst = max(worst, res)
    files = []
    csv_path = out / "verify.csv"
    write_csv(csv_path, "verify", config, list(rows.keys()), list(rows.values()))
    files.append(csv_path.name)
    passed = worst <= 1e-8
    payload = {"n_param_sets": n_sets, "n_points": n_points,
               "max_residual": worst, "tolerance": 1e-8, "passed": passed}
    if not passed:
        raise SpindriftError(f"generator-identity residual {worst:.3e} exceeds 1e-8")
    return payload, files


def _cmd_density(config: RunConfig, out: Path):
    section = config.extras.get("density", {})
    n_eta = int(section.get("n_eta", 60))
    n_phi = int(section.get("n_phi", 120))
    ens = _run_sample(config)
    dens = sde.density_estimate(ens, time_index=len(ens.times) - 1,
                                n_eta=n_eta, n_phi=n_phi)
    eta_centers = 0.5 * (dens.eta_edges[:-1] + dens.eta_edges[1:])
    phi_centers = 0.5 * (dens.phi_edges[:-1] + dens.phi_edges[1:])
    eta_col, phi_col, w_col = [], [], []
    for i, ec in enumerate(eta_centers):
        for j, pc in enumerate(phi_centers):
            eta_col.append(ec)
            phi_col.append(pc)
            w_col.append(dens.weights[i, j])
    files = []
    csv_path = out / "density.csv"
    write_csv(csv_path, "density", config, ["eta", "phi", "weight"],
              [eta_col, phi_col, w_col])
    files.append(csv_path.name)
    payload = {"time": float(ens.times[-1]), "n_eta": n_eta, "n_phi": n_phi,
               "resultant_length": dens.resultant_length, "spread": dens.spread,
               "non_physical": ens.non_physical}
    if "svg" in config.formats:
        from . import plots
        svg = out / "density.svg"
        plots.sphere_heatmap(svg, dens.eta_edges, dens.phi_edges, dens.weights,
                             "steady-state phase-space density")
        files.append(svg.name)
    return payload, files


_HANDLERS = {
    "coeffs": _cmd_coeffs,
    "meanfield": _cmd_meanfield,
    "fixed-points": _cmd_fixed_points,
    "sample": _cmd_sample,
    "exact": _cmd_exact,
    "compare": _cmd_compare,
    "verify": _cmd_verify,
    "density": _cmd_density,
}


def execute(command: str, config: RunConfig) -> int:
    """Run one command; returns the exit status and writes output files."""
    if command not in _HANDLERS:
        raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload, files = _HANDLERS[command](config, out)
    if "json" in config.formats:
        summary = out / f"{command.replace('-', '_')}_summary.json"
        write_summary(summary, command, config, payload, files + [summary.name])
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spindrift",
        description="Driven dissipative spin-ensemble simulator: exact, "
                    "mean-field, and stochastic phase-space solvers.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--force", action="store_true",
                        help="sample despite a positivity violation (flagged)")
    parser.add_argument("--format", help="comma-separated subset of csv,svg,json")
    parser.add_argument("--seed", type=int, help="override sim.seed")
    args = parser.parse_args(argv)

    try:
        config = parse_config(Path(args.config).read_text())
        if args.out:
            config.out_dir = args.out
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must lie in [0, 2^64)")
            config.sim = SdeConfig(**{**_sim_kwargs(config.sim), "seed": args.seed})
        if args.force:
            config.sim = SdeConfig(**{**_sim_kwargs(config.sim), "force": True})
        if args.format:
            formats = tuple(dict.fromkeys(args.format.split(",")))
            for f in formats:
                if f not in ("csv", "json", "svg"):
                    raise ConfigError(f"--format: unknown format {f!r}")
            if "csv" not in formats:
                formats = ("csv",) + formats
            config.formats = formats
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return execute(args.command, config)
    except ConditionRefusalError as err:
        print(f"refused: {err}", file=sys.stderr)
        return EXIT_REFUSED
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpindriftError, ValueError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


def _sim_kwargs(sim: SdeConfig) -> dict:
    return {"t_final": sim.t_final, "n_traj": sim.n_traj, "seed": sim.seed,
            "dt": sim.dt, "n_output_times": sim.n_output_times, "mode": sim.mode,
            "force": sim.force, "scheme": sim.scheme, "pole_clamp": sim.pole_clamp}


if __name__ == "__main__":
    sys.exit(main())
