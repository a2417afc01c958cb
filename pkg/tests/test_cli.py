import json

import numpy as np
import pytest

from spindrift import cli


MINIMAL = {
    "model": {"N": 40, "kappa_plus": 1.0, "kappa_z": 1.0, "B": [-0.8, 0, 0]},
    "sim": {"seed": 1},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_parse_minimal_config_applies_defaults():
    config = cli.parse_config(json.dumps(MINIMAL))
    assert config.model.N == 40
    assert config.model.kappa_plus == 1.0
    assert config.sim.seed == 1
    assert config.sim.t_final == 10.0
    assert config.sim.n_output_times == 200
    assert config.sim.mode == "sphere"
    assert config.initial_type == "coherent"
    assert np.allclose(config.initial_r, [0.0, 0.0, 1.0])
    assert "csv" in config.formats


def test_parse_rejects_negative_rate():
    doc = {"model": {"N": 2, "gamma_minus": -1.0}}
    with pytest.raises(cli.ConfigError, match="gamma_minus"):
        cli.parse_config(json.dumps(doc))


def test_parse_rejects_unknown_key():
    doc = {"model": {"N": 2, "kapa_z": 1.0}}
    with pytest.raises(cli.ConfigError, match="kapa_z"):
        cli.parse_config(json.dumps(doc))
    with pytest.raises(cli.ConfigError, match="simulation"):
        cli.parse_config(json.dumps({"model": {"N": 1}, "simulation": {}}))


def test_parse_rejects_bad_json():
    with pytest.raises(cli.ConfigError, match="JSON"):
        cli.parse_config("{not json")


def test_parse_rejects_bad_types():
    with pytest.raises(cli.ConfigError, match="model.B"):
        cli.parse_config(json.dumps({"model": {"N": 1, "B": [1, 2]}}))
    with pytest.raises(cli.ConfigError, match="sim.seed"):
        cli.parse_config(json.dumps({"model": {"N": 1}, "sim": {"seed": -3}}))
    with pytest.raises(cli.ConfigError, match="sim.mode"):
        cli.parse_config(json.dumps({"model": {"N": 1}, "sim": {"mode": "disc"}}))


def small_sample_doc():
    return {
        "model": {"N": 20, "kappa_plus": 1.0, "kappa_z": 1.0, "B": [-0.8, 0, 0]},
        "sim": {"seed": 3, "t_final": 0.5, "n_traj": 50, "n_output_times": 5},
    }


def test_sample_command_writes_files(tmp_path):
    path = write_config(tmp_path, small_sample_doc())
    out = tmp_path / "out"
    assert cli.main(["sample", "--config", str(path), "--out", str(out)]) == 0
    csv_text = (out / "sample.csv").read_text()
    assert csv_text.splitlines()[0].startswith("# spindrift")
    header = [l for l in csv_text.splitlines() if not l.startswith("#")][0]
    assert header.split(",")[0] == "t"
    summary = json.loads((out / "sample_summary.json").read_text())
    assert summary["params"]["N"] == 20
    assert summary["results"]["non_physical"] is False
    assert summary["version"]


def test_sample_reruns_byte_identical(tmp_path):
    path = write_config(tmp_path, small_sample_doc())
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["sample", "--config", str(path), "--out", str(out)]) == 0
        outs.append((out / "sample.csv").read_bytes()
                    + (out / "sample_summary.json").read_bytes())
    assert outs[0] == outs[1]


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, small_sample_doc())
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sample", "--config", str(path), "--out", str(out_a)]) == 0
    assert cli.main(["sample", "--config", str(path), "--out", str(out_b),
                     "--seed", "99"]) == 0
    assert (out_a / "sample.csv").read_bytes() != (out_b / "sample.csv").read_bytes()


def test_sample_refusal_exit_code(tmp_path, capsys):
    doc = {"model": {"N": 10, "kappa_plus": 3.0, "kappa_z": 1.0},
           "sim": {"seed": 0, "t_final": 0.2, "n_traj": 10, "n_output_times": 3}}
    path = write_config(tmp_path, doc)
    code = cli.main(["sample", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_REFUSED
    err = capsys.readouterr().err
    assert "kappa_plus + kappa_minus = 3" in err
    assert "2 kappa_z = 2" in err
    # forced run proceeds but is flagged
    out = tmp_path / "forced"
    assert cli.main(["sample", "--config", str(path), "--out", str(out),
                     "--force"]) == 0
    summary = json.loads((out / "sample_summary.json").read_text())
    assert summary["results"]["non_physical"] is True


def test_config_error_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, {"model": {"N": 2, "kapa_z": 1.0}})
    assert cli.main(["sample", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "kapa_z" in capsys.readouterr().err


def test_verify_command(tmp_path):
    doc = {"model": {"N": 2}, "sim": {"seed": 5},
           "verify": {"n_param_sets": 5, "n_points": 3, "max_sites": 3}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "v"
    assert cli.main(["verify", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "verify_summary.json").read_text())
    assert summary["results"]["max_residual"] <= 1e-8
    assert summary["results"]["passed"] is True


def test_meanfield_command(tmp_path):
    doc = {"model": {"N": 4, "B": [0.0, 0.0, 1.0]},
           "sim": {"t_final": float(np.pi / 2), "n_output_times": 30},
           "initial": {"type": "coherent", "r": [1.0, 0.0, 0.0]}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "mf"
    assert cli.main(["meanfield", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "meanfield_summary.json").read_text())
    assert np.allclose(summary["results"]["endpoint"], [0.0, 1.0, 0.0], atol=1e-5)


def test_fixed_points_command(tmp_path):
    doc = {"model": {"N": 40, "kappa_plus": 1.0, "kappa_z": 1.0, "B": [-0.8, 0, 0]},
           "fixed_points": {"n_seeds": 48, "constraint": "sphere"}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "fp"
    assert cli.main(["fixed-points", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "fixed_points_summary.json").read_text())
    assert summary["results"]["n_found"] == 2
    assert summary["results"]["n_stable"] == 1


def test_exact_command_collective_guard(tmp_path, capsys):
    doc = {"model": {"N": 3, "gamma_minus": 0.5},
           "sim": {"t_final": 1.0, "n_output_times": 5},
           "exact": {"basis": "collective"}}
    path = write_config(tmp_path, doc)
    code = cli.main(["exact", "--config", str(path), "--out", str(tmp_path / "e")])
    assert code == cli.EXIT_RUNTIME
    assert "collective" in capsys.readouterr().err


def test_exact_command_full_basis(tmp_path):
    doc = {"model": {"N": 1, "gamma_minus": 0.5},
           "sim": {"t_final": 2.0, "n_output_times": 9},
           "initial": {"type": "coherent", "r": [0.0, 0.0, 1.0]},
           "exact": {"basis": "full"}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "e"
    assert cli.main(["exact", "--config", str(path), "--out", str(out)]) == 0
    rows = [l for l in (out / "exact.csv").read_text().splitlines()
            if not l.startswith("#")]
    t, jz = [], []
    for line in rows[1:]:
        cells = line.split(",")
        t.append(float(cells[0]))
        jz.append(float(cells[3]))
    # <Jz> = exp(-t) - 1/2 under a single local decay channel
    assert np.abs(np.array(jz) - (np.exp(-np.array(t)) - 0.5)).max() < 1e-6


def test_compare_command(tmp_path):
    doc = {"model": {"N": 20, "kappa_plus": 1.0, "kappa_z": 1.0, "B": [-0.8, 0, 0]},
           "sim": {"seed": 2, "t_final": 1.0, "n_traj": 200, "n_output_times": 11}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "compare_summary.json").read_text())
    assert summary["results"]["max_over_components"] < 5.0


def test_density_command_with_svg(tmp_path):
    doc = {"model": {"N": 30, "kappa_plus": 1.0, "kappa_z": 1.0, "B": [-0.8, 0, 0]},
           "sim": {"seed": 8, "t_final": 3.0, "n_traj": 300, "n_output_times": 7},
           "density": {"n_eta": 16, "n_phi": 24},
           "output": {"formats": ["csv", "json", "svg"]}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "d"
    assert cli.main(["density", "--config", str(path), "--out", str(out)]) == 0
    assert (out / "density.svg").exists()
    summary = json.loads((out / "density_summary.json").read_text())
    assert 0.0 <= summary["results"]["spread"] <= 1.0
    weights = {}
    for line in (out / "density.csv").read_text().splitlines():
        if line.startswith("#") or line.startswith("eta"):
            continue
        _, _, w = line.split(",")
        weights[len(weights)] = float(w)
    assert sum(weights.values()) == pytest.approx(1.0, abs=1e-9)


def test_coeffs_command(tmp_path):
    doc = {"model": {"N": 5, "kappa_plus": 0.5, "kappa_minus": 0.2, "kappa_z": 1.0}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "c"
    assert cli.main(["coeffs", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "coeffs_summary.json").read_text())
    assert summary["results"]["condition"]["condition_holds"] is True
    assert summary["results"]["scan"]["condition_holds"] is True


def test_samples_initial_from_file(tmp_path):
    gen = np.random.default_rng(0)
    pts = gen.normal(size=(30, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    sample_file = tmp_path / "starts.csv"
    np.savetxt(sample_file, pts, delimiter=",")
    doc = {"model": {"N": 10, "kappa_plus": 0.5, "kappa_z": 1.0},
           "sim": {"seed": 4, "t_final": 0.3, "n_traj": 30, "n_output_times": 3},
           "initial": {"type": "samples", "path": str(sample_file)}}
    path = write_config(tmp_path, doc)
    out = tmp_path / "s"
    assert cli.main(["sample", "--config", str(path), "--out", str(out)]) == 0


def test_missing_config_file(capsys):
    assert cli.main(["sample", "--config", "/nonexistent.json"]) == cli.EXIT_CONFIG
