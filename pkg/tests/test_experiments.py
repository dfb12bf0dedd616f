import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from thinfilm.experiments import (
    ACCEPTANCE_SET,
    BUILTIN,
    REPORT_SCHEMA,
    ExperimentSpec,
    initial_cells,
    rate_report,
    resolve_specs,
    run_experiment,
)
from thinfilm.simulator import Grid, SolverConfig
from thinfilm.transform import v_star


def test_builtin_targets():
    assert BUILTIN["com-rate-N1"].target_mu == 6
    assert BUILTIN["centered-dilation-N1"].target_mu == 30
    assert BUILTIN["radial-dilation-N2"].target_mu == 48
    assert BUILTIN["cyclic3-linear-N2"].target_mu == 48
    assert set(ACCEPTANCE_SET) <= set(BUILTIN)


def test_spec_dict_round_trip():
    for spec in BUILTIN.values():
        assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.as_dict()))) == spec


def test_resolve_specs_with_overrides():
    specs = resolve_specs(["acceptance"], {"com-rate-N1": {"h": 0.0078125, "window": [1e-7, 1e-3]}})
    assert [s.name for s in specs] == list(ACCEPTANCE_SET)
    com = specs[1]
    assert com.h == 0.0078125 and com.window == (1e-7, 1e-3)
    custom = resolve_specs(["mine"], {"mine": {"init": "dilate:1.02", "observable": "norm", "target": [0, 1]}})
    assert custom[0].target_mu == 30
    with pytest.raises(KeyError):
        resolve_specs(["nope"])


def test_initial_cells_descriptors(tmp_path):
    cfg = SolverConfig(1, h=1 / 64)
    g = Grid(cfg)
    assert np.array_equal(initial_cells("stationary", cfg, g), v_star(g.centers))
    assert np.allclose(initial_cells("shift:0.1", cfg, g), v_star(g.centers - 0.1))
    v = initial_cells("mode:0,1,1:0.01", cfg, g)
    assert np.all(v >= 0) and abs(g.mass(v) - g.mass(v_star(g.centers))) > 0
    with pytest.raises(ValueError):
        initial_cells("mode:1,1,0:0.01", SolverConfig(2, h=1 / 64))
    with pytest.raises(ValueError):
        initial_cells("bogus", cfg, g)


def test_rate_report_without_window():
    rep = rate_report([0, 1, 2], [1.0, 1.0, 1.0], 6, (1e-9, 1e-2))
    assert rep["fitted_exponent"] is None and rep["n_samples"] == 0


def test_linear_symmetry_experiment():
    rep = run_experiment(BUILTIN["cyclic3-linear-N2"])
    assert rep["passed"]
    assert rep["info"]["inactive_amplitude_max"] == 0.0
    assert rep["info"]["inactive_degrees"][:2] == [1, 2]
    assert rep["rate"]["fitted_exponent"] == pytest.approx(48, rel=1e-9)


def test_stationary_experiment_is_trivial_pass():
    rep = run_experiment(replace(BUILTIN["stationary-N1"], h=1 / 128, ball_degree=30))
    assert rep["trivial_pass"] and rep["passed"]


def test_coarse_run_writes_bundle(tmp_path):
    spec = replace(BUILTIN["leading-order-N1"], h=1 / 64, T=1.0, ball_degree=30)
    rep = run_experiment(spec, tmp_path)
    out = tmp_path / spec.name
    saved = json.loads((out / "report.json").read_text())
    assert saved["schema"] == REPORT_SCHEMA
    assert saved["passed"] == rep["passed"]
    assert (out / "decay.png").stat().st_size > 0
    rows = list(csv.reader((out / "series.csv").open()))
    assert rows[0] == ["t", "value", "raw"] and len(rows) == 52
    assert rep["info"]["mass_drift"] < 1e-12
    assert rep["info"]["min_value"] >= 0
    # coarse grid still sees the leading rate to a few percent
    assert rep["rate"]["fitted_exponent"] == pytest.approx(6, rel=0.05)
