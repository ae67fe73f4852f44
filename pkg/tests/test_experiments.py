import math
from dataclasses import replace

import pytest

from fredkin_cqed import experiments as ex
from fredkin_cqed.dynamics import IntegratorConfig
from fredkin_cqed.errors import ConfigError

FAST = dict(mode="effective", lossy=False, integrator=IntegratorConfig(method="expm"))


def noon_spec(**kw):
    return ex.SweepSpec(scenario="noon", **{**FAST, **kw})


def test_spec_validation():
    with pytest.raises(ConfigError):
        ex.SweepSpec(scenario="fock")
    with pytest.raises(ConfigError):
        ex.SweepSpec(D_grid=())
    with pytest.raises(ConfigError):
        ex.SweepSpec(c_grid=(3.0,))
    with pytest.raises(ConfigError):
        ex.SweepSpec(timing="late")
    with pytest.raises(ConfigError):
        ex.SweepSpec(rates=(("kappa3", 1.0),))


@pytest.mark.parametrize("scenario, cutoff", [("noon", 6), ("coherent", 12), ("cat", 12)])
def test_default_cutoffs(scenario, cutoff):
    spec = ex.SweepSpec(scenario=scenario)
    assert spec.effective_cutoff == cutoff
    assert spec.params(16).d1 == cutoff


def test_default_parameters():
    spec = ex.SweepSpec()
    p = spec.params(16)
    assert p.g1 == pytest.approx(2 * math.pi * 70e6)
    assert p.Omega == pytest.approx(2 * math.pi * 100e6)
    assert p.kappa1 == pytest.approx(2e5) and p.gamma_phi_e == pytest.approx(5e5)
    assert spec.case().N == 5


def test_sweep_rows_follow_grid():
    rows = ex.sweep_detuning(noon_spec(D_grid=(10.0, 16.0)))
    assert [r.D for r in rows] == [10.0, 16.0]
    for r in rows:
        assert r.error == ""
        assert 0.0 <= r.fidelity <= 1.0
        assert r.delta_over_2pi == pytest.approx(r.D * 70e6)
        assert r.lambda_over_2pi == pytest.approx(70e6 / r.D)
        assert r.t_swap == pytest.approx(math.pi / (2 * 2 * math.pi * r.lambda_over_2pi))


def test_inhomogeneity_grid_order():
    rows = ex.sweep_inhomogeneity(noon_spec(D_grid=(16.0,), c_grid=(0.9999, 1.0001), d_grid=(0.99, 1.01)))
    assert [(r.c, r.d) for r in rows] == [(0.9999, 0.99), (0.9999, 1.01), (1.0001, 0.99), (1.0001, 1.01)]


def test_timing_modes_differ_only_off_symmetry():
    nominal = noon_spec(timing="nominal")
    actual = noon_spec(timing="actual")
    assert ex.run_point(nominal, 16).t_swap == ex.run_point(actual, 16).t_swap
    assert ex.run_point(nominal, 16).fidelity == ex.run_point(actual, 16).fidelity
    assert ex.run_point(nominal, 16, 1.0002, 1.02).t_swap != ex.run_point(actual, 16, 1.0002, 1.02).t_swap


def test_failures_are_recorded_in_row():
    spec = ex.SweepSpec(scenario="noon", lossy=False, integrator=IntegratorConfig(max_steps=10), D_grid=(8.0, 10.0))
    rows = ex.sweep_detuning(spec)
    assert len(rows) == 2
    for r in rows:
        assert "IntegratorDivergence" in r.error
        assert math.isnan(r.fidelity)


def test_csv_round_trip(tmp_path):
    rows = ex.sweep_detuning(noon_spec(D_grid=(12.0, 16.0)))
    rows.append(replace(rows[0], fidelity=float("nan"), error="IntegratorDivergence: boom"))
    path = tmp_path / "out.csv"
    ex.write_results(rows, path, {"sweep.scenario": "noon"})
    back, meta = ex.read_results(path)
    assert meta == {"sweep.scenario": "noon"}
    for a, b in zip(rows, back):
        for name in ex.ROW_FIELDS:
            va, vb = getattr(a, name), getattr(b, name)
            if isinstance(va, float) and math.isnan(va):
                assert math.isnan(vb)
            else:
                assert va == vb
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    header = [line for line in raw.decode().splitlines() if not line.startswith("#")][0]
    assert header.split(",") == list(ex.ROW_FIELDS)


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    ex.write_results([], path)
    assert path.read_text() == ",".join(ex.ROW_FIELDS) + "\n"
    assert ex.read_results(path) == ([], {})


def test_write_error_names_path(tmp_path):
    target = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        ex.write_results([], target)


def test_output_independent_of_worker_count(tmp_path):
    spec = noon_spec(D_grid=(10.0, 13.0, 16.0))
    serial, parallel = tmp_path / "a.csv", tmp_path / "b.csv"
    ex.write_results(ex.sweep_detuning(spec, jobs=1), serial, ex.spec_metadata(spec), timings=False)
    ex.write_results(ex.sweep_detuning(spec, jobs=2), parallel, ex.spec_metadata(spec), timings=False)
    assert serial.read_bytes() == parallel.read_bytes()


def test_load_config_file_and_overrides(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[params]\ng_over_2pi = 60e6\n\n[sweep]\nscenario = cat\nD_grid = 8, 12\n"
                   "[integrator]\nmethod = expm\n")
    values = ex.load_config(cfg, ["D_grid=9;11", "lossy=false"])
    assert values["g_over_2pi"] == 60e6
    assert values["D_grid"] == (9.0, 11.0)
    assert values["lossy"] is False
    spec = ex.spec_from_config(values)
    assert spec.scenario == "cat" and spec.integrator.method == "expm"
    monkeypatch.setenv(ex.CONFIG_ENV, str(tmp_path))
    monkeypatch.chdir(tmp_path.parent)
    assert ex.load_config("run.cfg")["scenario"] == "cat"


@pytest.mark.parametrize(
    "text, match",
    [
        ("[params]\nkappa = 1\n", "unknown config key 'kappa'; valid keys: g_over_2pi"),
        ("[sweep]\ng_over_2pi = 1\n", "belongs in section"),
        ("[physics]\nN = 1\n", "unknown config section"),
        ("[params]\nN = five\n", "'N'"),
        ("[sweep]\nD_grid = 0.5\n", "D_grid"),
    ],
)
def test_config_errors(tmp_path, text, match):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError, match=match):
        ex.spec_from_config(ex.load_config(cfg))


def test_bad_overrides():
    with pytest.raises(ConfigError, match="key=value"):
        ex.load_config(None, ["lossy"])
    with pytest.raises(ConfigError, match="'mode'"):
        ex.load_config(None, ["mode=lab"])
    with pytest.raises(ConfigError):
        ex.spec_from_config(ex.load_config(None, ["steps_per_period=0"]))


def test_config_metadata_covers_every_key():
    meta = ex.config_metadata(ex.load_config())
    assert len(meta) == len(ex.CONFIG_KEYS)
    assert meta["params.g_over_2pi"] == 70e6


def test_region_helpers():
    c_rng, d_rng, threshold = ex.claimed_region("noon")
    assert ex.shrink(d_rng) == pytest.approx((0.994, 1.036))
    assert threshold == 0.90
    with pytest.raises(ConfigError):
        ex.claimed_region("coherent")
    row = lambda D, F: ex.SweepRow("noon", D, 1, 1, 0, 0, 0, F, 0, 0, 0)  # noqa: E731
    assert ex.interior_maximum([row(5, 0.8), row(10, 0.9), row(20, 0.85)])
    assert not ex.interior_maximum([row(5, 0.8), row(10, 0.85), row(20, 0.9)])
