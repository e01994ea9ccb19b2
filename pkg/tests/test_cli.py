import json
import math

import numpy as np
import pytest

from zenoberry import cli
from zenoberry.cli import (
    ConfigError,
    ExperimentConfig,
    OutputSpec,
    SweepSpec,
    config_from_dict,
    config_to_dict,
    emit,
    parse_axis,
    parse_scalar,
    run,
    sweep,
)
from zenoberry.zenoengine import HamiltonianSpec, MeasurementPlan


def spin_free_config(**kwargs):
    plan = kwargs.pop("plan", MeasurementPlan(axis=(1, 0, 0), total_angle=np.pi, steps=4))
    return ExperimentConfig(mode="spin-free", plan=plan, **kwargs)


# ---------------------------------------------------------------------------
# parsing


def test_parse_scalar_pi_literals():
    assert parse_scalar("pi") == pytest.approx(math.pi)
    assert parse_scalar("pi*0.5") == pytest.approx(math.pi / 2)
    assert parse_scalar("-pi*0.25") == pytest.approx(-math.pi / 4)
    assert parse_scalar("1.5") == 1.5
    assert parse_scalar(2) == 2.0
    with pytest.raises(ConfigError):
        parse_scalar("pi*x")
    with pytest.raises(ConfigError):
        parse_scalar("one")


def test_parse_axis_forms():
    assert parse_axis("1,0,0") == (1.0, 0.0, 0.0)
    assert parse_axis([0, 0, 1]) == (0.0, 0.0, 1.0)
    assert parse_axis("pi*0,0,1") == (0.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        parse_axis("1,0")


def test_sweep_spec_values():
    add = SweepSpec(parameter="cos_theta", start=-0.9, stop=0.9, step=0.3, kind="additive")
    assert np.allclose(add.values(), [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9])
    mul = SweepSpec(parameter="steps", start=8, stop=64, step=2, kind="multiplicative")
    assert mul.values() == [8, 16, 32, 64]
    with pytest.raises(ConfigError):
        SweepSpec(parameter="steps", start=8, stop=4, step=2, kind="multiplicative")
    with pytest.raises(ConfigError):
        SweepSpec(parameter="steps", start=8, stop=64, step=1, kind="multiplicative")
    bad = SweepSpec(parameter="steps", start=1, stop=2, step=0.3, kind="additive")
    with pytest.raises(ConfigError, match="non-integer"):
        bad.values()


# ---------------------------------------------------------------------------
# configuration model


def test_config_requires_mode_fields():
    with pytest.raises(ConfigError, match="requires plan"):
        ExperimentConfig(mode="spin-free")
    with pytest.raises(ConfigError, match="requires hamiltonian"):
        ExperimentConfig(
            mode="spin-hamiltonian",
            plan=MeasurementPlan(axis=(0, 0, 1), total_angle=1.0, steps=3),
        )
    with pytest.raises(ConfigError, match="does not take"):
        spin_free_config(polygon_sides=5)
    with pytest.raises(ConfigError, match="does not take"):
        spin_free_config(theta0=0.3)
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="photon-polygon", polygon_sides=2)
    with pytest.raises(ConfigError, match="at least one measurement"):
        spin_free_config(plan=MeasurementPlan(axis=(0, 0, 1), total_angle=1.0, steps=0))


def test_config_round_trip_every_mode():
    configs = [
        spin_free_config(output=OutputSpec(path="out.csv", format="csv")),
        ExperimentConfig(
            mode="spin-hamiltonian",
            plan=MeasurementPlan(axis=(0.6, 0.0, 0.8), total_angle=np.pi, steps=100),
            hamiltonian=HamiltonianSpec(mu=0.5, axis=(0, 1, 0), total_time=2.0),
            output=OutputSpec(path="out.json", format="json"),
            timings=True,
        ),
        ExperimentConfig(
            mode="photon-polygon",
            polygon_sides=6,
            theta0=1.0,
            pol_angle=0.6,
            dump_trajectory="tips.csv",
        ),
        ExperimentConfig(
            mode="sweep",
            plan=MeasurementPlan(axis=(1, 0, 0), total_angle=np.pi, steps=8),
            sweep=SweepSpec(parameter="steps", start=8, stop=64, step=2, kind="multiplicative"),
            output=OutputSpec(path="sweep.csv"),
        ),
    ]
    for config in configs:
        assert config_from_dict(config_to_dict(config)) == config


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"mode": "spin-free", "plan": {"axis": "0,0,1", "total_angle": 1, "steps": 3}, "frobnicate": 1})
    with pytest.raises(ConfigError, match="unknown plan keys"):
        config_from_dict({"mode": "spin-free", "plan": {"axis": "0,0,1", "angle": 1, "steps": 3}})


def test_config_accepts_pi_strings():
    config = config_from_dict(
        {"mode": "spin-free", "plan": {"axis": [1, 0, 0], "total_angle": "pi", "steps": 4}}
    )
    assert config.plan.total_angle == pytest.approx(math.pi)


# ---------------------------------------------------------------------------
# run records


def test_spin_free_record_matches_closed_forms():
    record = run(spin_free_config())
    assert record["mode"] == "spin-free"
    assert record["survival_probability"] == pytest.approx(0.0625, abs=1e-12)
    assert record["beta"] == pytest.approx(math.pi, abs=1e-12)
    assert record["residual_survival_closed_form"] < 1e-12
    assert record["residual_beta_closed_form"] < 1e-12
    assert record["residual_continuum_state"] is not None
    assert record["wall_time_seconds"] is None


def test_static_run_record():
    config = spin_free_config(plan=MeasurementPlan(axis=(1, 0, 0), total_angle=0.0, steps=5))
    record = run(config)
    assert record["survival_probability"] == 1.0
    assert record["geometric_phase"] == 0.0


def test_record_keys_follow_schema_order():
    record = run(spin_free_config())
    assert list(record.keys()) == cli.schema_columns("spin-free")
    inputs, outputs, residuals = cli._SCHEMAS["spin-free"]
    assert list(inputs) == sorted(inputs)
    assert list(outputs) == sorted(outputs)
    assert list(residuals) == sorted(residuals)


@pytest.mark.filterwarnings("ignore::zenoberry.photonso3.UnphysicalIncidenceWarning")
def test_photon_record_even_polygon_is_identity_transport():
    config = ExperimentConfig(mode="photon-polygon", polygon_sides=6)
    record = run(config)
    initial = cli.photonso3.default_photon(config.theta0, config.pol_angle)
    final = np.array(
        [
            record["final_pol_x_re"] + 1j * record["final_pol_x_im"],
            record["final_pol_y_re"] + 1j * record["final_pol_y_im"],
            record["final_pol_z_re"] + 1j * record["final_pol_z_im"],
        ]
    )
    assert np.max(np.abs(final - initial.polarization)) < 1e-12
    assert record["residual_closed_form"] < 1e-12
    assert record["helicity_parity"] == 1


def test_hamiltonian_record_residuals():
    config = ExperimentConfig(
        mode="spin-hamiltonian",
        plan=MeasurementPlan(axis=(0.8, 0.0, 0.6), total_angle=np.pi, steps=2000),
        hamiltonian=HamiltonianSpec(mu=1.0, axis=(0, 1, 0), total_time=1.0),
    )
    record = run(config)
    assert record["residual_dynamical_closed_form"] < 1e-2
    assert record["residual_geometric_closed_form"] < 1e-2


def test_timings_flag_populates_wall_time():
    record = run(spin_free_config(timings=True))
    assert record["wall_time_seconds"] > 0.0


# ---------------------------------------------------------------------------
# sweeps


def test_steps_sweep_summary_slope():
    config = ExperimentConfig(
        mode="sweep",
        plan=MeasurementPlan(axis=(0.8660254037844386, 0, 0.5), total_angle=np.pi, steps=8),
        sweep=SweepSpec(parameter="steps", start=8, stop=1024, step=2, kind="multiplicative"),
    )
    records = sweep(config)
    points = [r for r in records if r["record_kind"] == "point"]
    summary = [r for r in records if r["record_kind"] == "summary"]
    assert len(points) == 8 and len(summary) == 1
    assert [r["sweep_index"] for r in points] == list(range(8))
    assert -1.2 <= summary[0]["fit_slope"] <= -0.8


def test_cos_theta_sweep_beta_column_is_monotone():
    # beta is 2*pi periodic; stay inside the open interval so no wrap occurs
    config = ExperimentConfig(
        mode="sweep",
        plan=MeasurementPlan(axis=(1, 0, 0), total_angle=np.pi, steps=8),
        sweep=SweepSpec(parameter="cos_theta", start=-0.9, stop=0.9, step=0.3, kind="additive"),
    )
    records = sweep(config)
    betas = [r["beta"] for r in records]
    assert all(b1 > b2 for b1, b2 in zip(betas, betas[1:]))
    assert all(r["residual_beta_closed_form"] < 1e-10 for r in records)


@pytest.mark.filterwarnings("ignore::zenoberry.photonso3.UnphysicalIncidenceWarning")
def test_polygon_sweep_alternates_between_identity_and_half_turn():
    config = ExperimentConfig(
        mode="sweep",
        sweep=SweepSpec(parameter="polygon_sides", start=3, stop=12, step=1, kind="additive"),
        theta0=1.0,
        pol_angle=0.6,
    )
    records = sweep(config)
    assert len(records) == 10
    initial = cli.photonso3.default_photon(1.0, 0.6).polarization
    for record in records:
        final = np.array(
            [record["final_pol_x_re"], record["final_pol_y_re"], record["final_pol_z_re"]]
        )
        distance = np.max(np.abs(final - initial.real))
        assert record["residual_closed_form"] < 1e-11
        if record["polygon_sides"] % 2 == 0:
            assert distance < 1e-11
        else:
            assert distance > 0.5


def test_mu_sweep_uses_hamiltonian_mode():
    config = ExperimentConfig(
        mode="sweep",
        plan=MeasurementPlan(axis=(0.8, 0.0, 0.6), total_angle=np.pi, steps=50),
        hamiltonian=HamiltonianSpec(mu=1.0, axis=(0, 0, 1), total_time=1.0),
        sweep=SweepSpec(parameter="mu", start=0.5, stop=2.0, step=0.5, kind="additive"),
    )
    records = sweep(config)
    assert [r["mu"] for r in records] == [0.5, 1.0, 1.5, 2.0]
    assert all(r["mode"] == "spin-hamiltonian" for r in records)


# ---------------------------------------------------------------------------
# emission


def test_emit_csv_shape_and_determinism():
    records = sweep(
        ExperimentConfig(
            mode="sweep",
            plan=MeasurementPlan(axis=(1, 0, 0), total_angle=np.pi, steps=4),
            sweep=SweepSpec(parameter="steps", start=4, stop=16, step=2, kind="multiplicative"),
        )
    )
    first = emit(records, "csv")
    second = emit(records, "csv")
    assert first == second
    lines = first.decode().splitlines()
    assert len(lines) == 1 + len(records)
    assert lines[0].split(",") == cli.schema_columns("spin-free", swept=True)


def test_emit_json_is_parseable_with_17_digit_floats():
    record = run(spin_free_config())
    data = emit([record], "json")
    parsed = json.loads(data)
    assert parsed[0]["survival_probability"] == record["survival_probability"]
    assert "0.0625" in data.decode()


def test_emit_rejects_empty_and_mixed_records():
    with pytest.raises(ValueError, match="empty"):
        emit([], "csv")
    a = run(spin_free_config())
    b = dict(a)
    b.pop("beta")
    with pytest.raises(ValueError, match="schema"):
        emit([a, b], "csv")


# ---------------------------------------------------------------------------
# entry point


def run_main(tmp_path, *extra, fmt="csv", name="out"):
    out = tmp_path / f"{name}.{fmt}"
    code = cli.main(
        [
            "--mode",
            "spin-free",
            "--axis-n",
            "1,0,0",
            "--total-angle",
            "pi",
            "--steps",
            "4",
            "--out",
            str(out),
            "--format",
            fmt,
            *extra,
        ]
    )
    return code, out


def test_main_single_run_writes_csv(tmp_path):
    code, out = run_main(tmp_path)
    assert code == 0
    text = out.read_text()
    assert text.startswith("axis_n_x,")
    assert "0.0625" in text


def test_main_is_byte_deterministic(tmp_path):
    _, first = run_main(tmp_path, name="a")
    _, second = run_main(tmp_path, name="b")
    assert first.read_bytes() == second.read_bytes()


def test_main_sweep_deterministic_across_thread_counts(tmp_path, monkeypatch):
    args = [
        "--mode", "sweep",
        "--axis-n", "0.8660254037844386,0,0.5",
        "--total-angle", "pi",
        "--steps", "8",
        "--sweep", "steps:8:256:x2",
        "--format", "json",
    ]
    monkeypatch.setenv("ZENOBERRY_THREADS", "1")
    out1 = tmp_path / "t1.json"
    assert cli.main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("ZENOBERRY_THREADS", "8")
    out8 = tmp_path / "t8.json"
    assert cli.main(args + ["--out", str(out8)]) == 0
    assert out1.read_bytes() == out8.read_bytes()


def test_main_config_file_with_flag_override(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "mode": "spin-free",
                "plan": {"axis": "1,0,0", "total_angle": "pi", "steps": 8},
                "output": {"path": str(tmp_path / "from_config.csv"), "format": "csv"},
            }
        )
    )
    assert cli.main(["--config", str(config_path), "--steps", "4"]) == 0
    text = (tmp_path / "from_config.csv").read_text()
    assert ",4," in text.splitlines()[1]


def test_main_invalid_config_exits_2(tmp_path, capsys):
    code = cli.main(["--mode", "spin-free", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    diagnostic = json.loads(capsys.readouterr().err)
    assert diagnostic["error"] == "invalid-config"


def test_main_missing_out_exits_2(capsys):
    code = cli.main(["--mode", "spin-free", "--axis-n", "1,0,0", "--total-angle", "pi", "--steps", "4"])
    assert code == 2
    assert "output path" in json.loads(capsys.readouterr().err)["message"]


def test_main_bad_thread_env_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ZENOBERRY_THREADS", "zero")
    code = cli.main(
        ["--mode", "sweep", "--axis-n", "1,0,0", "--total-angle", "pi", "--steps", "4",
         "--sweep", "steps:4:8:x2", "--out", str(tmp_path / "x.csv")]
    )
    assert code == 2
    capsys.readouterr()


def test_main_engine_error_exits_3_with_step(tmp_path, capsys):
    # 26 quarter-turn hops underflow the running amplitude below 1e-300;
    # the later flags override the base ones from run_main
    code, out = run_main(tmp_path, "--total-angle", "pi*13", "--steps", "26")
    assert code == 3
    assert not out.exists()
    diagnostic = json.loads(capsys.readouterr().err)
    assert diagnostic["error"] == "evolution-killed"
    assert 18 <= diagnostic["step"] <= 20


def test_main_io_failure_exits_4(tmp_path, capsys):
    missing_dir = tmp_path / "does-not-exist" / "out.csv"
    code = cli.main(
        ["--mode", "spin-free", "--axis-n", "1,0,0", "--total-angle", "pi", "--steps", "4",
         "--out", str(missing_dir)]
    )
    assert code == 4
    assert not missing_dir.exists()
    assert json.loads(capsys.readouterr().err)["error"] == "io-failure"


def test_main_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as err:
        cli.main(["--frobnicate"])
    assert err.value.code == 2


def test_main_dump_trajectory(tmp_path):
    dump = tmp_path / "trajectory.csv"
    code, out = run_main(tmp_path, "--dump-trajectory", str(dump))
    assert code == 0 and out.exists()
    lines = dump.read_text().splitlines()
    assert lines[0] == "k,time,bloch_x,bloch_y,bloch_z"
    assert len(lines) == 1 + 5  # initial state plus one row per measurement


@pytest.mark.filterwarnings("ignore::zenoberry.photonso3.UnphysicalIncidenceWarning")
def test_main_photon_dump_has_tip_columns(tmp_path):
    dump = tmp_path / "tips.csv"
    out = tmp_path / "photon.csv"
    code = cli.main(
        ["--mode", "photon-polygon", "--polygon-sides", "6", "--theta0", "1.0",
         "--pol-angle", "0.6", "--out", str(out), "--dump-trajectory", str(dump)]
    )
    assert code == 0
    lines = dump.read_text().splitlines()
    assert lines[0] == "k,pol_x,pol_y,pol_z"
    assert len(lines) == 1 + 7


def test_sweep_rejects_trajectory_dump():
    with pytest.raises(ConfigError, match="single runs"):
        ExperimentConfig(
            mode="sweep",
            plan=MeasurementPlan(axis=(1, 0, 0), total_angle=np.pi, steps=4),
            sweep=SweepSpec(parameter="steps", start=4, stop=8, step=2, kind="multiplicative"),
            dump_trajectory="x.csv",
        )
