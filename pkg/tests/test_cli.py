"""Command-line interface behaviour."""

import json

import pytest

from schoolbus import load_instance, load_plan, min_buses, validate_plan
from schoolbus.cli import BENCH_HEADER, SOLVE_REPORT_HEADER, main


def run(argv):
    return main(argv)


@pytest.fixture()
def tiny_instance(tmp_path):
    path = tmp_path / "inst.json"
    assert run(["generate", "--schools", "2", "--stops", "12", "--seed", "3",
                "--out", str(path)]) == 0
    return path


# ---------------------------------------------------------------- generate


def test_generate_writes_instance(tmp_path, capsys):
    out = tmp_path / "g.json"
    code = run(["generate", "--schools", "3", "--stops", "18", "--seed", "1",
                "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "3 schools" in printed and "18 stops" in printed
    inst = load_instance(out)
    assert len(inst.schools) == 3
    assert len(inst.stops) == 18


def test_generate_same_seed_same_bytes(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    run(["generate", "--schools", "2", "--stops", "10", "--seed", "5", "--out", str(a)])
    run(["generate", "--schools", "2", "--stops", "10", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_generate_rejects_zero_schools(tmp_path):
    with pytest.raises(SystemExit) as err:
        run(["generate", "--schools", "0", "--stops", "10", "--out",
             str(tmp_path / "x.json")])
    assert err.value.code != 0


def test_generate_uses_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SCHOOLBUS_OUT_DIR", str(tmp_path))
    assert run(["generate", "--schools", "2", "--stops", "8", "--seed", "2"]) == 0
    assert (tmp_path / "instance_s2_n8_seed2.json").exists()


# -------------------------------------------------------------------- solve


def test_solve_writes_all_artifacts(tiny_instance, tmp_path):
    plan_out = tmp_path / "out" / "plan.json"
    sched_out = tmp_path / "out" / "sched.json"
    report = tmp_path / "out" / "report.csv"
    code = run([
        "solve", "--instance", str(tiny_instance), "--mode", "smcm",
        "--seed", "4", "--plan-out", str(plan_out),
        "--schedule-out", str(sched_out), "--report", str(report),
    ])
    assert code == 0
    inst = load_instance(tiny_instance)
    plan = load_plan(plan_out, inst)
    validate_plan(plan)
    sched = json.loads(sched_out.read_text())
    assert sched["nb"] == min_buses(plan.trips, inst).nb
    lines = report.read_text().splitlines()
    assert lines[0] == SOLVE_REPORT_HEADER
    cells = lines[1].split(",")
    assert cells[0] == "inst"
    assert cells[-2] == "smcm"
    assert cells[-1] == "4"
    assert cells[-3] == "0.000"  # runtime column pinned without --timing


def test_solve_improve_flag_labels_report(tiny_instance, tmp_path):
    report = tmp_path / "r.csv"
    code = run([
        "solve", "--instance", str(tiny_instance), "--mode", "pmcm", "--improve",
        "--plan-out", str(tmp_path / "p.json"),
        "--schedule-out", str(tmp_path / "s.json"), "--report", str(report),
    ])
    assert code == 0
    assert ",pmcm+pi," in report.read_text().splitlines()[1]


def test_solve_timing_records_positive_runtime(tiny_instance, tmp_path):
    report = tmp_path / "r.csv"
    run([
        "solve", "--instance", str(tiny_instance), "--timing",
        "--plan-out", str(tmp_path / "p.json"),
        "--schedule-out", str(tmp_path / "s.json"), "--report", str(report),
    ])
    rt = float(report.read_text().splitlines()[1].split(",")[6])
    assert rt > 0.0


def test_solve_repeat_keeps_best_bus_count(tiny_instance, tmp_path):
    inst = load_instance(tiny_instance)
    single_nbs = []
    for seed in range(3):
        plan_out = tmp_path / f"p{seed}.json"
        run([
            "solve", "--instance", str(tiny_instance), "--seed", str(seed),
            "--plan-out", str(plan_out),
            "--schedule-out", str(tmp_path / f"s{seed}.json"),
            "--report", str(tmp_path / f"r{seed}.csv"),
        ])
        single_nbs.append(min_buses(load_plan(plan_out, inst).trips, inst).nb)
    best_out = tmp_path / "best.json"
    run([
        "solve", "--instance", str(tiny_instance), "--seed", "0", "--repeat", "3",
        "--plan-out", str(best_out),
        "--schedule-out", str(tmp_path / "bs.json"),
        "--report", str(tmp_path / "br.csv"),
    ])
    best_nb = min_buses(load_plan(best_out, inst).trips, inst).nb
    assert best_nb == min(single_nbs)


def test_solve_params_override_changes_solver(tiny_instance, tmp_path):
    code = run([
        "solve", "--instance", str(tiny_instance), "--params", "alpha_Q=9",
        "--params", "n_nei=5",
        "--plan-out", str(tmp_path / "p.json"),
        "--schedule-out", str(tmp_path / "s.json"),
        "--report", str(tmp_path / "r.csv"),
    ])
    assert code == 0
    with pytest.raises(SystemExit):
        run(["solve", "--instance", str(tiny_instance), "--params", "alpha_Q"])


def test_solve_reports_infeasible_stop(tmp_path, capsys):
    bad = {
        "schools": [{"id": 0, "x_ft": 0.0, "y_ft": 0.0, "bell_s": 46800}],
        "stops": [
            {"id": 0, "school_id": 0, "x_ft": 1000.0, "y_ft": 0.0, "students": 60},
            {"id": 1, "school_id": 0, "x_ft": 2000.0, "y_ft": 0.0, "students": 70},
        ],
        "capacity": 66,
        "mrt_s": 5400.0,
        "speed_mph": 20.0,
        "metric": "euclidean",
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code = run(["solve", "--instance", str(path),
                "--plan-out", str(tmp_path / "p.json"),
                "--schedule-out", str(tmp_path / "s.json"),
                "--report", str(tmp_path / "r.csv")])
    assert code == 1
    err = capsys.readouterr().err
    assert "infeasible" in err
    assert "stop 1" in err


def test_solve_missing_instance_fails_cleanly(tmp_path, capsys):
    code = run(["solve", "--instance", str(tmp_path / "nope.json")])
    assert code == 1
    assert "missing file" in capsys.readouterr().err


# ------------------------------------------------------------------ config


def test_config_file_sets_defaults_cli_wins(tiny_instance, tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"mode": "smcm", "seed": 9, "params": {"n_nei": "4"}}))
    report = tmp_path / "r.csv"
    run([
        "solve", "--instance", str(tiny_instance), "--config", str(conf),
        "--plan-out", str(tmp_path / "p.json"),
        "--schedule-out", str(tmp_path / "s.json"), "--report", str(report),
    ])
    row = report.read_text().splitlines()[1]
    assert row.endswith(",smcm,9")
    report2 = tmp_path / "r2.csv"
    run([
        "solve", "--instance", str(tiny_instance), "--config", str(conf),
        "--mode", "pmcm",
        "--plan-out", str(tmp_path / "p2.json"),
        "--schedule-out", str(tmp_path / "s2.json"), "--report", str(report2),
    ])
    assert report2.read_text().splitlines()[1].endswith(",pmcm,9")


def test_config_file_rejects_unknown_keys(tiny_instance, tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"wibble": 3}))
    with pytest.raises(SystemExit):
        run(["solve", "--instance", str(tiny_instance), "--config", str(conf)])


# ------------------------------------------------------- improve / schedule


def test_improve_subcommand_never_degrades(tiny_instance, tmp_path):
    inst = load_instance(tiny_instance)
    plan_out = tmp_path / "p.json"
    run([
        "solve", "--instance", str(tiny_instance), "--mode", "pmcm",
        "--plan-out", str(plan_out),
        "--schedule-out", str(tmp_path / "s.json"),
        "--report", str(tmp_path / "r.csv"),
    ])
    before = min_buses(load_plan(plan_out, inst).trips, inst).nb
    improved_out = tmp_path / "improved.json"
    code = run(["improve", "--instance", str(tiny_instance), "--plan",
                str(plan_out), "--out", str(improved_out), "--seed", "2"])
    assert code == 0
    after_plan = load_plan(improved_out, inst)
    validate_plan(after_plan)
    assert min_buses(after_plan.trips, inst).nb <= before


def test_schedule_subcommand_writes_schedule(tiny_instance, tmp_path):
    plan_out = tmp_path / "p.plan.json"
    run([
        "solve", "--instance", str(tiny_instance),
        "--plan-out", str(plan_out),
        "--schedule-out", str(tmp_path / "s.json"),
        "--report", str(tmp_path / "r.csv"),
    ])
    out = tmp_path / "explicit.json"
    code = run(["schedule", "--instance", str(tiny_instance), "--plan",
                str(plan_out), "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert set(data) == {"routes", "nb", "total_deadhead_s"}


# ------------------------------------------------------------------- oracle


def test_oracle_subcommand_nb(tmp_path, capsys):
    inst_path = tmp_path / "tiny.json"
    run(["generate", "--schools", "2", "--stops", "6", "--seed", "11",
         "--out", str(inst_path)])
    code = run(["oracle", "--instance", str(inst_path), "--what", "nb"])
    assert code == 0
    assert "exact minimum NB:" in capsys.readouterr().out


def test_oracle_subcommand_refuses_big_instance(tiny_instance, capsys):
    code = run(["oracle", "--instance", str(tiny_instance), "--what", "nb",
                "--max-stops", "3"])
    assert code == 1
    assert "oracle refused" in capsys.readouterr().err


# -------------------------------------------------------------------- bench


def test_bench_empty_scenarios_writes_header_only(tmp_path):
    out = tmp_path / "bench.csv"
    code = run(["bench", "--scenarios", "", "--out", str(out)])
    assert code == 0
    assert out.read_text() == BENCH_HEADER + "\n"


def test_bench_diff_columns_recompute(tmp_path):
    out = tmp_path / "bench.csv"
    code = run(["bench", "--scenarios", "2x14,3x18", "--seed", "6",
                "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == BENCH_HEADER
    assert len(lines) == 3
    header = lines[0].split(",")
    for line in lines[1:]:
        cells = dict(zip(header, line.split(",")))
        nb_s = int(cells["smcm_nb"])
        nb_p = int(cells["pmcm_nb"])
        assert int(cells["diff_nb"]) == abs(nb_s - nb_p)
        expected_pct = abs(nb_s - nb_p) / min(nb_s, nb_p) * 100.0 if min(nb_s, nb_p) else 0.0
        assert float(cells["diff_pct"]) == pytest.approx(expected_pct, abs=0.051)
        assert int(cells["pmcm_pi_nb"]) <= nb_p


def test_bench_isolates_scenario_failures(tmp_path, capsys):
    # One school on the full square is usually infeasible; the other scenario
    # must still be solved and reported.
    out = tmp_path / "bench.csv"
    code = run(["bench", "--scenarios", "1x500,2x14", "--seed", "0",
                "--out", str(out)])
    lines = out.read_text().splitlines()
    err = capsys.readouterr().err
    if code == 1:
        assert "failed" in err
        assert len(lines) == 2
        assert lines[1].startswith("2x14,")
    else:
        assert len(lines) == 3
