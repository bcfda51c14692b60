import csv
import io
import json
import math

import pytest

from twinsync.cli import CSV_COLUMNS, main

SYSTEMS = [{"name": "ps1", "Q": [[-1, 1], [2, -2]], "weight": 5},
           {"name": "ps2", "Q": [[-3, 3], [6, -6]], "weight": 1}]


def write_cfg(tmp_path, **extra):
    cfg = {"systems": SYSTEMS, "delta": 0.3, "costs": [{"type": "c1"}, {"type": "c2"}, {"type": "c3"}],
           "horizon": 100, "replications": 4, "seed": 1}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_row_and_rate(tmp_path, capsys):
    cfg = write_cfg(tmp_path, policy={"kind": "prtp", "rate": 10}, replications=20, horizon=200)
    code, out, _ = run(["simulate", "--config", cfg], capsys)
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    r = rows(out)
    assert [x["cost_kind"] for x in r] == ["c1", "c2", "c3-euclidean_paper"]
    lam = float(r[0]["lambda_empirical"])
    assert abs(lam - 10) < 3 * math.sqrt(10 / (200 * 20))


def test_simulate_is_byte_stable(tmp_path, capsys):
    cfg = write_cfg(tmp_path, policies=["prtp", "pptp"], lambda_grid=[2, 5], replications=1)
    a = run(["simulate", "--config", cfg], capsys)[1]
    b = run(["simulate", "--config", cfg], capsys)[1]
    assert a == b and len(rows(a)) == 12


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, policy={"kind": "prtp", "rate": 3})
    a = run(["simulate", "--config", cfg], capsys)[1]
    b = run(["simulate", "--config", cfg, "--seed", "99"], capsys)[1]
    assert a != b
    assert rows(b)[0]["seed"] == "99"


def test_trace_and_out_files(tmp_path, capsys):
    cfg = write_cfg(tmp_path, policy={"kind": "pptp", "rate": 2})
    out, tr = tmp_path / "o.csv", tmp_path / "t.txt"
    assert run(["simulate", "--config", cfg, "--out", str(out), "--trace", str(tr)], capsys)[0] == 0
    assert out.read_text().startswith("policy,")
    assert tr.read_text().splitlines()[0].split("\t")[1] == "initial"


def test_schema_violation_names_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, replications="many")
    code, _, err = run(["simulate", "--config", cfg], capsys)
    assert code == 1 and "replications" in err


def test_bad_generator_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, systems=[{"Q": [[-1, 2], [1, -1]]}])
    code, _, err = run(["simulate", "--config", cfg], capsys)
    assert code == 1 and "systems" in err


def test_json_syntax_error_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"systems": [\n  {"Q": [[-1, 1], [1, -1]],}\n]}')
    code, _, err = run(["simulate", "--config", str(p)], capsys)
    assert code == 1 and "line 2" in err


def test_unknown_subcommand_and_missing_config(capsys):
    with pytest.raises(SystemExit) as e:
        main(["launch"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["simulate"])
    assert e.value.code == 1


def test_sweep_requires_grids(tmp_path, capsys):
    cfg = write_cfg(tmp_path, delta_grid=[0, 0.3], policies=["prtp"])
    code, _, err = run(["sweep", "--config", cfg], capsys)
    assert code == 1 and "lambda_grid" in err
    cfg = write_cfg(tmp_path, delta_grid=[0, 0.3], lambda_grid=[], policies=["prtp"])
    assert run(["sweep", "--config", cfg], capsys)[0] == 1


def test_sweep_order_and_size(tmp_path, capsys):
    cfg = write_cfg(tmp_path, delta_grid=[0.3, 0.0], lambda_grid=[3, 1], policies=["prtp", "pptp"],
                    replications=2, horizon=20)
    code, out, _ = run(["sweep", "--config", cfg, "--workers", "3"], capsys)
    r = rows(out)
    assert code == 0 and len(r) == 2 * 2 * 2 * 3
    keys = [(x["policy"], float(x["delta"]), float(x["lambda_target"]), x["cost_kind"]) for x in r]
    assert keys == sorted(keys)


def test_validate_zero_tau_is_exact(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tau_grid=[0.0], replications=1000)
    code, out, _ = run(["validate", "--config", cfg], capsys)
    assert code == 0
    assert all(float(x["z"]) == 0.0 for x in rows(out))


def test_validate_crossed_fails(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tau_grid=[1.0], replications=20000)
    assert run(["validate", "--config", cfg], capsys)[0] == 0
    assert run(["validate", "--config", cfg, "--crossed"], capsys)[0] == 2


def test_optimal_requires_budget(tmp_path, capsys):
    cfg = write_cfg(tmp_path, delta=0)
    code, _, err = run(["optimal", "--config", cfg], capsys)
    assert code == 1 and "--budget" in err


def test_optimal_rejects_delay(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert run(["optimal", "--config", cfg, "--budget", "1"], capsys)[0] == 1


def test_optimal_generous_budget(tmp_path, capsys):
    cfg = write_cfg(tmp_path, delta=0, costs=[{"type": "c1"}], replications=5)
    code, out, _ = run(["optimal", "--config", cfg, "--budget", "100"], capsys)
    assert code == 0
    gain = float(out.split("# gain=")[1].split()[0])
    assert abs(gain) < 1e-9
    table = out[out.index("policy,"):]
    assert [x["policy"] for x in rows(table)] == ["lookup", "pptp", "prtp"]


def test_analytic_curves(tmp_path, capsys):
    cfg = write_cfg(tmp_path, t_grid=[0, 1])
    code, out, _ = run(["analytic", "--config", cfg], capsys)
    r = rows(out)
    assert code == 0 and out.startswith("form,cost_kind,delta,t,value\n")
    kinds = {(x["form"], x["cost_kind"]) for x in r}
    assert ("sojourn", "c1") in kinds and ("paper_diagonal", "c3-hamming") in kinds
    assert ("sojourn", "c3-hamming") not in kinds
