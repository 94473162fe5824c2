import csv
import json
import os

import pytest

from ftclust.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen", "--kind", "ftmed", "--geometry", "plane", "--n", "10", "--m", "8",
            "--k", "3", "--rmin", "1", "--rmax", "3", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_gap_family(tmp_path, capsys):
    out = tmp_path / "g.json"
    code, _, _ = run_cli(
        capsys, "gen", "--kind", "ftfl", "--geometry", "line", "--gap-family",
        "--n", "6", "--out", str(out),
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "ftfl"
    assert doc["metric"]["facilities"] == [0, 0, 0, 0, 0, 6]
    assert doc["weights"] == [[0, 0, 0, 0, 0, 1]]


def test_solve_brute_line(tmp_path, capsys):
    inst = tmp_path / "i.json"
    main(["gen", "--kind", "ftmed", "--geometry", "line", "--n", "3", "--m", "1",
          "--k", "2", "--rmin", "2", "--rmax", "2", "--seed", "0", "--out", str(inst)])
    # overwrite with the hand-checked 0,1,2 instance
    inst.write_text(json.dumps({
        "kind": "ftmed",
        "metric": {"type": "line", "facilities": [0, 1, 2], "clients": [0]},
        "k": 2, "requirements": [2],
    }))
    code, out, _ = run_cli(capsys, "solve", str(inst), "--method", "brute")
    assert code == 0
    report = json.loads(out)
    assert report["best_cost"] == 1.0 and report["best_open_set"] == [0, 1]


def test_solve_report_is_deterministic(tmp_path, capsys):
    inst = tmp_path / "i.json"
    main(["gen", "--kind", "ftmed", "--geometry", "explicit", "--n", "7", "--m", "5",
          "--k", "3", "--rmin", "1", "--rmax", "2", "--seed", "3", "--out", str(inst)])
    capsys.readouterr()
    _, out1, _ = run_cli(capsys, "solve", str(inst), "--method", "lp-round", "--samples", "50", "--seed", "9")
    _, out2, _ = run_cli(capsys, "solve", str(inst), "--method", "lp-round", "--samples", "50", "--seed", "9")
    assert out1 == out2


def test_solve_ftfl_fixed_bound(tmp_path, capsys):
    inst = tmp_path / "f.json"
    main(["gen", "--kind", "ftfl", "--geometry", "explicit", "--n", "6", "--m", "4",
          "--rmin", "1", "--rmax", "3", "--seed", "5", "--out", str(inst)])
    capsys.readouterr()
    code, out, _ = run_cli(capsys, "solve", str(inst), "--method", "ftfl-fixed", "--alpha", "0.25")
    assert code == 0
    report = json.loads(out)
    assert report["best"] <= 4 * report["kc_value"] + 1e-9
    assert report["bound_checks"]["per_run_ok"] is True


def test_method_kind_mismatch_is_usage_error(tmp_path, capsys):
    inst = tmp_path / "f.json"
    main(["gen", "--kind", "ftfl", "--geometry", "line", "--n", "4", "--m", "2",
          "--rmin", "1", "--rmax", "2", "--seed", "1", "--out", str(inst)])
    capsys.readouterr()
    code, _, err = run_cli(capsys, "solve", str(inst), "--method", "lp-round")
    assert code == 2 and "ftmed" in err


def test_exact_hst_via_cli(tmp_path, capsys):
    inst = tmp_path / "h.json"
    main(["gen", "--kind", "ftmed", "--geometry", "hst", "--n", "5", "--m", "3",
          "--k", "2", "--rmin", "1", "--rmax", "2", "--seed", "11", "--out", str(inst)])
    capsys.readouterr()
    code, out, _ = run_cli(capsys, "solve", str(inst), "--method", "exact-hst")
    report = json.loads(out)
    assert code == 0
    assert report["best_cost"] == report["lp_value"]  # integral relaxation

    brute_code, brute_out, _ = run_cli(capsys, "solve", str(inst), "--method", "brute")
    assert json.loads(brute_out)["best_cost"] == report["best_cost"]


def test_verify_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    main(["gen", "--kind", "ftmed", "--geometry", "line", "--n", "5", "--m", "3",
          "--k", "2", "--rmin", "1", "--rmax", "2", "--seed", "2", "--out", str(good)])
    capsys.readouterr()
    code, out, _ = run_cli(capsys, "verify", str(good), "--samples", "2000")
    assert code == 0 and json.loads(out)["all_ok"] is True

    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({
        "kind": "ftmed",
        "metric": {"type": "explicit", "n": 2, "matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
        "k": 1, "requirements": [1],
    }))
    code, out, _ = run_cli(capsys, "verify", str(broken))
    assert code == 1
    report = json.loads(out)
    assert report["all_ok"] is False
    assert report["checks"][0]["name"] == "metric-invariants"


def test_bench_csv_columns_and_plot(tmp_path, capsys):
    bench_dir = tmp_path / "bench"
    bench_dir.mkdir()
    for seed in (1, 2):
        main(["gen", "--kind", "ftmed", "--geometry", "line", "--n", "5", "--m", "3",
              "--k", "2", "--rmin", "1", "--rmax", "2", "--seed", str(seed),
              "--out", str(bench_dir / f"i{seed}.json")])
    capsys.readouterr()
    out_csv = tmp_path / "result.csv"
    code, _, err = run_cli(
        capsys, "bench", "--dir", str(bench_dir), "--methods", "lp-round,exact-line,brute",
        "--out", str(out_csv), "--samples", "30", "--plot",
    )
    assert code == 0
    rows = list(csv.DictReader(out_csv.read_text().splitlines()))
    assert len(rows) == 2 * 3
    assert list(rows[0].keys()) == [
        "instance", "method", "lp_value", "cost",
        "ratio_vs_lp", "ratio_vs_brute", "runtime_ms", "seed",
    ]
    for row in rows:
        if row["method"] in ("lp-round", "exact-line"):
            assert float(row["ratio_vs_lp"]) <= 93
        assert float(row["ratio_vs_brute"]) >= 1.0 - 1e-9
    assert (tmp_path / "result_ratios.png").exists()
    assert (tmp_path / "result_runtimes.png").exists()


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])  # missing required arguments
    assert exc.value.code == 2


def test_missing_instance_file(capsys):
    code, _, err = run_cli(capsys, "verify", "/nonexistent/path.json")
    assert code == 2 or "error" in err.lower()


def test_arith_env_override(tmp_path, capsys, monkeypatch):
    inst = tmp_path / "i.json"
    main(["gen", "--kind", "ftmed", "--geometry", "line", "--n", "4", "--m", "2",
          "--k", "2", "--rmin", "1", "--rmax", "1", "--seed", "4", "--out", str(inst)])
    capsys.readouterr()
    monkeypatch.setenv("FTCLUST_ARITH", "float")
    code, out, _ = run_cli(capsys, "solve", str(inst), "--method", "brute")
    assert code == 0
