import json
import subprocess
import sys

from nodalcount import cli


def run_cli(args, tmp_path, name):
    out = tmp_path / name
    rc = cli.main(args + ["--out", str(out)])
    return rc, out


def test_barrier_run_writes_manifest_and_csv(tmp_path):
    rc, out = run_cli(["barrier", "--model", "limit", "--eval-dim", "2",
                       "--R", "3,6", "--trials", "100", "--resolution", "49",
                       "--n-freq", "128", "--seed", "7"], tmp_path, "a")
    assert rc == 0
    manifests = list(out.glob("*.manifest.json"))
    csvs = list(out.glob("*.csv"))
    assert len(manifests) == 1 and len(csvs) == 1
    data = json.loads(manifests[0].read_text())
    assert data["schema"] == 1
    assert data["status"] == "complete"
    assert data["command"] == "barrier"
    assert data["variance_convention"] == "unit"
    assert data["params"]["trials"] == 100
    header = csvs[0].read_text().splitlines()[0]
    assert header.startswith("ball_radius,p_hat,ci_low,ci_high")


def test_rerun_is_byte_identical(tmp_path):
    args = ["barrier", "--model", "limit", "--eval-dim", "2", "--R", "3,6",
            "--trials", "100", "--resolution", "49", "--n-freq", "128",
            "--seed", "7"]
    rc1, out1 = run_cli(args, tmp_path, "r1")
    rc2, out2 = run_cli(args + ["--threads", "3"], tmp_path, "r2")
    assert rc1 == rc2 == 0
    c1 = next(out1.glob("*.csv")).read_bytes()
    c2 = next(out2.glob("*.csv")).read_bytes()
    assert c1 == c2
    m1 = next(out1.glob("*.manifest.json")).read_bytes()
    m2 = next(out2.glob("*.manifest.json")).read_bytes()
    assert m1 == m2


def test_replay_regenerates_outputs(tmp_path):
    args = ["kacrice", "--degrees", "3,5", "--trials", "300",
            "--resolution", "512", "--seed", "11"]
    rc, out1 = run_cli(args, tmp_path, "orig")
    assert rc == 0
    manifest = next(out1.glob("*.manifest.json"))
    rc2 = cli.main(["replay", str(manifest), "--out", str(tmp_path / "rep")])
    assert rc2 == 0
    c1 = next(out1.glob("*.csv")).read_bytes()
    c2 = next((tmp_path / "rep").glob("*.csv")).read_bytes()
    assert c1 == c2


def test_unknown_flag_exits_2_without_files(tmp_path):
    out = tmp_path / "none"
    proc = subprocess.run(
        [sys.executable, "-m", "nodalcount.cli", "barrier", "--bogus", "1",
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 2
    err = json.loads(proc.stderr.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert not out.exists()


def test_unknown_subcommand_exits_2():
    proc = subprocess.run([sys.executable, "-m", "nodalcount.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2


def test_env_var_default_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTDIR, str(tmp_path / "envout"))
    rc = cli.main(["packing", "--dim", "2", "--radii", "0.4", "--seed", "3"])
    assert rc == 0
    assert list((tmp_path / "envout").glob("packing_*.csv"))


def test_kernel_check_subcommand(tmp_path):
    rc, out = run_cli(["kernel-check", "--ambient-dim", "1", "--degrees",
                       "5,10", "--pairs", "5", "--seed", "1"], tmp_path, "kc")
    assert rc == 0
    data = json.loads(next(out.glob("*.manifest.json")).read_text())
    assert data["aggregates"]["oracle_within_tol"] is True
    assert data["aggregates"]["strictly_decreasing"] is True
    text = next(out.glob("kernel_check_*[!t].csv")).read_text().splitlines()
    assert text[0] == "m,sup_error,constant"


def test_field_sample_subcommand(tmp_path):
    rc, out = run_cli(["field-sample", "--eval-dim", "2", "--resolution", "17",
                       "--n-freq", "64", "--seed", "2"], tmp_path, "fs")
    assert rc == 0
    assert list(out.glob("*_field.f64"))
    assert list(out.glob("*_field.json"))


def test_scaling_subcommand(tmp_path):
    rc, out = run_cli(["scaling", "--degrees", "1,2", "--trials", "10",
                       "--resolution", "33", "--seed", "5"], tmp_path, "sc")
    assert rc == 0
    data = json.loads(next(out.glob("*.manifest.json")).read_text())
    assert data["aggregates"]["means"][0] == 1.0


def test_rkhs_fit_subcommand(tmp_path):
    rc, out = run_cli(["rkhs-fit", "--center-counts", "25", "--seed", "1"],
                      tmp_path, "rk")
    assert rc == 0
    data = json.loads(next(out.glob("*.manifest.json")).read_text())
    assert data["aggregates"]["residuals"][0] < 1e-2


def test_packing_with_degree_ladder(tmp_path):
    rc, out = run_cli(["packing", "--dim", "2", "--degrees", "4,8",
                       "--R-pack", "2.0", "--seed", "1"], tmp_path, "pk")
    assert rc == 0
    lines = next(out.glob("*.csv")).read_text().splitlines()
    assert len(lines) == 3


def test_csv_floats_are_17_digits(tmp_path):
    from nodalcount.output import format_value

    assert format_value(1.0 / 3.0) == f"{1.0/3.0:.17g}"
    assert format_value(True) == "true"
    assert format_value(7) == "7"
