import csv
import io
import json
import subprocess
import sys

import pytest

from cowqkd.bounds import binary_entropy
from cowqkd.cli import main, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_body(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(lines))))


def test_rates_json(capsys):
    code, out, _ = run(capsys, "rates", "--mu", "0.5", "--transmission", "0.1", "--tb", "0.9")
    assert code == 0
    body = json.loads(out)
    assert body["provenance"]["params"]["mu"] == 0.5
    assert body["records"][0]["model"] == "honest"
    assert body["records"][0]["d_b_bit"] == pytest.approx(0.0040409011533864855, rel=1e-12)


def test_csv_header_and_precision(capsys):
    code, out, _ = run(capsys, "rates", "--mu", "0.5", "--transmission", "0.1", "--tb", "0.9", "--format", "csv")
    assert code == 0
    assert out.startswith("# command:")
    rows = csv_body(out)
    assert rows[0] == ["model", "d_b_bit", "d_b_decoy", "d_m1_even", "d_m2_even", "d_m1_odd", "d_m2_odd"]
    assert rows[1][1] == "0.00404090115339"


def test_usd_subcommand(capsys):
    code, out, _ = run(capsys, "usd", "--mu", "0.6931471805599453", "--kind", "usd3")
    rec = json.loads(out)["records"][0]
    assert code == 0 and rec["closed_form"] == pytest.approx(0.25) and rec["abs_diff"] < 1e-10


def test_mix_infeasible_exit_code(capsys):
    code, out, _ = run(capsys, "mix", "--f", "0.3", "--length-km", "50")
    assert code == 3
    assert json.loads(out)["records"][0]["feasible"] is False


def test_mix_optimize(capsys):
    code, out, _ = run(capsys, "mix", "--length-km", "200", "--optimize")
    rec = json.loads(out)["records"][0]
    assert code == 0 and rec["feasible"] and rec["r_opt"] > 0 and rec["mu_max"] > rec["mu_opt"]


def test_point_mix_infeasible(capsys):
    code, out, _ = run(capsys, "point", "--curves", "MIX", "--f", "0.3", "--length-km", "50")
    assert code == 3
    assert json.loads(out)["records"][0]["feasible"] is False


def test_bs_point_record(capsys):
    code, out, _ = run(capsys, "bs", "--transmission", "0.5", "--tb", "1", "--f", "0.1")
    rec = json.loads(out)["records"][0]
    assert code == 0
    assert rec["xi"] == pytest.approx(0.4583, abs=5e-4)
    assert rec["g_xi"] == pytest.approx(0.1428, abs=5e-4)
    assert rec["rate_opt"] == pytest.approx(0.01285, abs=5e-5)


def test_bs_lossless_is_infeasible(capsys):
    code, _, _ = run(capsys, "bs", "--transmission", "1")
    assert code == 3


def test_three_state_point(capsys):
    code, out, _ = run(capsys, "three-state", "--q", "0.05", "--v", "1")
    rec = json.loads(out)["records"][0]
    assert code == 0
    assert rec["r"] == pytest.approx(1 - 2 * binary_entropy(0.05), abs=1e-12)


def test_invalid_input_exit_code(capsys):
    code, _, err = run(capsys, "rates", "--mu", "-1")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "three-state", "--q", "0.7")
    assert code == 2
    code, _, _ = run(capsys, "point", "--curves", "NOPE")
    assert code == 2


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--var", "temperature"])
    assert exc.value.code == 2


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "link.cfg"
    cfg.write_text("# figure parameters\nmu = 0.3\neta=0.2\n--length-km = 40\n")
    assert read_config(str(cfg)) == {"mu": 0.3, "eta": 0.2, "length_km": 40.0}
    _, out, _ = run(capsys, "rates", "--config", str(cfg), "--mu", "0.4")
    params = json.loads(out)["provenance"]["params"]
    assert params["mu"] == 0.4 and params["eta"] == 0.2 and params["length_km"] == 40.0
    assert params["tB"] == 0.99 and params["alpha_att"] == 0.25


def test_bad_config_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mu 0.3\n")
    code, _, _ = run(capsys, "rates", "--config", str(cfg))
    assert code == 2


def test_scan_csv(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "scan", "--start", "50", "--stop", "150", "--steps", "3", "--curves", "MIX,BS",
                     "--format", "csv", "--out", str(out))
    assert code == 0
    rows = csv_body(out.read_text())
    assert rows[0][:3] == ["length_km", "t", "MIX_mu_opt"] and rows[0][-1] == "MIN_MIX_BS_r"
    assert len(rows) == 4


def test_scan_invalid_range(capsys):
    code, _, _ = run(capsys, "scan", "--start", "10", "--stop", "0")
    assert code == 2


def test_empty_decoy_flags(capsys):
    _, out, _ = run(capsys, "point", "--curves", "MIX_ED", "--f0", "0.05", "--f1", "0.05", "--length-km", "150")
    body = json.loads(out)
    assert body["provenance"]["params"]["f"] == pytest.approx(0.1)
    assert body["records"][0]["r"] > 0


def test_mc_json_byte_identical(tmp_path):
    args = [sys.executable, "-m", "cowqkd", "mc", "--strategy", "mix", "--length-km", "60", "--mu", "0.2",
            "--windows", "20000", "--seed", "42"]
    a = subprocess.run(args, capture_output=True, check=True).stdout
    b = subprocess.run(args, capture_output=True, check=True).stdout
    assert a == b
    body = json.loads(a)
    assert body["seed"] == 42 and body["windows"] == 20000
    assert {r["name"] for r in body["comparison"]} >= {"d_b_bit", "decoy_neighbor_bias"}


def test_mc_csv_table(capsys):
    code, out, _ = run(capsys, "mc", "--windows", "5000", "--transmission", "0.1", "--mu", "0.5", "--format", "csv")
    assert code == 0
    rows = csv_body(out)
    assert rows[0] == ["name", "value", "analytic", "z"] and len(rows) == 8


def test_mc_infeasible_mix(capsys):
    code, _, err = run(capsys, "mc", "--strategy", "mix", "--f", "0.3", "--windows", "1000")
    assert code == 3 and "infeasible" in err
