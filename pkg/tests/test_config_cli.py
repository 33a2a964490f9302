from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from cavitygate.analysis import SweepResult
from cavitygate.cli import EXIT_CONFIG, EXIT_OK, EXIT_THRESHOLD, main
from cavitygate.config import DEFAULTS, ConfigError, parse_assignment, parse_config
from cavitygate.hamiltonian import TWO_PI, default_params

# two qubits at n_max = 1: each noisy CLI run finishes in well under a second
CHEAP = ["--n", "2", "--set", "photon_cutoff=1", "--no-timestamp"]


def run(argv):
    lines: list[str] = []
    code = main(argv, out=lines.append)
    return code, "\n".join(lines)


class TestParseConfig:
    def test_empty_is_defaults(self):
        cfg = parse_config({})
        p = cfg.params()
        assert p.g[0] == pytest.approx(TWO_PI * 10e6)
        assert p.omega[2] == pytest.approx(TWO_PI * 15e6)
        assert cfg.photon_cutoff == 2

    def test_params_match_library_defaults(self):
        assert _params_close(parse_config({}).params(), default_params(3))

    def test_fast_override(self):
        p = parse_config({"g_over_2pi_mhz": 100, "omega_over_2pi_mhz": 150}).params()
        assert p.g[1] == pytest.approx(TWO_PI * 100e6) and p.omega[1] == pytest.approx(TWO_PI * 150e6)
        assert p.mu[0] == pytest.approx(p.g[0])

    def test_empty_file(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text("{}")
        assert parse_config(f).data == parse_config(None).data

    @pytest.mark.parametrize(
        "raw, field",
        [
            ({"gamma01_inv_ns": -5}, "gamma01_inv_ns"),
            ({"bogus": 1}, "bogus"),
            ({"integrator": {"method": "euler"}}, "integrator.method"),
            ({"sweep": {"c": [1.0, -1.0]}}, r"sweep.c\[1\]"),
            ({"n": 1}, "n"),
            ({"g_over_2pi_mhz": [10, 10]}, "g_over_2pi_mhz"),
            ({"photon_cutoff": 1.5}, "photon_cutoff"),
        ],
    )
    def test_validation_names_field(self, raw, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(raw)

    def test_missing_and_broken_files(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            parse_config(bad)

    def test_null_disables_channel(self):
        p = parse_config({"kappa_inv_ns": None}).params()
        assert p.kappa == (0.0, 0.0, 0.0)

    def test_coupling_ratio_applied(self):
        p = parse_config({"c": 1.03}).params()
        assert p.mu[1] / p.g[1] == pytest.approx(1.03)

    def test_hash_stable_and_sensitive(self):
        a, b = parse_config({}), parse_config({})
        assert a.hash == b.hash and len(a.hash) == 16
        assert parse_config({"c": 0.99}).hash != a.hash

    def test_defaults_untouched(self):
        parse_config({"sweep": {"dt_ns": [1.0]}})
        assert len(DEFAULTS["sweep"]["dt_ns"]) == 11

    @pytest.mark.parametrize(
        "text, expected",
        [("c=1.02", {"c": 1.02}), ("integrator.method=rk4", {"integrator": {"method": "rk4"}}),
         ("sweep.dt_ns=[0, 1]", {"sweep": {"dt_ns": [0, 1]}}), ("kappa_inv_ns=null", {"kappa_inv_ns": None})],
    )
    def test_assignment(self, text, expected):
        assert parse_assignment(text) == expected

    def test_assignment_needs_equals(self):
        with pytest.raises(ConfigError):
            parse_assignment("c")


def _params_close(a, b):
    da, db = a.to_dict(), b.to_dict()
    for key in da:
        va, vb = np.asarray(da[key], dtype=float), np.asarray(db[key], dtype=float)
        if not np.allclose(va, vb, rtol=1e-12):
            return False
    return True


class TestCommands:
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_ideal_verify(self, n):
        code, text = run(["ideal-verify", "--n", str(n)])
        assert code == EXIT_OK
        assert f"{2 * n + 2} operations, truth table exact" in text

    def test_truth_table_toffoli(self):
        code, text = run(["truth-table", "--n", "3", "--toffoli"])
        assert code == EXIT_OK
        assert "|110> -> (+1.000000000000+0.000000000000j) |111>" in text

    def test_truth_table_json(self, tmp_path):
        out = tmp_path / "tt.json"
        code, _ = run(["truth-table", "--n", "2", "--out", str(out), "--no-timestamp"])
        doc = json.loads(out.read_text())
        assert code == EXIT_OK and len(doc["rows"]) == 4 and "generated" not in doc
        assert doc["rows"][3]["coefficient"][0] == pytest.approx(-1.0)

    def test_timing_default(self):
        code, text = run(["timing", "--n", "3"])
        assert code == EXIT_OK and "0.4670 us" in text and "13 adjust windows" in text

    def test_timing_fast(self):
        _, text = run(["timing", "--set", "g_over_2pi_mhz=100", "--set", "omega_over_2pi_mhz=150"])
        assert "58.40 ns" in text

    def test_atom_variant(self):
        code, text = run(["atom-variant"])
        assert code == EXIT_OK and "104.14 us" in text and "10 transport windows" in text

    def test_simulate(self, tmp_path):
        out = tmp_path / "sim.json"
        code, text = run(["simulate", *CHEAP, "--out", str(out)])
        doc = json.loads(out.read_text())
        assert code == EXIT_OK and text.startswith("fidelity 0.")
        assert 0.9 < doc["fidelity"] < 1 and abs(doc["final_trace"] - 1) < 1e-8

    def test_sweep_csv_contract(self, tmp_path):
        out = tmp_path / "dt.csv"
        code, _ = run(["sweep-dt", *CHEAP, "--set", "sweep.dt_ns=[-1, 0, 1]", "--out", str(out)])
        assert code == EXIT_OK
        raw = out.read_bytes()
        assert b"\r" not in raw
        body = [l for l in raw.decode().splitlines() if not l.startswith("#")]
        assert body[0] == "dt_ns,c,fidelity,runtime_s" and len(body) == 4
        assert SweepResult.from_csv(out).dt[0] == pytest.approx(-1e-9)

    def test_sweep_c_json(self, tmp_path):
        out = tmp_path / "c.csv"
        code, _ = run(["sweep-c", *CHEAP, "--set", "sweep.c=[0.99]", "--set", "output.format=both",
                       "--out", str(out)])
        doc = json.loads(out.with_suffix(".json").read_text())
        assert code == EXIT_OK and out.exists()
        assert doc["rows"][0][1] == 0.99 and doc["config_hash"]

    def test_sweep_2d_artifacts_reproducible(self, tmp_path):
        args = ["sweep-2d", *CHEAP, "--set", "sweep.dt_ns=[0, 2]", "--set", "sweep.c=[1.0]"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run([*args, "--out", str(a)])
        run([*args, "--out", str(b)])
        strip = lambda p: [l.rsplit(",", 1)[0] for l in p.read_text().splitlines()]  # runtime column varies
        assert strip(a) == strip(b)
        assert len(SweepResult.from_csv(a)) == 2

    def test_convergence_check_cheap(self):
        code, text = run(["convergence-check", "--n", "2"])
        assert "F(n_max=1)" in text and code in (EXIT_OK, EXIT_THRESHOLD)

    def test_config_error_exit(self, capsys):
        code, _ = run(["timing", "--set", "gamma12_inv_ns=-3"])
        assert code == EXIT_CONFIG
        assert "gamma12_inv_ns" in capsys.readouterr().err

    def test_bad_jobs(self):
        assert run(["sweep-dt", "--jobs", "0"])[0] == EXIT_CONFIG

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "cavitygate", "timing", "--n", "2"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and "n=2" in proc.stdout
