import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fracbessel.cli import main, read_tabulated_source
from fracbessel.fractional import TimeOperator
from fracbessel.mittag_leffler import u0_bar
from fracbessel.specfun import bessel_zeros

BASE_CONFIG = """\
[problem]
nu = 1.0
M = {M}
T = 1.0

[operator]
alpha = 1.5

[[operator.terms]]
coefficient = -0.3
order = 0.7

[grid]
n_t = 48
n_x = 33
x_min = 0.05
modes = 4

[source]
kind = "separable"
x_profile = "compliant_poly"
t_profile = "cosine"
theorem_compliant = true

[source.t_params]
omega = 1.3
"""


def write_config(tmp_path, text, name="prob.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestSolve:
    def test_solve_writes_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4))
        out = tmp_path / "out"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
        text = (out / "solution.csv").read_text()
        lines = text.splitlines()
        assert lines[0] == "t,x,u"
        assert len(lines) == 1 + 49 * 33
        assert "\r" not in text
        d = json.loads((out / "diagnostics.json").read_text())
        assert d["nonlocal_defect_rel"] <= 1e-8
        assert len(d["margins"]) == 4
        report = (out / "report.txt").read_text()
        assert "non-resonance margins" in report

    def test_full_precision_format(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4))
        out = tmp_path / "o2"
        main(["solve", "--config", cfg, "--out", str(out)])
        row = (out / "solution.csv").read_text().splitlines()[40].split(",")
        val = float(row[2])
        assert f"{val:.17g}" == row[2]

    def test_determinism_across_runs_and_threads(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4))
        outs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "2")):
            out = tmp_path / name
            assert main(["solve", "--config", cfg, "--out", str(out),
                         "--threads", threads]) == 0
            outs.append((out / "solution.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_modes_override(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4))
        out = tmp_path / "o3"
        main(["solve", "--config", cfg, "--out", str(out), "--modes", "2"])
        d = json.loads((out / "diagnostics.json").read_text())
        assert len(d["modes"]) == 2

    def test_resonant_config_exit_2(self, tmp_path):
        op = TimeOperator(alpha=1.5, terms=((-0.3, 0.7),))
        gamma1 = bessel_zeros(1.0, 1)[1]
        bad_m = -1.0 / u0_bar(op, gamma1**2, 1.0)
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=repr(bad_m)))
        out = tmp_path / "res"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 2
        report = (out / "report.txt").read_text()
        assert "k=1" in report
        # perturbing M by 1e-3 relative restores acceptance
        cfg2 = write_config(tmp_path, BASE_CONFIG.format(M=repr(bad_m * (1 + 1e-3))),
                            name="prob2.toml")
        assert main(["solve", "--config", cfg2, "--out", str(tmp_path / "res2")]) == 0

    def test_missing_config_exit_4(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path / "x")]) == 4

    def test_too_many_terms_exit_4(self, tmp_path):
        extra = "".join(
            f"\n[[operator.terms]]\ncoefficient = 0.01\norder = 0.{i}\n" for i in range(1, 5))
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4) + extra)
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 4

    def test_unknown_key_exit_4(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4) + "\n[grid2]\nfoo = 1\n")
        # unknown top-level sections are ignored only if recognized; grid2 is not a known section
        cfg2 = write_config(tmp_path, BASE_CONFIG.format(M=0.4).replace(
            "n_t = 48", "n_t = 48\nbogus = 3"), name="bad.toml")
        assert main(["solve", "--config", cfg2, "--out", str(tmp_path / "x")]) == 4

    def test_tol_override(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.format(M=0.4))
        out = tmp_path / "tol"
        assert main(["solve", "--config", cfg, "--out", str(out),
                     "--tol", "quad_tol=1e-6"]) == 0
        assert main(["solve", "--config", cfg, "--out", str(out),
                     "--tol", "bogus=1"]) == 4

    def test_ml_nonconvergence_exit_3(self, tmp_path):
        text = BASE_CONFIG.format(M=0.4).replace("alpha = 1.5", "alpha = 0.5")
        text = text.replace("coefficient = -0.3", "coefficient = -0.2")
        text = text.replace("order = 0.7", "order = 0.3")
        text = text.replace("modes = 4", "modes = 8")
        cfg = write_config(tmp_path, text)
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 3


class TestTabulatedSource:
    def test_round_trip(self, tmp_path):
        t = np.linspace(0.0, 1.0, 9)
        x = np.linspace(0.0, 1.0, 21)
        lines = ["t,x,f"]
        for tv in t:
            for xv in x:
                lines.append(f"{tv:.17g},{xv:.17g},{math.cos(1.3*tv)*xv**4*(1-xv)**3:.17g}")
        src_path = tmp_path / "source.csv"
        src_path.write_text("\n".join(lines) + "\n")
        src = read_tabulated_source(str(src_path))
        assert src(0.5, 0.5) == pytest.approx(math.cos(0.65) * 0.5**4 * 0.5**3, rel=1e-3)
        cfg_text = BASE_CONFIG.format(M=0.4).split("[source]")[0] + (
            '[source]\nkind = "tabulated"\npath = "source.csv"\n')
        cfg = write_config(tmp_path, cfg_text)
        out = tmp_path / "tab"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0

    def test_non_tensor_grid_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,x,f\n0,0,1\n0,1,1\n1,0.5,1\n")
        with pytest.raises(Exception):
            read_tabulated_source(str(p))


class TestZeros:
    def test_stdout_table(self, capsys):
        assert main(["zeros", "--nu", "0.5", "--count", "3"]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "k,gamma"
        assert float(lines[1].split(",")[1]) == pytest.approx(math.pi, abs=1e-12)

    def test_file_output(self, tmp_path):
        path = tmp_path / "z.csv"
        assert main(["zeros", "--nu", "1.0", "--count", "5", "--out", str(path)]) == 0
        assert len(path.read_text().splitlines()) == 6

    def test_bad_nu(self):
        assert main(["zeros", "--nu", "-1.0", "--count", "3"]) == 4


class TestML:
    def test_value_output(self, capsys):
        assert main(["ml", "--exponents", "1.0", "--offset", "1.0", "--args", "1.0"]) == 0
        out = capsys.readouterr().out
        val = float(out.splitlines()[0].split("=")[1])
        assert val == pytest.approx(math.e, rel=1e-13)

    def test_nonconvergence_exit_3(self):
        assert main(["ml", "--exponents", "0.5", "--offset", "1.0",
                     "--args", "-1e9"]) == 3

    def test_bad_params_exit_4(self):
        assert main(["ml", "--exponents", "1.0,2.0", "--offset", "1.0",
                     "--args", "1.0"]) == 4


class TestCheckCommand:
    def test_suite_subset(self, capsys):
        rc = main(["check", "--suite", "bessel_zeros", "--suite", "orthogonality"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "zeros_residual" in out and "orthogonality_gram" in out

    def test_loosened_tolerance_still_passes(self, capsys):
        rc = main(["check", "--suite", "ml_reduction", "--tol", "ml_reduction.tol=1e-2"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "1.000000e-02" in out.replace("1.0e-02", "1.000000e-02")

    def test_unknown_suite_exit_4(self):
        assert main(["check", "--suite", "nope"]) == 4


class TestEntryPoint:
    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "fracbessel.cli", "zeros",
                               "--nu", "0.5", "--count", "2"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == "k,gamma"
