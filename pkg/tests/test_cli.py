"""Command-line front end: outputs, exit codes, config files and figure data."""

import csv
import io
import json
import math

import numpy as np
import pytest

from lambda_duality.cli import FIGURE_COLUMNS, FIGURES, main
from lambda_duality.potentials import simplex_potential


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def run_json(*argv):
    code, text = run(*argv)
    assert code == 0, text
    return json.loads(text)


def run_csv(*argv):
    code, text = run(*argv)
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


class TestDivergence:
    def test_qgaussian_potential(self):
        r = run_json("divergence", "--lambda", "-1", "--potential", "q-gaussian",
                     "--u", "1", "--u-prime", "2")
        np.testing.assert_allclose(r["value"], 0.058891, atol=1e-6)
        assert r["finite"] is True

    def test_qgaussian_family(self):
        r = run_json("divergence", "--lambda", "-1", "--family", "q-gaussian",
                     "--vartheta", "1", "--vartheta-prime", "2")
        np.testing.assert_allclose(r["value"], 0.5 * math.log(2) + math.log(0.75), rtol=1e-10)

    def test_zero_on_diagonal(self):
        r = run_json("divergence", "--lambda", "0.5", "--potential", "simplex", "--dim", "2",
                     "--u", "0.3,-0.2", "--u-prime", "0.3,-0.2")
        assert r["value"] == 0.0

    def test_truncation_reports_not_finite(self):
        r = run_json("divergence", "--lambda", "0.5", "--potential", "q-gaussian",
                     "--u", "10", "--u-prime", "1")
        assert r == {"value": None, "finite": False}

    def test_out_of_domain(self, capsys):
        code, _ = run("divergence", "--lambda", "-1", "--potential", "q-gaussian",
                      "--u", "-1", "--u-prime", "2")
        assert code == 2
        assert "domain" in capsys.readouterr().err.lower()

    def test_dimension_mismatch(self):
        code, _ = run("divergence", "--lambda", "0.5", "--potential", "simplex", "--dim", "2",
                      "--u", "0.3", "--u-prime", "0.3,0.1")
        assert code == 2

    def test_unknown_potential(self):
        code, _ = run("divergence", "--lambda", "0.5", "--potential", "nope",
                      "--u", "1", "--u-prime", "2")
        assert code == 2


class TestConjugate:
    def test_classical_quadratic(self):
        r = run_json("conjugate", "--lambda", "0", "--potential", "quadratic", "--dim", "1",
                     "--v", "1")
        np.testing.assert_allclose(r["value"], 0.5, rtol=1e-10)
        np.testing.assert_allclose(r["argmax"], [1.0], rtol=1e-6)

    def test_simplex_biconjugate_round_trip(self):
        lam, u = 0.5, [0.4, -0.2]
        r = run_json("conjugate", "--lambda", str(lam), "--potential", "simplex", "--dim", "2",
                     "--v", "0.4,-0.2", "--biconjugate")
        np.testing.assert_allclose(r["value"], simplex_potential(lam, 2).value(u), atol=1e-4)

    def test_conjugate_twice_via_argmax(self):
        # f^c(v) + f(u*) equals the pairing at the maximizer u*
        lam = -0.5
        r = run_json("conjugate", "--lambda", str(lam), "--potential", "simplex", "--dim", "2",
                     "--v", "0.2,0.3")
        u = np.array(r["argmax"])
        pairing = math.log1p(lam * u @ np.array([0.2, 0.3])) / lam
        np.testing.assert_allclose(r["value"] + simplex_potential(lam, 2).value(u), pairing,
                                   atol=1e-8)

    def test_out_of_domain_dual_point(self):
        code, _ = run("conjugate", "--lambda", "0.5", "--potential", "simplex", "--dim", "2",
                      "--v", "0.6,0.6")
        assert code == 2

    def test_grid(self):
        header, rows = run_csv("conjugate", "--lambda", "0", "--potential", "quadratic",
                               "--dim", "1", "--grid=-2:2:5")
        assert header == ["v", "value", "argmax", "converged"]
        v = np.array([float(r[0]) for r in rows])
        np.testing.assert_allclose([float(r[1]) for r in rows], v ** 2 / 2, atol=1e-9)

    def test_grid_threads_identical(self):
        a = run("conjugate", "--lambda", "-0.5", "--potential", "q-gaussian", "--grid=-2:-0.5:7")
        b = run("conjugate", "--lambda", "-0.5", "--potential", "q-gaussian", "--grid=-2:-0.5:7",
                "--threads", "3")
        assert a == b and a[0] == 0


class TestFit:
    def test_single_row(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("0.3,0.2\n")
        r = run_json("fit", "--family", "simplex", "--lambda", "-0.5", "--data", str(p))
        np.testing.assert_allclose(r["eta_hat"], [0.3, 0.2], atol=1e-6)
        assert set(r) >= {"eta_hat", "vartheta_hat", "objective", "iterations", "out_of_domain"}
        assert r["out_of_domain"] == 0

    def test_two_methods_agree(self, tmp_path):
        rng = np.random.default_rng(0)
        q = rng.dirichlet([2.0, 3.0, 4.0], size=40)
        p = tmp_path / "d.csv"
        np.savetxt(p, q[:, 1:] / q[:, :1], delimiter=",", header="y1,y2", comments="")
        a = run_json("fit", "--family", "dirichlet", "--sigma", "0.4", "--data", str(p))
        b = run_json("fit", "--family", "dirichlet", "--sigma", "0.4", "--data", str(p),
                     "--method", "likelihood")
        np.testing.assert_allclose(a["eta_hat"], b["eta_hat"], atol=1e-4)

    def test_malformed_csv(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("0.1,0.2\n0.3,x\n")
        code, _ = run("fit", "--family", "simplex", "--lambda", "0.5", "--data", str(p))
        assert code == 2
        assert "row 2, column 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        code, _ = run("fit", "--family", "simplex", "--lambda", "0.5",
                      "--data", str(tmp_path / "none.csv"))
        assert code == 2


class TestPathAndMaxEnt:
    def test_primal_path(self):
        header, rows = run_csv("path", "--kind", "primal", "--lambda", "-0.5", "--potential",
                               "simplex", "--dim", "2", "--start", "0,0", "--end", "1,-0.5",
                               "--steps", "5")
        assert header == ["t", "primal_1", "primal_2", "dual_1", "dual_2"]
        assert len(rows) == 5
        np.testing.assert_allclose([float(x) for x in rows[2][1:3]], [0.5, -0.25])

    def test_dual_path_endpoints(self):
        _, rows = run_csv("path", "--kind", "dual", "--lambda", "0.5", "--potential", "simplex",
                          "--dim", "2", "--start", "0.2,0.3", "--end", "0.6,0.1", "--steps", "3")
        np.testing.assert_allclose([float(x) for x in rows[-1][3:]], [0.6, 0.1])

    def test_maxent(self):
        r = run_json("maxent", "--lambda", "-0.5", "--vartheta", "0.1", "--competitors", "10")
        assert r["competitors"] == 10
        assert r["min_gap"] >= -1e-12
        assert r["max_identity_residual"] <= 1e-8


class TestGeneral:
    @pytest.mark.parametrize("cmd", ["divergence", "conjugate", "fit", "path", "maxent", "figure"])
    def test_help(self, cmd, capsys):
        code, _ = run(cmd, "--help")
        assert code == 0
        assert "--config" in capsys.readouterr().out

    def test_no_command(self):
        assert run()[0] == 2

    def test_deterministic(self):
        args = ("maxent", "--lambda", "0.4", "--vartheta", "0.1", "--seed", "7")
        assert run(*args) == run(*args)

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# quadratic conjugate\npotential = quadratic\nlambda = 0\nv = 1\n")
        r = run_json("conjugate", "--config", str(cfg))
        np.testing.assert_allclose(r["value"], 0.5, rtol=1e-10)
        # command-line flags override the file
        r = run_json("conjugate", "--config", str(cfg), "--v", "2")
        np.testing.assert_allclose(r["value"], 2.0, rtol=1e-10)

    def test_config_underscore_keys(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("u_prime = 2\n")
        r = run_json("divergence", "--lambda", "-1", "--potential", "q-gaussian", "--u", "1",
                     "--config", str(cfg))
        np.testing.assert_allclose(r["value"], 0.5 * math.log(2) + math.log(0.75), rtol=1e-10)

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("bogus = 1\n")
        assert run("conjugate", "--potential", "quadratic", "--config", str(cfg))[0] == 2


class TestFigures:
    @pytest.mark.parametrize("which", sorted(FIGURE_COLUMNS))
    def test_schema_and_determinism(self, which, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("figure", "--which", which, "--out", str(out1))[0] == 0
        assert run("figure", "--which", which, "--out", str(out2))[0] == 0
        assert out1.read_bytes() == out2.read_bytes()
        rows = list(csv.reader(io.StringIO(out1.read_text())))
        assert rows[0] == list(FIGURE_COLUMNS[which])
        assert len(rows) > 10
        assert all(len(r) == len(rows[0]) for r in rows)
        assert "nan" not in out1.read_text()

    def test_all_figures_covered(self):
        assert set(FIGURES) == set(FIGURE_COLUMNS)

    def test_stdout(self):
        code, text = run("figure", "--which", "escort")
        assert code == 0 and text.startswith("alpha,")

    def test_renyi_simplex_caption_lambdas(self):
        _, rows = run_csv("figure", "--which", "renyi-simplex")
        lams = {float(r[0]) for r in rows}
        assert lams >= {-5, -2, -1, -0.5, -0.1, 0.1, 0.5, 0.9}

    def test_qgauss_div_defaults(self):
        header, rows = run_csv("figure", "--which", "qgauss-div")
        assert {float(r[1]) for r in rows} == {2.0}
        th = np.array([float(r[2]) for r in rows])
        assert th.min() > 0 and th.max() <= 10
        # zero at vartheta = vartheta0 is not on the grid, but values are nonnegative
        vals = [float(r[3]) for r in rows if r[4] == "true"]
        assert min(vals) >= -1e-12

    def test_t_interpolation_caption(self):
        _, rows = run_csv("figure", "--which", "t-interpolation")
        assert {float(r[0]) for r in rows} == {3.0, 30.0}
        s = {}
        for r in rows:
            s.setdefault((r[0], r[2]), float(r[3]))
        for df in ("3", "30"):
            ss = [v for (d, _), v in sorted(s.items(), key=lambda kv: float(kv[0][1])) if d == df]
            assert np.all(np.diff(ss) >= -1e-15)

    def test_empty_out(self):
        assert run("figure", "--which", "escort", "--out", "")[0] == 2

    def test_unknown_figure(self):
        assert run("figure", "--which", "nope")[0] == 2
