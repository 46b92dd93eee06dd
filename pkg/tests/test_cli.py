import csv
import json

from pcmlab.cli import main


def write_config(path, text):
    path.write_text(text)
    return str(path)


def test_empty_config_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path / "empty.ini", "")
    code = main(["gap", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 1
    assert "section" in capsys.readouterr().err


def test_missing_config_rejected(tmp_path):
    code = main(["gap", "--config", str(tmp_path / "nope.ini"),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.ini", "[gap]\nside = 16\nfoo = 1\n")
    code = main(["gap", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 1
    assert "foo" in capsys.readouterr().err


def test_bad_value_rejected(tmp_path):
    cfg = write_config(tmp_path / "bad.ini", "[gap]\nside = soup\n")
    assert main(["gap", "--config", cfg, "--out", str(tmp_path / "out")]) == 1


def test_validation_error_from_module_layer(tmp_path):
    cfg = write_config(tmp_path / "cfg.ini", "[gap]\nside = 1\n")
    assert main(["gap", "--config", cfg, "--out", str(tmp_path / "out")]) == 1


def test_numerical_error_exit_code(tmp_path):
    # coupling far outside the achievable window of a tiny lattice is caught
    # as a validation error; an unconvergent contour truncation is numerical
    cfg = write_config(tmp_path / "cfg.ini",
                       "[contour-check]\ntruncation = 5\n")
    assert main(["contour-check", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2


def test_gap_subcommand_outputs(tmp_path):
    cfg = write_config(tmp_path / "gap.ini",
                       "[gap]\nside = 64\nvolume = 1\nlambdas = 1,2,3,4\n")
    out = tmp_path / "out"
    assert main(["gap", "--config", cfg, "--out", str(out)]) == 0

    with open(out / "gap.csv") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    assert header[0] == "point"
    assert len(data) == 4
    ms = [float(r[header.index("m_numeric")]) for r in data]
    assert ms == sorted(ms)
    residuals = [abs(float(r[header.index("residual")])) for r in data]
    lams = [float(r[header.index("lambda")]) for r in data]
    assert all(res < 1e-12 / (2 * lam) for res, lam in zip(residuals, lams))

    summary = json.loads((out / "gap.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["criteria"]["residuals_ok"] is True
    assert summary["criteria"]["m_monotone_in_lambda"] is True
    assert summary["parameters"]["side"] == 64


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "gap.ini",
                       "[gap]\nside = 32\nvolume = 1\nlambdas = 1,2\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["gap", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["gap", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "gap.csv").read_bytes() == (out2 / "gap.csv").read_bytes()


def test_contour_subcommand(tmp_path):
    cfg = write_config(tmp_path / "c.ini", "[contour-check]\n")
    out = tmp_path / "out"
    assert main(["contour-check", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "contour-check.json").read_text())
    assert summary["criteria"]["all_below_tolerance"] is True
    with open(out / "contour-check.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 5


def test_propagator_subcommand(tmp_path):
    cfg = write_config(tmp_path / "p.ini",
                       "[propagator]\nside = 6\nvolume = 2.0\nmass = 0.7\n")
    out = tmp_path / "out"
    assert main(["propagator", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "propagator.json").read_text())
    assert summary["criteria"]["symmetric"] is True
    assert summary["criteria"]["diagonal_positive"] is True


def test_haar_moments_subcommand(tmp_path):
    cfg = write_config(tmp_path / "h.ini",
                       "[haar-moments]\nn_list = 4,8\nsamples = 20000\nseed = 3\n")
    out = tmp_path / "out"
    assert main(["haar-moments", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "haar-moments.json").read_text())
    assert summary["criteria"]["k1_within_4_stderr"] is True


def test_concentration_subcommand_small(tmp_path):
    cfg = write_config(tmp_path / "c.ini", """
[concentration]
side = 2
volume = 1.0
n_list = 2,4
samples = 60
seed = 5
""")
    out = tmp_path / "out"
    assert main(["concentration", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "concentration.json").read_text())
    assert summary["criteria"]["variance_decreasing_in_n"] is True
    with open(out / "concentration.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3


def test_simulate_subcommand_small(tmp_path):
    cfg = write_config(tmp_path / "s.ini", """
[simulate]
side = 6
n_colors = 2
coupling = 2.0
thermalization = 400
measurements = 100
spacing = 60
seed = 9
""")
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "simulate.json").read_text())
    assert "mass" in summary["results"]
    assert summary["results"]["orthogonality_drift"] < 1e-8
    with open(out / "simulate.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 100


def test_unknown_subcommand_rejected(tmp_path):
    cfg = write_config(tmp_path / "x.ini", "[gap]\n")
    assert main(["fourier", "--config", cfg]) == 1
