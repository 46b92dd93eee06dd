"""Batch command-line front end.

Usage:  pcmlab <subcommand> --config <path> [--out <dir>] [--workers <n>]

The config is an INI-style key/value file whose [<subcommand>] section holds
the campaign parameters; unknown keys are rejected and every default is
echoed into the report.  Each run writes <subcommand>.csv (one row per
parameter point, 17 significant digits, no volatile fields, so a rerun with
the same config is byte-identical) and <subcommand>.json (parameter echo,
results, per-check booleans, wall-clock time).

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .chiral_mc import McParams, effective_mass, measure_correlator, run_simulation
from .concentration import mean_vs_t0, sample_t_distribution, variance_scaling_fit
from .contour import CATALOG, verify_rotation
from .errors import NumericalError, PcmlabError, ValidationError
from .gap import dropped_term_ratio, solve_gap
from .lattice import Dispersion, build_lattice, propagator
from .orthogonal import leading_moment, mc_moment, two_point_spectrum, spectrum_ensemble
from .rngstreams import point_stream
from .spectral import t0_closed_form, variance_prediction

SCHEMA_VERSION = 1


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(" ", "").split(",") if tok]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(" ", "").split(",") if tok]


def _parse_bool(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"cannot parse boolean from {text!r}")


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "int_list": _parse_int_list,
    "float_list": _parse_float_list,
}


def read_section(path: str, name: str, schema: dict) -> dict:
    """Parse one config section against a {key: (type, default)} schema.

    A missing file or missing section is a validation error; so is any key
    not present in the schema.  Defaults fill the remaining keys so the full
    effective configuration is always reported.
    """
    cfg = configparser.ConfigParser()
    loaded = cfg.read(path)
    if not loaded:
        raise ValidationError(f"config file {path!r} not found or unreadable")
    if not cfg.has_section(name):
        raise ValidationError(
            f"config {path!r} lacks a [{name}] section; expected keys: "
            f"{sorted(schema)}"
        )
    section = cfg[name]
    unknown = sorted(set(section) - set(schema))
    if unknown:
        raise ValidationError(
            f"unknown key(s) {unknown} in [{name}]; allowed: {sorted(schema)}"
        )
    out = {}
    for key, (kind, default) in schema.items():
        if key in section:
            try:
                out[key] = _PARSERS[kind](section[key])
            except ValidationError:
                raise
            except Exception as exc:
                raise ValidationError(f"bad value for {key!r} in [{name}]: {exc}")
        else:
            if default is None:
                raise ValidationError(f"[{name}] is missing required key {key!r}")
            out[key] = default
    return out


def _spectrum_for(spec_text: str, n_colors: int):
    """Spectrum specifier: 'two-point:m1,m2' or 'list:v1,v2,...'."""
    kind, _, rest = spec_text.partition(":")
    if kind == "two-point":
        vals = _parse_float_list(rest)
        if len(vals) != 2:
            raise ValidationError(f"two-point spectrum needs 2 values, got {rest!r}")
        return two_point_spectrum(vals[0], vals[1], n_colors)
    if kind == "list":
        vals = _parse_float_list(rest)
        if len(vals) != n_colors:
            raise ValidationError(
                f"explicit spectrum has {len(vals)} entries but N={n_colors}"
            )
        return spectrum_ensemble(vals)
    raise ValidationError(f"unknown spectrum specifier {spec_text!r}")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_summary(path: Path, subcommand: str, params: dict, results,
                  criteria: dict, elapsed: float) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "subcommand": subcommand,
        "parameters": params,
        "results": results,
        "criteria": criteria,
        "wall_clock_seconds": elapsed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommand runners: each returns (csv_header, csv_rows, results, criteria)

HAAR_SCHEMA = {
    "n_list": ("int_list", [8, 16, 32, 64]),
    "samples": ("int", 100_000),
    "seed": ("int", 0),
}


def run_haar_moments(params, workers):
    header = ["point", "spec", "n", "samples", "estimate", "stderr", "leading"]
    rows, results = [], []
    k1_ok, k2_gaps = True, []
    for point, n in enumerate(params["n_list"]):
        rng = point_stream(params["seed"], point)
        est1 = mc_moment(n, [0, 0], [1, 1], params["samples"], rng)
        lead1 = leading_moment(n, [0, 0], [1, 1])
        rows.append(["p%d" % point, "O01*O01", n, est1.samples,
                     est1.estimate, est1.stderr, lead1])
        if abs(est1.estimate - lead1) > 4 * est1.stderr:
            k1_ok = False
        est2 = mc_moment(n, [0, 0, 1, 1], [0, 0, 1, 1], params["samples"], rng)
        lead2 = leading_moment(n, [0, 0, 1, 1], [0, 0, 1, 1])
        rows.append(["p%d" % point, "O00^2*O11^2", n, est2.samples,
                     est2.estimate, est2.stderr, lead2])
        k2_gaps.append((n, abs(n ** 2 * est2.estimate - 1.0),
                        n ** 2 * est2.stderr))
        results.append({"n": n, "k1": est1.estimate, "k1_err": est1.stderr,
                        "k2": est2.estimate, "k2_err": est2.stderr})
    monotone = all(
        k2_gaps[i + 1][1] <= k2_gaps[i][1] + 2 * (k2_gaps[i][2] + k2_gaps[i + 1][2])
        for i in range(len(k2_gaps) - 1))
    criteria = {"k1_within_4_stderr": k1_ok,
                "k2_scaled_gap_monotone": bool(monotone)}
    return header, rows, results, criteria


CONCENTRATION_SCHEMA = {
    "side": ("int", 8),
    "volume": ("float", 1.0),
    "mu": ("float", 1.0),
    "n_list": ("int_list", [8, 16, 32, 64]),
    "samples": ("int", 400),
    "spectrum": ("str", "two-point:0,1"),
    "dispersion": ("str", "continuum"),
    "seed": ("int", 0),
    "workers": ("int", 1),
}


def _concentration_points(params, workers):
    lattice = build_lattice(params["side"], params["volume"])
    disp = Dispersion(params["dispersion"])
    points = []
    for point, n in enumerate(params["n_list"]):
        spectrum = _spectrum_for(params["spectrum"], n)
        moments = sample_t_distribution(
            lattice, spectrum, params["mu"], params["samples"],
            params["seed"], point_index=point, dispersion=disp,
            workers=workers or params["workers"])
        points.append((n, spectrum, moments))
    return lattice, disp, points


def run_concentration(params, workers):
    lattice, disp, points = _concentration_points(params, workers)
    header = ["point", "n", "samples", "mean", "mean_stderr", "variance",
              "variance_stderr", "skewness", "excess_kurtosis", "t0",
              "gap", "gap_in_stderr", "variance_target"]
    rows, results = [], []
    for point, (n, spectrum, em) in enumerate(points):
        t0 = t0_closed_form(lattice, disp, params["mu"], spectrum.mean)
        check = mean_vs_t0(em, lattice, disp, params["mu"], spectrum.mean)
        target = variance_prediction(lattice, n, spectrum.mean,
                                     spectrum.mean_square)
        rows.append(["p%d" % point, n, em.sample_count, em.mean,
                     em.mean_stderr, em.variance, em.variance_stderr,
                     em.skewness, em.excess_kurtosis, t0, check.gap,
                     check.gap_in_stderr, target])
        results.append({"n": n, "mean": em.mean, "variance": em.variance,
                        "gap": check.gap, "gap_in_stderr": check.gap_in_stderr})
    variances = [em.variance for _, _, em in points]
    errs = [em.variance_stderr for _, _, em in points]
    decreasing = all(
        variances[i + 1] < variances[i] + 2 * (errs[i] + errs[i + 1])
        for i in range(len(variances) - 1))
    return header, rows, results, {"variance_decreasing_in_n": bool(decreasing)}


def run_mean_check(params, workers):
    lattice, disp, points = _concentration_points(params, workers)
    header = ["point", "n", "samples", "mean", "mean_stderr", "t0", "gap",
              "gap_in_stderr", "relative_gap"]
    rows, results = [], []
    gaps_in_err, rel_gaps = [], []
    for point, (n, spectrum, em) in enumerate(points):
        t0 = t0_closed_form(lattice, disp, params["mu"], spectrum.mean)
        check = mean_vs_t0(em, lattice, disp, params["mu"], spectrum.mean)
        rel = check.gap / abs(t0)
        gaps_in_err.append(check.gap_in_stderr)
        rel_gaps.append(rel)
        rows.append(["p%d" % point, n, em.sample_count, em.mean,
                     em.mean_stderr, t0, check.gap, check.gap_in_stderr, rel])
        results.append({"n": n, "gap": check.gap,
                        "gap_in_stderr": check.gap_in_stderr,
                        "relative_gap": rel})
    criteria = {
        "gap_in_stderr_decreasing": bool(all(
            gaps_in_err[i + 1] < gaps_in_err[i]
            for i in range(len(gaps_in_err) - 1))),
        "final_relative_gap_below_2pct": bool(rel_gaps[-1] < 0.02),
    }
    return header, rows, results, criteria


SCALING_SCHEMA = {
    "axis": ("str", "N"),
    "side": ("int", 8),
    "side_list": ("int_list", [4, 6, 8, 12]),
    "volume": ("float", 1.0),
    "mu": ("float", 1.0),
    "n_colors": ("int", 32),
    "n_list": ("int_list", [8, 16, 32, 64]),
    "samples": ("int", 400),
    "spectrum": ("str", "two-point:0,1"),
    "dispersion": ("str", "continuum"),
    "seed": ("int", 0),
    "workers": ("int", 1),
}


def run_variance_scaling(params, workers):
    axis = params["axis"]
    if axis not in ("N", "side"):
        raise ValidationError(f"axis must be 'N' or 'side', got {axis!r}")
    disp = Dispersion(params["dispersion"])
    runs = []
    header = ["point", "axis_value", "samples", "variance", "variance_stderr"]
    rows = []
    if axis == "N":
        lattice = build_lattice(params["side"], params["volume"])
        for point, n in enumerate(params["n_list"]):
            spectrum = _spectrum_for(params["spectrum"], n)
            em = sample_t_distribution(
                lattice, spectrum, params["mu"], params["samples"],
                params["seed"], point_index=point, dispersion=disp,
                workers=workers or params["workers"])
            runs.append((n, em))
            rows.append(["p%d" % point, n, em.sample_count, em.variance,
                         em.variance_stderr])
        target_range = (-2.3, -1.7)
    else:
        n = params["n_colors"]
        spectrum = _spectrum_for(params["spectrum"], n)
        for point, side in enumerate(params["side_list"]):
            lattice = build_lattice(side, params["volume"])
            em = sample_t_distribution(
                lattice, spectrum, params["mu"], params["samples"],
                params["seed"], point_index=point, dispersion=disp,
                workers=workers or params["workers"])
            runs.append((side, em))
            rows.append(["p%d" % point, side, em.sample_count, em.variance,
                         em.variance_stderr])
        target_range = (-4.6, -3.4)
    fit = variance_scaling_fit(runs, axis={"N": "N", "side": "side"}[axis])
    results = {"axis": axis, "exponent": fit.exponent,
               "exponent_stderr": fit.exponent_stderr,
               "target_range": list(target_range)}
    in_range = target_range[0] <= fit.exponent <= target_range[1]
    return header, rows, results, {"exponent_in_range": bool(in_range)}


GAP_SCHEMA = {
    "side": ("int", 64),
    "volume": ("float", 1.0),
    "lambdas": ("float_list", [1.0, 2.0, 3.0, 4.0]),
    "dispersion": ("str", "continuum"),
    "n_colors": ("int", 32),
    "spectrum": ("str", "two-point:0,1"),
}


def run_gap(params, workers):
    lattice = build_lattice(params["side"], params["volume"])
    disp = Dispersion(params["dispersion"])
    header = ["point", "lambda", "m_numeric", "residual", "iterations",
              "asymptotic", "alt_asymptotic", "log_offset", "dropped_term_ratio"]
    rows, results, offsets = [], [], []
    residual_ok, masses = True, []
    spectrum = _spectrum_for(params["spectrum"], params["n_colors"])
    for point, lam in enumerate(params["lambdas"]):
        sol = solve_gap(lattice, disp, lam)
        offset = sol.log_offset(lam, lattice)
        ratio = dropped_term_ratio(lattice, lam, sol.m, params["n_colors"],
                                   spectrum.mean, spectrum.mean_square)
        rows.append(["p%d" % point, lam, sol.m, sol.residual, sol.iterations,
                     sol.asymptotic_value, sol.alt_asymptotic, offset, ratio])
        results.append({"lambda": lam, "m": sol.m, "residual": sol.residual,
                        "log_offset": offset, "dropped_term_ratio": ratio})
        if abs(sol.residual) >= 1e-12 / (2.0 * lam):
            residual_ok = False
        masses.append(sol.m)
        offsets.append(offset)
    spread = max(offsets) - min(offsets) if offsets else 0.0
    criteria = {
        "residuals_ok": bool(residual_ok),
        "m_monotone_in_lambda": bool(all(
            masses[i] < masses[i + 1] for i in range(len(masses) - 1))),
        "log_offset_spread": spread,
        "log_offset_spread_below_1p5": bool(spread < 1.5),
    }
    return header, rows, results, criteria


SIMULATE_SCHEMA = {
    "side": ("int", 16),
    "n_colors": ("int", 8),
    "coupling": ("float", 2.0),
    "thermalization": ("int", 1000),
    "measurements": ("int", 200),
    "spacing": ("int", 10),
    "proposal_angle": ("float", 0.5),
    "reortho_interval": ("int", 100),
    "hits_per_site": ("int", 1),
    "seed": ("int", 0),
    "fit_lo": ("int", 2),
    "fit_hi": ("int", 0),  # 0 means side//2 - 1
}


def run_simulate(params, workers):
    lattice = build_lattice(params["side"], float(params["side"] ** 2))
    mc = McParams(
        n_colors=params["n_colors"], coupling=params["coupling"],
        lattice=lattice, thermalization=params["thermalization"],
        measurements=params["measurements"], spacing=params["spacing"],
        proposal_angle=params["proposal_angle"],
        reortho_interval=params["reortho_interval"],
        hits_per_site=params["hits_per_site"], seed=params["seed"])
    run = run_simulation(mc)
    corr = measure_correlator(run)
    fit_hi = params["fit_hi"] or params["side"] // 2 - 1
    mass = effective_mass(corr, fit_window=(params["fit_lo"], fit_hi))

    half = params["side"] // 2
    header = ["measurement"] + [f"c_{r}" for r in range(params["side"])]
    rows = [[m] + list(run.slice_correlators[m])
            for m in range(run.slice_correlators.shape[0])]
    window = corr.values[1:half + 1]
    results = {
        "correlator": {
            "r": corr.separations.tolist(),
            "value": corr.values.tolist(),
            "error": corr.errors.tolist(),
        },
        "effective_mass": {
            "r": mass.separations.tolist(),
            "value": mass.values.tolist(),
            "error": mass.errors.tolist(),
        },
        "mass": mass.plateau,
        "mass_error": mass.plateau_error,
        "tau_int_sweeps": run.tau_int_sweeps,
        "acceptance": run.acceptance_measurement,
        "proposal_angle": run.proposal_angle,
        "orthogonality_drift": run.final_drift,
    }
    criteria = {
        "correlator_positive": bool(np.all(window > 0)),
        "correlator_decreasing_within_errors": bool(np.all(
            corr.values[2:half + 1] < corr.values[1:half]
            + 2 * (corr.errors[2:half + 1] + corr.errors[1:half]))),
        "plateau_finite": bool(np.isfinite(mass.plateau)),
    }
    return header, rows, results, criteria


CONTOUR_SCHEMA = {
    "truncation": ("float", 0.0),  # 0 means per-case default
    "tolerance": ("float", 1e-6),
}


def run_contour_check(params, workers):
    header = ["case", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "difference",
              "tail_bound", "gap"]
    rows, results = [], []
    all_ok = True
    for case in CATALOG:
        trunc = params["truncation"] or None
        check = verify_rotation(case, truncation=trunc,
                                tolerance=params["tolerance"])
        rows.append([case.name, check.lhs.real, check.lhs.imag,
                     check.rhs.real, check.rhs.imag, check.difference,
                     check.tail_bound, check.gap])
        all_ok = all_ok and check.gap < params["tolerance"]
        results.append({"case": case.name, "difference": check.difference,
                        "gap": check.gap})
    return header, rows, results, {"all_below_tolerance": bool(all_ok)}


PROPAGATOR_SCHEMA = {
    "side": ("int", 8),
    "volume": ("float", 1.0),
    "mass": ("float", 1.0),
    "dispersion": ("str", "continuum"),
}


def run_propagator(params, workers):
    lattice = build_lattice(params["side"], params["volume"])
    disp = Dispersion(params["dispersion"])
    header = ["dx", "dy", "value"]
    rows, results = [], []
    for d in range(params["side"] // 2 + 1):
        val = propagator(lattice, disp, params["mass"], (d, 0), (0, 0))
        rows.append([d, 0, val])
        results.append({"displacement": d, "value": val})
    sym_ok = np.isclose(
        propagator(lattice, disp, params["mass"], (1, 2), (0, 0)),
        propagator(lattice, disp, params["mass"], (0, 0), (1, 2)),
        rtol=0, atol=1e-12)
    diag = propagator(lattice, disp, params["mass"], (0, 0), (0, 0))
    return header, rows, results, {
        "symmetric": bool(sym_ok),
        "diagonal_positive": bool(diag > 0),
    }


SUBCOMMANDS = {
    "haar-moments": (HAAR_SCHEMA, run_haar_moments),
    "concentration": (CONCENTRATION_SCHEMA, run_concentration),
    "mean-check": (CONCENTRATION_SCHEMA, run_mean_check),
    "variance-scaling": (SCALING_SCHEMA, run_variance_scaling),
    "gap": (GAP_SCHEMA, run_gap),
    "simulate": (SIMULATE_SCHEMA, run_simulate),
    "contour-check": (CONTOUR_SCHEMA, run_contour_check),
    "propagator": (PROPAGATOR_SCHEMA, run_propagator),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="pcmlab", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default="pcmlab-out")
    parser.add_argument("--workers", type=int, default=0,
                        help="override the config worker count")
    try:
        args = parser.parse_args(argv)
        schema, runner = SUBCOMMANDS[args.subcommand]
        params = read_section(args.config, args.subcommand, schema)
        start = time.perf_counter()
        header, rows, results, criteria = runner(params, args.workers)
        elapsed = time.perf_counter() - start

        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(out_dir / f"{args.subcommand}.csv", header, rows)
        write_summary(out_dir / f"{args.subcommand}.json", args.subcommand,
                      params, results, criteria, elapsed)
        for key, value in sorted(criteria.items()):
            print(f"{args.subcommand}: {key} = {value}")
        return 0
    except ValidationError as exc:
        print(f"pcmlab: validation error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, PcmlabError) as exc:
        print(f"pcmlab: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
