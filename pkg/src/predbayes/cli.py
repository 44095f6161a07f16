"""Batch command-line front end.

Subcommands: ``paths``, ``coverage``, ``quantiles``, ``ppc``, ``regression``,
``tvprobe``, ``asymptotics``.  Options may come from ``--config FILE``
(simple ``key = value`` lines); explicit flags override file values, and the
fully resolved configuration is echoed to the output directory.  Exit codes:
0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import dataio
from .dataio import DataError, parse_config_file, write_config_echo
from .engines import tv_scan
from .experiments import (Dgp, ExperimentSummary, bias_from_label, run_bahadur_check,
                          run_coverage_formula_link, run_mean_coverage, run_path_fan,
                          run_ppc_study, run_quantile_coverage, run_regression_ppc)
from .resampler import Horizon

__all__ = ["main", "build_parser"]

_ENV_OUTDIR = "PREDBAYES_OUTDIR"


# ---------------------------------------------------------------------------
# option plumbing


def _int(s):
    return int(s)


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _float(s):
    return float(s)


def _alpha(s):
    v = float(s)
    if not (0.0 < v < 1.0):
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {s}")
    return v


def _ints(s):
    return [_pos_int(tok) for tok in str(s).split(",") if tok.strip()]


def _floats(s):
    return [float(tok) for tok in str(s).split(",") if tok.strip()]


def _qs(s):
    vals = _floats(s)
    for v in vals:
        if not (0.0 < v < 1.0):
            raise argparse.ArgumentTypeError(f"quantile level out of range: {v}")
    return vals


def _strs(s):
    return [tok.strip() for tok in str(s).split(",") if tok.strip()]


def _str(s):
    return str(s)


def _bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes"):
        return True
    if str(s).lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s}")


def _choice(*allowed):
    def conv(s):
        if s not in allowed:
            raise argparse.ArgumentTypeError(f"expected one of {allowed}, got {s!r}")
        return s

    return conv


def _horizon(s):
    try:
        rule, value = str(s).split(":", 1)
        if rule == "power":
            return Horizon.power(float(value))
        if rule == "fixed":
            return Horizon.fixed_total(int(value))
    except (ValueError, TypeError):
        pass
    raise argparse.ArgumentTypeError(f"horizon must be power:<expo> or fixed:<N>, got {s}")


def _bias_label(s):
    try:
        bias_from_label(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return s


def _bias_labels(s):
    return [_bias_label(tok) for tok in _strs(s)]


@dataclass(frozen=True)
class Opt:
    name: str
    conv: object
    default: object
    help: str = ""


_COMMON = [
    Opt("seed", _int, 42, "master seed for all substreams"),
    Opt("outdir", _str, None, "output directory (default $PREDBAYES_OUTDIR or ./predbayes_out)"),
    Opt("formats", _strs, ["csv", "json"], "output formats"),
    Opt("workers", _pos_int, 1, "replicate-level worker processes"),
]

_DGP = [
    Opt("dgp", _choice("normal", "gamma"), "normal", "data-generating process"),
    Opt("mu", _float, 0.0, "normal mean"),
    Opt("var", _float, 1.0, "normal variance"),
    Opt("shape", _float, 2.0, "gamma shape"),
    Opt("rate", _float, 2.0, "gamma rate (mean = shape/rate)"),
]

_OPTIONS = {
    "coverage": _COMMON + _DGP + [
        Opt("n", _ints, [100, 200, 500], "observed sample sizes"),
        Opt("bias", _bias_labels, ["none", "half_neg", "prop1"], "bias schedules"),
        Opt("reps", _pos_int, 500, "repeated experiments R"),
        Opt("paths", _pos_int, 2000, "resampling paths B"),
        Opt("alpha", _alpha, 0.05, "credible level"),
        Opt("horizon", _horizon, Horizon.power(1.5), "total size N rule"),
    ],
    "quantiles": _COMMON + _DGP + [
        Opt("n", _ints, [100, 200, 500], "observed sample sizes"),
        Opt("q", _qs, [0.5, 0.95], "quantile levels"),
        Opt("reps", _pos_int, 200, "repeated experiments R"),
        Opt("paths", _pos_int, 1000, "resampling paths B"),
        Opt("alpha", _alpha, 0.05, "credible level"),
        Opt("horizon", _horizon, Horizon.power(1.5), "total size N rule"),
    ],
    "ppc": _COMMON + _DGP + [
        Opt("n", _ints, [100, 200, 500], "observed sample sizes"),
        Opt("stats", _strs, ["skewness", "variance"], "test functions"),
        Opt("reps", _pos_int, 200, "repeated experiments R"),
        Opt("paths", _pos_int, 100, "replicates B"),
        Opt("level", _alpha, 0.05, "rejection level"),
        Opt("delta_exponent", _float, 1.5, "difference-statistic horizon exponent"),
    ],
    "paths": _COMMON + _DGP + [
        Opt("n_obs", _pos_int, 10, "observed points to fit before simulating"),
        Opt("steps", _int, 1000, "forward steps"),
        Opt("paths", _pos_int, 2000, "simulated trajectories B"),
        Opt("keep", _pos_int, 150, "trajectories retained in the dump"),
        Opt("bias", _bias_label, "none", "bias schedule"),
    ],
    "tvprobe": _COMMON + [
        Opt("schedule", _bias_label, "none", "bias schedule"),
        Opt("mu", _float, 0.0, "probe state mean"),
        Opt("sigma", _float, 1.0, "probe state variance"),
        Opt("t_min", _pos_int, 100, "smallest step count probed"),
        Opt("t_max", _pos_int, 100000, "largest step count probed"),
        Opt("points_per_decade", _pos_int, 20, "geometric grid density"),
    ],
    "regression": _COMMON + [
        Opt("data", _str, None, "CSV dataset path"),
        Opt("outcome", _str, None, "outcome column"),
        Opt("covariates", _strs, None, "covariate columns"),
        Opt("dummies", _strs, [], "dummy covariate columns (not standardized)"),
        Opt("standardize", _bool, True, "z-score continuous covariates"),
        Opt("engine", _strs, ["gaussian", "student_t"], "engines to check"),
        Opt("nu", _float, 5.0, "Student-t degrees of freedom"),
        Opt("paths", _pos_int, 100, "replicates B"),
        Opt("horizon", _pos_int, 100, "self-simulation steps before tail correction"),
        Opt("tail_q", _alpha, 0.995, "tail statistic quantile"),
        Opt("mle_starts", _pos_int, 10, "random starts for the Student-t fit"),
    ],
    "asymptotics": _COMMON + [
        Opt("r", _floats, [0.5, 1.0, 2.0], "variance ratios for the coverage link"),
        Opt("link_n", _pos_int, 200, "sample size for the coverage link"),
        Opt("link_total", _pos_int, 4000, "total augmented size for the coverage link"),
        Opt("reps", _pos_int, 500, "repeated experiments R"),
        Opt("paths", _pos_int, 2000, "resampling paths B"),
        Opt("alpha", _alpha, 0.05, "credible level"),
        Opt("bahadur_n", _pos_int, 500, "sample size for the quantile-limit check"),
        Opt("bahadur_q", _alpha, 0.5, "quantile level for the limit check"),
        Opt("bahadur_paths", _pos_int, 2000, "paths for the limit check"),
        Opt("bahadur_datasets", _pos_int, 30, "datasets averaged in the limit check"),
        Opt("bahadur_engine", _choice("polya", "gaussian"), "polya",
            "engine for the limit check"),
    ],
}

_REQUIRED = {"regression": ("data", "outcome", "covariates")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predbayes",
        description="Predictive-resampling posterior studies and engine checks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value config file")
        for o in opts:
            p.add_argument("--" + o.name.replace("_", "-"), dest=o.name,
                           type=o.conv, default=argparse.SUPPRESS, help=o.help)
    return parser


def _resolve(parser, name: str, ns: argparse.Namespace) -> dict:
    table = {o.name: o for o in _OPTIONS[name]}
    values = {k: o.default for k, o in table.items()}
    if ns.config is not None:
        for key, raw in parse_config_file(ns.config).items():
            if key not in table:
                parser.error(f"unknown config key {key!r} for {name}")
            try:
                values[key] = table[key].conv(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"config key {key!r}: {exc}")
    for key in table:
        if hasattr(ns, key):
            values[key] = getattr(ns, key)
    for key in _REQUIRED.get(name, ()):
        if values[key] is None:
            parser.error(f"{name} requires --{key.replace('_', '-')}")
    if values["outdir"] is None:
        values["outdir"] = os.environ.get(_ENV_OUTDIR, "predbayes_out")
    return values


def _dgp_from(values: dict) -> Dgp:
    if values["dgp"] == "normal":
        return Dgp.normal(values["mu"], values["var"])
    return Dgp.gamma(values["shape"], rate=values["rate"])


def _echo(values: dict, subcommand: str) -> dict:
    echo = {"subcommand": subcommand}
    for k, v in values.items():
        echo[k] = v.label() if isinstance(v, Horizon) else v
    return echo


def _print_table(summary: ExperimentSummary) -> None:
    cols = summary.columns

    def fmt(v):
        return f"{v:.3f}" if isinstance(v, float) else str(v)

    table = [[fmt(r[c]) for c in cols] for r in summary.rows]
    widths = [max(len(c), *(len(row[i]) for row in table)) if table else len(c)
              for i, c in enumerate(cols)]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


_STAT_ALIASES = {
    "skewness": "sample_skewness",
    "variance": "sample_variance",
    "chi2": "chi2",
    "tail": "tail_abs_residual",
    "mmd": "mmd",
    "w1": "wasserstein1",
}


def _run_summary_cmd(values, subcommand, summary, name):
    write_config_echo(_echo(values, subcommand), values["outdir"])
    files = dataio.write_summary(summary, values["outdir"], name, values["formats"])
    _print_table(summary)
    print(f"[{subcommand}] wrote {', '.join(files)} in {summary.runtime:.1f}s")
    return 0


def _cmd_coverage(values):
    summary = run_mean_coverage(_dgp_from(values), values["n"], values["bias"],
                                values["reps"], values["paths"], values["alpha"],
                                values["seed"], values["horizon"], values["workers"])
    return _run_summary_cmd(values, "coverage", summary, "mean_coverage")


def _cmd_quantiles(values):
    summary = run_quantile_coverage(_dgp_from(values), values["n"], values["q"],
                                    values["reps"], values["paths"], values["alpha"],
                                    values["seed"], values["horizon"], values["workers"])
    return _run_summary_cmd(values, "quantiles", summary, "quantile_coverage")


def _cmd_ppc(values):
    from .diagnostics import TestFunction

    stats = []
    for s in values["stats"]:
        base, _, arg = s.partition(":")
        if base not in _STAT_ALIASES:
            raise DataError(f"unknown test function {s!r}")
        kind = _STAT_ALIASES[base]
        stats.append(TestFunction(kind, q=float(arg)) if arg else TestFunction(kind))
    summary = run_ppc_study(_dgp_from(values), values["n"], stats, values["reps"],
                            values["paths"], values["seed"],
                            values["delta_exponent"], values["level"],
                            values["workers"])
    return _run_summary_cmd(values, "ppc", summary, "ppc_study")


def _cmd_paths(values):
    fan = run_path_fan(_dgp_from(values), bias_from_label(values["bias"]),
                       values["steps"], values["paths"], values["keep"],
                       values["seed"], values["n_obs"])
    write_config_echo(_echo(values, "paths"), values["outdir"])
    files = dataio.write_path_fan(fan, values["outdir"], "path_fan", values["formats"])
    print(f"[paths] wrote {', '.join(files)} in {fan.runtime:.1f}s")
    return 0


def _cmd_tvprobe(values):
    schedule = bias_from_label(values["schedule"])
    ts = _geometric_grid(values["t_min"], values["t_max"], values["points_per_decade"])
    scan = tv_scan(schedule, ts, mu=values["mu"], sigma=values["sigma"])
    summary = ExperimentSummary(
        columns=["t", "delta", "bound_term", "partial_sum"],
        rows=scan,
        config=_echo(values, "tvprobe"),
    )
    return _run_summary_cmd(values, "tvprobe", summary, "tv_probe")


def _cmd_regression(values):
    ds = dataio.ingest_csv(values["data"], values["outcome"], values["covariates"],
                           values["dummies"], values["standardize"])
    X = ds.design_matrix()
    write_config_echo(_echo(values, "regression"), values["outdir"])
    if ds.n_dropped:
        print(f"[regression] dropped {ds.n_dropped} incomplete rows")
    rows = []
    for engine in values["engine"]:
        reports = run_regression_ppc(X, ds.outcome, engine, values["paths"],
                                     values["seed"], values["nu"], values["horizon"],
                                     values["tail_q"], mle_starts=values["mle_starts"])
        for stat, rep in reports.items():
            dataio.write_ppc_report(rep, values["outdir"], f"ppc_{engine}_{stat}",
                                    _echo(values, "regression"))
            rows.append({"engine": engine, "stat": stat, "s_obs": rep.s_obs,
                         "p": rep.p, "avg_diff": float(np.mean(rep.deltas)),
                         "B": rep.n_replicates})
    summary = ExperimentSummary(
        columns=["engine", "stat", "s_obs", "p", "avg_diff", "B"],
        rows=rows, config=_echo(values, "regression"))
    dataio.write_summary(summary, values["outdir"], "regression_ppc", values["formats"])
    _print_table(summary)
    return 0


def _cmd_asymptotics(values):
    link = run_coverage_formula_link(values["r"], values["link_n"],
                                     values["link_total"], values["reps"],
                                     values["paths"], values["alpha"],
                                     values["seed"], values["workers"])
    bah = run_bahadur_check(values["bahadur_q"], values["bahadur_n"],
                            values["bahadur_paths"], values["seed"],
                            values["bahadur_datasets"],
                            engine=values["bahadur_engine"],
                            workers=values["workers"])
    write_config_echo(_echo(values, "asymptotics"), values["outdir"])
    dataio.write_summary(link, values["outdir"], "coverage_link", values["formats"])
    dataio.write_summary(bah, values["outdir"], "bahadur", values["formats"])
    _print_table(link)
    _print_table(bah)
    print(f"[asymptotics] done in {link.runtime + bah.runtime:.1f}s")
    return 0


def _geometric_grid(t_min: int, t_max: int, per_decade: int):
    if t_max < t_min:
        raise DataError("t-max must be at least t-min")
    count = max(2, int(math.log10(t_max / t_min) * per_decade) + 1)
    ts = np.unique(np.round(np.geomspace(t_min, t_max, count)).astype(int))
    return [int(t) for t in ts]


_HANDLERS = {
    "coverage": _cmd_coverage,
    "quantiles": _cmd_quantiles,
    "ppc": _cmd_ppc,
    "paths": _cmd_paths,
    "tvprobe": _cmd_tvprobe,
    "regression": _cmd_regression,
    "asymptotics": _cmd_asymptotics,
}


def parse_config(argv) -> dict:
    """Resolve argv (plus any config file) into the full option dict."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    return {"subcommand": ns.subcommand, **_resolve(parser, ns.subcommand, ns)}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    values = _resolve(parser, ns.subcommand, ns)
    try:
        return _HANDLERS[ns.subcommand](values)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
