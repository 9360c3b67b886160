"""Batch command-line interface.

Subcommands: simulate | fit | select | evidence | report. A `--config`
file of `key = value` pairs supplies defaults; explicit flags win. Seeds
are mandatory and never default to the wall clock.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import report as report_mod
from .diagnostics import relabel_for_reporting, summarize
from .errors import DataError, NumericalError, UsageError
from .evidence import EvidenceSettings, assemble_marginal_log_likelihood
from .gibbs import GibbsSettings, run_gibbs
from .model import simulate_series, stability_check
from .order_selection import OrderSelectionSettings, run_order_selection
from .presets import preset_spec
from .priors import default_priors, moment_prefit_nu
from .seriesio import (
    FLOAT_FMT,
    load_series,
    parse_config,
    write_keyvalues,
    write_series,
    write_trace,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tmar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("data", help="input series file")
            p.add_argument("--column", type=int, default=None)
            p.add_argument("--transform", choices=["none", "diff"], default=None)
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("simulate", help="simulate a series from a preset process")
    common(p, data=False)
    p.add_argument("--preset", default=None, choices=["paper-sec4", "ar1"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--sim-burnin", type=int, default=None)

    p = sub.add_parser("fit", help="Gibbs/MH fit at fixed component count and orders")
    common(p)
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--orders", default=None, help="comma-separated AR orders")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--gamma0", type=float, default=None)
    p.add_argument("--nu-center", default=None)
    p.add_argument("--nu-target-var", type=float, default=None)
    p.add_argument("--fix-means-to-zero", action="store_true", default=None)
    p.add_argument("--relabel", action="store_true", default=None)

    p = sub.add_parser("select", help="reversible-jump search over AR orders")
    common(p)
    p.add_argument("--g-list", default=None, help="comma-separated component counts")
    p.add_argument("--p-max", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None, help="RJ iterations")
    p.add_argument("--gamma0", type=float, default=None)
    p.add_argument("--nu-center", default=None)
    p.add_argument("--nu-target-var", type=float, default=None)
    p.add_argument("--fix-means-to-zero", action="store_true", default=None)

    p = sub.add_parser("evidence", help="marginal likelihood comparison across g")
    common(p)
    p.add_argument("--g-list", default=None)
    p.add_argument("--p-max", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None, help="main-chain iterations")
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--rj-iterations", type=int, default=None)
    p.add_argument("--reduced-iterations", type=int, default=None)
    p.add_argument("--gamma0", type=float, default=None)
    p.add_argument("--nu-center", default=None)
    p.add_argument("--nu-target-var", type=float, default=None)
    p.add_argument("--fix-means-to-zero", action="store_true", default=None)

    p = sub.add_parser("report", help="plot data and figures from a trace file")
    p.add_argument("trace", help="trace file produced by fit")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    return parser


def _merged(args) -> dict:
    cfg = parse_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(cfg)
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            merged[key.replace("_", "-")] = value
    return merged


def _get(cfg, key, cast, default=None, required=False):
    if key in cfg:
        value = cfg[key]
        if cast is bool and isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return cast(value) if isinstance(value, str) else value
    if required and default is None:
        raise UsageError(f"missing required option: {key}")
    return default


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _outdir(cfg) -> str:
    out = _get(cfg, "out", str, default="tmar-out")
    os.makedirs(out, exist_ok=True)
    return out


def _seed(cfg) -> int:
    return _get(cfg, "seed", int, required=True)


def _load(cfg, path) -> np.ndarray:
    column = _get(cfg, "column", int, default=None)
    transform = _get(cfg, "transform", str, default="none")
    return load_series(path, column=column, transform=transform).values


def _priors_for(cfg, y, g):
    nu_center = _get(cfg, "nu-center", str, default=None)
    if nu_center is None:
        centers = [moment_prefit_nu(y)] * g
    else:
        centers = _float_list(nu_center)
        if len(centers) == 1:
            centers = centers * g
    return default_priors(
        y,
        g,
        nu_center=np.asarray(centers),
        nu_target_var=_get(cfg, "nu-target-var", float, default=25.0),
        fix_means_to_zero=bool(_get(cfg, "fix-means-to-zero", bool, default=False)),
    )


def _cmd_simulate(args) -> int:
    cfg = _merged(args)
    seed = _seed(cfg)
    n = _get(cfg, "n", int, default=500)
    if n <= 0:
        raise UsageError("n must be positive")
    burnin = _get(cfg, "sim-burnin", int, default=200)
    preset = _get(cfg, "preset", str, default="paper-sec4")
    spec = preset_spec(preset)
    if n < spec.p + 1:
        raise UsageError(f"n must be at least p+1 = {spec.p + 1}")
    out = _outdir(cfg)
    rng = np.random.default_rng(seed)
    report = stability_check(spec)
    series, latents = simulate_series(spec, n, burnin, rng)
    write_series(os.path.join(out, "series.txt"), series)
    truth = {
        "preset": preset,
        "n": n,
        "seed": seed,
        "burnin": burnin,
        "stable": report.stable,
        "spectral_radius": report.spectral_radius,
        "g": spec.g,
        "orders": ",".join(str(p) for p in spec.orders),
        "weights": ",".join(FLOAT_FMT % w for w in spec.weights),
        "means": ",".join(FLOAT_FMT % m for m in spec.means),
        "scales": ",".join(FLOAT_FMT % s for s in spec.scales),
        "dofs": ",".join(FLOAT_FMT % d for d in spec.dofs),
    }
    for k, coeffs in enumerate(spec.ar_coeffs):
        truth[f"phi{k + 1}"] = ",".join(FLOAT_FMT % c for c in coeffs)
    write_keyvalues(os.path.join(out, "truth.txt"), truth)
    np.savetxt(
        os.path.join(out, "latents.txt"),
        np.column_stack([latents.allocations + 1, latents.xis]),
        fmt=["%d", FLOAT_FMT],
        header="allocation xi",
        comments="# ",
    )
    print(f"wrote {out}/series.txt ({n} values)")
    return 0


def _cmd_fit(args) -> int:
    cfg = _merged(args)
    seed = _seed(cfg)
    y = _load(cfg, args.data)
    g = _get(cfg, "g", int, required=True)
    orders = _int_list(_get(cfg, "orders", str, required=True))
    if len(orders) != g:
        raise UsageError(f"need {g} orders, got {len(orders)}")
    iterations = _get(cfg, "iterations", int, default=10000)
    burnin = _get(cfg, "burnin", int, default=1000)
    if iterations <= burnin:
        raise UsageError("iterations must exceed burnin")
    priors = _priors_for(cfg, y, g)
    settings = GibbsSettings(
        iterations=iterations,
        burnin=burnin,
        gamma0=_get(cfg, "gamma0", float, default=0.1),
    )
    rng = np.random.default_rng(seed)
    trace = run_gibbs(y, g, orders, priors, settings, rng, record_loglik=False)
    if bool(_get(cfg, "relabel", bool, default=False)):
        trace, _ = relabel_for_reporting(trace)
    out = _outdir(cfg)
    write_trace(os.path.join(out, "trace.csv"), trace)
    summary = {"g": g, "orders": ",".join(str(p) for p in orders), "seed": seed}
    matrix = trace.as_matrix()
    for j, name in enumerate(trace.parameter_names()):
        s = summarize(matrix[:, j])
        summary[f"{name}.mean"] = s.mean
        summary[f"{name}.sd"] = s.sd
        summary[f"{name}.hdi_lower"] = s.hdi_lower
        summary[f"{name}.hdi_upper"] = s.hdi_upper
        summary[f"{name}.ess"] = s.ess
    rates = trace.acceptance_rates()
    for k in range(g):
        summary[f"accept.phi{k + 1}"] = float(rates["phi"][k])
        summary[f"accept.nu{k + 1}"] = float(rates["nu"][k])
        summary[f"gamma{k + 1}"] = float(trace.gamma[k])
    write_keyvalues(os.path.join(out, "summary.txt"), summary)
    print(f"wrote {out}/trace.csv and {out}/summary.txt")
    return 0


def _cmd_select(args) -> int:
    cfg = _merged(args)
    seed = _seed(cfg)
    y = _load(cfg, args.data)
    g_list = _int_list(_get(cfg, "g-list", str, required=True))
    p_max = _get(cfg, "p-max", int, default=4)
    iterations = _get(cfg, "iterations", int, default=10000)
    out = _outdir(cfg)
    lines = []
    for g in g_list:
        priors = _priors_for(cfg, y, g)
        settings = OrderSelectionSettings(
            iterations=iterations,
            p_max=p_max,
            gamma0=_get(cfg, "gamma0", float, default=0.1),
        )
        rng = np.random.default_rng(seed)
        result = run_order_selection(y, g, priors, settings, rng)
        rows = sorted(
            result.state.visit_counts.items(), key=lambda kv: -kv[1]
        )
        total = result.state.total_visits()
        path = os.path.join(out, f"visits_g{g}.csv")
        with open(path, "w") as fh:
            fh.write("orders,count,share\n")
            for orders, count in rows:
                tag = "-".join(str(p) for p in orders)
                fh.write(f"{tag},{count},{FLOAT_FMT % (count / total)}\n")
        lines.append(
            f"g={g} preferred="
            + ",".join(str(p) for p in result.preferred)
            + f" share={result.share:.4f}"
        )
        print(lines[-1])
    with open(os.path.join(out, "select.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_evidence(args) -> int:
    cfg = _merged(args)
    seed = _seed(cfg)
    y = _load(cfg, args.data)
    g_list = _int_list(_get(cfg, "g-list", str, required=True))
    out = _outdir(cfg)
    settings = EvidenceSettings(
        main_iterations=_get(cfg, "iterations", int, default=6000),
        main_burnin=_get(cfg, "burnin", int, default=1000),
        reduced_iterations=_get(cfg, "reduced-iterations", int, default=10000),
        rj_iterations=_get(cfg, "rj-iterations", int, default=5000),
        p_max=_get(cfg, "p-max", int, default=4),
        gamma0=_get(cfg, "gamma0", float, default=0.1),
    )
    results = []
    for g in g_list:
        priors = _priors_for(cfg, y, g)
        rng = np.random.default_rng(seed)
        try:
            rep = assemble_marginal_log_likelihood(y, g, priors, settings, rng)
        except NumericalError as exc:
            print(f"g={g}: evidence invalid ({exc})", file=sys.stderr)
            write_keyvalues(
                os.path.join(out, f"evidence_g{g}.txt"),
                {"g": g, "valid": False, "error": str(exc)},
            )
            continue
        write_keyvalues(
            os.path.join(out, f"evidence_g{g}.txt"),
            {"valid": True, **rep.as_dict()},
        )
        results.append(rep)
    if not results:
        raise NumericalError("no valid evidence report produced")
    results.sort(key=lambda r: -r.marginal_log_likelihood)
    lines = [
        f"rank {i + 1}: g={r.g} orders="
        + ",".join(str(p) for p in r.selected_orders)
        + f" marginal_log_likelihood={r.marginal_log_likelihood:.4f}"
        for i, r in enumerate(results)
    ]
    with open(os.path.join(out, "verdict.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def _cmd_report(args) -> int:
    cfg = _merged(args)
    out = _get(cfg, "out", str, default="tmar-report")
    written = report_mod.write_report(
        args.trace, out, figures=not getattr(args, "no_figures", False)
    )
    print(f"wrote report for {len(written)} parameters to {out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "evidence": _cmd_evidence,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
