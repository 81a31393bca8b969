"""Command-line experiment runner.

``modlab run CONFIG`` runs a configuration file; ``modlab KIND ...`` builds
the same configuration from flags. Exit status is 0 when every enabled
assertion passes, 2 when one fails and 1 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, config as cfgmod, gram, verify
from . import datamodels as dm
from . import modulators as mods
from .config import ConfigError, ExperimentConfig
from .numerics import RngStream

COLUMNS = ("experiment", "d", "j", "metric", "estimate", "se", "analytic", "bound_rhs", "pass", "seed")
POLYA_GRID = np.arange(501) * 0.01

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class ReportError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def _conditions(cfg: ExperimentConfig, rng: RngStream) -> list[verify.Row]:
    trace = verify.check_conditions(cfg.model, cfg.schedule, cfg.reps, rng, cfg.k, cfg.workers)
    return trace.rows


def _density_bound(cfg, rng):
    rows, reports = [], []
    for i, d in enumerate(cfg.schedule):
        rep = verify.verify_density_bound(cfg.model, cfg.modulator, d, cfg.j, cfg.y_grid, cfg.reps, rng.child(i), cfg.workers)
        reports.append(rep)
        rows += rep.rows()
    if len(reports) > 1:
        first, last = reports[0], reports[-1]
        slack = verify.NSE * verify.combine_se(first.lhs_se, last.lhs_se)
        ok = last.lhs <= first.lhs + slack
        rows.append(verify.Row("density-bound", last.d, cfg.j, f"gap_not_increasing[from d={first.d}]",
                               last.lhs, last.lhs_se, None, first.lhs + slack, verify._flag(ok, last.d), rng.root))
    return rows


def _cdf_lipschitz(cfg, rng):
    rows = []
    lim = mods.MixtureLimit(cfg.modulator, cfg.model.sigma)
    for i, d in enumerate(cfg.schedule):
        if cfg.pairs:
            rows += verify.verify_cdf_lipschitz(cfg.model, cfg.modulator, d, cfg.j, cfg.pairs, cfg.reps,
                                                rng.child(i, 0), cfg.workers).rows()
        if cfg.y_grid:
            reports = verify.estimate_cdf_power(cfg.model, cfg.modulator, d, cfg.j, cfg.y_grid, cfg.reps,
                                                rng.child(i, 1), cfg.workers)
            exact = np.atleast_1d(mods.limit_cdf_power(lim, cfg.j, np.asarray(cfg.y_grid)))
            for y, r, e in zip(cfg.y_grid, reports, exact):
                ok = abs(r.estimate - e) <= verify.NSE * r.se + 1e-12
                rows.append(verify.Row("cdf-lipschitz", d, cfg.j, f"cdf_power[y={y:g}]", r.estimate, r.se,
                                       float(e), None, verify._flag(ok, d), rng.root))
    return rows


def _stable_counterexample(cfg, rng):
    rows = []
    for i, d in enumerate(cfg.schedule):
        for it, t in enumerate(cfg.t):
            stream = rng.child(i, it)
            if cfg.modulator.family == mods.STABLE:
                rep = verify.stable_variance_limit(cfg.model, cfg.modulator.cf_index, d, t, cfg.reps, stream, cfg.workers)
            elif cfg.modulator.family == mods.GAUSSIAN:
                rep = verify.gaussian_variance_check(cfg.model, d, t, cfg.reps, stream, cfg.workers)
            else:
                raise ConfigError("stable-counterexample needs a stable or gaussian modulator")
            rows += rep.rows()
    return rows


def polya_peak(mod: mods.ModulatorSpec) -> Optional[tuple[float, float]]:
    """Exact (peak, argmax t) of the functional-equation residual where a closed form exists."""
    if mod.family == mods.GAUSSIAN:
        return 0.0, float("nan")
    if mod.family == mods.STABLE:
        a = mod.cf_index
        c = 2.0 ** (1.0 - a / 2.0)
        u = math.log(c) / (c - 1.0)
        return math.exp(-u) - math.exp(-c * u), u ** (1.0 / a)
    return None


def polya_at(mod: mods.ModulatorSpec, t: float) -> Optional[float]:
    """Exact residual at ``t`` for the closed-form families."""
    s = t * t
    if mod.family == mods.GAUSSIAN:
        return 0.0
    if mod.family == mods.STABLE:
        a = mod.cf_index
        return math.exp(-abs(t) ** a) - math.exp(-(2.0 ** (1.0 - a / 2.0)) * abs(t) ** a)
    if mod.family == mods.LAPLACE:
        nu = mod.nu
        return (1.0 + s / nu) ** (-nu / 2.0) - (1.0 + s / (2.0 * nu)) ** (-nu)
    return None


def _polya(cfg, rng):
    mod = cfg.modulator
    peak, argmax = mods.polya_residual(mod, POLYA_GRID)
    rows = []
    exact = polya_peak(mod)
    if mod.family == mods.GAUSSIAN:
        rows.append(verify.Row("polya", 0, 0, "residual_peak", peak, 0.0, 0.0, 1e-12, peak <= 1e-12, rng.root))
    else:
        ok = abs(peak - exact[0]) <= 1e-6 if exact else peak > 1e-6
        rows.append(verify.Row("polya", 0, 0, "residual_peak", peak, 0.0, exact[0] if exact else None, None, ok, rng.root))
        ok = abs(argmax - exact[1]) <= 0.01 if exact else None
        rows.append(verify.Row("polya", 0, 0, "residual_argmax", argmax, 0.0, exact[1] if exact else None, None, ok, rng.root))
    for t in cfg.t:
        val, _ = mods.polya_residual(mod, [t])
        ref = polya_at(mod, t)
        ok = abs(val - ref) <= 1e-9 if ref is not None else None
        rows.append(verify.Row("polya", 0, 0, f"residual[t={t:g}]", val, 0.0, ref, None, ok, rng.root))
    return rows


def _matrix_normal(cfg, rng):
    rows = []
    for i, d in enumerate(cfg.schedule):
        rows += verify.matrix_normal_test(cfg.model, d, cfg.k, cfg.l, cfg.reps, rng.child(i), cfg.workers).rows()
    return rows


def _wishart_oracle(cfg, rng):
    if cfg.model.family != dm.GAUSSIAN or cfg.model.profile != dm.ISOTROPIC:
        raise ConfigError("wishart-oracle needs isotropic gaussian data")
    rows = []
    for i, d in enumerate(cfg.schedule):
        rep = gram.det_invsqrt_moment(cfg.model, d, cfg.k, cfg.reps, rng.child(i), cfg.workers)
        exact = gram.wishart_det_invsqrt_exact(d, cfg.k, cfg.model.sigma)
        # an exact identity, so it is asserted at every d
        ok = rep.singular == 0 and rep.within(exact)
        rows.append(verify.Row("wishart-oracle", d, cfg.k, "det_invsqrt", rep.estimate, rep.se, exact, None, ok, rng.root))
    return rows


EXPERIMENTS = {
    "conditions": _conditions,
    "density-bound": _density_bound,
    "cdf-lipschitz": _cdf_lipschitz,
    "stable-counterexample": _stable_counterexample,
    "polya": _polya,
    "matrix-normal": _matrix_normal,
    "wishart-oracle": _wishart_oracle,
}


def run_experiment(cfg: ExperimentConfig) -> list[verify.Row]:
    return EXPERIMENTS[cfg.kind](cfg, RngStream(cfg.seed))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _num(v) -> str:
    """17 significant digits; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _cells(row: verify.Row) -> dict:
    return {
        "experiment": row.experiment,
        "d": row.d,
        "j": row.j,
        "metric": row.metric,
        "estimate": row.estimate,
        "se": row.se,
        "analytic": row.analytic,
        "bound_rhs": row.bound_rhs,
        "pass": row.passed,
        "seed": row.seed,
    }


def _csv_field(s: str) -> str:
    if any(ch in s for ch in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def _json_value(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    if v is None:
        return "null"
    if isinstance(v, float) and not math.isfinite(v):
        return "null"
    return _num(v)


def render_report(rows: Sequence[verify.Row], fmt: str, meta: Optional[dict] = None) -> str:
    if not rows:
        raise ReportError("refusing to write an empty report")
    meta = meta or {}
    if fmt == "csv":
        lines = [f"# {k}={v}" for k, v in meta.items()]
        lines.append(",".join(COLUMNS))
        for r in rows:
            c = _cells(r)
            lines.append(",".join(_csv_field(c[k]) if isinstance(c[k], str) else _num(c[k]) for k in COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        body = []
        for r in rows:
            c = _cells(r)
            body.append("    {" + ", ".join(f"{json.dumps(k)}: {_json_value(c[k])}" for k in COLUMNS) + "}")
        head = "{\n  \"meta\": " + json.dumps(meta, sort_keys=True) + ",\n  \"rows\": [\n"
        return head + ",\n".join(body) + "\n  ]\n}\n"
    raise ReportError(f"unknown report format {fmt!r}")


def emit_report(rows: Sequence[verify.Row], fmt: str, path, meta: Optional[dict] = None) -> Path:
    """Write ``rows`` to ``path`` as CSV or JSON; nothing is written when ``rows`` is empty."""
    text = render_report(rows, fmt, meta)
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report {p}: {exc.strerror}") from exc
    return p


def report_meta(cfg: ExperimentConfig) -> dict:
    return {"config_sha256": cfgmod.config_hash(cfg), "seed": cfg.seed, "version": __version__, "workers": cfg.workers}


def execute(cfg: ExperimentConfig, out_dir=None) -> tuple[int, Path]:
    rows = run_experiment(cfg)
    target = Path(out_dir or ".") / f"{cfg.output_stem}.{cfg.format}"
    path = emit_report(rows, cfg.format, target, report_meta(cfg))
    failed = [r for r in rows if r.passed is False]
    return (EXIT_FAIL if failed else EXIT_OK), path


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _assignments(items) -> str:
    out = []
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", None, "<command line>")
        out.append(f"{key.strip()} = {val.strip()}")
    return "\n".join(out)


def config_from_flags(kind: str, args) -> ExperimentConfig:
    text = "\n".join([
        "[experiment]",
        f"kind = {kind}",
        f"seed = {args.seed if args.seed is not None else ''}",
        _assignments(args.set),
        "[model]",
        _assignments(args.model),
        "[modulator]",
        _assignments(args.mod),
    ])
    if args.seed is None:
        raise ConfigError("--seed is required", None, "<command line>")
    return cfgmod.loads(text, "<command line>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modlab", description="Random linear modulation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--workers", type=int, help="worker threads")
        p.add_argument("--out-dir", default=".", help="directory for report files")
        p.add_argument("--format", choices=cfgmod.FORMATS, help="report format")

    run = sub.add_parser("run", help="run a configuration file")
    run.add_argument("config")
    common(run)
    run.add_argument("--print-config", action="store_true", help="print the normalized config and exit")

    for kind in cfgmod.KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment from flags")
        common(p)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="[experiment] key")
        p.add_argument("--model", action="append", metavar="KEY=VALUE", help="[model] key")
        p.add_argument("--mod", action="append", metavar="KEY=VALUE", help="[modulator] key")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = cfgmod.load(args.config)
            if args.seed is not None:
                cfg = cfg.with_(seed=args.seed)
        else:
            cfg = config_from_flags(args.command, args)
        if args.workers is not None:
            cfg = cfg.with_(workers=args.workers)
        if args.format is not None:
            cfg = cfg.with_(format=args.format)
        if getattr(args, "print_config", False):
            sys.stdout.write(cfgmod.dumps(cfg))
            return EXIT_OK
        status, path = execute(cfg, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ReportError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{'PASS' if status == EXIT_OK else 'FAIL'} {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
