"""Command-line frontend.

Subcommands: trace, scan, find-eps0, verify, limiting, map42, cubic.

Exit codes: 0 success, 1 usage or configuration error, 2 mathematical or
precondition failure (empty curve, same class at both bracket ends, overflow
guard, certificate requested away from a fold, ...).

Output: a human-readable summary on stdout (suppressed by --quiet) or a JSON
document with --format json; --out writes the result to a file in the chosen
format.  All outputs are deterministic: identical configurations produce
byte-identical files regardless of --jobs.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Callable

from .config import RunConfig, parse_eps_list, parse_kv_file, parse_range, resolve_config
from .curve import (
    TraceOptions,
    find_epsilon0,
    scan_epsilon,
    trace,
)
from .errors import ConfigError, NonFiniteError, ShootScaleError
from .ivp import IntegratorSettings
from .linearized import (
    nondegeneracy,
    positivity_certificate,
    solve_linearized,
    test_function_search,
)
from .models import (
    Cubic,
    Limiting,
    is_log_concave,
    model_from_config,
)
from .shoot import bvp_profile
from .transform import (
    MIN_EPS,
    cross_validate_map,
    lemma42_map,
    limiting_fold,
    mu_monotonicity_check,
)

__all__ = ["main"]

SCHEMA_VERSION = "1"

_MODEL_KEYS = ("family", "epsilon", "b", "c", "p", "q", "a", "c0")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the CLI contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _add_common(sub: argparse.ArgumentParser, default_family: str | None) -> None:
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--family", default=None,
                     help=f"model family (default {default_family or 'per command'})")
    sub.add_argument("--epsilon", type=float, default=None)
    sub.add_argument("--b", type=float, default=None)
    sub.add_argument("--c", type=float, default=None)
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--q", type=float, default=None)
    sub.add_argument("--a", type=float, default=None)
    sub.add_argument("--c0", type=float, default=None)
    sub.add_argument("--n", type=int, default=None, help="space dimension (default 2)")
    sub.add_argument("--alpha-range", dest="alpha_range", default=None,
                     help="lo:hi range of u(0)")
    sub.add_argument("--points", type=int, default=None, help="initial trace grid size")
    sub.add_argument("--abs-tol", dest="abs_tol", type=float, default=None)
    sub.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    sub.add_argument("--r-max", dest="r_max", type=float, default=None)
    sub.add_argument("--jobs", type=int, default=None, help="parallel workers (default 1)")
    sub.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    sub.add_argument("--out", default=None, help="output file path")
    sub.add_argument("--quiet", action="store_true", default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="shootscale",
                     description="bifurcation curves of radial Dirichlet problems "
                                 "by shoot-and-scale")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("trace", help="trace lam(alpha) and classify the curve shape")
    _add_common(p, "perturbed_gelfand")
    p.add_argument("--dump-profile", dest="dump_profile", default=None,
                   help="write the boundary-value profile at --dump-alpha to this path")
    p.add_argument("--dump-alpha", dest="dump_alpha", type=float, default=None)

    p = subs.add_parser("scan", help="classify curves across an epsilon ladder")
    _add_common(p, "perturbed_gelfand")
    p.add_argument("--epsilons", default=None, help="lo:hi:step or comma list")

    p = subs.add_parser("find-eps0", help="bisect the S-shaped/monotone transition")
    _add_common(p, "perturbed_gelfand")
    p.add_argument("--bracket", default=None, help="lo:hi epsilon bracket")
    p.add_argument("--eps-tol", dest="eps_tol", type=float, default=None)

    p = subs.add_parser("verify", help="run fold certificates along a traced curve")
    _add_common(p, "perturbed_gelfand")
    p.add_argument("--at-alpha", dest="at_alpha", type=float, default=None,
                   help="check certificates at this alpha instead of at the folds")

    p = subs.add_parser("limiting", help="trace the limiting curve and report its fold")
    _add_common(p, "limiting")

    p = subs.add_parser("map42", help="level-map limiting solutions to the mu-form curve")
    _add_common(p, "limiting")
    p.add_argument("--alpha-grid", dest="alpha_grid", default=None,
                   help="lo:hi:count grid of limiting heights")

    p = subs.add_parser("cubic", help="trace a cubic family and report its two-curve structure")
    _add_common(p, "cubic")
    return parser


_DEFAULT_RANGES = {
    "trace": (1e-3, 200.0),
    "scan": (1e-3, 200.0),
    "find-eps0": (1e-3, 200.0),
    "verify": (1e-3, 200.0),
    "limiting": (0.2, 6.0),
    "map42": (0.2, 6.0),
    "cubic": None,  # derived from the family parameters
}

_DEFAULT_FAMILY = {
    "trace": "perturbed_gelfand",
    "scan": "perturbed_gelfand",
    "find-eps0": "perturbed_gelfand",
    "verify": "perturbed_gelfand",
    "limiting": "limiting",
    "map42": "limiting",
    "cubic": "cubic",
}


def _common_spec(command: str) -> dict[str, tuple[Callable[[str], Any], Any]]:
    return {
        "family": (str, _DEFAULT_FAMILY[command]),
        "epsilon": (float, None),
        "b": (float, None),
        "c": (float, None),
        "p": (float, None),
        "q": (float, None),
        "a": (float, None),
        "c0": (float, None),
        "n": (int, 2),
        "alpha_range": (parse_range, _DEFAULT_RANGES[command]),
        "points": (int, 200),
        "abs_tol": (float, 1e-10),
        "rel_tol": (float, 1e-10),
        "r_max": (float, 50.0),
        "jobs": (int, 1),
        "fmt": (str, "csv"),
        "out": (str, None),
        "quiet": (lambda s: s.lower() in ("1", "true", "yes"), False),
    }


_EXTRA_SPEC = {
    "trace": {"dump_profile": (str, None), "dump_alpha": (float, None)},
    "scan": {"epsilons": (parse_eps_list, None)},
    "find-eps0": {"bracket": (parse_range, None), "eps_tol": (float, 1e-3)},
    "verify": {"at_alpha": (float, None)},
    "limiting": {},
    "map42": {"alpha_grid": (str, None)},
    "cubic": {},
}


def _build_runconfig(args: argparse.Namespace) -> RunConfig:
    command = args.command
    spec = _common_spec(command) | _EXTRA_SPEC[command]
    file_values = parse_kv_file(args.config) if args.config else {}
    cli_values = {k: getattr(args, k, None) for k in spec}
    if getattr(args, "alpha_range", None) is not None:
        cli_values["alpha_range"] = parse_range(args.alpha_range)
    if command == "scan" and getattr(args, "epsilons", None) is not None:
        cli_values["epsilons"] = parse_eps_list(args.epsilons)
    if command == "find-eps0" and getattr(args, "bracket", None) is not None:
        cli_values["bracket"] = parse_range(args.bracket)
    values = resolve_config(command, cli_values, file_values, spec)
    settings = IntegratorSettings(abs_tol=values["abs_tol"], rel_tol=values["rel_tol"],
                                  r_max=values["r_max"])
    return RunConfig(command=command, values=values, settings=settings,
                     out_path=values["out"], fmt=values["fmt"],
                     quiet=bool(values["quiet"]), jobs=values["jobs"])


def _build_model(cfg: RunConfig):
    family = cfg["family"]
    from .models import _FAMILY_PARAMS
    if family not in _FAMILY_PARAMS:
        raise ConfigError(f"unknown family {family!r}")
    parts = [f"family={family}"]
    for key in _FAMILY_PARAMS[family]:
        value = cfg[key]
        if value is None:
            raise ConfigError(f"family {family!r} requires --{key}")
        parts.append(f"{key}={value!r}")
    return model_from_config(" ".join(parts))


def _json_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _output(cfg: RunConfig, doc: dict, text_lines: list[str],
            csv_writer: Callable[[str], None] | None) -> None:
    if cfg.out_path:
        if cfg.fmt == "json":
            with open(cfg.out_path, "w", encoding="utf-8") as fh:
                fh.write(_json_text(doc))
        else:
            if csv_writer is None:
                raise ConfigError(
                    f"command {cfg.command!r} has no CSV form; use --format json")
            csv_writer(cfg.out_path)
    if cfg.quiet:
        return
    if cfg.fmt == "json" and not cfg.out_path:
        sys.stdout.write(_json_text(doc))
    else:
        for line in text_lines:
            print(line)


def _trace_options(cfg: RunConfig, validate_folds: bool = True) -> TraceOptions:
    return TraceOptions(initial_points=cfg["points"], validate_folds=validate_folds)


def _tp_json(tp) -> dict:
    return {"alpha": tp.alpha, "lambda": tp.lam, "kind": tp.kind}


def _cmd_trace(cfg: RunConfig) -> int:
    model = _build_model(cfg)
    lo, hi = cfg["alpha_range"]
    curve = trace(model, cfg["n"], lo, hi, _trace_options(cfg), cfg.settings, cfg.jobs)
    doc = {**curve.to_json_dict(), "command": "trace"}
    lines = [f"shape={curve.shape.label()} turning_points={len(curve.turning_points)}"]
    for tp in curve.turning_points:
        lines.append(f"turning_point kind={tp.kind} alpha={tp.alpha!r} lambda={tp.lam!r}")
    for a, b in curve.gaps:
        lines.append(f"gap alpha_lo={a!r} alpha_hi={b!r}")
    _output(cfg, doc, lines, curve.to_csv)

    if cfg["dump_profile"]:
        if cfg["dump_alpha"] is None:
            raise ConfigError("--dump-profile requires --dump-alpha")
        pair = bvp_profile(model, cfg["dump_alpha"], cfg["n"], cfg.settings)
        if pair is None:
            raise ShootScaleError(f"no solution at alpha = {cfg['dump_alpha']!r}")
        _, prof = pair
        if cfg.fmt == "json":
            with open(cfg["dump_profile"], "w", encoding="utf-8") as fh:
                fh.write(_json_text({"command": "profile", **prof.to_json_record()}))
        else:
            prof.to_csv(cfg["dump_profile"])
    return 0


def _cmd_scan(cfg: RunConfig) -> int:
    if cfg["family"] not in ("perturbed_gelfand", "mu_form"):
        raise ConfigError(f"scan varies epsilon; family {cfg['family']!r} does not support it")
    if cfg["epsilon"] is None:
        cfg.values["epsilon"] = 0.0 if cfg["family"] == "perturbed_gelfand" else 0.1
    model0 = _build_model(cfg)
    eps_values = cfg["epsilons"]
    if not eps_values:
        raise ConfigError("scan requires a non-empty --epsilons list")
    factory = type(model0)
    lo, hi = cfg["alpha_range"]
    result = scan_epsilon(factory, eps_values, cfg["n"], (lo, hi),
                          _trace_options(cfg, validate_folds=False), cfg.settings, cfg.jobs)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "scan",
        "n": cfg["n"],
        "alpha_range": [lo, hi],
        "rows": [
            {
                "epsilon": row.eps,
                "shape": row.shape.label(),
                "n_turns": len(row.turning_points),
                "turning_points": [_tp_json(t) for t in row.turning_points],
            }
            for row in result.rows
        ],
        "monotonicity_warning": result.monotonicity_warning,
    }
    lines = [f"eps={row.eps!r} shape={row.shape.label()} turns={len(row.turning_points)}"
             for row in result.rows]
    if result.monotonicity_warning:
        lines.append(f"warning: {result.monotonicity_warning}")

    def write_csv(path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epsilon,shape,n_turns\n")
            for row in result.rows:
                fh.write(f"{row.eps!r},{row.shape.label()},{len(row.turning_points)}\n")

    _output(cfg, doc, lines, write_csv)
    return 0


def _cmd_find_eps0(cfg: RunConfig) -> int:
    if cfg["family"] not in ("perturbed_gelfand", "mu_form"):
        raise ConfigError(
            f"find-eps0 varies epsilon; family {cfg['family']!r} does not support it")
    if cfg["epsilon"] is None:
        cfg.values["epsilon"] = 0.0 if cfg["family"] == "perturbed_gelfand" else 0.1
    model0 = _build_model(cfg)
    bracket = cfg["bracket"]
    if bracket is None:
        raise ConfigError("find-eps0 requires --bracket lo:hi")
    lo, hi = cfg["alpha_range"]
    result = find_epsilon0(type(model0), bracket, cfg["n"], (lo, hi), cfg["eps_tol"],
                           _trace_options(cfg, validate_folds=False), cfg.settings, cfg.jobs)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "find_eps0",
        "eps0": result.eps0,
        "bracket_lo": result.bracket_lo,
        "bracket_hi": result.bracket_hi,
        "width": result.bracket_hi - result.bracket_lo,
        "iterations": result.iterations,
    }
    lines = [f"eps0={result.eps0!r} bracket={result.bracket_lo!r}:{result.bracket_hi!r} "
             f"width={result.bracket_hi - result.bracket_lo!r}"]
    _output(cfg, doc, lines, None)
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    model = _build_model(cfg)
    n = cfg["n"]
    lo, hi = cfg["alpha_range"]

    if cfg["at_alpha"] is not None:
        targets = [("probe", cfg["at_alpha"], None)]
    else:
        curve = trace(model, n, lo, hi, _trace_options(cfg), cfg.settings, cfg.jobs)
        targets = [(tp.kind, tp.alpha, tp.lam) for tp in curve.turning_points]

    lines: list[str] = []
    folds_doc = []
    all_passed = True
    run_test_function = n == 2 and is_log_concave(model)
    for kind, alpha, lam in targets:
        pair = bvp_profile(model, alpha, n, cfg.settings)
        if pair is None:
            raise ShootScaleError(f"no solution at alpha = {alpha!r}")
        lam_bvp, prof = pair
        lin = solve_linearized(model, prof, cfg.settings)
        reports = [
            positivity_certificate(lin),
            nondegeneracy(model, prof, lin),
        ]
        if run_test_function:
            reports.append(test_function_search(model, prof))
        lines.append(f"fold kind={kind} alpha={alpha!r} lambda={lam_bvp!r} "
                     f"w_at_1={lin.w_at_1!r}")
        for rep in reports:
            all_passed &= rep.passed
            margin_text = " ".join(f"{k}={rep.margins[k]!r}" for k in sorted(rep.margins))
            lines.append(f"  {rep.kind}={'pass' if rep.passed else 'FAIL'} {margin_text}")
        folds_doc.append({
            "kind": kind,
            "alpha": alpha,
            "lambda": lam_bvp,
            "w_at_1": lin.w_at_1,
            "certificates": [rep.to_json_dict() for rep in reports],
        })
    if not targets:
        lines.append("no folds")
    lines.append(f"all={'pass' if all_passed else 'FAIL'}")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "model": model.describe(),
        "n": n,
        "folds": folds_doc,
        "all_passed": all_passed,
        "test_function_included": run_test_function,
    }
    _output(cfg, doc, lines, None)
    return 0 if all_passed else 2


def _cmd_limiting(cfg: RunConfig) -> int:
    if cfg["n"] != 2:
        raise ConfigError("the limiting analysis is two-dimensional; --n must be 2")
    lo, hi = cfg["alpha_range"]
    curve = trace(Limiting(), 2, lo, hi, _trace_options(cfg), cfg.settings, cfg.jobs)
    mins = [t for t in curve.turning_points if t.kind == "min"]
    if len(mins) != 1:
        raise ShootScaleError(
            f"expected exactly one fold on the limiting curve, found {len(mins)}")
    fold = mins[0]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "limiting",
        "eta0": fold.lam,
        "v0_height": fold.alpha,
        "shape": curve.shape.label(),
        "turning_points": [_tp_json(t) for t in curve.turning_points],
    }
    lines = [f"eta0={fold.lam:.6f} v0_height={fold.alpha:.6f}"]
    _output(cfg, doc, lines, curve.to_csv)
    return 0


def _cmd_map42(cfg: RunConfig) -> int:
    if cfg["n"] != 2:
        raise ConfigError("the level map is two-dimensional; --n must be 2")
    eps = cfg["epsilon"]
    if eps is None:
        raise ConfigError("map42 requires --epsilon")
    if eps < MIN_EPS:
        raise NonFiniteError(
            f"eps = {eps!r} below {MIN_EPS:.6g}: the mu/lambda correspondence "
            "exp(1/eps) overflows float64")
    _, v0_height = limiting_fold(cfg.settings)
    grid_text = cfg["alpha_grid"]
    if grid_text is None:
        lo = v0_height + 0.08
        alphas = [lo + (6.0 - lo) * k / 9.0 for k in range(10)]
    else:
        parts = grid_text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"expected lo:hi:count, got {grid_text!r}")
        glo, ghi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 2 or not glo < ghi:
            raise ConfigError(f"need lo < hi and count >= 2 in {grid_text!r}")
        alphas = [glo + (ghi - glo) * k / (count - 1) for k in range(count)]

    points = []
    for alpha in alphas:
        pair = bvp_profile(Limiting(), alpha, 2, cfg.settings, self_check=False)
        if pair is None:
            raise ShootScaleError(f"no limiting solution at alpha = {alpha!r}")
        eta, prof = pair
        points.append(lemma42_map(eta, prof, eps, cfg.settings, v0_height))
    report = mu_monotonicity_check(eps, alphas, 2, cfg.settings)
    discrepancy = cross_validate_map(eps, alphas, 2, cfg.settings)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "map42",
        "epsilon": eps,
        "v0_height": v0_height,
        "points": [{"w0": p.w0, "mu": p.mu, "source": p.source} for p in points],
        "max_rel_discrepancy": discrepancy,
        "monotonicity": report.to_json_dict(),
    }
    lines = [
        f"max_rel_discrepancy={discrepancy!r}",
        f"mu_monotonic={'pass' if report.passed else 'FAIL'} "
        f"min_increment={report.margins['min_increment']!r}",
    ]

    def write_csv(path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("w0,mu,source\n")
            for p in points:
                fh.write(f"{p.w0!r},{p.mu!r},{p.source}\n")

    _output(cfg, doc, lines, write_csv)
    return 0 if report.passed else 2


def _cmd_cubic(cfg: RunConfig) -> int:
    eps = cfg["epsilon"] if cfg["epsilon"] is not None else 0.05
    b = cfg["b"] if cfg["b"] is not None else 1.0
    c = cfg["c"] if cfg["c"] is not None else 2.5
    try:
        model = Cubic(eps, b, c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    warn = None
    if not model.satisfies_separation():
        warn = f"separation hypothesis c > 2b violated (b={b!r}, c={c!r}); tracing anyway"
    rng = cfg["alpha_range"]
    if rng is None:
        rng = (eps * 0.1, c * 0.999)
    curve = trace(model, cfg["n"], rng[0], rng[1], _trace_options(cfg), cfg.settings, cfg.jobs)
    segs = curve.segments()
    sub = curve.shape.segments if curve.shape.kind == "disconnected" else (curve.shape,)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "cubic",
        "model": model.describe(),
        "shape": curve.shape.label(),
        "separation_ok": model.satisfies_separation(),
        "warning": warn,
        "segments": [
            {
                "alpha_lo": seg[0].alpha,
                "alpha_hi": seg[-1].alpha,
                "shape": shape.label(),
                "n_turns": shape.turn_count,
            }
            for seg, shape in zip(segs, sub)
        ],
        "turning_points": [_tp_json(t) for t in curve.turning_points],
    }
    lines = []
    if warn:
        lines.append(f"warning: {warn}")
    lines.append(f"shape={curve.shape.label()} segments={len(segs)}")
    for entry in doc["segments"]:
        lines.append(
            f"segment alpha={entry['alpha_lo']!r}:{entry['alpha_hi']!r} "
            f"shape={entry['shape']} turns={entry['n_turns']}")
    _output(cfg, doc, lines, curve.to_csv)
    return 0


_DISPATCH = {
    "trace": _cmd_trace,
    "scan": _cmd_scan,
    "find-eps0": _cmd_find_eps0,
    "verify": _cmd_verify,
    "limiting": _cmd_limiting,
    "map42": _cmd_map42,
    "cubic": _cmd_cubic,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _build_runconfig(args)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 1
    except ShootScaleError as exc:
        sys.stderr.write(f"error: {exc.__class__.__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
