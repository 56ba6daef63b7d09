"""Command-line entry point: ``ruelle COMMAND --config PATH [options]``.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 numeric
failure (divergence, non-convergence, no sign change, truncation).
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from pathlib import Path

import numpy as np

from . import kernels, measures, potentials, pressure, transfer
from .config import RunConfig, load_config
from .errors import (BudgetExceeded, ConfigError, DivergentPotential, NoConvergence, NonpositiveEigenfunction,
                     NormalizationError, NoSignChange, NumericError, TruncationError)

COMMANDS = ("pressure", "curve", "dimension", "eigen", "measure", "gibbs", "verify")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_TAGS = (
    (DivergentPotential, "DIVERGENT"),
    (NoSignChange, "NO_SIGN_CHANGE"),
    (NoConvergence, "NO_CONVERGENCE"),
    (TruncationError, "TRUNCATION"),
    (NonpositiveEigenfunction, "NONPOSITIVE_EIGENFUNCTION"),
    (NormalizationError, "NORMALIZATION"),
    (BudgetExceeded, "BUDGET_EXCEEDED"),
    (NumericError, "NUMERIC"),
)


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit(text: str, path: str | None, stdout):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def cmd_pressure(cfg: RunConfig, out):
    est = pressure.pressure_at(cfg.system(), cfg.potential(), cfg.depth, cfg.grid_size,
                               cfg.truncation(), cfg.resolved_anchor())
    row = [est.potential, str(est.depth), est.lower, est.point, est.upper, est.anchor]
    if cfg.output_path:
        _emit(_csv(["potential", "depth", "lower", "point", "upper", "anchor"], [row]), cfg.output_path, out)
    out.write(f"potential={est.potential} depth={est.depth} lower={fmt(est.lower)} point={fmt(est.point)} "
              f"upper={fmt(est.upper)} anchor={fmt(est.anchor)}\n")
    return EXIT_OK


def cmd_curve(cfg: RunConfig, out):
    if cfg.potential_kind != "geometric":
        raise ConfigError("line 0: key 'potential.kind': curve needs a geometric potential")
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.t_steps)
    curve = pressure.pressure_curve(cfg.system(), ts, cfg.depth, cfg.grid_size, cfg.truncation(),
                                    cfg.resolved_anchor())
    rows = [[t, str(e.depth), e.lower, e.point, e.upper] for t, e in curve.samples]
    _emit(_csv(["t", "depth", "lower", "point", "upper"], rows), cfg.output_path, out)
    for t in curve.divergent:
        print(f"skipped t={fmt(t)}: DIVERGENT", file=sys.stderr)
    return EXIT_OK


def cmd_dimension(cfg: RunConfig, out):
    res = pressure.bowen_solve(cfg.system(), cfg.t_lo, cfg.t_hi, cfg.tol_t, cfg.depth, cfg.grid_size,
                               cfg.truncation(), cfg.resolved_anchor())
    text = _csv(["s_hat", "t_lo", "t_hi", "pressure_lower_at_s", "pressure_upper_at_s"], [res.report_row()])
    _emit(text, cfg.output_path, out)
    if cfg.output_path:
        out.write(f"s_hat={fmt(res.s_hat)}\n")
    return EXIT_OK if res.certified else EXIT_CHECK


def cmd_eigen(cfg: RunConfig, out):
    eig = transfer.solve_eigen(cfg.system(), cfg.potential(), cfg.grid_size, cfg.tol, cfg.max_iter,
                               cfg.truncation(), cfg.depth, cfg.resolved_anchor())
    rows = [[x, h] for x, h in zip(eig.h.nodes, eig.h.values)]
    _emit(_csv(["x", "h"], rows), cfg.output_path, out)
    summary = (f"lambda={fmt(eig.lam)} residual={fmt(eig.residual_h)} cw_lower={fmt(eig.cw_lower)} "
               f"cw_upper={fmt(eig.cw_upper)} iterations={eig.iterations}\n")
    (out if cfg.output_path else sys.stderr).write(summary)
    return EXIT_OK


def _measure_rows(mu: measures.CylinderMeasure):
    words, rep, mass = mu.merged()
    return [[mu.word_label(w), r, m] for w, r, m in zip(words, rep, mass)]


def cmd_measure(cfg: RunConfig, out):
    sys_, pot = cfg.system(), cfg.potential()
    eig = transfer.solve_eigen(sys_, pot, cfg.grid_size, cfg.tol, cfg.max_iter, cfg.truncation(),
                               cfg.depth, cfg.resolved_anchor())
    mu = eig.mu
    m = measures.invariant_measure(mu, eig.h)
    header = ["word", "representative", "weight"]
    if cfg.output_path:
        stem = cfg.output_path[:-4] if cfg.output_path.endswith(".csv") else cfg.output_path
        Path(stem + "_mu.csv").write_text(_csv(header, _measure_rows(mu)), encoding="utf-8")
        Path(stem + "_m.csv").write_text(_csv(header, _measure_rows(m)), encoding="utf-8")
        out.write(f"wrote {stem}_mu.csv {stem}_m.csv\n")
    else:
        out.write("# eigenmeasure\n" + _csv(header, _measure_rows(mu)))
        out.write("# invariant measure\n" + _csv(header, _measure_rows(m)))
    return EXIT_OK


def cmd_gibbs(cfg: RunConfig, out):
    sys_, pot, trunc = cfg.system(), cfg.potential(), cfg.truncation()
    a = cfg.resolved_anchor()
    P_hat = pressure.pressure_at(sys_, pot, cfg.depth, cfg.grid_size, trunc, a).point
    mu = measures.build_eigenmeasure(sys_, pot, cfg.depth, P_hat, trunc, cfg.grid_size, a)
    from .suite import _bowen_depth

    K = potentials.bowen_constants(sys_, pot, min(mu.explicit_depth, _bowen_depth(sys_, trunc, cfg.depth)),
                                   trunc=trunc)
    rep = measures.gibbs_verify(sys_, pot, mu, K, P_hat, max_level=len(K))
    rows = [[str(lv.m), str(lv.cylinders), lv.min_ratio, lv.max_ratio, lv.lower, lv.upper,
             "pass" if lv.ok else "fail"] for lv in rep.levels]
    text = f"# C_hat={fmt(rep.C_hat)} P_hat={fmt(P_hat)}\n"
    text += _csv(["m", "cylinders", "min_ratio", "max_ratio", "lower", "upper", "status"], rows)
    _emit(text, cfg.output_path, out)
    return EXIT_OK if rep.ok else EXIT_CHECK


def cmd_verify(cfg: RunConfig, out):
    from .suite import run_suite

    checks = run_suite(cfg)
    text = "".join(c.line() + "\n" for c in checks)
    failed = sum(not c.passed for c in checks)
    text += f"{len(checks) - failed}/{len(checks)} passed\n"
    _emit(text, cfg.output_path, out)
    if cfg.output_path:
        out.write(text)
    return EXIT_CHECK if failed else EXIT_OK


_DISPATCH = {
    "pressure": cmd_pressure,
    "curve": cmd_curve,
    "dimension": cmd_dimension,
    "eigen": cmd_eigen,
    "measure": cmd_measure,
    "gibbs": cmd_gibbs,
    "verify": cmd_verify,
}


def dispatch(command: str, cfg: RunConfig, out=None) -> int:
    """Run one command and map failures onto exit codes."""
    out = sys.stdout if out is None else out
    if command not in _DISPATCH:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with kernels.using(n_workers=cfg.workers) if cfg.workers else contextlib.nullcontext():
            return _DISPATCH[command](cfg, out)
    except ConfigError as exc:
        print(f"error: CONFIG: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        tag = next(t for cls, t in _TAGS if isinstance(exc, cls))
        extra = ""
        if isinstance(exc, NoSignChange) and exc.tau is not None:
            extra = f" (summability threshold tau ~ {fmt(exc.tau)})"
        print(f"error: {tag}: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: CONFIG: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruelle", description="Transfer operators, pressure and Bowen dimension.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--t", type=float, help="geometric potential exponent")
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--t-steps", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--workers", type=int, help="threads for the transfer kernels")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.t is not None:
            if cfg.potential_kind != "geometric":
                raise ConfigError("--t applies only to geometric potentials")
            changes["potential_t"] = args.t
        for flag, key in (("t_min", "t_min"), ("t_max", "t_max"), ("t_steps", "t_steps"),
                          ("depth", "depth"), ("out", "output_path"), ("workers", "workers")):
            v = getattr(args, flag)
            if v is not None:
                changes[key] = v
        if changes:
            cfg = cfg.replace(**changes)
    except ConfigError as exc:
        print(f"error: CONFIG: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
