"""Command-line entry point: ``python -m hardy_eigen <command> [flags]``.

Commands: ``solve``, ``spectrum``, ``asymptote``, ``widths``, ``oracle`` and
``selftest``. Every report carries a :class:`RunManifest`. Exit codes: 0 on
success, 1 on a usage or input error, 2 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import asymptotics, oracle, search, widths
from .errors import (
    BracketFailed,
    DegenerateBlock,
    DomainError,
    Empty,
    HardyEigenError,
    InsufficientData,
    NodalCountMissed,
    NotApplicable,
    NotConverged,
    NotPositive,
    ResourceLimit,
    ValidationError,
    WeightSyntaxError,
    ZeroImage,
)
from .function_space import Interval
from .iteration import weighted_norm
from .operator import ProblemSpec

log = logging.getLogger(__name__)

USAGE_ERRORS = (ValidationError, NotPositive, WeightSyntaxError, DomainError, NotApplicable, ResourceLimit, InsufficientData)
SOLVER_ERRORS = (NotConverged, NodalCountMissed, Empty, BracketFailed, DegenerateBlock, ZeroImage)

SPEC_FIELDS = ("p", "q", "interval", "u", "v", "grid_level")
SPEC_DEFAULTS = {"p": 2.0, "q": 2.0, "interval": "0,1", "u": "1", "v": "1", "grid_level": 12}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def build_timestamp() -> str:
    """UTC time from ``SOURCE_DATE_EPOCH`` (default 0), so reruns are byte-identical."""
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class RunManifest:
    command: str
    spec: dict
    config: dict
    tool_version: str
    rng_seed: int
    timestamp: str

    def to_dict(self) -> dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with code 1 (the solver-failure code 2 stays unambiguous)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", type=Path, help="JSON file with fields " + ", ".join(SPEC_FIELDS))
    parser.add_argument("--p", type=float)
    parser.add_argument("--q", type=float)
    parser.add_argument("--interval", help="a,b (default 0,1)")
    parser.add_argument("--u", help="weight expression in x (default 1)")
    parser.add_argument("--v", help="weight expression in x (default 1)")
    parser.add_argument("--grid-level", dest="grid_level", type=int, help="grid with 2^L + 1 nodes (default 12)")
    parser.add_argument("--tol", type=float, default=1e-12)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--starts", type=int, default=16)
    parser.add_argument("--mode", choices=("max", "min"), help="default: max if q <= p, min if p < q")
    parser.add_argument("--out", type=Path, help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardy_eigen", description="Spectral numbers of weighted Hardy-type operators.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="one spectral triple with n zeros")
    _shared(p)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--dump", type=Path, help="CSV file for x, f, g")

    p = sub.add_parser("spectrum", help="extreme spectral numbers for n = 0..nmax")
    _shared(p)
    p.add_argument("--nmax", type=int, default=5)

    p = sub.add_parser("asymptote", help="limit table for n * lam_n^(-1/q)")
    _shared(p)
    p.add_argument("--nmax", type=int, default=12)

    p = sub.add_parser("widths", help="width estimates for one n")
    _shared(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k-iters", dest="k_iters", type=int, default=50)
    p.add_argument("--samples", type=int, default=64)

    p = sub.add_parser("oracle", help="independent reference value for lam_n")
    _shared(p)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--method", choices=("shoot", "classical", "svd"), default="shoot")
    p.add_argument("--ode-steps", dest="ode_steps", type=int, default=8000)

    p = sub.add_parser("selftest", help="built-in consistency checks")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path)
    return parser


# -- spec and config -------------------------------------------------------------------


def spec_fields(args) -> dict:
    """Problem fields from ``--spec`` with explicit flags taking precedence."""
    fields = dict(SPEC_DEFAULTS)
    if getattr(args, "spec", None) is not None:
        try:
            loaded = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read spec file: {exc}") from exc
        unknown = set(loaded) - set(SPEC_FIELDS)
        if unknown:
            raise ValidationError(f"unknown spec fields: {sorted(unknown)}")
        fields.update(loaded)
    for name in SPEC_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    return fields


def _interval(value) -> Interval:
    if isinstance(value, str):
        return Interval.parse(value)
    a, b = value
    return Interval(float(a), float(b))


def make_spec(args) -> ProblemSpec:
    f = spec_fields(args)
    return ProblemSpec.build(f["p"], f["q"], str(f["u"]), str(f["v"]), _interval(f["interval"]), int(f["grid_level"]))


def make_config(args, spec: ProblemSpec, n: int) -> search.SearchConfig:
    mode = args.mode or search.default_mode(spec.p, spec.q)
    return search.SearchConfig(n=n, mode=mode, starts=args.starts, rng_seed=args.seed, inner_tol=args.tol)


def _config_dict(config: search.SearchConfig, **extra) -> dict:
    d = asdict(config)
    d.pop("n")
    d.update(extra)
    return d


def manifest(command: str, spec: ProblemSpec | None, config: dict, seed: int) -> RunManifest:
    return RunManifest(
        command=command,
        spec=spec.describe() if spec is not None else {},
        config=config,
        tool_version=tool_version(),
        rng_seed=seed,
        timestamp=build_timestamp(),
    )


# -- output ----------------------------------------------------------------------------


def _csv_text(man: RunManifest, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write("# manifest " + json.dumps(man.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) if isinstance(c, float) else c for c in row])
    return buf.getvalue()


def _json_text(man: RunManifest, body: dict) -> str:
    return json.dumps({"manifest": man.to_dict(), **body}, indent=2, sort_keys=True) + "\n"


def emit(args, man: RunManifest, body: dict, header: list[str], rows: list[list]) -> None:
    text = _csv_text(man, header, rows) if args.format == "csv" else _json_text(man, body)
    if args.out is not None:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands --------------------------------------------------------------------------


def _summary(spec: ProblemSpec, res: search.SpectrumResult) -> dict:
    t = res.best_triple
    return {
        "n": res.n,
        "mode": res.mode,
        "lambda": res.lambda_extreme,
        "lambda_pow": res.lambda_extreme ** (-1.0 / spec.q),
        "nodal_count": t.nodal_count,
        "residual": t.residual,
        "g_norm_q": weighted_norm(np.asarray(t.g.values), spec.grid.weights, spec.q),
        "starts_used": res.starts_used,
        "starts_converged": res.starts_converged,
        "distinct": len(res.distinct()),
    }


SUMMARY_COLUMNS = ["n", "mode", "lambda", "lambda_pow", "nodal_count", "residual", "g_norm_q", "starts_used", "starts_converged", "distinct"]


def cmd_solve(args) -> int:
    spec = make_spec(args)
    config = make_config(args, spec, args.n)
    res = search.lambda_extremes(spec, config)
    row = _summary(spec, res)
    man = manifest("solve", spec, _config_dict(config), args.seed)
    if args.dump is not None:
        t = res.best_triple
        with open(args.dump, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "f", "g"])
            for x, f, g in zip(spec.grid.nodes, t.f.values, t.g.values):
                w.writerow([fmt(x), fmt(f), fmt(g)])
    emit(args, man, {"result": row}, SUMMARY_COLUMNS, [[row[c] for c in SUMMARY_COLUMNS]])
    return 0


def _sweep(args, spec: ProblemSpec, nmax: int) -> list[dict]:
    rows = []
    for n in range(nmax + 1):
        rows.append(_summary(spec, search.lambda_extremes(spec, make_config(args, spec, n))))
    return rows


def cmd_spectrum(args) -> int:
    if args.nmax < 0:
        raise ValidationError("nmax must be >= 0")
    spec = make_spec(args)
    rows = _sweep(args, spec, args.nmax)
    man = manifest("spectrum", spec, _config_dict(make_config(args, spec, 0), nmax=args.nmax), args.seed)
    emit(args, man, {"rows": rows}, SUMMARY_COLUMNS, [[r[c] for c in SUMMARY_COLUMNS] for r in rows])
    return 0


def cmd_asymptote(args) -> int:
    if args.nmax < 4:
        raise ValidationError("nmax must be >= 4")
    spec = make_spec(args)
    rows = _sweep(args, spec, args.nmax)
    report = asymptotics.asymptote_report(spec, [(r["n"], r["lambda"]) for r in rows])
    man = manifest("asymptote", spec, _config_dict(make_config(args, spec, 0), nmax=args.nmax), args.seed)
    sys.stderr.write(
        f"predicted {fmt(report.predicted_limit)} extrapolated {fmt(report.extrapolated_limit)} "
        f"relative gap {report.relative_gap:.3e} trend {report.trend}\n"
    )
    header = ["n", "lambda", "n_lambda_pow", "predicted_limit", "extrapolated_limit"]
    table = [[n, lam, s, report.predicted_limit, report.extrapolated_limit] for n, lam, s in report.rows]
    emit(args, man, {"report": report.to_dict()}, header, table)
    return 0


def cmd_widths(args) -> int:
    spec = make_spec(args)
    config = make_config(args, spec, args.n)
    report = widths.widths_report(spec, args.n, config, k_iters=args.k_iters, samples=args.samples)
    man = manifest(
        "widths", spec, _config_dict(config, k_iters=args.k_iters, samples=args.samples), args.seed
    )
    d = asdict(report)
    header = list(d)
    emit(args, man, {"report": report.to_dict()}, header, [[float(d[k]) if k != "n" else d[k] for k in header]])
    return 0


def cmd_oracle(args) -> int:
    spec = make_spec(args)
    config: dict = {"method": args.method}
    if args.method == "classical":
        if spec.p != 2.0 or spec.q != 2.0 or not _unit_weights(spec):
            raise NotApplicable("the closed form needs p = q = 2 and unit weights")
        lam = oracle.classical_eigen_p2(args.n, spec.interval)
    elif args.method == "svd":
        lam = oracle.svd_eigen_p2(spec, args.n + 1)[args.n] ** -2.0
    else:
        if not _unit_weights(spec):
            raise NotApplicable("shooting needs unit weights")
        cfg = oracle.ShootingConfig(ode_steps=args.ode_steps)
        config.update(cfg.to_dict())
        lam = oracle.shoot_pq_laplacian(spec.p, spec.q, args.n, spec.interval, cfg)
    man = manifest("oracle", spec, config, args.seed)
    row = {"n": args.n, "method": args.method, "lambda": lam, "lambda_pow": lam ** (-1.0 / spec.q)}
    emit(args, man, {"result": row}, list(row), [list(row.values())])
    return 0


def _unit_weights(spec: ProblemSpec) -> bool:
    return bool(np.all(spec.u == 1.0) and np.all(spec.v == 1.0))


def cmd_selftest(args) -> int:
    from .selftest import run_checks

    results = run_checks()
    man = manifest("selftest", None, {}, 0)
    rows = [[r.name, "pass" if r.passed else "FAIL", r.detail] for r in results]
    body = {"checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
    emit(args, man, body, ["check", "status", "detail"], rows)
    return 0 if all(r.passed for r in results) else 2


COMMANDS = {
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "asymptote": cmd_asymptote,
    "widths": cmd_widths,
    "oracle": cmd_oracle,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except USAGE_ERRORS as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    except SOLVER_ERRORS as exc:
        sys.stderr.write(f"solver failure: {type(exc).__name__}: {exc}\n")
        return 2
    except HardyEigenError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
