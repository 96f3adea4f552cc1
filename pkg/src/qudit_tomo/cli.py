"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical failure. Failures print
``{"schema": 1, "error": {"type", "message", "field"}}`` on stderr.
"""
import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import NumericalError, TomographyError, ValidationError
from .generators import tensor_basis
from .matrix import matrix_to_json
from .measurement import (
    CountRecord,
    MeasurementSet,
    builtin_set,
    expected_counts,
    measurement_budget,
    optics_scaling,
    simulate_counts,
)
from .reconstruction import METHODS, MLEOptions, reconstruct
from .states import DensityMatrix, fidelity, named_state, random_physical_state

SCHEMA = 1
SWEEP_COLUMNS = (
    "axis", "value", "d", "n", "basis", "shots", "method", "exact", "replicates",
    "budget", "condition_number", "mean_fidelity", "std_fidelity", "mean_infidelity",
    "failures", "error",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message, field="arguments")


# -- file helpers ---------------------------------------------------------------
def _read_json(path, field):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}", field=field) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}", field=field) from exc


def _write(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_basis(source: str) -> MeasurementSet:
    """A builtin id, or a path to a measurement-set JSON file."""
    if Path(source).is_file():
        return MeasurementSet.from_json(_read_json(source, "basis"))
    return builtin_set(source)


def load_state(path) -> DensityMatrix:
    obj = _read_json(path, "state")
    if isinstance(obj, dict) and "rho" in obj:
        obj = {"d": obj.get("d"), "n": obj.get("n"), "matrix": obj["rho"]}
    return DensityMatrix.from_json(obj)


# -- the experiment ---------------------------------------------------------------
@dataclass(frozen=True)
class PipelineConfig:
    basis: str
    d: int = 2
    n: int = 1
    state_file: str | None = None
    name: str | None = None
    random: str | None = None
    shots: float = 1e6
    seed: int = 0
    method: str = "projected"
    exact: bool = False
    max_iter: int = 5000

    def true_state(self) -> DensityMatrix:
        sources = [s for s in (self.state_file, self.name, self.random) if s]
        if len(sources) != 1:
            raise ValidationError("give exactly one of --state, --name, --random", field="state")
        if self.state_file:
            return load_state(self.state_file)
        if self.name:
            return named_state(self.name, self.d, self.n)
        return random_physical_state(self.d, self.n, self.seed, self.random)


def _clean_diagnostics(diag: dict) -> dict:
    out = {}
    for k, v in diag.items():
        if k == "log_likelihood_trace":
            continue
        out[k] = float(v) if isinstance(v, (np.floating, float)) else v
    return out


def run_once(cfg: PipelineConfig) -> dict:
    """State -> counts -> reconstruction -> comparison, without touching disk."""
    t0 = time.perf_counter()
    if cfg.method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}", field="method")
    ms = load_basis(cfg.basis)
    rho = cfg.true_state()
    if rho.dim != ms.dim:
        raise ValidationError(
            f"state is {rho.dim}-dimensional but basis {cfg.basis!r} acts on dimension {ms.dim}", field="basis"
        )
    t1 = time.perf_counter()
    if cfg.exact:
        counts = expected_counts(rho, ms, cfg.shots)
    else:
        counts = replace(simulate_counts(rho, ms, cfg.shots, [cfg.seed, 1]), seed=cfg.seed)
    t2 = time.perf_counter()
    res = reconstruct(counts, ms, cfg.method, MLEOptions(max_iter=cfg.max_iter))
    t3 = time.perf_counter()
    est = res.rho
    fid = fidelity(est, rho) if est.is_physical() else fidelity(res.rho_physical, rho)
    report = {
        "schema": SCHEMA,
        "config": {
            "basis": cfg.basis, "d": ms.d, "n": ms.n, "shots": cfg.shots, "seed": cfg.seed,
            "method": cfg.method, "exact": cfg.exact,
            "state": cfg.state_file or cfg.name or f"random-{cfg.random}",
        },
        "fidelity": fid,
        "budget": {"mixed": measurement_budget(ms.d, ms.n), "pure": measurement_budget(ms.d, ms.n, True)},
        "condition_number": ms.condition_number,
        "scale_estimate": res.scale_estimate,
        "diagnostics": _clean_diagnostics(res.diagnostics),
        "timings": {"setup_s": t1 - t0, "simulate_s": t2 - t1, "reconstruct_s": t3 - t2},
    }
    return {"report": report, "counts": counts, "result": res, "truth": rho, "basis": ms}


def reconstruction_json(res, d, n) -> dict:
    return {
        "schema": SCHEMA,
        "d": d,
        "n": n,
        "rho": matrix_to_json(res.rho.matrix),
        "scale": res.scale_estimate,
        "method": res.method,
        "diagnostics": _clean_diagnostics(res.diagnostics),
    }


def _flat_report(report: dict) -> dict:
    row = {}
    for k, v in report.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                row[f"{k}.{kk}"] = vv
        else:
            row[k] = v
    return row


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def run_pipeline(cfg: PipelineConfig, out_dir=None, fmt: str = "json") -> dict:
    """Run one experiment; with ``out_dir`` write counts, reconstruction and report files."""
    run = run_once(cfg)
    report = run["report"]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "counts.json").write_text(_dump(run["counts"].to_json()))
        (out / "reconstruction.json").write_text(
            _dump(reconstruction_json(run["result"], run["basis"].d, run["basis"].n))
        )
        if fmt == "csv":
            row = _flat_report(report)
            (out / "report.csv").write_text(_csv([row], sorted(row)))
        else:
            (out / "report.json").write_text(_dump(report))
    return report


def _replicate(args):
    cfg, = args
    try:
        return run_once(cfg)["report"]["fidelity"], None
    except TomographyError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def sweep(cfg: PipelineConfig, axis: str, values, replicates: int = 10, jobs: int = 1) -> list[dict]:
    """One row per grid value with mean/std fidelity over seeded replicates.

    Replicate ``k`` uses seed ``cfg.seed + k``, so results do not depend on
    scheduling. Failed points are recorded in the ``error`` column.
    """
    rows = []
    for value in values:
        if axis == "theta":
            point = replace(cfg, basis=f"qubit-nonorth:{value:g}:{value:g}", d=2, n=1)
        elif axis == "shots":
            point = replace(cfg, shots=float(value))
        elif axis == "d":
            d = int(value)
            single = f"qudit-pairs:{d}"
            basis = single if cfg.n == 1 else "product:" + "x".join([single] * cfg.n)
            point = replace(cfg, d=d, basis=basis)
            if point.name == "max-entangled" and point.n != 2:
                point = replace(point, name=None, random="mixed")
        else:
            raise ValidationError(f"unknown sweep axis {axis!r}", field="axis")
        row = {
            "axis": axis, "value": value, "d": point.d, "n": point.n, "basis": point.basis,
            "shots": point.shots, "method": point.method, "exact": point.exact,
            "replicates": replicates, "budget": measurement_budget(point.d, point.n),
        }
        try:
            row["condition_number"] = load_basis(point.basis).condition_number
            tasks = [(replace(point, seed=cfg.seed + k),) for k in range(replicates)]
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    outcomes = list(pool.map(_replicate, tasks))
            else:
                outcomes = [_replicate(t) for t in tasks]
        except TomographyError as exc:
            row.update(failures=replicates, error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
            continue
        fids = np.array([f for f, _ in outcomes if f is not None])
        errors = [e for _, e in outcomes if e is not None]
        row["failures"] = len(errors)
        row["error"] = errors[0] if errors else ""
        if fids.size:
            row["mean_fidelity"] = float(fids.mean())
            row["std_fidelity"] = float(fids.std(ddof=1)) if fids.size > 1 else 0.0
            row["mean_infidelity"] = float(1.0 - fids.mean())
        rows.append(row)
    return rows


# -- argument parsing -------------------------------------------------------------------
def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--exact", action="store_true", help="noiseless expected counts")
    return p


def _state_flags(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--state", dest="state_file", help="state JSON file")
    src.add_argument("--name", help="catalogue state name")
    src.add_argument("--random", choices=("pure", "mixed"))
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags()
    parser = _Parser(prog="qudit-tomo", description=__doc__.splitlines()[0], parents=[g])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-basis", parents=[g], help="emit the generator basis as JSON")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=1)

    p = sub.add_parser("gen-state", parents=[g], help="emit a named or random state")
    _state_flags(p)

    p = sub.add_parser("simulate", parents=[g], help="counts for a state in a basis")
    p.add_argument("--state", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--shots", type=float, required=True)

    p = sub.add_parser("reconstruct", parents=[g], help="state from counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--method", choices=METHODS, default="projected")
    p.add_argument("--max-iter", type=int, default=5000)

    p = sub.add_parser("fidelity", parents=[g], help="fidelity between two state files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("budget", parents=[g], help="measurement budget and optics scaling")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--pure", action="store_true")

    for name, helptext in (("pipeline", "state -> counts -> reconstruction -> report"),
                           ("sweep", "pipeline over a grid, CSV out")):
        p = sub.add_parser(name, parents=[g], help=helptext)
        _state_flags(p)
        p.add_argument("--basis", default=None)
        p.add_argument("--shots", type=float, default=1e6)
        p.add_argument("--method", choices=METHODS, default="projected")
        p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--axis", choices=("theta", "shots", "d"), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _cfg(args, basis) -> PipelineConfig:
    random_ = args.random
    if not (args.state_file or args.name or random_):
        random_ = "mixed"
    return PipelineConfig(
        basis=basis, d=args.d, n=args.n, state_file=args.state_file, name=args.name, random=random_,
        shots=args.shots, seed=args.seed, method=args.method, exact=args.exact, max_iter=args.max_iter,
    )


def _dispatch(args):
    cmd = args.command
    if cmd == "gen-basis":
        basis = tensor_basis(args.d, args.n)
        _write(_dump([matrix_to_json(op) for op in basis.operators]), args.out)
    elif cmd == "gen-state":
        if args.state_file:
            raise ValidationError("gen-state takes --name or --random", field="state")
        if args.name:
            rho = named_state(args.name, args.d, args.n)
        elif args.random:
            rho = random_physical_state(args.d, args.n, args.seed, args.random)
        else:
            raise ValidationError("gen-state needs --name or --random", field="name")
        _write(_dump(rho.to_json()), args.out)
    elif cmd == "simulate":
        rho = load_state(args.state)
        ms = load_basis(args.basis)
        if args.exact:
            rec = expected_counts(rho, ms, args.shots)
        else:
            rec = simulate_counts(rho, ms, args.shots, args.seed)
        _write(_dump(rec.to_json()), args.out)
    elif cmd == "reconstruct":
        ms = load_basis(args.basis)
        counts = CountRecord.from_json(_read_json(args.counts, "counts"))
        res = reconstruct(counts, ms, args.method, MLEOptions(max_iter=args.max_iter))
        _write(_dump(reconstruction_json(res, ms.d, ms.n)), args.out)
    elif cmd == "fidelity":
        f = fidelity(load_state(args.a), load_state(args.b))
        if args.format == "csv":
            _write(_csv([{"fidelity": f}], ["fidelity"]), args.out)
        else:
            _write(_dump({"schema": SCHEMA, "fidelity": f}), args.out)
    elif cmd == "budget":
        elements, prob = optics_scaling(args.d)
        row = {
            "d": args.d, "n": args.n, "pure": args.pure,
            "budget": measurement_budget(args.d, args.n, args.pure),
            "optics_elements": elements, "optics_success_probability": prob,
        }
        if args.format == "csv":
            _write(_csv([row], list(row)), args.out)
        else:
            _write(_dump({"schema": SCHEMA, **row}), args.out)
    elif cmd == "pipeline":
        if not args.basis:
            raise ValidationError("pipeline needs --basis", field="basis")
        report = run_pipeline(_cfg(args, args.basis), args.out, args.format or "json")
        if args.out is None:
            _write(_dump(report), None)
    elif cmd == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError("--values must be comma-separated numbers", field="values") from exc
        basis = args.basis or ("qubit-hvdl" if args.d == 2 and args.n == 1 else f"qudit-pairs:{args.d}")
        if args.axis == "d":
            values = [int(v) for v in values]
        rows = sweep(_cfg(args, basis), args.axis, values, args.replicates, args.jobs)
        if args.format == "json":
            _write(_dump({"schema": SCHEMA, "rows": rows}), args.out)
        else:
            _write(_csv(rows, SWEEP_COLUMNS), args.out)


def _fail(exc: Exception, code: int) -> int:
    err = {"type": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None)}
    sys.stderr.write(json.dumps({"schema": SCHEMA, "error": err}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _dispatch(args)
    except ValidationError as exc:
        return _fail(exc, 1)
    except NumericalError as exc:
        return _fail(exc, 2)
    except TomographyError as exc:  # pragma: no cover - every error is one of the two above
        return _fail(exc, 2)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
