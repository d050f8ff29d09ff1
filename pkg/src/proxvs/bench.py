"""Experiment harness: JSON spec in, seeded trial batches, CSV/JSON tables out.

A spec names a problem family, a list of sizes, the models to run and the
solver parameters. Every (size, model, trial) triple becomes one row of
``results.csv``; ``summary.csv`` aggregates rows per (size, model).

Seeding: trial ``t`` (0-based) of every size and model uses
``trial_seed = base_seed + t`` to draw its instance, so all models of a size
see the same instances. Wall-clock times are not part of either CSV (they can
never repeat bit for bit); they go to ``timing.json``.

Example spec::

    {
      "family": "dispersion",
      "sizes": [[10, 10, 5]],
      "trials": 100,
      "models": [{"kind": "proposed"}],
      "solver": {"eps_stop": 1e-5, "time_limit_sec": 5},
      "base_seed": 0,
      "output_dir": "out"
    }

MIMO sizes are ``[U, B, M, [snr_db, ...]]`` and expand to one size per SNR.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .dispersion import PROJECTOR_SEED_XOR, build_dispersion_problem, dispersion_start, random_dispersion_instance
from .errors import DivergenceError, SpecValidationError
from .mimo import (
    build_modulus_model,
    build_proposed_model,
    build_soav_model,
    demodulate_ber,
    generate_scene,
    lmmse,
    polar_map,
    polar_start,
    soav_start,
    subgradient_eta,
)
from .solver import SolverConfig, StepsizeRule, solve, solve_subgradient

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "RESULT_FIELDS",
    "SUMMARY_FIELDS",
    "load_spec",
    "run_experiment",
    "summarize",
    "write_results",
    "read_results",
    "main",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

STD_CONVENTION = "sample (n-1 denominator); 0 for a single row"

# defaults for the MIMO proposed model
DEFAULT_LAM = 1e-5
DEFAULT_R_MIN = 0.1


# --------------------------------------------------------------------------- spec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, ser_json_inf_nan="constants")


class SolverSpec(_Strict):
    c: float = Field(2.0**-13, gt=0, lt=1)
    rho: float = Field(0.5, gt=0, lt=1)
    gamma_init: float = Field(1.0, gt=0)
    alpha: float = Field(3.0, ge=1)
    eta_override: Optional[float] = Field(None, gt=0)
    eps_stop: float = Field(1e-5, ge=0)
    time_limit_sec: float = Field(5.0, gt=0)
    max_iters: int = Field(1_000_000, ge=1)

    def config(self, record_trace):
        return SolverConfig(record_trace=record_trace, **self.model_dump())


class ProposedSpec(_Strict):
    kind: Literal["proposed"]
    lam_r: Optional[float] = Field(None, ge=0)
    lam_theta: Optional[float] = Field(None, ge=0)
    r_min: Optional[float] = Field(None, gt=0, le=1)

    def label(self):
        if self.lam_r is None:
            return "proposed"
        return f"proposed(lam_r={self.lam_r!r},lam_theta={self.lam_theta!r},r_min={self.r_min!r})"


class ModulusSpec(_Strict):
    kind: Literal["modulus"]

    def label(self):
        return "modulus"


class SoavSpec(_Strict):
    kind: Literal["soav"]
    lam: float = Field(DEFAULT_LAM, ge=0)

    def label(self):
        return f"soav(lam={self.lam!r})"


class LmmseSpec(_Strict):
    kind: Literal["lmmse"]

    def label(self):
        return "lmmse"


class SubgradientSpec(_Strict):
    kind: Literal["subgradient"]
    rule: Literal["eta_sqrt", "inv_sqrt", "inv"] = "eta_sqrt"
    lam_r: Optional[float] = Field(None, ge=0)
    lam_theta: Optional[float] = Field(None, ge=0)
    r_min: Optional[float] = Field(None, gt=0, le=1)

    def label(self):
        return f"subgradient({self.rule})"


ModelSpec = Annotated[
    Union[ProposedSpec, ModulusSpec, SoavSpec, LmmseSpec, SubgradientSpec], Field(discriminator="kind")
]
_MIMO_ONLY = ("modulus", "soav", "lmmse")


class ExperimentSpec(_Strict):
    family: Literal["dispersion", "mimo_ber", "mimo_speed"]
    sizes: List[Tuple]
    trials: int = Field(ge=1)
    models: List[ModelSpec] = Field(min_length=1)
    solver: SolverSpec = SolverSpec()
    base_seed: int = 0
    output_dir: str = "bench_out"
    write_traces: Optional[bool] = None

    @field_validator("sizes", mode="before")
    @classmethod
    def _sizes_nonempty(cls, v):
        if not isinstance(v, (list, tuple)) or len(v) == 0:
            raise ValueError("at least one size is required")
        return [tuple(s) if isinstance(s, (list, tuple)) else s for s in v]

    @model_validator(mode="after")
    def _check_family(self):
        if self.family == "dispersion":
            for i, s in enumerate(self.sizes):
                _check_dispersion_size(i, s)
            for i, m in enumerate(self.models):
                if m.kind in _MIMO_ONLY:
                    raise SpecValidationError(f"models.{i}.kind", f"{m.kind!r} is a MIMO model")
                if m.kind == "subgradient" and m.rule == "eta_sqrt":
                    raise SpecValidationError(f"models.{i}.rule", "eta_sqrt needs the MIMO weak-convexity modulus")
                for name in ("lam_r", "lam_theta", "r_min"):
                    if getattr(m, name, None) is not None:
                        raise SpecValidationError(f"models.{i}.{name}", "not a dispersion parameter")
        else:
            for i, s in enumerate(self.sizes):
                _check_mimo_size(i, s)
            filled = []
            for m in self.models:
                if m.kind in ("proposed", "subgradient"):
                    m = m.model_copy(
                        update={
                            "lam_r": DEFAULT_LAM if m.lam_r is None else m.lam_r,
                            "lam_theta": DEFAULT_LAM if m.lam_theta is None else m.lam_theta,
                            "r_min": DEFAULT_R_MIN if m.r_min is None else m.r_min,
                        }
                    )
                filled.append(m)
            object.__setattr__(self, "models", filled)
        labels = [m.label() for m in self.models]
        if len(set(labels)) != len(labels):
            raise SpecValidationError("models", "duplicate model entries")
        return self

    @property
    def traces_on(self):
        if self.write_traces is None:
            return self.family == "mimo_speed"
        return self.write_traces

    def expanded_sizes(self):
        """One ``(label, params)`` pair per size; MIMO SNR lists are expanded."""
        out = []
        for s in self.sizes:
            if self.family == "dispersion":
                d, m, dv = (int(v) for v in s)
                out.append((f"{d}x{m}x{dv}", (d, m, dv)))
            else:
                U, B, M, snrs = s
                for snr in snrs:
                    snr = float(snr)
                    out.append((f"U{int(U)}_B{int(B)}_M{int(M)}_snr{snr!r}", (int(U), int(B), int(M), snr)))
        return out


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_dispersion_size(i, s):
    if not isinstance(s, tuple) or len(s) != 3 or not all(_is_int(v) and v >= 1 for v in s):
        raise SpecValidationError(f"sizes.{i}", "expected [d, m, d_V] with positive integers")
    if s[2] > s[0]:
        raise SpecValidationError(f"sizes.{i}", f"d_V={s[2]} exceeds d={s[0]}")


def _check_mimo_size(i, s):
    if not isinstance(s, tuple) or len(s) != 4:
        raise SpecValidationError(f"sizes.{i}", "expected [U, B, M, [snr_db, ...]]")
    U, B, M, snrs = s
    for name, v in (("U", U), ("B", B)):
        if not _is_int(v) or v < 1:
            raise SpecValidationError(f"sizes.{i}.{name}", "must be a positive integer")
    if not _is_int(M) or M < 2 or M & (M - 1):
        raise SpecValidationError(f"sizes.{i}.M", "must be a power of two >= 2")
    if not isinstance(snrs, (list, tuple)) or len(snrs) == 0:
        raise SpecValidationError(f"sizes.{i}.snr", "expected a non-empty list of SNR values (dB)")
    for j, v in enumerate(snrs):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or math.isnan(v) or v == -math.inf:
            raise SpecValidationError(f"sizes.{i}.snr.{j}", "SNR must be a number or +inf")


def _validation_error(exc):
    err = exc.errors()[0]
    path = ".".join(str(p) for p in err["loc"]) or "<root>"
    ctx = err.get("ctx", {}).get("error")
    if isinstance(ctx, SpecValidationError):
        return ctx
    return SpecValidationError(path, err["msg"])


def load_spec(source):
    """Validate a spec given as a dict, a JSON string or a path to a JSON file.

    Raises :class:`SpecValidationError` with the offending field path.
    """
    if isinstance(source, (str, Path)) and not (isinstance(source, str) and source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecValidationError("<file>", str(exc)) from None
        source = text
    if isinstance(source, str):
        try:
            source = json.loads(source, parse_constant=_json_constant)
        except json.JSONDecodeError as exc:
            raise SpecValidationError("<json>", str(exc)) from None
    if isinstance(source, ExperimentSpec):
        return source
    try:
        return ExperimentSpec.model_validate(source)
    except SpecValidationError:
        raise
    except ValidationError as exc:
        raise _validation_error(exc) from None


def _json_constant(name):
    # allow "Infinity" for a noiseless SNR entry
    return {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}[name]


# --------------------------------------------------------------------------- rows


RESULT_FIELDS = [
    "family",
    "size",
    "model",
    "trial",
    "trial_seed",
    "cost_final",
    "measure_final",
    "iterations",
    "termination",
    "ber",
    "symbol_errors",
]

_NUMERIC = ("cost_final", "measure_final", "iterations", "ber")

SUMMARY_FIELDS = ["family", "size", "model", "n"] + [
    f"{c}_{stat}" for c in _NUMERIC for stat in ("mean", "std_sample")
]


@dataclass(frozen=True)
class ResultRow:
    family: str
    size: str
    model: str
    trial: int
    trial_seed: int
    cost_final: Optional[float]
    measure_final: Optional[float]
    iterations: int
    termination: str
    ber: Optional[float] = None
    symbol_errors: Optional[int] = None
    wallclock_sec: float = 0.0
    size_index: int = 0
    model_index: int = 0

    def sort_key(self):
        return (self.size_index, self.model_index, self.trial)

    def csv_values(self):
        return [_fmt(getattr(self, f)) for f in RESULT_FIELDS]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        # repr is the shortest string that round-trips (at most 17 digits)
        return repr(v)
    return str(v)


# --------------------------------------------------------------------------- trials


@dataclass
class _Outcome:
    row: Optional[ResultRow]
    trace: Optional[list]
    failure: Optional[dict]


def _run_dispersion(params, model, seed, cfg):
    d, m, dv = params
    inst = random_dispersion_instance(d, m, dv, seed)
    p = build_dispersion_problem(inst)
    x1 = dispersion_start(inst)
    if model.kind == "proposed":
        res = solve(p, x1, cfg)
    else:
        res = solve_subgradient(p, x1, StepsizeRule(model.rule), cfg)
    return res, None


def _run_mimo(params, model, seed, cfg):
    U, B, M, snr = params
    scene = generate_scene(U, B, M, snr, seed)
    kind = model.kind
    if kind == "lmmse":
        return None, demodulate_ber(scene, lmmse(scene))
    if kind == "soav":
        res = solve(build_soav_model(scene, model.lam), soav_start(scene), cfg)
        return res, demodulate_ber(scene, res.x_final)
    if kind == "modulus":
        p, x1 = build_modulus_model(scene), polar_start(scene, 1.0)
    else:
        p = build_proposed_model(scene, model.lam_r, model.lam_theta, model.r_min)
        x1 = polar_start(scene, model.r_min)
    if kind == "subgradient":
        rule = StepsizeRule(model.rule, subgradient_eta(scene) if model.rule == "eta_sqrt" else 1.0)
        res = solve_subgradient(p, x1, rule, cfg)
    else:
        res = solve(p, x1, cfg)
    return res, demodulate_ber(scene, polar_map(res.x_final))


def _run_trial(spec, cfg, job):
    (si, size_label, params), (mi, model), t = job
    seed = spec.base_seed + t
    runner = _run_dispersion if spec.family == "dispersion" else _run_mimo
    ident = dict(family=spec.family, size=size_label, model=model.label(), trial=t, trial_seed=seed)
    try:
        res, ber = runner(params, model, seed, cfg)
    except DivergenceError as exc:
        log.warning("trial failed: %s size=%s model=%s seed=%d: %s", spec.family, size_label, model.label(), seed, exc)
        return _Outcome(None, None, dict(ident, error=str(exc)))
    ber_val, sym_err = ber if ber is not None else (None, None)
    if res is None:
        row = ResultRow(
            **ident, cost_final=None, measure_final=None, iterations=0, termination="ClosedForm",
            ber=ber_val, symbol_errors=sym_err, size_index=si, model_index=mi,
        )
        return _Outcome(row, None, None)
    row = ResultRow(
        **ident,
        cost_final=float(res.final_cost),
        measure_final=float(res.final_measure),
        iterations=int(res.iterations),
        termination=res.termination.value,
        ber=None if ber_val is None else float(ber_val),
        symbol_errors=sym_err,
        wallclock_sec=float(res.elapsed_sec),
        size_index=si,
        model_index=mi,
    )
    trace = [r.to_dict() for r in res.trace] if spec.traces_on else None
    return _Outcome(row, trace, None)


@dataclass
class RunReport:
    rows: List[ResultRow]
    failures: List[dict]
    output_dir: Path

    @property
    def exit_code(self):
        return EXIT_DIVERGED if self.failures else EXIT_OK


def run_experiment(spec, threads=1, write=True):
    """Run every (size, model, trial) job of ``spec``.

    Jobs are independent; with ``threads > 1`` they run on a thread pool. Rows
    are sorted by (size, model, trial) in spec order before anything is
    written, so the output does not depend on scheduling.

    Returns
    -------
    RunReport
    """
    spec = load_spec(spec)
    if int(threads) < 1:
        raise SpecValidationError("threads", "must be >= 1")
    cfg = spec.solver.config(record_trace=spec.traces_on)
    sizes = [(i, lbl, prm) for i, (lbl, prm) in enumerate(spec.expanded_sizes())]
    models = list(enumerate(spec.models))
    jobs = [(s, m, t) for s in sizes for m in models for t in range(spec.trials)]
    if threads == 1:
        outcomes = [_run_trial(spec, cfg, j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            outcomes = list(pool.map(lambda j: _run_trial(spec, cfg, j), jobs))
    done = sorted((o for o in outcomes if o.row is not None), key=lambda o: o.row.sort_key())
    rows = [o.row for o in done]
    failures = [o.failure for o in outcomes if o.failure is not None]
    out = Path(spec.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        write_results(rows, out / "results.csv")
        write_summary(summarize(rows), out / "summary.csv")
        _write_json(out / "timing.json", _timing(rows))
        _write_json(out / "metadata.json", _metadata(spec, rows, failures))
        if spec.traces_on:
            for o in done:
                r = o.row
                name = f"trace_{r.size}_{_slug(r.model)}_{r.trial}.json"
                _write_json(out / name, o.trace)
    return RunReport(rows, failures, out)


def _slug(text):
    return "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in text)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _timing(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r.size, r.model), []).append(r.wallclock_sec)
    return {
        "note": "wall-clock seconds per trial (perf_counter); not CPU time",
        "per_group_mean_sec": {f"{s}|{m}": float(np.mean(v)) for (s, m), v in groups.items()},
        "per_trial_sec": [[r.size, r.model, r.trial, r.wallclock_sec] for r in rows],
    }


def _metadata(spec, rows, failures):
    return {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "spec": json.loads(spec.model_dump_json()),
        "seeding": "trial t of every size and model uses trial_seed = base_seed + t",
        "dispersion_projector_seed": f"trial_seed ^ {PROJECTOR_SEED_XOR:#x}",
        "std_convention": STD_CONVENTION,
        "time_column": "wall-clock per trial, stored in timing.json, not in the CSVs",
        "rows": len(rows),
        "time_limited_rows": sum(r.termination == "TimeLimit" for r in rows),
        "failures": failures,
    }


# --------------------------------------------------------------------------- csv io and summary


def _csv_text(header, body):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue()


def write_results(rows, path):
    text = _csv_text(RESULT_FIELDS, [r.csv_values() for r in rows])
    Path(path).write_bytes(text.encode("utf-8"))


def read_results(path):
    """Read a ``results.csv`` back into :class:`ResultRow` objects (wall time 0)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise SpecValidationError(str(path), f"missing columns {sorted(missing)}")
        for rec in reader:
            opt = lambda k, f=float: f(rec[k]) if rec[k] != "" else None  # noqa: E731
            rows.append(
                ResultRow(
                    family=rec["family"],
                    size=rec["size"],
                    model=rec["model"],
                    trial=int(rec["trial"]),
                    trial_seed=int(rec["trial_seed"]),
                    cost_final=opt("cost_final"),
                    measure_final=opt("measure_final"),
                    iterations=int(rec["iterations"]),
                    termination=rec["termination"],
                    ber=opt("ber"),
                    symbol_errors=opt("symbol_errors", int),
                )
            )
    return rows


def _mean_std(values):
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return None, None
    a = np.array(vals)
    std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return float(np.mean(a)), std


def summarize(rows):
    """Group rows by (family, size, model) and return per-group mean and sample std.

    Groups keep the order of first appearance. A column with no values in a
    group (e.g. the cost of a closed-form estimator) is left empty.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.family, r.size, r.model), []).append(r)
    if not groups:
        log.warning("summarize: no rows")
    out = []
    for (fam, size, model), grp in groups.items():
        rec = {"family": fam, "size": size, "model": model, "n": len(grp)}
        for col in _NUMERIC:
            mean, std = _mean_std(getattr(r, col) for r in grp)
            rec[f"{col}_mean"] = mean
            rec[f"{col}_std_sample"] = std
        out.append(rec)
    return out


def write_summary(summary, path):
    text = _csv_text(SUMMARY_FIELDS, [[_fmt(rec[f]) for f in SUMMARY_FIELDS] for rec in summary])
    Path(path).write_bytes(text.encode("utf-8"))


# --------------------------------------------------------------------------- canned specs


def demo_dispersion_spec(seed=0, out="demo_dispersion", trials=100):
    return {
        "family": "dispersion",
        "sizes": [[10, 10, 5], [10, 10, 9]],
        "trials": trials,
        "models": [{"kind": "proposed"}],
        "solver": {"eps_stop": 1e-5, "time_limit_sec": 5.0},
        "base_seed": seed,
        "output_dir": str(out),
    }


def demo_mimo_spec(seed=0, out="demo_mimo", trials=20):
    return {
        "family": "mimo_ber",
        "sizes": [[16, 16, 4, [10.0, 15.0, 20.0, 25.0, 30.0]]],
        "trials": trials,
        "models": [
            {"kind": "proposed", "lam_r": 1e-5, "lam_theta": 1e-5, "r_min": 0.1},
            {"kind": "modulus"},
            {"kind": "soav", "lam": 1e-5},
            {"kind": "lmmse"},
        ],
        "solver": {"eps_stop": 1e-5, "time_limit_sec": 5.0},
        "base_seed": seed,
        "output_dir": str(out),
    }


# --------------------------------------------------------------------------- cli


def _parser():
    ap = argparse.ArgumentParser(prog="bench", description="Seeded experiment runner for proximal variable smoothing.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, trials_default=None):
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--out", default=None, help="override output_dir")
        p.add_argument("--threads", type=int, default=1, help="trial-level worker threads")
        if trials_default is not None:
            p.add_argument("--trials", type=int, default=trials_default)

    run = sub.add_parser("run", help="run a JSON experiment spec")
    run.add_argument("spec")
    common(run)
    s = sub.add_parser("summarize", help="recompute summary.csv from a results.csv")
    s.add_argument("results")
    s.add_argument("--out", default=None, help="output path (default: summary.csv beside the input)")
    common(sub.add_parser("demo-dispersion", help="dispersion grid (10,10,5) and (10,10,9)"), 100)
    common(sub.add_parser("demo-mimo", help="BER sweep at U=B=16, M=4"), 20)
    return ap


def _print_summary(summary, out=sys.stdout):
    for rec in summary:
        parts = [f"{rec['size']:<28} {rec['model']:<24} n={rec['n']:<4}"]
        for col in ("cost_final", "iterations", "ber"):
            if rec[f"{col}_mean"] is not None:
                parts.append(f"{col}={rec[f'{col}_mean']:.6g}")
        print("  ".join(parts), file=out)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "summarize":
            rows = read_results(args.results)
            summary = summarize(rows)
            dest = Path(args.out) if args.out else Path(args.results).with_name("summary.csv")
            write_summary(summary, dest)
            _print_summary(summary)
            return EXIT_OK
        if args.command == "run":
            raw = load_spec(args.spec).model_dump()
        elif args.command == "demo-dispersion":
            raw = demo_dispersion_spec(trials=args.trials)
        else:
            raw = demo_mimo_spec(trials=args.trials)
        if args.seed is not None:
            raw["base_seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        spec = load_spec(raw)
        report = run_experiment(spec, threads=args.threads)
    except SpecValidationError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _print_summary(summarize(report.rows))
    for f in report.failures:
        print(f"FAILED {f['size']} {f['model']} trial {f['trial']}: {f['error']}", file=sys.stderr)
    print(f"wrote {len(report.rows)} rows to {report.output_dir}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
