"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 finished with warnings
(non-convergence, separation, excluded replications).

Every run writes ``<output stem>.manifest.json``.  CSV outputs start with a
``# manifest: <name>`` line and JSON outputs carry a ``"manifest"`` key.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, persist
from .baselines import summarize_baseline
from .data import DataError, load_csv, resolve_data_path
from .experiments import MODEL_KINDS, FlexibilityResult, SimConfig, build_spec, flexibility_study
from .scoring import (
    DEFAULT_GRID,
    DEFAULT_R_MAX,
    RULES,
    Protocol,
    compare_models,
    score_many,
    select_lambda,
    select_lambda_aic,
)
from .transition import FittedTransitionModel, SingularInformationError, format_table, summarize

logger = logging.getLogger("transcount")

EXIT_OK, EXIT_INPUT, EXIT_WARN = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default
        raise UsageError(message)


@dataclasses.dataclass
class RunManifest:
    """Everything needed to repeat a command; written next to its outputs."""

    command: str
    argv: list[str]
    options: dict[str, Any]
    seed: int | None
    inputs: dict[str, str]
    outputs: list[str]
    version: str = __version__
    timestamp: str = ""

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- argument parsing -----------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="CSV path or bundled name; searched in $TRANSCOUNT_DATA too")
    p.add_argument("--outcome", help="outcome column (default: from the schema sidecar)")
    p.add_argument("--schema", help="schema file declaring column kinds")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODEL_KINDS, default="transition")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="smoothing parameter")
    p.add_argument("--smoother", choices=("psplines", "theta"), default="psplines")
    p.add_argument("--link", choices=("logit", "cloglog"), default="logit")
    p.add_argument("--M", dest="M", type=int, help="largest modelled category")
    p.add_argument("--n-basis", type=int, help="number of B-spline basis functions")
    p.add_argument("--diff-order", type=int, choices=(1, 2), default=1)
    p.add_argument("--varying", help="comma-separated covariates with category-varying effects (default all)")
    p.add_argument("--se", choices=("model", "sandwich"), default="model")
    p.add_argument("--max-iter", type=int, default=None)


def _add_protocol(p: argparse.ArgumentParser) -> None:
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--fraction", type=float, default=2 / 3)
    p.add_argument("--train-size", type=int, help="fixed training-set size (overrides --fraction)")
    p.add_argument("--r-max", type=int, default=DEFAULT_R_MAX)
    p.add_argument("--rule", choices=RULES, default="rps")
    p.add_argument("--jobs", type=int, default=1, help="parallel replications")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transcount", description="Transition models for count data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of option defaults (command line wins)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="output directory")
    # the same options after the command name; SUPPRESS keeps the top-level value otherwise
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda name, **kw: _add(name, parents=[common], **kw)  # type: ignore[method-assign]

    p = sub.add_parser("fit", help="fit one model and save it")
    _add_data(p)
    _add_model(p)
    p.add_argument("--output", default="model.json")
    p.add_argument("--show-theta", action="store_true", help="print theta_0..theta_M (always for models without covariates)")

    p = sub.add_parser("predict", help="predictive pmfs from a saved model")
    p.add_argument("--model-file", required=True)
    _add_data(p)
    p.add_argument("--M", dest="M", type=int, help="support 0..M of the output pmf")
    p.add_argument("--output", default="pmf.csv")

    p = sub.add_parser("score", help="score a saved model on a dataset")
    p.add_argument("--model-file", required=True)
    _add_data(p)
    p.add_argument("--rule", choices=RULES, default="rps")
    p.add_argument("--r-max", type=int, default=DEFAULT_R_MAX)
    p.add_argument("--output", default="scores.csv")

    p = sub.add_parser("cv", help="choose the smoothing parameter")
    _add_data(p)
    _add_model(p)
    _add_protocol(p)
    p.add_argument("--grid", type=_float_list, default=list(DEFAULT_GRID))
    p.add_argument("--method", choices=("resampling", "aic"), default="resampling",
                   help="shared lambda by test score, or one lambda per term by AIC")
    p.add_argument("--output", default="cv.csv")

    p = sub.add_parser("compare", help="compare models by repeated subsampling")
    _add_data(p)
    _add_protocol(p)
    p.add_argument("--models", default="poisson,negbin,zip,hurdle,transition",
                   help="comma list of KIND[:SMOOTHER][@LAMBDA]")
    p.add_argument("--output", default="scores.csv")

    p = sub.add_parser("simulate", help="flexibility study on simulated counts")
    p.add_argument("--family", default="poisson")
    p.add_argument("--mu", type=float, default=5.0)
    p.add_argument("--nu", type=float)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--lambda", dest="lam", type=float, help="fixed smoothing parameter (default: chosen per sample)")
    p.add_argument("--smoother", choices=("psplines", "theta"), default="psplines")
    p.add_argument("--support", type=int, help="largest category in the output table")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", default="pmf.csv")

    p = sub.add_parser("replay", help="repeat the run recorded in a manifest (outputs go to --out)")
    p.add_argument("manifest")
    return parser


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse with config-file defaults; explicit flags take precedence.

    Top-level keys apply to every command, a key named after a command
    (e.g. ``"compare": {...}``) only to that command.
    """
    parser = build_parser()
    first = parser.parse_args(argv)
    cfg = _load_config(first.config)
    if not cfg:
        return first
    flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in cfg.get(first.command, {}).items()})
    if "lambda" in flat:
        flat["lam"] = flat.pop("lambda")
    sub = parser._subparsers._group_actions[0].choices[first.command]  # type: ignore[union-attr]
    known = {a.dest for a in parser._actions} | {a.dest for a in sub._actions}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    parser.set_defaults(**{k: v for k, v in flat.items() if k in {a.dest for a in parser._actions}})
    sub.set_defaults(**flat)
    return parser.parse_args(argv)


# -- helpers --------------------------------------------------------------

def _dataset(args):
    if not args.data:
        raise UsageError("--data is required")
    path = resolve_data_path(args.data)
    return load_csv(path, args.outcome, args.schema), path


def _transition_options(args) -> dict[str, Any]:
    opts: dict[str, Any] = {"link": args.link, "M": args.M, "n_basis": args.n_basis,
                            "diff_order": args.diff_order, "se": args.se}
    if args.varying:
        opts["varying"] = tuple(v.strip() for v in args.varying.split(",") if v.strip())
    if args.max_iter:
        opts["max_iter"] = args.max_iter
    return opts


def _spec_from_args(args):
    if args.model.startswith("transition"):
        return build_spec(args.model, args.lam, args.smoother, **_transition_options(args))
    return build_spec(args.model, **({"max_iter": args.max_iter} if args.max_iter else {}))


def _protocol(args) -> Protocol:
    return Protocol(args.replications, args.fraction, args.train_size, args.seed, args.r_max, args.rule)


def _parse_model_list(text: str, default_smoother: str = "psplines") -> dict[str, Any]:
    specs: dict[str, Any] = {}
    for item in (t.strip() for t in text.split(",")):
        if not item:
            continue
        head, _, lam = item.partition("@")
        kind, _, smoother = head.partition(":")
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
        try:
            lam_value = float(lam) if lam else 1.0
        except ValueError:
            raise UsageError(f"bad smoothing parameter in {item!r}") from None
        specs[item] = build_spec(kind, lam_value, smoother or default_smoother)
    if not specs:
        raise UsageError("no models given")
    return specs


def _fmt(x: float) -> str:
    return repr(float(x))


def _write(out_dir: Path, name: str, text: str, record) -> Path:
    """Write a CSV output whose first line names the producing manifest."""
    path = out_dir / name
    path.write_text(f"# manifest: {record.manifest_name}\n" + text, encoding="utf-8")
    record(outputs=[name])
    return path


def _coef_rows(model):
    return summarize(model) if isinstance(model, FittedTransitionModel) else summarize_baseline(model)


def _warnings_of(model) -> list[str]:
    out = []
    if not model.converged:
        out.append("fit did not converge")
    if isinstance(model, FittedTransitionModel):
        out.extend(model.notes)
    else:
        out.extend(model.flags)
    return out


# -- commands -------------------------------------------------------------

def cmd_fit(args, out_dir: Path, record) -> int:
    data, path = _dataset(args)
    record(inputs={str(path): sha256(path)})
    model = _spec_from_args(args).fit(data)
    doc = persist.model_to_dict(model)
    doc["manifest"] = record.manifest_name
    (out_dir / args.output).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    record(outputs=[args.output])
    print(format_table(_coef_rows(model), align=False))
    if isinstance(model, FittedTransitionModel) and (args.show_theta or not model.column_names):
        for r, value in enumerate(model.theta):
            print(f"theta[{r}] {value:.6f}")
    if isinstance(model, FittedTransitionModel):
        print(f"lambda {model.lambda_used:g}  M {model.M}  loglik {model.loglik:.3f}  iterations {model.iterations}")
    else:
        extra = f"  nu {model.nu:.4g}" if model.nu is not None else ""
        print(f"loglik {model.loglik:.3f}  iterations {model.iterations}{extra}")
    warn = _warnings_of(model)
    for w in warn:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_WARN if warn else EXIT_OK


def _load_model(args, record):
    model = persist.load(args.model_file)
    data, path = _dataset(args)
    record(inputs={str(path): sha256(path), str(args.model_file): sha256(args.model_file)})
    if tuple(data.column_names) != tuple(model.column_names):
        raise DataError(f"data columns {list(data.column_names)} do not match the model's {list(model.column_names)}")
    return model, data


def cmd_predict(args, out_dir: Path, record) -> int:
    model, data = _load_model(args, record)
    dist = model.predict_pmf(data.covariates)
    if args.M is not None:
        dist = dist.with_support(args.M)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "mean", *[f"p{r}" for r in range(dist.M + 1)]])
    for i in range(dist.n):
        w.writerow([i, _fmt(dist.mean[i]), *[_fmt(v) for v in dist.pmf[i]]])
    _write(out_dir, args.output, buf.getvalue(), record)
    return EXIT_OK


def cmd_score(args, out_dir: Path, record) -> int:
    from .scoring import evaluation_support

    model, data = _load_model(args, record)
    dist = model.predict_pmf(data.covariates, M=evaluation_support(model, data, args.r_max))
    values = score_many(args.rule, data.outcomes, dist, args.r_max)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "y", args.rule])
    for i, (y, v) in enumerate(zip(data.outcomes, values)):
        w.writerow([i, int(y), _fmt(v)])
    _write(out_dir, args.output, buf.getvalue(), record)
    print(f"mean {args.rule} {float(np.mean(values)):.4f} over {data.n} observations")
    return EXIT_OK if np.all(np.isfinite(values)) else EXIT_WARN


def cmd_cv(args, out_dir: Path, record) -> int:
    data, path = _dataset(args)
    record(inputs={str(path): sha256(path)})
    spec = _spec_from_args(args)
    if not args.model.startswith("transition"):
        raise UsageError("cv needs a transition model")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.method == "aic":
        sel = select_lambda_aic(data, spec, sorted(set(args.grid)))
        w.writerow(["term", "lambda"])
        for term, lam in sel.lambdas.items():
            w.writerow([term, _fmt(lam)])
        print("per-term lambda: " + ", ".join(f"{t}={v:g}" for t, v in sel.lambdas.items()) + f"  (AIC {sel.aic:.3f})")
        status = EXIT_OK
    else:
        sel = select_lambda(data, spec, args.grid, _protocol(args), args.jobs)
        w.writerow(["lambda", f"mean_{args.rule}", "failures"])
        for lam, s, f in zip(sel.grid, sel.mean_scores, sel.failures):
            w.writerow([_fmt(lam), _fmt(s), f])
        print(f"selected lambda {sel.lam:g} (mean {args.rule} {min(sel.mean_scores):.4f})")
        status = EXIT_WARN if any(sel.failures) else EXIT_OK
    _write(out_dir, args.output, buf.getvalue(), record)
    return status


def cmd_compare(args, out_dir: Path, record) -> int:
    data, path = _dataset(args)
    record(inputs={str(path): sha256(path)})
    specs = _parse_model_list(args.models)
    comp = compare_models(data, specs, _protocol(args), args.jobs)
    _write(out_dir, args.output, comp.to_csv(), record)
    summary_name = Path(args.output).stem + ".summary.json"
    summary = {**comp.summary(), "manifest": record.manifest_name}
    (out_dir / summary_name).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    record(outputs=[summary_name])
    for name, mean in sorted(comp.means.items(), key=lambda kv: kv[1]):
        print(f"{name} {mean:.4f}")
    if comp.excluded:
        print(f"warning: {comp.excluded} replications excluded after fit failures", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def cmd_simulate(args, out_dir: Path, record) -> int:
    try:
        config = SimConfig(args.family, args.mu, args.nu, args.n, args.reps, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = build_spec("transition", 1.0, args.smoother)
    res: FlexibilityResult = flexibility_study(config, spec, args.lam, args.support, jobs=args.jobs)
    _write(out_dir, args.output, res.to_csv(), record)
    print(f"max |avg transition - true| {res.max_gap('transition'):.4f}")
    print(f"max |avg {config.family} - true| {res.max_gap('family'):.4f}")
    if res.excluded:
        print(f"warning: {res.excluded} replications excluded", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "score": cmd_score,
    "cv": cmd_cv,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


def _replay_args(args) -> tuple[argparse.Namespace, list[str]]:
    """Namespace of a recorded run; refuses when an input file changed."""
    try:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        options, argv, inputs = doc["options"], doc["argv"], doc["inputs"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    for path, digest in inputs.items():
        if not Path(path).exists() or sha256(path) != digest:
            raise UsageError(f"input {path} is missing or changed since the recorded run")
    ns = argparse.Namespace(**options)
    ns.out = args.out
    return ns, list(argv)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"transcount: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "replay":
        try:
            args, argv = _replay_args(args)
        except UsageError as exc:
            print(f"transcount: error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    out_dir = Path(args.out)
    manifest = RunManifest(
        command=args.command,
        argv=argv,
        options={k: _jsonable(v) for k, v in sorted(vars(args).items())},
        seed=args.seed,
        inputs={},
        outputs=[],
    )

    def record(inputs=None, outputs=None):
        manifest.inputs.update(inputs or {})
        manifest.outputs.extend(outputs or [])

    record.manifest_name = Path(args.output).stem + ".manifest.json"

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        status = COMMANDS[args.command](args, out_dir, record)
    except (UsageError, DataError, persist.PersistError, FileNotFoundError, SingularInformationError) as exc:
        print(f"transcount: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if manifest.outputs:
        manifest.write(out_dir / record.manifest_name)
    return status


if __name__ == "__main__":
    sys.exit(main())
