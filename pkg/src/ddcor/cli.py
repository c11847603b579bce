"""
Command-line front end.

    ddcor compute  DATA.csv --response y --methods ddc,dc
    ddcor test     DATA.csv --response y --permutations 500
    ddcor screen   DATA.csv --response y --methods ddc,dc,hsic,pcor
    ddcor simulate example1means reps=50 n=100

Tables are written in long format, as CSV (``#`` metadata lines, floats with
17 significant digits) or JSON.  Exit codes: 0 success, 2 configuration or
parse error, 3 numerical degeneracy.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigurationError,
    DDCError,
    DegenerateResponseError,
    DegenerateSampleError,
    DegenerateVarianceError,
)
from .inference import TestConfig, independence_test
from .measures import Method, PairedSample, estimate
from .screening import (
    DDC_ORIENTATION,
    SCREENING_METHODS,
    feature_pvalues,
    ranking_order,
    screening_power_table,
    screening_report,
)
from .simulation import (
    ALL_METHODS,
    DEFAULT_LAMBDA_GRID,
    EXAMPLE1_MODELS,
    TABLE1_LAMBDAS,
    TABLE1_MODELS,
    Model,
    Orientation,
    SimulationSpec,
    coefficient_mean_table,
    power_curve,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

DEGENERATE_ERRORS = (DegenerateSampleError, DegenerateResponseError, DegenerateVarianceError)


# ---------------------------------------------------------------------------
# data sets
# ---------------------------------------------------------------------------

@dataclass
class DatasetFile:
    path: str
    response_columns: list[str]
    predictor_columns: list[str]
    header: bool = True
    delimiter: str = ","


@dataclass
class RunConfig:
    seed: int = 0
    permutations: int = 500
    level: float = 0.05
    standardize: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.permutations < 1:
            raise ConfigurationError(f"--permutations must be >= 1, got {self.permutations}")
        if not 0.0 < self.level < 1.0:
            raise ConfigurationError(f"--level must lie in (0, 1), got {self.level}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"--seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass
class LoadedData:
    names: list[str]
    columns: dict[str, np.ndarray]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.columns[c] for c in names])


def read_table(path: str, header: bool = True, delimiter: str = ",") -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Raw CSV cells with their 1-based line numbers."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle, delimiter=delimiter)
        rows = [(reader.line_num, row) for row in reader if row]
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    if header:
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    else:
        names = [str(i + 1) for i in range(len(rows[0][1]))]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"{path}: duplicate column names in header")
    return names, rows


def load_dataset(spec: DatasetFile) -> tuple[LoadedData, list[str], list[str]]:
    """Parse the referenced columns and resolve the predictor list."""
    names, rows = read_table(spec.path, spec.header, spec.delimiter)
    response = list(spec.response_columns)
    if not response:
        raise ConfigurationError("at least one --response column is required")
    predictors = list(spec.predictor_columns) or [c for c in names if c not in response]
    for col in response + predictors:
        if col not in names:
            raise ConfigurationError(f"column {col!r} not found in {spec.path}; available: {', '.join(names)}")
    if set(response) & set(predictors):
        raise ConfigurationError("response and predictor columns must be disjoint")
    if not predictors:
        raise ConfigurationError("no predictor columns selected")
    wanted = {c: names.index(c) for c in response + predictors}
    values: dict[str, list[float]] = {c: [] for c in wanted}
    for line, row in rows:
        if len(row) != len(names):
            raise ConfigurationError(
                f"{spec.path}: line {line} has {len(row)} fields, expected {len(names)}"
            )
        for col, idx in wanted.items():
            cell = row[idx].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ConfigurationError(
                    f"{spec.path}: line {line}, column {col!r}: cannot parse {cell!r} as a real number"
                ) from None
            if not math.isfinite(v):
                raise ConfigurationError(
                    f"{spec.path}: line {line}, column {col!r}: non-finite value {cell!r}"
                )
            values[col].append(v)
    columns = {c: np.array(v, dtype=float) for c, v in values.items()}
    return LoadedData(names, columns), response, predictors


def standardize(m: np.ndarray) -> np.ndarray:
    """Column-wise ``(v - mean) / sd`` with the n-1 denominator; constant columns become 0."""
    centred = m - m.mean(axis=0)
    sd = m.std(axis=0, ddof=1) if m.shape[0] > 1 else np.zeros(m.shape[1])
    sd[sd == 0] = 1.0
    return centred / sd


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _format_meta(v: Any) -> str:
    if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        return repr(float(v))
    return _format_cell(v)


def _format_cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_json_value(u) for u in v]
    return v


def render(rows: list[dict], metadata: dict, fmt: str) -> str:
    if fmt == "json":
        payload = {
            "metadata": {k: _json_value(v) for k, v in metadata.items()},
            "rows": [{k: _json_value(v) for k, v in row.items()} for row in rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    out = io.StringIO()
    for key, value in metadata.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(_format_meta(v) for v in value)
        out.write(f"# {key}: {_format_meta(value)}\n")
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_format_cell(row.get(k, "")) for k in fields])
    return out.getvalue()


def read_emitted_csv(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse CSV produced by :func:`render` back into metadata and rows."""
    metadata = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            metadata[key] = value
        else:
            body.append(line)
    return metadata, list(csv.DictReader(body))


def pivot(rows: list[dict], index: Sequence[str], column: str, value: str) -> list[dict]:
    out: dict[tuple, dict] = {}
    for row in rows:
        key = tuple(row[k] for k in index)
        target = out.setdefault(key, {k: row[k] for k in index})
        target[f"{column}={_format_meta(row[column])}"] = row[value]
    return list(out.values())


def emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _methods(text: str | None, default: Sequence[Method]) -> list[Method]:
    if not text:
        return list(default)
    try:
        return [Method.parse(m) for m in text.split(",") if m.strip()]
    except DDCError as exc:
        raise ConfigurationError(str(exc)) from None


def _sample(data: LoadedData, response: list[str], predictors: list[str], config: RunConfig) -> PairedSample:
    if len(response) != 1:
        raise ConfigurationError("this command needs exactly one --response column")
    x = data.matrix(predictors)
    y = data.matrix(response)
    if config.standardize:
        x, y = standardize(x), standardize(y)
    return PairedSample(x, y[:, 0])


def _base_metadata(command: str, config: RunConfig) -> dict:
    return {"command": command, "version": __version__, "seed": config.seed}


def cmd_compute(dataset: DatasetFile, methods: list[Method], config: RunConfig) -> tuple[list[dict], dict]:
    data, response, predictors = load_dataset(dataset)
    sample = _sample(data, response, predictors, config)
    rows = []
    for method in methods:
        est = estimate(method, sample, tie_seed=config.seed)
        rows.append({
            "method": method.label,
            "value": est.value,
            "n": est.n,
            "p": est.p,
            "params": ";".join(f"{k}={_format_cell(v)}" for k, v in est.params.items()),
        })
    meta = _base_metadata("compute", config)
    meta.update({"response": response, "predictors": predictors, "standardize": config.standardize,
                 "orientation": "DDC(predictors | response)"})
    return rows, meta


def cmd_test(dataset: DatasetFile, methods: list[Method], config: RunConfig) -> tuple[list[dict], dict]:
    data, response, predictors = load_dataset(dataset)
    sample = _sample(data, response, predictors, config)
    test_config = TestConfig(config.level, config.permutations, config.seed)
    rows = []
    for method in methods:
        result = independence_test(method, sample, test_config)
        rows.append({
            "method": method.label,
            "value": result.estimate.value,
            "p_value": result.p_value,
            "p_source": result.p_source.value,
            "permutations": result.permutations,
            "level": result.level,
            "reject": result.reject,
            "alternative": result.alternative,
            "n": result.estimate.n,
            "p": result.estimate.p,
        })
    meta = _base_metadata("test", config)
    meta.update({"response": response, "predictors": predictors, "standardize": config.standardize,
                 "permutations": config.permutations, "level": config.level})
    return rows, meta


def cmd_screen(
    dataset: DatasetFile,
    methods: list[Method],
    config: RunConfig,
    *,
    scatter_path: str | None = None,
    scatter_top: int = 10,
) -> tuple[list[dict], dict]:
    data, response, predictors = load_dataset(dataset)
    x = data.matrix(predictors)
    y = data.matrix(response)
    if config.standardize:
        x, y = standardize(x), standardize(y)
    rows = []
    meta = _base_metadata("screen", config)
    meta.update({
        "n": x.shape[0], "predictors": len(predictors), "response": response,
        "standardize": config.standardize, "permutations": config.permutations,
        "level": config.level, "ddc_orientation": DDC_ORIENTATION,
    })
    top: list[int] = []
    for k, method in enumerate(methods):
        values, pvals = feature_pvalues(
            x, y, method, permutations=config.permutations,
            seed=np.random.SeedSequence(config.seed, spawn_key=(k,)).generate_state(2, np.uint64)[0],
            tie_seed=config.seed,
        )
        source = "asymptotic" if method in (Method.DDC, Method.CHATTERJEE) else "permutation"
        order = ranking_order(values)
        for rank, j in enumerate(order, start=1):
            rows.append({
                "method": method.label,
                "rank": rank,
                "predictor": predictors[j],
                "coefficient": values[j],
                "p_value": pvals[j],
                "p_source": source,
                "significant": bool(pvals[j] <= config.level),
            })
        meta[f"significant_{method.value}"] = int(np.count_nonzero(pvals <= config.level))
        top.extend(int(j) for j in order[:scatter_top] if j not in top)
    if scatter_path:
        scatter = [
            {"predictor": predictors[j], "response": r, "x": x[i, j], "y": y[i, c]}
            for j in top
            for c, r in enumerate(response)
            for i in range(x.shape[0])
        ]
        with open(scatter_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(render(scatter, {"kind": "scatter", "standardize": config.standardize}, "csv"))
        meta["scatter"] = scatter_path
    return rows, meta


# ----- simulate ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class Experiment:
    name: str
    defaults: dict[str, Any]
    parsers: dict[str, Callable[[str], Any]]
    run: Callable[[dict, RunConfig], list[dict]]
    pivot: Callable[[list[dict]], list[dict]]


def _run_example1_power(params: dict, config: RunConfig) -> list[dict]:
    return power_curve(
        params["models"], params["lambdas"], params["methods"], params["n"], params["reps"],
        params["level"], config.seed, permutations=params["permutations"],
        orientation=params["orientation"], threads=config.threads,
    )


def _run_example1_means(params: dict, config: RunConfig) -> list[dict]:
    return coefficient_mean_table(
        params["models"], params["lambdas"], params["methods"], params["n"], params["reps"],
        config.seed, orientation=params["orientation"], threads=config.threads,
    )


def _multi_specs(params: dict, config: RunConfig):
    for rho in params["rho"]:
        yield SimulationSpec(
            Model.MULTI_RESPONSE, rho=rho, n=params["n"], p=params["p"], seed=config.seed,
            reps=params["reps"], z_per_row=params["z_per_row"],
        )


def _run_example2_screening(params: dict, config: RunConfig) -> list[dict]:
    rows = []
    for spec in _multi_specs(params, config):
        for method in params["methods"]:
            report = screening_report(spec, method, threads=config.threads)
            for quantity, value in report.as_row().items():
                if quantity in {"method", "rho", "selected_size", "n", "p", "reps"}:
                    continue
                rows.append({"rho": spec.rho, "method": report.method.label,
                             "quantity": quantity, "value": value})
    return rows


def _run_example2_power(params: dict, config: RunConfig) -> list[dict]:
    rows = []
    predictors = [j - 1 for j in params["predictors"]]
    for spec in _multi_specs(params, config):
        rows.extend(screening_power_table(
            spec, params["methods"], params["level"], permutations=params["permutations"],
            predictors=predictors, threads=config.threads,
        ))
    return rows


_COMMON_PARSERS = {
    "methods": lambda t: [Method.parse(m) for m in _names(t)],
    "n": int,
    "reps": int,
    "level": float,
    "permutations": int,
}


def _experiments(config: RunConfig) -> dict[str, Experiment]:
    e1_parsers = dict(_COMMON_PARSERS, models=lambda t: [Model.parse(m) for m in _names(t)],
                      lambdas=_floats, orientation=Orientation)
    e2_parsers = dict(_COMMON_PARSERS, rho=_floats, p=int, z_per_row=_bool, predictors=_ints)
    shared = {"level": config.level, "permutations": config.permutations}
    return {
        "example1power": Experiment(
            "Example1Power",
            dict(shared, models=list(EXAMPLE1_MODELS), lambdas=list(DEFAULT_LAMBDA_GRID),
                 methods=list(ALL_METHODS), n=100, reps=500, orientation=Orientation.Y_GIVEN_X),
            e1_parsers, _run_example1_power,
            lambda rows: pivot(rows, ["model", "method"], "lambda", "power"),
        ),
        "example1means": Experiment(
            "Example1Means",
            dict(models=list(TABLE1_MODELS), lambdas=list(TABLE1_LAMBDAS), methods=list(ALL_METHODS),
                 n=100, reps=500, orientation=Orientation.Y_GIVEN_X),
            {k: v for k, v in e1_parsers.items() if k not in shared},
            _run_example1_means,
            lambda rows: pivot(rows, ["model", "method"], "lambda", "mean"),
        ),
        "example2screening": Experiment(
            "Example2Screening",
            dict(rho=[0.3, 0.5, 0.7], n=200, p=500, reps=100, methods=list(SCREENING_METHODS),
                 z_per_row=False),
            {k: v for k, v in e2_parsers.items() if k not in {"level", "permutations", "predictors"}},
            _run_example2_screening,
            lambda rows: pivot(rows, ["rho", "method"], "quantity", "value"),
        ),
        "example2power": Experiment(
            "Example2Power",
            dict(shared, rho=[0.3, 0.5, 0.7], n=200, p=500, reps=100, methods=list(SCREENING_METHODS),
                 predictors=[1, 2, 3, 4], z_per_row=False),
            e2_parsers, _run_example2_power,
            lambda rows: pivot(rows, ["method", "predictor"], "rho", "power"),
        ),
    }


def resolve_experiment(name: str, overrides: Sequence[str], config: RunConfig) -> tuple[Experiment, dict]:
    experiments = _experiments(config)
    key = name.lower().replace("_", "").replace("-", "")
    if key not in experiments:
        valid = ", ".join(e.name for e in experiments.values())
        raise ConfigurationError(f"unknown experiment {name!r}; expected one of: {valid}")
    experiment = experiments[key]
    params = dict(experiment.defaults)
    for item in overrides:
        field_name, sep, text = item.partition("=")
        field_name = field_name.strip()
        if not sep:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        if field_name not in experiment.parsers:
            valid = ", ".join(sorted(experiment.parsers))
            raise ConfigurationError(
                f"unknown parameter {field_name!r} for {experiment.name}; valid keys: {valid}"
            )
        try:
            params[field_name] = experiment.parsers[field_name](text)
        except (ValueError, DDCError) as exc:
            raise ConfigurationError(f"bad value for {field_name!r}: {exc}") from None
    return experiment, params


def _describe(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [_describe(v) for v in value]
    if isinstance(value, Method):
        return value.label
    if hasattr(value, "value"):
        return value.value
    return value


def cmd_simulate(
    experiment: str, overrides: Sequence[str], config: RunConfig, *, wide: bool = False
) -> tuple[list[dict], dict]:
    spec, params = resolve_experiment(experiment, overrides, config)
    rows = spec.run(params, config)
    if wide:
        rows = spec.pivot(rows)
    meta = _base_metadata("simulate", config)
    meta["experiment"] = spec.name
    meta.update({k: _describe(v) for k, v in params.items()})
    meta["layout"] = "wide" if wide else "long"
    return rows, meta


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _threads(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1 or 'auto'")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddcor", description="Differential distance correlation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="master random seed (default 0)")
    common.add_argument("--permutations", type=int, default=500)
    common.add_argument("--level", type=float, default=0.05)
    common.add_argument("--threads", type=_threads, default=1, help="worker count or 'auto'")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", help="write to this path instead of stdout")

    data = _Parser(add_help=False)
    data.add_argument("path", help="input CSV file")
    data.add_argument("--response", "-r", required=True, help="response column(s), comma separated")
    data.add_argument("--predictors", "-x", default="", help="predictor columns (default: all others)")
    data.add_argument("--no-header", action="store_true", help="columns are named 1..k")
    data.add_argument("--delimiter", default=",")
    data.add_argument("--methods", "-m", default="", help="comma-separated coefficients")
    std = data.add_mutually_exclusive_group()
    std.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    std.add_argument("--no-standardize", dest="standardize", action="store_false")

    sub.add_parser("compute", parents=[common, data], help="coefficient values")
    sub.add_parser("test", parents=[common, data], help="independence tests")
    screen = sub.add_parser("screen", parents=[common, data], help="rank predictors against a response")
    screen.add_argument("--scatter", help="write (x, y) pairs of top predictors to this CSV")
    screen.add_argument("--scatter-top", type=int, default=10)

    simulate = sub.add_parser("simulate", parents=[common], help="reproduce a simulation study")
    simulate.add_argument("experiment", help="Example1Power, Example1Means, Example2Screening or Example2Power")
    simulate.add_argument("overrides", nargs="*", help="key=value parameter overrides")
    simulate.add_argument("--wide", action="store_true", help="pivot to the published table layout")
    return parser


def _dispatch(args: argparse.Namespace) -> tuple[list[dict], dict]:
    standardize_default = args.command == "screen"
    standardize_flag = getattr(args, "standardize", None)
    config = RunConfig(
        seed=args.seed,
        permutations=args.permutations,
        level=args.level,
        standardize=standardize_default if standardize_flag is None else standardize_flag,
        threads=args.threads,
    )
    if args.command == "simulate":
        return cmd_simulate(args.experiment, args.overrides, config, wide=args.wide)
    if len(args.delimiter) != 1:
        raise ConfigurationError("--delimiter must be a single character")
    dataset = DatasetFile(
        args.path, _names(args.response), _names(args.predictors), not args.no_header, args.delimiter
    )
    if args.command == "compute":
        return cmd_compute(dataset, _methods(args.methods, [Method.DDC]), config)
    if args.command == "test":
        return cmd_test(dataset, _methods(args.methods, [Method.DDC]), config)
    return cmd_screen(
        dataset, _methods(args.methods, [Method.DDC]), config,
        scatter_path=args.scatter, scatter_top=args.scatter_top,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        rows, meta = _dispatch(args)
        emit(render(rows, meta, args.format), args.output)
    except DEGENERATE_ERRORS as exc:
        print(f"ddcor: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DDCError as exc:
        print(f"ddcor: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
