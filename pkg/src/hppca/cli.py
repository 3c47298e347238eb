"""Command-line interface: generate | solve | convergence | robustness | diagnose.

Every command is deterministic given --seed (timing columns aside) and
writes its outputs under --out. A flat key=value --config file supplies
defaults; explicit command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .experiments import (ExperimentSpec, robustness_csv, run_convergence,
                          run_diagnose, run_robustness, svg_line_chart,
                          trial_stream)
from .diagnostics import write_report
from .model import NoiseKind, load_dataset, save_dataset
from .problem import PopulationProblem, build_problem
from .solver import gpm_solve, pca_init, write_trace_csv
from .stiefel import StiefelPoint, frame_distance, random_stiefel

_DEFAULTS: dict[str, object] = {
    "seed": 0,
    "alpha": 0.05,
    "max_iters": 5000,
    "tol_step": 1e-12,
    "tol_residual": 1e-10,
    "init": "pca",
    "noise": "gaussian",
    "trials": 20,
    "levels": 6,
    "sweep": "heterogeneity",
    "out": "out",
    "d": 100,
    "k": 3,
    "sizes": (200, 800),
    "variances": (1.0, 6.0),
    "lambdas": (5.0, 3.5, 2.0),
    "metric": "dist-f",
}

_CONVERT = {
    "seed": int, "alpha": float, "max_iters": int, "tol_step": float,
    "tol_residual": float, "trials": int, "levels": int, "d": int, "k": int,
    "sizes": lambda s: tuple(int(v) for v in _split(s)),
    "variances": lambda s: tuple(float(v) for v in _split(s)),
    "lambdas": lambda s: tuple(float(v) for v in _split(s)),
    "init": str, "noise": str, "sweep": str, "out": str, "metric": str,
}


def _split(value) -> list:
    if isinstance(value, (tuple, list)):
        return list(value)
    return [part.strip() for part in str(value).split(",") if part.strip()]


def read_config(path) -> dict[str, str]:
    """Parse a flat key=value file; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol-step", dest="tol_step", type=float)
    p.add_argument("--tol-residual", dest="tol_residual", type=float)
    p.add_argument("--init", help="pca | random | file:PATH")
    p.add_argument("--noise", choices=("gaussian", "uniform"))
    p.add_argument("--trials", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--sweep", choices=("noise", "heterogeneity"))
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--config", help="flat key=value settings file; flags override")
    p.add_argument("--d", type=int, help="ambient dimension")
    p.add_argument("--k", type=int, help="subspace dimension")
    p.add_argument("--sizes", help="comma-separated group sizes")
    p.add_argument("--variances", help="comma-separated group noise variances")
    p.add_argument("--lambdas", help="comma-separated signal strengths")
    p.add_argument("--metric", choices=("dist-f", "sin-theta"))
    p.add_argument("--svg", action="store_true", help="also render SVG charts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hppca",
        description="Heteroscedastic PCA experiments: data generation, the "
                    "generalized power method and its diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a dataset and write it to disk")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run the solver once and write its trace")
    _add_common(p)
    p.add_argument("--data", help="directory of a previously generated dataset")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="solver traces from spectral and random starts")
    _add_common(p)
    p.add_argument("--population", action="store_true",
                   help="solve the infinite-sample problem instead of sampled data")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("robustness", help="error sweep against a spectral baseline")
    _add_common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("diagnose", help="estimate constants and check bounds")
    _add_common(p)
    p.add_argument("--data", help="directory of a previously generated dataset")
    p.add_argument("--zero-residual", action="store_true",
                   help="report with the residual matrices replaced by zero")
    p.set_defaults(func=cmd_diagnose)

    return parser


def resolve_spec(args) -> ExperimentSpec:
    """Merge defaults, config file and explicit flags into a spec."""
    settings = dict(_DEFAULTS)
    if getattr(args, "config", None):
        file_values = read_config(args.config)
        unknown = set(file_values) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_values)
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    coerced = {key: _CONVERT[key](value) for key, value in settings.items()}
    return ExperimentSpec(
        d=coerced["d"], k=coerced["k"], sizes=coerced["sizes"],
        variances=coerced["variances"], lambdas=coerced["lambdas"],
        alpha=coerced["alpha"], max_iters=coerced["max_iters"],
        tol_step=coerced["tol_step"], tol_residual=coerced["tol_residual"],
        seed=coerced["seed"], trials=coerced["trials"], levels=coerced["levels"],
        noise=NoiseKind(coerced["noise"]), init=coerced["init"],
        out=Path(coerced["out"]),
    )


def _outdir(spec: ExperimentSpec) -> Path:
    spec.out.mkdir(parents=True, exist_ok=True)
    return spec.out


def cmd_generate(args) -> int:
    spec = resolve_spec(args)
    out = _outdir(spec)
    model = spec.make_model()
    dataset = spec.make_dataset(model)
    data_dir = save_dataset(dataset, out / "dataset")
    np.save(out / "dataset" / "qtruth.npy", model.q_truth.x)
    np.save(out / "dataset" / "lambdas.npy", model.lambdas)
    print(f"seed={spec.seed}")
    print(f"dataset written to {data_dir} "
          f"(d={dataset.d}, k={dataset.k}, sizes={dataset.groups.sizes}, "
          f"variances={dataset.groups.variances}, noise={dataset.noise.value})")
    return 0


def _load_or_generate(spec: ExperimentSpec, data_dir):
    """Dataset plus, when recoverable, the population problem for analysis."""
    if data_dir:
        dataset = load_dataset(data_dir)
        truth_path = Path(data_dir) / "qtruth.npy"
        lambdas_path = Path(data_dir) / "lambdas.npy"
        population = None
        if truth_path.is_file() and lambdas_path.is_file():
            from .model import SignalModel
            model = SignalModel(StiefelPoint(np.load(truth_path)), np.load(lambdas_path))
            population = PopulationProblem.from_model(model, dataset.groups)
        return dataset, population
    model = spec.make_model()
    dataset = spec.make_dataset(model)
    return dataset, PopulationProblem.from_model(model, spec.groups())


def _initial_point(spec: ExperimentSpec, dataset) -> StiefelPoint:
    if spec.init == "pca":
        return pca_init(dataset)
    if spec.init == "random":
        return random_stiefel(dataset.d, dataset.k, trial_stream(spec.seed, 0, 2))
    if spec.init.startswith("file:"):
        return StiefelPoint(np.load(spec.init[len("file:"):]))
    raise ValueError(f"unknown init {spec.init!r} (expected pca, random or file:PATH)")


def cmd_solve(args) -> int:
    spec = resolve_spec(args)
    out = _outdir(spec)
    dataset, population = _load_or_generate(spec, getattr(args, "data", None))
    lambdas = population.lambdas if population is not None else np.asarray(spec.lambdas)
    problem = build_problem(dataset, lambdas)
    start = _initial_point(spec, dataset)
    result = gpm_solve(problem, start, spec.solver_config(), truth=population)
    write_trace_csv(result.trace, out / "trace.csv")
    np.save(out / "x_final.npy", result.x_final.x)
    lines = [
        f"termination={result.termination.value}",
        f"iterations={result.iterations}",
        f"final_objective={result.trace[-1].objective:.17g}",
    ]
    if population is not None:
        lines.append(f"final_dist={frame_distance(result.x_final, population.q_truth):.17g}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    print(f"trace written to {out / 'trace.csv'}")
    return 0


def cmd_convergence(args) -> int:
    spec = resolve_spec(args)
    out = _outdir(spec)
    run = run_convergence(spec, population_mode=bool(getattr(args, "population", False)))
    summary_lines: list[str] = []
    for label, result in run.runs.items():
        write_trace_csv(result.trace, out / f"trace_{label}.csv")
        summary_lines.extend(run.summaries[label].lines(label))
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n")
    if args.svg:
        series = {label: (np.arange(len(res.trace)), res.distance_trace())
                  for label, res in run.runs.items()}
        (out / "convergence.svg").write_text(svg_line_chart(
            series, title="distance to ground truth", x_label="iteration",
            y_label="dist_f"))
    for line in summary_lines:
        print(line)
    return 0


def cmd_robustness(args) -> int:
    spec = resolve_spec(args)
    out = _outdir(spec)
    sweep = args.sweep or str(_DEFAULTS["sweep"])
    metric = args.metric or str(_DEFAULTS["metric"])
    stats = run_robustness(spec, sweep=sweep, metric=metric)
    (out / "robustness.csv").write_text(robustness_csv(stats))
    if args.svg:
        series = {}
        for method in ("pca", "gpm"):
            rows = [s for s in stats if s.method == method]
            series[method] = ([s.level for s in rows], [s.mean_error for s in rows])
        (out / "robustness.svg").write_text(svg_line_chart(
            series, title=f"{sweep} sweep", x_label="level", y_label=metric))
    print(robustness_csv(stats), end="")
    return 0


def cmd_diagnose(args) -> int:
    spec = resolve_spec(args)
    out = _outdir(spec)
    dataset = None
    if getattr(args, "data", None):
        dataset = load_dataset(args.data)
    report, samples = run_diagnose(spec, zero_residual=bool(getattr(args, "zero_residual", False)),
                                   dataset=dataset)
    write_report(report, samples, out)
    from .diagnostics import report_text
    print(report_text(report), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
