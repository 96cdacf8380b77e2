"""Command-line front end: plan, simulate, fit, sweep, tile.

Configuration merges three layers, later wins: per-command defaults, the
matching block of a JSON config file (--config), explicit flags. Unknown
config keys are rejected. All randomness flows from the single --seed; no
entropy is drawn from the environment, so identical config + seed gives
identical output bytes (timestamps live only in sweep sidecar metadata).

Exit codes: 0 success, 2 usage or config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import __version__
from .chain import ChainParams, build_chain_protocol, effective_frequency
from .errors import ConfigError, DomainError, ParseError, ToolkitError
from .estimator import fit_least_squares
from .fisher import (MeasurementPlan, PlanEntry, VarianceModel, plan_crb)
from .harness import (Exact, Fixed, Perturbed, SweepSpec, crosstalk_scaling,
                      rmse_vs_budget, robustness_scan, shot_ratio_curve,
                      spec_hash, write_sweep_csv, write_sweep_sidecar)
from .planner import (PlannerConfig, optimize_plan, resolve_config,
                      build_strategy, strategy_from_label)
from .sampler import (SampleSet, read_sample_csv, read_sample_json, sample,
                      write_sample_csv, write_sample_json)
from .signal import (FiveParam, PureDecay, Quadrature, QubitParams, TwoParam,
                     free_parameters)
from .tiler import (Exhaustive, Greedy, grid_graph, heavy_hex_graph,
                    load_graph, path_graph, star_graph, tile, validate_plan)

_MODEL_CHOICES = ("two-param", "five-param", "pure-decay")
_QUAD_SETS = {"x": (Quadrature.X,), "y": (Quadrature.Y,),
              "xy": (Quadrature.X, Quadrature.Y)}
_SWEEP_KINDS = ("rmse-vs-budget", "robustness", "crosstalk-scaling",
                "shot-ratio")


@dataclass(frozen=True)
class Key:
    """One accepted config-block entry, exposed 1:1 as a flag."""

    name: str
    typ: type = float
    default: object = None
    help: str = ""
    choices: tuple | None = None
    many: bool = False      # JSON array / nargs="+"


_PLAN_KEYS = (
    Key("model", str, None, "model family", _MODEL_CHOICES),
    Key("omega", float, None, "frequency guess the plan is built around"),
    Key("gamma", float, None, "decay-rate guess"),
    Key("amplitude", float, 1.0, "oscillation amplitude (five-param, pure-decay)"),
    Key("offset", float, 0.0, "baseline offset (five-param)"),
    Key("phase", float, 0.0, "phase (five-param)"),
    Key("shots", int, 1000, "total shot budget"),
    Key("quadratures", str, None, "measured quadratures", tuple(_QUAD_SETS)),
    Key("max_times", int, None, "cap on distinct measurement times"),
    Key("merge_tolerance", float, None, "minimum gamma*t separation of times"),
    Key("restarts", int, None, "optimizer multistart count"),
    Key("variance", str, None, "shot-noise variance convention",
        ("unit", "binomial")),
    Key("time_min", float, None, "lower time bound"),
    Key("time_max", float, None, "upper time bound"),
    Key("out", str, "plan.json", "plan output path"),
)

_SIMULATE_KEYS = (
    Key("plan", str, None, "plan JSON produced by the plan command"),
    Key("model", str, "two-param", "true model family", _MODEL_CHOICES),
    Key("omega", float, None, "true frequency"),
    Key("gamma", float, None, "true decay rate"),
    Key("amplitude", float, 1.0, "true amplitude"),
    Key("offset", float, 0.0, "true offset"),
    Key("phase", float, 0.0, "true phase"),
    Key("format", str, "csv", "sample file format", ("csv", "json")),
    Key("chain", str, None, "chain JSON (omegas, gammas, couplings)"),
    Key("protocol", bool, False, "run the four-experiment chain protocol"),
    Key("budget", int, 1000, "shots per probed qubit per experiment"),
    Key("strategy", str, "SingleTimeXY", "per-qubit strategy label"),
    Key("out", str, "samples.csv", "output path (directory in protocol mode)"),
)

_FIT_KEYS = (
    Key("samples", str, None, "sample CSV/JSON file(s)", many=True),
    Key("model", str, "two-param", "model family to fit", _MODEL_CHOICES),
    Key("omega", float, None, "initial frequency"),
    Key("gamma", float, None, "initial decay rate"),
    Key("amplitude", float, 1.0, "initial amplitude"),
    Key("offset", float, 0.0, "initial offset"),
    Key("phase", float, 0.0, "initial phase"),
    Key("frozen", str, "", "comma-separated parameters held at their init values"),
    Key("out", str, "estimate.json", "estimate output path"),
)

_SWEEP_KEYS = (
    Key("kind", str, None, "sweep family", _SWEEP_KINDS),
    Key("strategies", str, None, "strategy labels", many=True),
    Key("budgets", int, None, "total-shot grid (rmse-vs-budget)", many=True),
    Key("trials", int, 100, "Monte Carlo repetitions per grid point"),
    Key("omega", float, 1.0, "true frequency (planning anchor in robustness)"),
    Key("gamma", float, 1.0, "true decay rate (planning anchor in robustness)"),
    Key("guess", str, "exact", "fit-guess policy",
        ("exact", "perturbed", "fixed")),
    Key("guess_sigma", float, 0.05, "relative sigma of the perturbed policy"),
    Key("guess_omega", float, 1.0, "frequency of the fixed policy"),
    Key("guess_gamma", float, 1.0, "decay rate of the fixed policy"),
    Key("gamma_grid", float, None, "true decay rates (robustness)", many=True),
    Key("n_total", int, 10_000, "shot budget (robustness)"),
    Key("sizes", int, None, "chain lengths (crosstalk-scaling)", many=True),
    Key("budget", int, 10_000, "shots per qubit-experiment (crosstalk-scaling)"),
    Key("ratio_grid", float, None, "gamma/omega grid (shot-ratio)", many=True),
    Key("out", str, None, "CSV path; sidecar gets the same stem .json"),
)

_TILE_KEYS = (
    Key("graph", str, None, "coupling-graph JSON path"),
    Key("generator", str, None, "built-in graph family",
        ("path", "grid", "star", "heavy-hex")),
    Key("n", int, None, "vertex count (path) or leaf count (star)"),
    Key("width", int, None, "grid width"),
    Key("height", int, None, "grid height"),
    Key("distance", int, None, "heavy-hex code distance"),
    Key("effort", str, "greedy", "search effort", ("greedy", "exhaustive")),
    Key("node_limit", int, 10**6, "exhaustive search node budget"),
    Key("out", str, "tiling.json", "tiling output path"),
)

_COMMAND_KEYS = {"plan": _PLAN_KEYS, "simulate": _SIMULATE_KEYS,
                 "fit": _FIT_KEYS, "sweep": _SWEEP_KEYS, "tile": _TILE_KEYS}


# ---------------------------------------------------------------------------
# config plumbing

def _add_keys(parser, keys):
    for k in keys:
        flag = "--" + k.name.replace("_", "-")
        if k.typ is bool:
            parser.add_argument(flag, action=argparse.BooleanOptionalAction,
                                default=None, help=k.help)
        elif k.many:
            parser.add_argument(flag, type=k.typ, nargs="+", default=None,
                                help=k.help)
        else:
            parser.add_argument(flag, type=k.typ, default=None, help=k.help,
                                choices=k.choices)


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from None
    if not isinstance(blob, dict):
        raise ConfigError("config file must hold a JSON object")
    allowed = set(_COMMAND_KEYS) | {"seed", "out_dir"}
    unknown = sorted(set(blob) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {unknown}")
    return blob


def _coerce(key: Key, value):
    try:
        if key.typ is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"config key {key.name!r} must be a boolean")
            return value
        if key.many:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"config key {key.name!r} must be an array")
            return [key.typ(v) for v in value]
        coerced = key.typ(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"config key {key.name!r}: cannot interpret {value!r}") from None
    if key.choices is not None and coerced not in key.choices:
        raise ConfigError(
            f"config key {key.name!r} must be one of {list(key.choices)}")
    return coerced


def merge_config(command: str, args) -> dict:
    """Defaults, then the config-file block, then explicit flags."""
    keys = _COMMAND_KEYS[command]
    merged = {k.name: k.default for k in keys}
    merged["seed"] = 0
    merged["out_dir"] = "."
    if args.config:
        blob = _load_config_file(args.config)
        merged["seed"] = _coerce(Key("seed", int), blob.get("seed", 0))
        merged["out_dir"] = str(blob.get("out_dir", "."))
        block = blob.get(command, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config block {command!r} must be an object")
        by_name = {k.name: k for k in keys}
        for name, value in block.items():
            if name not in by_name:
                raise ConfigError(f"unknown key {name!r} in {command!r} block")
            merged[name] = _coerce(by_name[name], value)
    for k in keys:
        flag_value = getattr(args, k.name, None)
        if flag_value is not None:
            merged[k.name] = flag_value
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    if getattr(args, "out_dir", None) is not None:
        merged["out_dir"] = args.out_dir
    return merged


def _out_path(cfg, name):
    return os.path.join(cfg["out_dir"], name)


def _require(cfg, names, reason):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"{flags} required {reason}")


def _build_model(cfg, reason):
    """Model instance from a (model, omega, gamma, ...) config block."""
    family = cfg["model"]
    if family is None:
        raise ConfigError(f"--model required {reason}")
    try:
        if family == "pure-decay":
            _require(cfg, ("gamma",), f"for {family}")
            return PureDecay(cfg["amplitude"], cfg["gamma"])
        _require(cfg, ("omega", "gamma"), f"for {family}")
        params = QubitParams(cfg["omega"], cfg["gamma"])
        if family == "two-param":
            return TwoParam(params)
        return FiveParam(cfg["amplitude"], cfg["offset"], cfg["phase"], params)
    except DomainError as err:
        raise ConfigError(str(err)) from None


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# plan files (owned here; downstream commands read them back)

def plan_to_json(measurement: MeasurementPlan) -> list:
    return [{"time": e.time, "quadrature": str(e.quadrature), "shots": e.shots}
            for e in measurement.entries]


def plan_from_json(entries) -> MeasurementPlan:
    try:
        return MeasurementPlan(tuple(
            PlanEntry(float(e["time"]), Quadrature(e["quadrature"]),
                      int(e["shots"]))
            for e in entries))
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad plan entries: {err}") from None


def _read_plan_file(path) -> MeasurementPlan:
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read plan file: {err}") from None
    except json.JSONDecodeError as err:
        raise ParseError(f"plan file is not valid JSON: {err}",
                         line=err.lineno) from None
    if not isinstance(blob, dict) or "entries" not in blob:
        raise ParseError("plan file lacks an 'entries' list")
    return plan_from_json(blob["entries"])


# ---------------------------------------------------------------------------
# commands

def cmd_plan(cfg) -> int:
    model = _build_model(cfg, "to build a plan")
    kwargs = {"total_shots": cfg["shots"], "seed": cfg["seed"]}
    if cfg["quadratures"] is not None:
        kwargs["quadrature_set"] = _QUAD_SETS[cfg["quadratures"]]
    if cfg["max_times"] is not None:
        kwargs["max_times"] = cfg["max_times"]
    if cfg["merge_tolerance"] is not None:
        kwargs["merge_tolerance"] = cfg["merge_tolerance"]
    if cfg["restarts"] is not None:
        kwargs["optimizer_restarts"] = cfg["restarts"]
    if cfg["variance"] is not None:
        kwargs["variance_model"] = VarianceModel(cfg["variance"])
    if (cfg["time_min"] is None) != (cfg["time_max"] is None):
        raise ConfigError("--time-min and --time-max go together")
    if cfg["time_min"] is not None:
        kwargs["time_bounds"] = (cfg["time_min"], cfg["time_max"])
    try:
        planner_cfg = PlannerConfig(**kwargs)
    except DomainError as err:
        raise ConfigError(str(err)) from None

    measurement = optimize_plan(model, planner_cfg)
    vm = resolve_config(planner_cfg, model).variance_model
    bound = plan_crb(model, measurement, vm=vm)
    payload = {
        "config_hash": spec_hash({k: v for k, v in cfg.items() if k != "out"}),
        "model": repr(model),
        "variance_model": vm.value,
        "entries": plan_to_json(measurement),
        "crb": {name: bound.bound(name) for name in bound.labels},
        "seed": cfg["seed"],
    }
    path = _out_path(cfg, cfg["out"])
    _write_json(path, payload)
    print(f"plan: {len(measurement.entries)} entries, "
          f"{measurement.total_shots} shots, variance={vm.value}")
    for e in measurement.entries:
        print(f"  t={e.time:.6g}  {e.quadrature}  {e.shots}")
    for name in bound.labels:
        print(f"  crb[{name}] = {bound.bound(name):.6g}")
    print(f"wrote {path}")
    return 0


def _simulate_protocol(cfg) -> int:
    try:
        with open(cfg["chain"]) as fh:
            chain = ChainParams.from_json(json.load(fh))
    except OSError as err:
        raise ConfigError(f"cannot read chain file: {err}") from None
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as err:
        raise ParseError(f"bad chain file: {err}") from None
    strategy = strategy_from_label(cfg["strategy"])
    out_dir = _out_path(cfg, cfg["out"])
    os.makedirs(out_dir, exist_ok=True)
    writer = write_sample_csv if cfg["format"] == "csv" else write_sample_json
    ext = cfg["format"]
    n_files = 0
    for exp_id, experiment in enumerate(build_chain_protocol(chain.n_qubits)):
        for target in experiment.targets:
            i = target.qubit
            w_eff = effective_frequency(chain, experiment.roles, i)
            guess = QubitParams(w_eff, chain.gammas[i])
            measurement = build_strategy(strategy, guess, cfg["budget"])
            ss = sample(TwoParam(guess), measurement, cfg["seed"],
                        experiment=exp_id, qubit=i)
            writer(ss, os.path.join(out_dir, f"exp{exp_id}_q{i}.{ext}"))
            n_files += 1
    print(f"wrote {n_files} sample sets to {out_dir}")
    return 0


def cmd_simulate(cfg) -> int:
    if cfg["protocol"] or cfg["chain"] is not None:
        _require(cfg, ("chain",), "in protocol mode")
        return _simulate_protocol(cfg)
    _require(cfg, ("plan",), "to simulate a plan")
    measurement = _read_plan_file(cfg["plan"])
    model = _build_model(cfg, "as the simulation truth")
    ss = sample(model, measurement, cfg["seed"])
    path = _out_path(cfg, cfg["out"])
    if cfg["format"] == "csv":
        write_sample_csv(ss, path)
    else:
        write_sample_json(ss, path)
    print(f"wrote {len(ss.records)} records ({measurement.total_shots} shots) "
          f"to {path}")
    return 0


def cmd_fit(cfg) -> int:
    _require(cfg, ("samples",), "to fit")
    init = _build_model(cfg, "as the fit family and starting guess")
    frozen = tuple(s.strip() for s in cfg["frozen"].split(",") if s.strip())
    bad = [f for f in frozen if f not in free_parameters(init)]
    if bad:
        raise ConfigError(f"cannot freeze {bad}; {cfg['model']} has "
                          f"{free_parameters(init)}")
    records = []
    for path in cfg["samples"]:
        reader = read_sample_json if path.endswith(".json") else read_sample_csv
        records.extend(reader(path).records)
    data = SampleSet(tuple(records), cfg["seed"], repr(init))
    est = fit_least_squares(init, data, frozen=frozen)
    payload = est.to_json()
    payload["config_hash"] = spec_hash(
        {k: v for k, v in cfg.items() if k != "out"})
    path = _out_path(cfg, cfg["out"])
    _write_json(path, payload)
    status = "converged" if est.converged else "DID NOT CONVERGE"
    print(f"fit over {len(records)} records: {status}")
    for name, value in est.params.items():
        tag = " (frozen)" if name in frozen else ""
        print(f"  {name} = {value:.8g}{tag}")
    print(f"wrote {path}")
    return 0


def _guess_policy(cfg):
    if cfg["guess"] == "perturbed":
        return Perturbed(cfg["guess_sigma"])
    if cfg["guess"] == "fixed":
        return Fixed(cfg["guess_omega"], cfg["guess_gamma"])
    return Exact()


def cmd_sweep(cfg, threads: int) -> int:
    kind = cfg["kind"]
    if kind is None:
        raise ConfigError(f"sweep kind required; one of {list(_SWEEP_KINDS)}")
    labels = cfg["strategies"] or ["SingleTimeXY", "TwoTimeOptimalX",
                                   "EquallySpacedX(20)"]
    try:
        strategies = tuple(strategy_from_label(s) for s in labels)
        if kind == "rmse-vs-budget":
            spec = SweepSpec(strategies, tuple(cfg["budgets"] or
                                               (1_000, 10_000, 100_000)),
                             cfg["trials"], cfg["omega"], cfg["gamma"],
                             _guess_policy(cfg), seed=cfg["seed"])
            result = rmse_vs_budget(spec, threads=threads)
        elif kind == "robustness":
            result = robustness_scan(
                strategies, tuple(cfg["gamma_grid"] or (0.5, 0.75, 1.0, 1.5, 2.0)),
                QubitParams(cfg["omega"], cfg["gamma"]), cfg["n_total"],
                cfg["trials"], seed=cfg["seed"], threads=threads)
        elif kind == "crosstalk-scaling":
            result = crosstalk_scaling(
                tuple(cfg["sizes"] or (4, 8, 16, 24)), cfg["budget"],
                cfg["trials"], seed=cfg["seed"], strategies=strategies,
                threads=threads)
        else:
            result = shot_ratio_curve(
                tuple(cfg["ratio_grid"] or (0.25, 0.5, 0.75, 1.0, 1.5, 2.0,
                                            2.5, 3.0)))
    except DomainError as err:
        raise ConfigError(str(err)) from None

    stem = cfg["out"] or f"{kind}.csv"
    csv_path = _out_path(cfg, stem)
    sidecar_path = os.path.splitext(csv_path)[0] + ".json"
    write_sweep_csv(result, csv_path)
    write_sweep_sidecar(result, sidecar_path)
    flagged = result.flagged
    print(f"{kind}: {len(result.rows)} rows, spec_hash {result.spec_hash[:12]}")
    if flagged:
        print(f"  {len(flagged)} grid points exceeded the 5% failure budget")
    print(f"wrote {csv_path} and {sidecar_path}")
    return 0


def _build_graph(cfg):
    if (cfg["graph"] is None) == (cfg["generator"] is None):
        raise ConfigError("exactly one of --graph or --generator required")
    if cfg["graph"] is not None:
        try:
            with open(cfg["graph"]) as fh:
                return load_graph(fh.read())
        except OSError as err:
            raise ConfigError(f"cannot read graph file: {err}") from None
    gen = cfg["generator"]
    try:
        if gen == "path":
            _require(cfg, ("n",), "for the path generator")
            return path_graph(cfg["n"])
        if gen == "star":
            _require(cfg, ("n",), "for the star generator")
            return star_graph(cfg["n"])
        if gen == "grid":
            _require(cfg, ("width", "height"), "for the grid generator")
            return grid_graph(cfg["width"], cfg["height"])
        _require(cfg, ("distance",), "for the heavy-hex generator")
        return heavy_hex_graph(cfg["distance"])
    except DomainError as err:
        raise ConfigError(str(err)) from None


def cmd_tile(cfg) -> int:
    graph = _build_graph(cfg)
    effort = Greedy() if cfg["effort"] == "greedy" \
        else Exhaustive(node_limit=cfg["node_limit"])
    plan = tile(graph, effort)
    violations = validate_plan(graph, plan)
    payload = plan.to_json()
    payload["config_hash"] = spec_hash(
        {k: v for k, v in cfg.items() if k != "out"})
    payload["n_vertices"] = graph.n_vertices
    payload["violations"] = violations
    path = _out_path(cfg, cfg["out"])
    _write_json(path, payload)
    print(f"tiling: {len(plan.experiments)} experiments for "
          f"{graph.n_vertices} vertices, {len(graph.edges)} edges")
    print("validation: " + ("clean" if not violations
                            else f"{len(violations)} violations"))
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramseyopt",
        description="Optimal Ramsey measurement scheduling and benchmarking")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "plan": "optimize a measurement schedule for a model guess",
        "simulate": "draw shot-noise samples from a plan or chain protocol",
        "fit": "least-squares parameter estimates from sample files",
        "sweep": "Monte Carlo benchmark sweeps (CSV + JSON sidecar)",
        "tile": "schedule chain-reduction experiments on a coupling graph",
    }
    for command, keys in _COMMAND_KEYS.items():
        p = sub.add_parser(command, description=descriptions[command],
                           help=descriptions[command])
        p.add_argument("--config", default=None,
                       help="JSON config file with per-command blocks")
        p.add_argument("--seed", type=int, default=None,
                       help="top-level seed for all randomness")
        p.add_argument("--out-dir", default=None, help="output directory")
        if command == "sweep":
            p.add_argument("kind", nargs="?", choices=_SWEEP_KINDS,
                           help="sweep family (or 'kind' in the config block)")
            p.add_argument("--threads", type=int, default=1,
                           help="worker thread cap for grid points")
            _add_keys(p, [k for k in _SWEEP_KEYS if k.name != "kind"])
        else:
            _add_keys(p, keys)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:   # argparse exits on --help and usage errors
        return int(err.code or 0)
    try:
        cfg = merge_config(args.command, args)
        if args.command == "sweep":
            return cmd_sweep(cfg, threads=args.threads)
        handler = {"plan": cmd_plan, "simulate": cmd_simulate,
                   "fit": cmd_fit, "tile": cmd_tile}[args.command]
        return handler(cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ToolkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
