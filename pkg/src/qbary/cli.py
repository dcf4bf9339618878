"""Command-line interface.

Subcommands: ``gen``, ``barycenter``, ``pivot``, ``compare``, ``mra``. Every
flag mirrors a config-file key; values come from defaults, then ``--config``,
then flags. Exit codes: 0 success, 2 invalid input or config, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import io
from .barycenter import ScheduleKind, SgdConfig, StepSchedule, estimate_objective, sgd_gaussian_mixture, sgd_mean, sgd_quotient
from .baselines import PivotChoice, boundary_index, pivot_relabel, pivot_select
from .errors import ConfigError, ContractViolation
from .group import GroupKind, GroupSpec, quotient_distance
from .manifold import Euclidean
from .metrics import component_errors
from .samplers import (
    MraScenario,
    default_template,
    ellipse_scenario,
    gmm5_scenario,
    gmm_log_density,
    gmm_sampler,
    mean_only_sampler,
    meanonly1d_scenario_means,
    mra_gibbs,
    mra_generate,
    mra_pipeline,
)
from .stream import SampleStream

log = logging.getLogger("qbary")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3

GMM_SCENARIOS = ("gmm5", "ellipse")
SCENARIOS = GMM_SCENARIOS + ("meanonly1d", "mra", "mra-posterior")
METHODS = ("sgd", "pivot")


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _floats(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _ints(v):
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).split(",") if x.strip()]


def _words(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _str(v):
    return None if v is None else str(v)


# key -> (converter, default); shared keys first
COMMON = {"seed": (_int, 0), "out": (_str, None), "iters": (_int, None), "group": (_str, "sym")}
SCHEMAS = {
    "gen": {
        "scenario": (_str, "gmm5"),
        "n": (_int, 1000),
        "jitter": (_float, None),
        "K": (_int, 10),
        "M": (_int, 200),
        "snr": (_float, 1.0),
        "burn_in": (_int, 100),
    },
    "barycenter": {
        "input": (_str, None),
        "truth": (_str, None),
        "step_scale": (_float, 1.0),
        "step_offset": (_int, 0),
        "trace_every": (_int, None),
        "eval_size": (_int, 256),
    },
    "pivot": {
        "input": (_str, None),
        "truth": (_str, None),
        "pivot": (_str, "map"),
        "relabeled_out": (_str, None),
    },
    "compare": {
        "scenario": (_str, "ellipse"),
        "methods": (_words, ["sgd", "pivot"]),
        "grid": (_ints, [100, 250, 500, 1000]),
        "pivot": (_str, "map"),
        "jitter": (_float, None),
    },
    "mra": {
        "K": (_int, 10),
        "M": (_int, 200),
        "snr": (_floats, [0.5, 1.0, 2.0, 4.0]),
        "sigma": (_floats, None),
        "sweeps": (_int, 2000),
        "burn_in": (_int, 100),
        "template_seed": (_int, 0),
    },
}


def _add_common(p):
    p.add_argument("--seed", type=str, default=None, help="random seed (u64)")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--config", default=None, help="key=value config file, or a result file to re-run")
    p.add_argument("--iters", default=None, help="SGD iterations")
    p.add_argument("--group", default=None, choices=["sym", "cyc", "none"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbary", description="Group-invariant barycenters of label-switched samples.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write synthetic posterior draws to CSV")
    _add_common(p)
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--n", help="number of draws")
    p.add_argument("--jitter")
    p.add_argument("--K", dest="K")
    p.add_argument("--M", dest="M")
    p.add_argument("--snr")
    p.add_argument("--burn-in", dest="burn_in")

    p = sub.add_parser("barycenter", help="run the SGD barycenter on a sample file")
    _add_common(p)
    p.add_argument("--input", "-i")
    p.add_argument("--truth", choices=GMM_SCENARIOS + ("meanonly1d",), help="builtin scenario to score against")
    p.add_argument("--step-scale", dest="step_scale")
    p.add_argument("--step-offset", dest="step_offset")
    p.add_argument("--trace-every", dest="trace_every")
    p.add_argument("--eval-size", dest="eval_size")

    p = sub.add_parser("pivot", help="pivotal reordering baseline")
    _add_common(p)
    p.add_argument("--input", "-i")
    p.add_argument("--truth", choices=GMM_SCENARIOS + ("meanonly1d",))
    p.add_argument("--pivot", help="'map', 'boundary' or a sample index")
    p.add_argument("--relabeled-out", dest="relabeled_out")

    p = sub.add_parser("compare", help="error vs samples/time for several methods")
    _add_common(p)
    p.add_argument("--scenario", choices=GMM_SCENARIOS)
    p.add_argument("--methods", help="comma-separated subset of sgd,pivot")
    p.add_argument("--grid", help="comma-separated sample counts")
    p.add_argument("--pivot")
    p.add_argument("--jitter")

    p = sub.add_parser("mra", help="multi-reference alignment error vs SNR")
    _add_common(p)
    p.add_argument("--K", dest="K")
    p.add_argument("--M", dest="M")
    p.add_argument("--snr", help="comma-separated SNR grid")
    p.add_argument("--sigma", help="comma-separated noise levels (overrides --snr)")
    p.add_argument("--sweeps")
    p.add_argument("--burn-in", dest="burn_in")
    p.add_argument("--template-seed", dest="template_seed")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and flags into one typed dict."""
    schema = dict(COMMON, **SCHEMAS[command])
    raw = {k: default for k, (_, default) in schema.items()}
    if args.config:
        for key, value in io.read_config(args.config).items():
            section, _, name = key.rpartition(".")
            if section and section != command:
                continue
            name = name.replace("-", "_")
            if name in schema:
                raw[name] = value
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    out = {}
    for key, (conv, _) in schema.items():
        value = raw[key]
        try:
            out[key] = None if value is None else conv(value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for {key}: {value!r}", key) from None
    if out["group"] not in ("sym", "cyc", "none"):
        raise ConfigError(f"group must be sym, cyc or none, got {out['group']!r}", "group")
    if out["iters"] is not None and out["iters"] < 1:
        raise ConfigError("iters must be >= 1", "iters")
    if out["seed"] < 0 or out["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
    return out


def _require(cfg, key):
    if cfg.get(key) is None:
        raise ConfigError(f"missing required setting {key!r}", key)
    return cfg[key]


def _group(cfg, K):
    return GroupSpec(GroupKind(cfg["group"]), K)


def _scenario(name, seed, jitter=None):
    if name == "gmm5":
        return gmm5_scenario(0.05 if jitter is None else jitter, seed)
    if name == "ellipse":
        return ellipse_scenario(seed=seed) if jitter is None else ellipse_scenario(jitter, 2 * jitter, seed)
    raise ConfigError(f"unknown scenario {name!r}", "scenario")


def _truth(name):
    if name is None:
        return None
    if name == "meanonly1d":
        return meanonly1d_scenario_means()
    return _scenario(name, 0).true_components


def _load(cfg):
    try:
        return io.read_samples(_require(cfg, "input"))
    except UnicodeDecodeError as err:
        raise io.SampleFormatError(f"not a text file ({err.reason})") from None


def cmd_gen(cfg) -> list:
    scenario = cfg["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", "scenario")
    n = cfg["n"]
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}", "n")
    out = _require(cfg, "out")
    seed = cfg["seed"]
    density = None
    if scenario in GMM_SCENARIOS:
        sc = _scenario(scenario, seed, cfg["jitter"])
        samples = gmm_sampler(sc).take(n)
        density = [gmm_log_density(s, sc) for s in samples]
    elif scenario == "meanonly1d":
        jitter = 0.6 if cfg["jitter"] is None else cfg["jitter"]
        samples = mean_only_sampler(meanonly1d_scenario_means(), jitter, seed=seed).take(n)
    else:
        if cfg["snr"] <= 0:
            raise ConfigError("snr must be positive", "snr")
        sc = MraScenario.from_snr(default_template(cfg["K"]), cfg["snr"], cfg["M"] if scenario == "mra-posterior" else n, seed)
        obs = mra_generate(sc)
        if scenario == "mra":
            samples = list(obs)
        else:
            samples = list(mra_gibbs(obs, sc.noise_std, n, seed=seed, burn_in=cfg["burn_in"]))
        samples = [s.reshape(-1, 1) for s in samples]
    io.write_samples(out, samples, density)
    return []


def _sgd_config(cfg, n_samples):
    iters = cfg["iters"] or max(1, n_samples - 1)
    schedule = StepSchedule(
        ScheduleKind.SHIFTED_HARMONIC if cfg.get("step_offset") else ScheduleKind.HARMONIC,
        cfg.get("step_scale") or 1.0,
        cfg.get("step_offset") or 0,
    )
    return SgdConfig(iters, cfg["seed"], schedule, cfg.get("trace_every"), cfg.get("eval_size", 256))


def cmd_barycenter(cfg) -> list:
    data = _load(cfg)
    sgd_cfg = _sgd_config(cfg, len(data.samples))
    # one pass in file order when the file is long enough, otherwise resample
    resample = sgd_cfg.iterations >= len(data.samples)
    stream = SampleStream.from_samples(data.samples, cfg["seed"], resample=resample)
    G = _group(cfg, data.K)
    if data.gaussian:
        report = sgd_gaussian_mixture(stream, G, sgd_cfg)
        factor = None
    elif data.K == 1:
        factor = Euclidean(data.dim)
        points = SampleStream.from_samples([x[0] for x in data.samples], cfg["seed"], resample=resample)
        report = sgd_mean(points, factor, sgd_cfg)
        report.estimate = report.estimate.reshape(1, -1)
    else:
        factor = Euclidean(data.dim)
        report = sgd_quotient(stream, G, sgd_cfg, factor=factor)
    evals = data.samples[: sgd_cfg.eval_size or 1]
    metrics = {
        "objective": estimate_objective(report.estimate, evals, G, factor),
        "quotient_distance_to_first_sample": quotient_distance(report.estimate, data.samples[0], G, factor),
        "n_samples": len(data.samples),
        "iterations": sgd_cfg.iterations,
    }
    if report.objective_trace:
        metrics["objective_final"] = report.objective_trace[-1][1]
    truth = _truth(cfg["truth"])
    if truth is not None:
        metrics.update(component_errors(report.estimate, truth))
    traces = {
        "iteration": [t for t, _ in report.objective_trace],
        "objective": [v for _, v in report.objective_trace],
    }
    return [
        io.ResultRecord(
            "barycenter",
            cfg,
            metrics,
            traces,
            io.estimate_to_json(report.estimate),
            {"wall_time": report.wall_time},
        )
    ]


def _pivot_index(samples, spec, log_density):
    if spec == "map":
        return pivot_select(samples, PivotChoice.map_sample(log_density) if log_density else PivotChoice("map"))
    if spec == "boundary":
        return boundary_index(samples)
    try:
        idx = int(spec)
    except ValueError:
        raise ConfigError(f"pivot must be 'map', 'boundary' or an index, got {spec!r}", "pivot") from None
    return pivot_select(samples, PivotChoice.at(idx))


def cmd_pivot(cfg) -> list:
    data = _load(cfg)
    idx = _pivot_index(data.samples, cfg["pivot"], data.log_density)
    start = time.perf_counter()
    relabeled, mean = pivot_relabel(data.samples, idx, _group(cfg, data.K))
    wall = time.perf_counter() - start
    if cfg["relabeled_out"]:
        io.write_samples(cfg["relabeled_out"], relabeled, data.log_density)
    metrics = {"pivot_index": idx, "n_samples": len(data.samples)}
    truth = _truth(cfg["truth"])
    if truth is not None:
        metrics.update(component_errors(mean, truth))
    return [io.ResultRecord("pivot", cfg, metrics, {}, io.estimate_to_json(mean), {"wall_time": wall})]


def cmd_compare(cfg) -> list:
    methods = cfg["methods"]
    for m in methods:
        if m.lower() == "stephens":
            raise ConfigError("stephens: unavailable: out of scope", "methods")
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}", "methods")
    grid = cfg["grid"]
    if not grid or min(grid) < 2:
        raise ConfigError("grid needs sample counts >= 2", "grid")
    sc = _scenario(cfg["scenario"], cfg["seed"], cfg["jitter"])
    draws = gmm_sampler(sc).take(max(grid))
    density = [gmm_log_density(s, sc) for s in draws] if "pivot" in methods else None
    records = []
    for method in methods:
        curve = {"n": [], "max_mean_error": [], "cov_error": [], "quotient_distance": []}
        times = []
        for n in grid:
            subset = draws[:n]
            if method == "sgd":
                sgd_cfg = SgdConfig(n - 1, eval_size=0)
                stream = SampleStream.from_samples(subset)
                rep = sgd_gaussian_mixture(stream, sc.group, sgd_cfg)
                estimate, wall = rep.estimate, rep.wall_time
            else:
                idx = _pivot_index(subset, cfg["pivot"], density[:n])
                start = time.perf_counter()
                _, estimate = pivot_relabel(subset, idx, sc.group)
                wall = time.perf_counter() - start
            errs = component_errors(estimate, sc.true_components)
            curve["n"].append(n)
            for key in ("max_mean_error", "cov_error", "quotient_distance"):
                curve[key].append(errs[key])
            times.append(wall)
        metrics = {f"final_{k}": v[-1] for k, v in curve.items() if k != "n"}
        records.append(
            io.ResultRecord("compare", dict(cfg, method=method), metrics, curve, io.estimate_to_json(estimate), {"wall_time": times})
        )
    return records


def cmd_mra(cfg) -> list:
    K, M = cfg["K"], cfg["M"]
    if K < 2:
        raise ConfigError("K must be >= 2", "K")
    if M < 1:
        raise ConfigError("M must be >= 1", "M")
    template = default_template(K, cfg["template_seed"])
    if cfg["sigma"] is not None:
        if not cfg["sigma"] or min(cfg["sigma"]) <= 0:
            raise ConfigError("every sigma in the grid must be positive", "sigma")
        scenarios = [MraScenario(template, s, M, cfg["seed"]) for s in cfg["sigma"]]
    else:
        if not cfg["snr"] or min(cfg["snr"]) <= 0:
            raise ConfigError("every SNR in the grid must be positive", "snr")
        scenarios = [MraScenario.from_snr(template, s, M, cfg["seed"]) for s in cfg["snr"]]
    records = []
    for sc in scenarios:
        start = time.perf_counter()
        res = mra_pipeline(sc, cfg["sweeps"], cfg["burn_in"], cfg["iters"], seed=cfg["seed"])
        wall = time.perf_counter() - start
        metrics = {"snr": res.snr, "sigma": res.sigma, "relative_error": res.relative_error}
        records.append(io.ResultRecord("mra", cfg, metrics, {}, res.estimate.tolist(), {"wall_time": wall}))
    return records


COMMANDS = {"gen": cmd_gen, "barycenter": cmd_barycenter, "pivot": cmd_pivot, "compare": cmd_compare, "mra": cmd_mra}


def _configure_logging():
    level = os.environ.get("QB_LOG", "warn").upper()
    level = {"WARN": "WARNING"}.get(level, level)
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.command, args)
        if args.command != "gen":
            _require(cfg, "out")
        records = COMMANDS[args.command](cfg)
        if records:
            io.write_results(cfg["out"], records)
    except (ConfigError, ContractViolation) as err:
        field = getattr(err, "field", None)
        print(f"qbary {args.command}: invalid {field or 'input'}: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"qbary {args.command}: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
