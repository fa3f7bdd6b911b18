"""Command-line front end: simulate, train, explain, benchmark, report.

Configs are flat ``key = value`` text files (``#`` comments) or JSON; every
subcommand takes ``--config`` plus optional ``--seed`` / ``--out`` overrides.
Exit codes: 0 ok, 2 usage or config problem, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time as time_mod

import numpy as np

from . import attribution as attr_mod
from . import baselines, metrics, viz
from .data import SurvivalDataset, evaluation_grid, load_csv, save_csv, train_test_split
from .errors import ConfigError, SurvgradError
from .models import FIT_FUNCTIONS, TrainConfig, load_model, save_model
from .simulation import SimDesign, design_preset, save_design, simulate

THREAD_ENV_VAR = "SURVGRAD_THREADS"

_DIFF_METHODS = ("intgrad", "gradshap", "survshap")


class Config:
    """Thin typed access over a flat key/value mapping."""

    def __init__(self, values: dict):
        self.values = dict(values)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def get_int(self, key, default=None):
        v = self.values.get(key, default)
        if v is None:
            return None
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be an integer, got {v!r}")

    def get_float(self, key, default=None):
        v = self.values.get(key, default)
        if v is None:
            return None
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be a number, got {v!r}")

    def get_list(self, key, default=None):
        v = self.values.get(key)
        if v is None:
            return list(default) if default is not None else []
        if isinstance(v, (list, tuple)):
            return list(v)
        return [part.strip() for part in str(v).split(",") if part.strip()]

    def get_bool(self, key, default=False):
        v = self.values.get(key)
        if v is None:
            return default
        if isinstance(v, bool):
            return v
        if str(v).lower() in ("1", "true", "yes", "on"):
            return True
        if str(v).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} must be a boolean, got {v!r}")


def load_config(path: str | None) -> Config:
    if path is None:
        return Config({})
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: JSON config must be an object")
        return Config(doc)
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return Config(values)


def _pin_threads(cfg: Config) -> None:
    n = cfg.get_int("threads") or (
        int(os.environ[THREAD_ENV_VAR]) if os.environ.get(THREAD_ENV_VAR) else None
    )
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        print("warning: threadpoolctl unavailable, thread cap not applied", file=sys.stderr)


def _out_dir(cfg: Config) -> str:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _design_from_config(cfg: Config) -> SimDesign:
    seed = cfg.get_int("seed", 0)
    preset = cfg.get("preset")
    if preset:
        return design_preset(
            preset, n=cfg.get_int("n"), p=cfg.get_int("p"), seed=seed
        )
    if cfg.get("beta") is None:
        raise ConfigError("simulate needs either 'preset' or an inline design ('beta', ...)")
    beta = np.array([float(b) for b in cfg.get_list("beta")])
    return SimDesign(
        n=cfg.get_int("n", 1000),
        lam=cfg.get_float("lam", 0.1),
        gamma=cfg.get_float("gamma", 2.5),
        beta=beta,
        tve_coeff=cfg.get_float("tve_coeff", 0.0),
        censor_time=cfg.get_float("censor_time", 7.0),
        feature_laws=cfg.get_list("feature_laws", []),
        seed=seed,
        name=cfg.get("name", "custom"),
    )


def cmd_simulate(cfg: Config) -> int:
    design = _design_from_config(cfg)
    out = _out_dir(cfg)
    data = simulate(design)
    save_csv(data, os.path.join(out, "dataset.csv"))
    save_design(design, os.path.join(out, "design.json"))
    rate = data.event.mean()
    print(
        f"simulated {data.n} rows, p={data.p}, event rate {rate:.3f}, "
        f"median time {np.median(data.time):.4g}"
    )
    return 0


def _train_config(cfg: Config) -> TrainConfig:
    return TrainConfig(
        hidden=tuple(int(h) for h in cfg.get_list("hidden", (32, 32))),
        dropout=cfg.get_float("dropout", 0.1),
        batch_size=cfg.get_int("batch_size", 1024),
        max_epochs=cfg.get_int("max_epochs", 500),
        patience=cfg.get_int("patience", 10),
        learning_rate=cfg.get_float("learning_rate", 0.01),
        validation_fraction=cfg.get_float("validation_fraction", 0.3),
        seed=cfg.get_int("seed", 0),
        deephit_alpha=cfg.get_float("deephit_alpha", 0.5),
        deephit_sigma=cfg.get_float("deephit_sigma", 0.1),
        deephit_bins=cfg.get_int("deephit_bins", 32),
    )


def _load_dataset(cfg: Config) -> SurvivalDataset:
    path = cfg.get("dataset")
    if not path:
        raise ConfigError("config needs 'dataset = <csv path>'")
    if not os.path.exists(path):
        raise ConfigError(f"dataset not found: {path}")
    return load_csv(path)


def cmd_train(cfg: Config) -> int:
    data = _load_dataset(cfg)
    names = cfg.get_list("models", ("deepsurv", "coxtime", "deephit"))
    for name in names:
        if name not in FIT_FUNCTIONS:
            raise ConfigError(f"unknown model {name!r}; known: {', '.join(FIT_FUNCTIONS)}")
    tcfg = _train_config(cfg)
    test_n = cfg.get_int("test_n", max(1, data.n // 20))
    train, test = train_test_split(data, test_n, tcfg.seed)
    grid = evaluation_grid(train, cfg.get_int("grid_size", 64))
    out = _out_dir(cfg)

    for name in names:
        t0 = time_mod.perf_counter()
        model = FIT_FUNCTIONS[name](train, tcfg)
        elapsed = time_mod.perf_counter() - t0
        save_model(model, os.path.join(out, f"model_{name}.json"))
        report = metrics.evaluate_model(
            model, train, test, grid, metadata={"model": name, "seed": tcfg.seed}
        )
        report.save(os.path.join(out, f"report_{name}.json"))
        print(
            f"{name}: C-index {report.c_index:.4f}, IBS {report.ibs:.4f} "
            f"(fit {elapsed:.1f}s, best epoch {model.history.best_epoch if model.history else '?'})"
        )
    return 0


def _run_method(method, model, X, grid, cfg: Config, background, seed):
    if method == "grad":
        return attr_mod.grad_t(model, X, grid, absolute=cfg.get_bool("absolute", False))
    if method == "gradxinput":
        return attr_mod.gradxinput_t(model, X, grid)
    if method == "smoothgrad":
        noise = attr_mod.NoiseSpec(
            noise_level=cfg.get_float("noise_level", 0.1),
            samples=cfg.get_int("sg_samples", 50),
            seed=seed,
        )
        return attr_mod.smoothgrad_t(
            model, X, grid, noise, multiply_input=cfg.get_bool("sg_multiply_input", False)
        )
    if method == "intgrad":
        baseline = cfg.get("baseline", "zeros")
        if baseline not in ("zeros", "mean"):
            baseline = np.array([float(v) for v in str(baseline).split()])
        return attr_mod.intgrad_t(model, X, grid, baseline, steps=cfg.get_int("ig_steps", 64))
    if method == "gradshap":
        return attr_mod.gradshap_t(
            model, X, grid, background,
            n_samples=cfg.get_int("gs_samples", 25),
            n_int=cfg.get_int("gs_n_int", 25),
            seed=seed,
        )
    if method == "survshap":
        scfg = baselines.ShapleyConfig(
            permutations=cfg.get_int("shap_permutations", 25), background=background, seed=seed
        )
        return baselines.survshap_t(model, X, grid, scfg)
    raise ConfigError(f"unknown attribution method {method!r}")


def cmd_explain(cfg: Config) -> int:
    model_path = cfg.get("model")
    if not model_path:
        raise ConfigError("config needs 'model = <model json path>'")
    if not os.path.exists(model_path):
        raise ConfigError(f"model file not found: {model_path}")
    data = _load_dataset(cfg)
    model = load_model(model_path)
    seed = cfg.get_int("seed", 0)
    methods = cfg.get_list("methods", ("gradshap",))
    plots = cfg.get_list("plots", ("relevance_curves",))
    instances = [int(i) for i in cfg.get_list("instances", ("0",))]
    for i in instances:
        if not 0 <= i < data.n:
            raise ConfigError(f"instance index {i} out of range for dataset of {data.n} rows")
    for kind in plots:
        if kind not in ("relevance_curves", "contribution", "force"):
            raise ConfigError(f"unknown plot kind {kind!r}")
    if "force" in plots and not any(m in _DIFF_METHODS for m in methods):
        raise ConfigError(
            "force plots need a difference-to-reference method "
            "(intgrad, gradshap or survshap) in 'methods'"
        )
    grid = evaluation_grid(data, cfg.get_int("grid_size", 64))
    rng = np.random.default_rng(seed)
    n_bg = min(cfg.get_int("background_n", 100), data.n)
    background = data.features[rng.choice(data.n, size=n_bg, replace=False)]
    X = data.features[instances]
    out = _out_dir(cfg)

    for method in methods:
        attr = _run_method(method, model, X, grid, cfg, background, seed)
        attr.feature_names = list(data.feature_names)
        attr_mod.attribution_to_csv(attr, os.path.join(out, f"attr_{method}.csv"))
        attr_mod.attribution_to_json(attr, os.path.join(out, f"attr_{method}.json"))
        for kind in plots:
            if kind == "force" and attr.pred_diff is None:
                continue
            for slot, inst in enumerate(instances):
                spec = viz.PlotSpec(kind=kind, instance=slot,
                                    force_points=cfg.get_int("force_points", 10))
                svg = viz.render(spec, attr)
                name = f"{method}_{kind}_inst{inst}.svg"
                with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
                    fh.write(svg)
        print(f"{method}: wrote attributions for {len(instances)} instance(s)")
    return 0


def cmd_benchmark(cfg: Config) -> int:
    seed = cfg.get_int("seed", 0)
    p_values = [int(v) for v in cfg.get_list("p_values", ("5", "10", "20"))]
    budgets = [int(v) for v in cfg.get_list("budgets", ("5", "25", "50"))]
    reps = cfg.get_int("repetitions", 3)
    n_train = cfg.get_int("n_train", 1000)
    n_test = cfg.get_int("n_test", 100)
    model_name = cfg.get("model_kind", "deepsurv")
    if model_name not in FIT_FUNCTIONS:
        raise ConfigError(f"unknown model {model_name!r}")
    perms = cfg.get_int("shap_permutations", 10)
    bg_n = cfg.get_int("background_n", 25)
    out = _out_dir(cfg)
    tcfg = _train_config(cfg)

    runtime_rows = []
    acc_rows = []
    for p in p_values:
        design = design_preset("linear_p", n=n_train + n_test, p=p, seed=seed)
        data = simulate(design)
        train, test = train_test_split(data, n_test, seed)
        model = FIT_FUNCTIONS[model_name](train, tcfg)
        grid = evaluation_grid(train, cfg.get_int("grid_size", 32))
        rng = np.random.default_rng(seed)
        background = train.features[rng.choice(train.n, size=min(bg_n, train.n), replace=False)]
        X = test.features

        tasks = {}
        for n_int in budgets:
            tasks[("gradshap", n_int)] = lambda n_int=n_int: attr_mod.gradshap_t(
                model, X, grid, background, n_samples=bg_n, n_int=n_int, seed=seed
            )
        tasks[("survshap", 0)] = lambda: baselines.survshap_t(
            model, X, grid,
            baselines.ShapleyConfig(permutations=perms, background=background, seed=seed),
        )
        for (method, budget), task in tasks.items():
            times = []
            attr = None
            for rep in range(reps):
                t0 = time_mod.perf_counter()
                attr = task()
                dt = time_mod.perf_counter() - t0
                times.append(dt)
                runtime_rows.append((method, p, budget, rep, dt))
            la_grid, la = metrics.local_accuracy_t(attr, model, background)
            for tv, v in zip(la_grid.points, la):
                acc_rows.append((method, p, budget, tv, v))
            print(
                f"p={p} {method}(budget={budget}): median {np.median(times):.3f}s "
                f"mean local accuracy {la.mean():.4f}"
            )

    with open(os.path.join(out, "benchmark_runtime.csv"), "w", encoding="utf-8") as fh:
        fh.write("method,p,n_int,repetition,seconds\n")
        for row in runtime_rows:
            fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]},{row[4]:.6f}\n")
    with open(os.path.join(out, "benchmark_local_accuracy.csv"), "w", encoding="utf-8") as fh:
        fh.write("method,p,n_int,time,value\n")
        for row in acc_rows:
            fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]:.17g},{row[4]:.17g}\n")
    return 0


def cmd_report(cfg: Config) -> int:
    out = _out_dir(cfg)
    entries = sorted(os.listdir(out))
    lines = ["# survgrad run report", ""]
    designs = [e for e in entries if e == "design.json"]
    reports = [e for e in entries if e.startswith("report_") and e.endswith(".json")]
    svgs = [e for e in entries if e.endswith(".svg")]
    benches = [e for e in entries if e.startswith("benchmark_") and e.endswith(".csv")]

    if not (designs or reports or svgs or benches):
        lines.append("no artifacts found in this directory.")
    if designs:
        lines.append("## design")
        with open(os.path.join(out, "design.json"), encoding="utf-8") as fh:
            doc = json.load(fh)
        lines.append(f"- preset `{doc.get('name')}`: n={doc.get('n')}, seed={doc.get('seed')}")
        lines.append("")
    if reports:
        lines.append("## model metrics")
        lines.append("| model | C-index | IBS |")
        lines.append("|---|---|---|")
        for name in reports:
            with open(os.path.join(out, name), encoding="utf-8") as fh:
                doc = json.load(fh)
            label = name[len("report_") : -len(".json")]
            lines.append(f"| {label} | {doc['c_index']:.4f} | {doc['ibs']:.4f} |")
        lines.append("")
    if benches:
        lines.append("## benchmarks")
        lines.extend(f"- [{name}]({name})" for name in benches)
        lines.append("")
    if svgs:
        lines.append("## figures")
        lines.extend(f"![{name}]({name})" for name in svgs)
        lines.append("")
    missing = [
        label
        for present, label in ((designs, "design.json"), (reports, "model reports"))
        if not present
    ]
    if missing and (reports or designs or svgs or benches):
        lines.append("## missing artifacts")
        lines.extend(f"- {m}" for m in missing)
        lines.append("")
    path = os.path.join(out, "report.md")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines).rstrip() + "\n")
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "explain": cmd_explain,
    "benchmark": cmd_benchmark,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="survgrad",
        description="train survival nets on simulated data and explain them over time",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key=value or JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="override config seed")
        sp.add_argument("--out", default=None, help="override output directory")
        if name == "simulate":
            sp.add_argument("--preset", default=None, help="named simulation design")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.values["seed"] = args.seed
        if args.out is not None:
            cfg.values["out"] = args.out
        if getattr(args, "preset", None):
            cfg.values["preset"] = args.preset
        _pin_threads(cfg)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SurvgradError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
