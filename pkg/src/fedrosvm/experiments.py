"""Experiment driver: declarative run configs, cross-validated grid
search, seeded repetition pipelines, and result files.

A config names a dataset (CSV file or synthetic generator), a partition
plan, one model, a hyperparameter grid, and repetition/CV settings. Each
repetition i uses seed base_seed + i for its shuffle/split, normalization
fit, partitioning/corruption, CV folds, and training, so a config and a
base seed fully determine every reported number except wall times.

The round-count grid is nested rather than crossed: federated training at
the largest T in the grid yields snapshots at every smaller T along the
way (round prefixes are unaffected by later rounds), which keeps grid
search affordable.
"""

import csv
import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    CentralDrConfig,
    FedBaselineConfig,
    FedVariant,
    train_central_dr_svm,
    train_fed_l2_svm,
)
from .core import DatasetView, GlobalModel, NormKind, evaluate
from .data import (
    PartitionPlan,
    PartitionScheme,
    SyntheticSpec,
    apply_minmax,
    fit_minmax,
    generate_synthetic,
    load_csv,
    partition,
    split_train_test,
)
from .federation import Algorithm, FederationConfig, run_federation
from .robust import ClientConfig


class ConfigError(ValueError):
    pass


MODEL_ALGORITHMS = {
    "sm": Algorithm.SM,
    "admm": Algorithm.ADMM,
    "admm_sc": Algorithm.ADMM_SC,
}
FED_BASELINE_VARIANTS = {
    "fedsgd": FedVariant.FEDSGD,
    "fedavg": FedVariant.FEDAVG,
    "fedprox": FedVariant.FEDPROX,
}
MODEL_NAMES = sorted(MODEL_ALGORITHMS) + sorted(FED_BASELINE_VARIANTS) + ["central_dr"]

DEFAULT_GRIDS = {
    "sm": {"gamma0": [1e0, 1e1, 1e2, 1e3], "T": [100, 140, 180, 220]},
    "admm": {"rho": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60, 100, 140, 180, 220]},
    "admm_sc": {"rho": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60, 100, 140, 180, 220]},
    "central_dr": {"epsilon": [1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
                   "kappa": [0.1, 0.25, 0.5, 0.75, 1.0]},
    "fedsgd": {"gamma0": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60, 100, 140, 180, 220]},
    "fedavg": {"gamma0": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60, 100, 140, 180, 220]},
    "fedprox": {"gamma0": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60, 100, 140, 180, 220]},
}

DEFAULT_FIXED = {
    "kappa": 1.0,           # label-flip cost at every client
    "beta": 10.0,           # radius heuristic epsilon_g = 1/(beta*N_g)
    "epsilon": None,        # explicit radius overrides the heuristic
    "norm": "l1",
    "tau_factor": 18.0,     # strongly convex weight tau_g = tau_factor*rho
    "local_epochs": 5,
    "batch_fraction": 0.2,
    "prox_mu": 1.0,
}


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    partition: dict
    model: str
    grid: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    cv_folds: int = 5
    repetitions: int = 10
    base_seed: int = 0
    test_fraction: float = 0.3
    output: str = None
    raw_text: str = None

    @classmethod
    def from_dict(cls, doc, raw_text=None):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {"name", "dataset", "partition", "model", "grid", "fixed",
                 "cv_folds", "repetitions", "base_seed", "test_fraction", "output"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("name", "dataset", "partition", "model"):
            if key not in doc:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(
            name=doc["name"],
            dataset=dict(doc["dataset"]),
            partition=dict(doc["partition"]),
            model=str(doc["model"]).lower(),
            grid={k: list(v) for k, v in doc.get("grid", {}).items()},
            fixed=dict(doc.get("fixed", {})),
            cv_folds=int(doc.get("cv_folds", 5)),
            repetitions=int(doc.get("repetitions", 10)),
            base_seed=int(doc.get("base_seed", 0)),
            test_fraction=float(doc.get("test_fraction", 0.3)),
            output=doc.get("output"),
            raw_text=raw_text,
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
        return cls.from_dict(doc, raw_text=text)

    def validate(self):
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODEL_NAMES}")
        kind = self.dataset.get("kind")
        if kind == "csv":
            for key in ("path", "label_column", "positive_label"):
                if key not in self.dataset:
                    raise ConfigError(f"csv dataset needs {key!r}")
        elif kind == "synthetic":
            for key in ("N", "P"):
                if key not in self.dataset:
                    raise ConfigError(f"synthetic dataset needs {key!r}")
        else:
            raise ConfigError(f"dataset kind must be 'csv' or 'synthetic', got {kind!r}")
        try:
            PartitionScheme(self.partition.get("scheme"))
        except ValueError:
            raise ConfigError(f"unknown partition scheme {self.partition.get('scheme')!r}")
        if int(self.partition.get("G", 0)) < 1:
            raise ConfigError("partition needs G >= 1")
        if self.grid == {}:
            self.grid = {k: list(v) for k, v in DEFAULT_GRIDS[self.model].items()}
        for knob, values in self.grid.items():
            if not values:
                raise ConfigError(f"grid for {knob!r} is empty")
        if self.model != "central_dr" and "T" not in self.grid:
            raise ConfigError("federated models need a 'T' list in the grid")
        merged = dict(DEFAULT_FIXED)
        merged.update(self.fixed)
        self.fixed = merged
        if self.fixed["norm"] not in ("l1", "linf"):
            raise ConfigError(f"norm must be 'l1' or 'linf', got {self.fixed['norm']!r}")
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")

    def to_dict(self):
        return {
            "name": self.name, "dataset": self.dataset, "partition": self.partition,
            "model": self.model, "grid": self.grid, "fixed": self.fixed,
            "cv_folds": self.cv_folds, "repetitions": self.repetitions,
            "base_seed": self.base_seed, "test_fraction": self.test_fraction,
            "output": self.output,
        }


# ----------------------------------------------------------------- pipeline


def build_dataset(cfg, seed):
    spec = cfg.dataset
    if spec["kind"] == "csv":
        table = load_csv(spec["path"], spec["label_column"], spec["positive_label"])
        return table.view()
    return generate_synthetic(SyntheticSpec(
        N=int(spec["N"]), P=int(spec["P"]), G=int(cfg.partition["G"]),
        class_sep=float(spec.get("class_sep", 2.4)), seed=seed,
    ))


def prepare_repetition(cfg, seed):
    """One repetition's data plumbing: shuffle/split, fit and apply
    normalization, partition (and corrupt) the training side."""
    data = build_dataset(cfg, seed)
    train, test = split_train_test(data, cfg.test_fraction, seed)
    stats = fit_minmax(train)
    train = apply_minmax(train, stats)
    test = apply_minmax(test, stats)
    part = cfg.partition
    plan = PartitionPlan(
        scheme=PartitionScheme(part["scheme"]), G=int(part["G"]), seed=seed,
        client_fractions=tuple(part["client_fractions"]) if part.get("client_fractions") else None,
        class_fractions=tuple(part["class_fractions"]) if part.get("class_fractions") else None,
        noise_rate=part.get("noise_rate"),
    )
    shards = partition(train, plan)
    return shards, test, stats


def pool(shards):
    return DatasetView(X=np.vstack([s.X for s in shards]),
                       y=np.concatenate([s.y for s in shards]))


def _client_configs(cfg, params, shards):
    G = len(shards)
    kappa = params.get("kappa", cfg.fixed["kappa"])
    beta = params.get("beta", cfg.fixed["beta"])
    norm = NormKind.L1 if cfg.fixed["norm"] == "l1" else NormKind.LINF
    tau = 0.0
    if cfg.model == "admm_sc":
        tau = cfg.fixed["tau_factor"] * params["rho"]
    out = []
    for s in shards:
        eps = cfg.fixed["epsilon"]
        if params.get("epsilon") is not None:
            eps = params["epsilon"]
        if eps is None:
            eps = 1.0 / (beta * s.n)
        out.append(ClientConfig(epsilon=eps, kappa=kappa, alpha=1.0 / G,
                                norm=norm, tau=tau))
    return out


def train_model(cfg, params, shards, seed):
    """Train the configured model at one grid point. Returns the model and
    a per-round telemetry list (empty for non-federated models and the
    l2 baselines)."""
    name = cfg.model
    if name in MODEL_ALGORITHMS:
        fed = FederationConfig(
            clients=_client_configs(cfg, params, shards),
            T=int(params["T"]),
            algorithm=MODEL_ALGORITHMS[name],
            gamma0=float(params.get("gamma0", 1.0)),
            rho=float(params.get("rho", 1.0)),
        )
        result = run_federation(fed, shards)
        model = result.w_best if name == "sm" else result.w_last
        rounds = [
            {"t": tr.t, "objective": tr.global_objective,
             "consensus_residual": tr.consensus_residual, "wall_time": tr.wall_time}
            for tr in result.traces
        ]
        return model, rounds
    if name == "central_dr":
        pooled = pool(shards)
        eps = params.get("epsilon", cfg.fixed["epsilon"])
        if eps is None:
            eps = 1.0 / (cfg.fixed["beta"] * pooled.n)
        central = CentralDrConfig(
            epsilon=eps, kappa=params.get("kappa", cfg.fixed["kappa"]),
            norm=NormKind.L1 if cfg.fixed["norm"] == "l1" else NormKind.LINF,
        )
        return train_central_dr_svm(pooled, central), []
    base = FedBaselineConfig(
        variant=FED_BASELINE_VARIANTS[name],
        gamma0=float(params.get("gamma0", 1.0)),
        T=int(params["T"]),
        local_epochs=int(cfg.fixed["local_epochs"]),
        batch_fraction=float(cfg.fixed["batch_fraction"]),
        prox_mu=float(cfg.fixed["prox_mu"]),
    )
    return train_fed_l2_svm(shards, base, seed), []


def _snapshots_over_t(cfg, params, shards, t_grid, seed):
    """Train once at max(t_grid) and read off the model at every requested
    round count. Round prefixes are unaffected by later rounds, so each
    snapshot equals a fresh run at that T."""
    name = cfg.model
    t_max = max(t_grid)
    if name in MODEL_ALGORITHMS:
        fed = FederationConfig(
            clients=_client_configs(cfg, params, shards),
            T=t_max, algorithm=MODEL_ALGORITHMS[name],
            gamma0=float(params.get("gamma0", 1.0)),
            rho=float(params.get("rho", 1.0)),
        )
        result = run_federation(fed, shards)
        out = {}
        if name == "sm":
            best_w, best_obj = None, math.inf
            wanted = set(t_grid)
            for tr in result.traces:
                if tr.global_objective < best_obj:
                    best_obj, best_w = tr.global_objective, tr.w_after
                if tr.t in wanted:
                    out[tr.t] = GlobalModel(w=best_w.copy())
        else:
            for tr in result.traces:
                if tr.t in t_grid:
                    out[tr.t] = GlobalModel(w=tr.w_after.copy())
        return out
    # l2 baselines: snapshot the averaged iterate trace
    base = FedBaselineConfig(
        variant=FED_BASELINE_VARIANTS[name],
        gamma0=float(params.get("gamma0", 1.0)),
        T=t_max,
        local_epochs=int(cfg.fixed["local_epochs"]),
        batch_fraction=float(cfg.fixed["batch_fraction"]),
        prox_mu=float(cfg.fixed["prox_mu"]),
    )
    trace = []
    train_fed_l2_svm(shards, base, seed, trace=trace)
    return {t: GlobalModel(w=trace[t - 1]) for t in t_grid}


# ----------------------------------------------------------- cross-validation


def _stratified_fold_labels(y, folds, rng):
    """Fold id per row: each class is dealt round-robin across folds after
    a shuffle, so fold class mixes track the shard's."""
    assignment = np.empty(y.size, dtype=int)
    for label in (1, -1):
        idx = rng.permutation(np.flatnonzero(y == label))
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def build_folds(shards, folds, seed, max_attempts=20):
    """Per-client fold assignments. If some fold's pooled validation view
    ends up single-class, all assignments are redrawn with the next seed;
    the number of redraws is reported (and kept at the last attempt if the
    data cannot satisfy the condition, e.g. one minority sample total)."""
    attempt = 0
    while True:
        assignments = [
            _stratified_fold_labels(
                s.y, folds, np.random.default_rng([seed, g, attempt])
            )
            for g, s in enumerate(shards)
        ]
        ok = True
        for k in range(folds):
            val_labels = np.concatenate(
                [s.y[a == k] for s, a in zip(shards, assignments)]
            )
            if val_labels.size == 0 or np.unique(val_labels).size < 2:
                ok = False
                break
        if ok or attempt >= max_attempts:
            return assignments, attempt
        attempt += 1


def grid_points(grid):
    """Deterministic enumeration of the grid in key order; T is handled by
    snapshot nesting and excluded here."""
    knobs = [k for k in grid if k != "T"]
    if not knobs:
        return [{}]
    return [dict(zip(knobs, combo))
            for combo in itertools.product(*(grid[k] for k in knobs))]


def cross_validate(cfg, shards, seed):
    """Exhaustive grid search with per-client stratified folds. Selection
    is by mean validation F1; ties go to the smaller enumeration index.
    Returns (chosen params, report)."""
    assignments, resamples = build_folds(shards, cfg.cv_folds, seed)
    points = grid_points(cfg.grid)
    t_grid = sorted(int(t) for t in cfg.grid["T"]) if "T" in cfg.grid else None

    # scores[(point index, T)] -> list of fold F1
    scores = {}
    for k in range(cfg.cv_folds):
        train_shards, val_parts = [], []
        for s, a in zip(shards, assignments):
            keep = np.flatnonzero(a != k)
            if keep.size > 0:
                train_shards.append(s.subset(keep))
            held = np.flatnonzero(a == k)
            if held.size > 0:
                val_parts.append(s.subset(held))
        val = pool(val_parts)
        for i, point in enumerate(points):
            if t_grid is None:
                model, _ = train_model(cfg, point, train_shards, seed)
                scores.setdefault((i, None), []).append(evaluate(model, val).f1)
            else:
                snaps = _snapshots_over_t(cfg, point, train_shards, t_grid, seed)
                for t, model in snaps.items():
                    scores.setdefault((i, t), []).append(evaluate(model, val).f1)

    table = []
    for i, point in enumerate(points):
        for t in (t_grid if t_grid is not None else [None]):
            fold_f1 = scores[(i, t)]
            full = dict(point) if t is None else {**point, "T": t}
            table.append({"params": full, "mean_f1": float(np.mean(fold_f1)),
                          "fold_f1": [float(v) for v in fold_f1]})
    best = max(range(len(table)), key=lambda j: table[j]["mean_f1"])
    # max() returns the first maximizer, which is the smaller grid index
    chosen = dict(table[best]["params"])
    report = {"table": table, "fold_resamples": resamples, "chosen_index": best}
    return chosen, report


# -------------------------------------------------------------- run results


@dataclass
class RunResult:
    config: dict
    config_text: str
    repetitions: list
    aggregates: dict

    def to_dict(self):
        return {"config": self.config, "config_text": self.config_text,
                "repetitions": self.repetitions, "aggregates": self.aggregates}

    @classmethod
    def from_dict(cls, doc):
        return cls(config=doc["config"], config_text=doc["config_text"],
                   repetitions=doc["repetitions"], aggregates=doc["aggregates"])

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _aggregate(reps):
    ok = [r for r in reps if r["ok"]]
    agg = {"repetitions": len(reps), "failures": len(reps) - len(ok)}
    for metric in ("f1", "mccr"):
        values = [r[metric] for r in ok]
        agg[f"mean_{metric}"] = float(np.mean(values)) if values else None
        # sample standard deviation (n-1), 0 for a single repetition
        agg[f"std_{metric}"] = (
            float(np.std(values, ddof=1)) if len(values) > 1
            else (0.0 if values else None)
        )
    return agg


def run_experiment(cfg, progress=None):
    """All repetitions of one config. A repetition failure is recorded and
    the run continues; aggregation covers the successes."""
    reps = []
    for i in range(cfg.repetitions):
        seed = cfg.base_seed + i
        started = time.perf_counter()
        try:
            shards, test, _ = prepare_repetition(cfg, seed)
            chosen, cv_report = cross_validate(cfg, shards, seed)
            model, rounds = train_model(cfg, chosen, shards, seed)
            metrics = evaluate(model, test)
            reps.append({
                "seed": seed, "ok": True, "chosen": chosen,
                "f1": float(metrics.f1), "mccr": float(metrics.mccr),
                "n_test": int(metrics.n),
                "confusion": [[int(v) for v in row] for row in metrics.confusion],
                "rounds": rounds, "cv": cv_report,
                "model_w": [float(v) for v in model.w],
                "wall_time": time.perf_counter() - started,
            })
        except Exception as exc:
            reps.append({
                "seed": seed, "ok": False,
                "error": f"{type(exc).__name__}: {exc}",
                "wall_time": time.perf_counter() - started,
            })
        if progress is not None:
            progress(reps[-1])
    return RunResult(config=cfg.to_dict(), config_text=cfg.raw_text,
                     repetitions=reps, aggregates=_aggregate(reps))


def exit_code_for(result):
    """0 all repetitions succeeded, 2 all failed, 3 more than 10% failed."""
    total = result.aggregates["repetitions"]
    failed = result.aggregates["failures"]
    if failed == 0:
        return 0
    if failed == total:
        return 2
    return 3 if failed > 0.1 * total else 0


def emit_results(result, out_dir):
    """Write result.json (full structured document), rounds.csv (flat
    per-round telemetry for plotting), and a byte-exact config echo."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {"result": os.path.join(out_dir, "result.json"),
             "rounds": os.path.join(out_dir, "rounds.csv")}
    with open(paths["result"], "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
    with open(paths["rounds"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetition", "t", "objective",
                         "consensus_residual", "wall_time"])
        for rep in result.repetitions:
            for tr in rep.get("rounds", []):
                writer.writerow([rep["seed"], tr["t"], repr(tr["objective"]),
                                 repr(tr["consensus_residual"]), repr(tr["wall_time"])])
    if result.config_text is not None:
        paths["config_echo"] = os.path.join(out_dir, "config_echo.json")
        with open(paths["config_echo"], "w", encoding="utf-8", newline="") as fh:
            fh.write(result.config_text)
    return paths


def load_result(out_dir):
    with open(os.path.join(out_dir, "result.json"), "r", encoding="utf-8") as fh:
        return RunResult.from_json(fh.read())


# ------------------------------------------------------------ model persistence


def save_model(path, model, stats):
    doc = {"w": [float(v) for v in model.w],
           "mins": [float(v) for v in stats.mins],
           "maxs": [float(v) for v in stats.maxs]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def load_model(path):
    from .data import MinMaxStats
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    model = GlobalModel(w=np.array(doc["w"], dtype=float))
    stats = MinMaxStats(mins=np.array(doc["mins"], dtype=float),
                        maxs=np.array(doc["maxs"], dtype=float))
    return model, stats


# ------------------------------------------------------------------- bench


def time_sm_round(n_total, G, p, runs, seed):
    """Median wall time of a single SM round (LP solve + subgradient per
    client, plus aggregation) on normalized synthetic data."""
    data = generate_synthetic(SyntheticSpec(N=n_total, P=p, G=G, seed=seed))
    stats = fit_minmax(data)
    data = apply_minmax(data, stats)
    shards = partition(data, PartitionPlan(scheme=PartitionScheme.EVEN, G=G, seed=seed))
    clients = [ClientConfig(epsilon=1.0 / (10.0 * s.n), kappa=1.0, alpha=1.0 / G)
               for s in shards]
    times = []
    for _ in range(runs):
        fed = FederationConfig(clients=clients, T=1, algorithm=Algorithm.SM, gamma0=1.0)
        result = run_federation(fed, shards)
        times.append(result.traces[0].wall_time)
    return float(np.median(times))


def bench_scaling(n_grid, g_grid, p=2, runs=5, seed=0, fixed_g=2, fixed_n=1000):
    """Scaling smoke: SM round time versus total sample count at fixed G,
    and versus client count at fixed total N."""
    by_n = {n: time_sm_round(n, fixed_g, p, runs, seed) for n in n_grid}
    by_g = {g: time_sm_round(fixed_n, g, p, runs, seed) for g in g_grid}
    return {"round_time_by_n": by_n, "round_time_by_g": by_g,
            "fixed_g": fixed_g, "fixed_n": fixed_n, "p": p, "runs": runs}
