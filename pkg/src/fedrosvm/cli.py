"""Command-line front end.

Subcommands:
  train     run all repetitions of a config, write result files
  evaluate  score a saved model against a CSV dataset
  cv        cross-validate repetition 0 of a config and print the choice
  bench     time one training round across sample/client counts
  serve     run the federation server over TCP for one config
  client    join a TCP federation as one client of a config

`serve` and `client` rebuild the same deterministic shards from the shared
config (same seed, same partition), so the client processes hold exactly
the data the in-process run would use; the grid must be a single point.

Exit codes: 0 success, 1 config error, 2 run failure, 3 partial failure
(more than 10% of repetitions failed).
"""

import argparse
import json
import sys

from .core import evaluate
from .data import apply_minmax, load_csv
from .experiments import (
    ConfigError,
    ExperimentConfig,
    MODEL_ALGORITHMS,
    _client_configs,
    cross_validate,
    emit_results,
    exit_code_for,
    bench_scaling,
    grid_points,
    load_model,
    prepare_repetition,
    run_experiment,
    save_model,
    train_model,
)
from .federation import (
    FederationConfig,
    run_client,
    run_federation,
    transport_tcp_connect,
    transport_tcp_serve,
)


def _single_point_params(cfg):
    for knob, values in cfg.grid.items():
        if len(values) != 1:
            raise ConfigError(
                f"serve/client need a single-point grid, but {knob!r} has "
                f"{len(values)} values"
            )
    point = grid_points(cfg.grid)[0]
    if "T" in cfg.grid:
        point["T"] = int(cfg.grid["T"][0])
    return point


def _federation_setup(cfg, rep):
    if cfg.model not in MODEL_ALGORITHMS:
        raise ConfigError(f"serve/client support sm/admm/admm_sc, not {cfg.model!r}")
    seed = cfg.base_seed + rep
    shards, test, stats = prepare_repetition(cfg, seed)
    params = _single_point_params(cfg)
    clients = _client_configs(cfg, params, shards)
    fed = FederationConfig(
        clients=clients, T=int(params["T"]),
        algorithm=MODEL_ALGORITHMS[cfg.model],
        gamma0=float(params.get("gamma0", 1.0)),
        rho=float(params.get("rho", 1.0)),
    )
    return fed, clients, shards, test, stats


def cmd_train(args):
    cfg = ExperimentConfig.from_file(args.config)
    out_dir = args.output or cfg.output or f"{cfg.name}_results"

    def progress(rep):
        if rep["ok"]:
            print(f"rep seed={rep['seed']}: f1={rep['f1']:.4f} "
                  f"mccr={rep['mccr']:.4f} ({rep['wall_time']:.1f}s)")
        else:
            print(f"rep seed={rep['seed']}: FAILED {rep['error']}")

    result = run_experiment(cfg, progress=progress)
    paths = emit_results(result, out_dir)
    last_ok = next((r for r in reversed(result.repetitions) if r["ok"]), None)
    if last_ok is not None:
        seed = last_ok["seed"]
        shards, test, stats = prepare_repetition(cfg, seed)
        model, _ = train_model(cfg, last_ok["chosen"], shards, seed)
        model_path = f"{out_dir}/model.json"
        save_model(model_path, model, stats)
        paths["model"] = model_path
    print(json.dumps(result.aggregates, indent=2, sort_keys=True))
    print(f"wrote {sorted(paths.values())}")
    return exit_code_for(result)


def cmd_evaluate(args):
    model, stats = load_model(args.model)
    table = load_csv(args.csv, args.label_column, args.positive_label)
    view = apply_minmax(table.view(), stats)
    metrics = evaluate(model, view)
    print(json.dumps({
        "f1": metrics.f1, "mccr": metrics.mccr, "n": metrics.n,
        "confusion": [[int(v) for v in row] for row in metrics.confusion],
    }, indent=2, sort_keys=True))
    return 0


def cmd_cv(args):
    cfg = ExperimentConfig.from_file(args.config)
    seed = cfg.base_seed + args.rep
    shards, _, _ = prepare_repetition(cfg, seed)
    chosen, report = cross_validate(cfg, shards, seed)
    print(json.dumps({"chosen": chosen, "fold_resamples": report["fold_resamples"],
                      "table": report["table"]}, indent=2, sort_keys=True))
    return 0


def cmd_bench(args):
    report = bench_scaling(
        n_grid=[int(v) for v in args.n_grid.split(",")],
        g_grid=[int(v) for v in args.g_grid.split(",")],
        p=args.p, runs=args.runs, seed=args.seed,
        fixed_g=args.fixed_g, fixed_n=args.fixed_n,
    )
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_serve(args):
    cfg = ExperimentConfig.from_file(args.config)
    fed, _, shards, test, _ = _federation_setup(cfg, args.rep)
    server = transport_tcp_serve(host=args.host, port=args.port)
    host, port = server.address
    print(f"serving on {host}:{port}, waiting for {fed.G} clients", flush=True)
    result = run_federation(fed, shards, transport=server)
    metrics = evaluate(result.w_last, test)
    print(json.dumps({
        "w_last": [float(v) for v in result.w_last.w],
        "best_round": result.best_round,
        "best_objective": result.best_objective,
        "test_f1": metrics.f1,
    }, indent=2, sort_keys=True))
    return 0


def cmd_client(args):
    cfg = ExperimentConfig.from_file(args.config)
    fed, clients, shards, _, _ = _federation_setup(cfg, args.rep)
    g = args.client_id
    if not (0 <= g < fed.G):
        raise ConfigError(f"client id must be in [0, {fed.G}), got {g}")
    host, port = args.address.rsplit(":", 1)
    channel = transport_tcp_connect((host, int(port)))
    # same effective per-client config the server assumes (shared rho)
    from dataclasses import replace
    local_cfg = replace(clients[g], rho=fed.rho)
    run_client(channel, g, shards[g], local_cfg, fed.algorithm)
    print(f"client {g} finished", flush=True)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedrosvm",
        description="Federated distributionally robust SVM experiment driver.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a config end to end")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--label-column", required=True)
    p.add_argument("--positive-label", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="cross-validate one repetition")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="time one training round at several scales")
    p.add_argument("--n-grid", default="500,1000,2000")
    p.add_argument("--g-grid", default="2,4")
    p.add_argument("-p", type=int, default=2)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-g", type=int, default=2)
    p.add_argument("--fixed-n", type=int, default=1000)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the federation server over TCP")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", help="join a TCP federation as one client")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--address", required=True, help="host:port of the server")
    p.add_argument("--client-id", type=int, required=True)
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_client)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
