"""Command line entry point: train, simulate, analyze, gen-dataset, inspect-model.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
``NNBICM_WORKERS`` sets the default number of worker processes for simulate.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, TrainRecipe, load_preset, load_spec, preset_names
from .ldpc import AlistError
from .mathcore import ConfigurationError
from .neuralnet import ModelFormatError, TrainConfig, forward, load_model, save_model
from .pipelines import RECEIVERS, SystemConfig, run_named_receivers, with_gamma
from .results import ResultsFormatError, append_rows, format_summary, read_results, write_curves
from .training import dataset_seed, gen_dataset, train_stage

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
WORKERS_ENV = "NNBICM_WORKERS"

MODULATIONS = {"qpsk": 2, "4qam": 2, "16qam": 4, "64qam": 6, "256qam": 8}

log = logging.getLogger("nnbicm")


def _modulation(text: str) -> int:
    key = text.lower().replace("-", "")
    if key in MODULATIONS:
        return MODULATIONS[key]
    raise argparse.ArgumentTypeError(f"unknown modulation {text!r}; choose from {', '.join(MODULATIONS)}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _add_source(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", help=f"bundled preset ({', '.join(preset_names())}; train also takes <preset>-net1/-net2)")
    g.add_argument("--config", help="experiment INI file")


def _add_system(p):
    p.add_argument("--mod", type=_modulation, help="qpsk, 16qam, 64qam or 256qam")
    p.add_argument("--fft", type=int, help="FFT size N")
    p.add_argument("--code", help="bundled code id or alist path")
    p.add_argument("--psi-db", type=float, help="clipping level in dB")
    p.add_argument("--seed", type=int, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nnbicm", description="LDPC-coded DCO-OFDM link with NN-aided BICM receivers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="generate a training set, train a network and write the model file")
    _add_source(t)
    _add_system(t)
    t.add_argument("--stage", choices=("net1", "net2"))
    t.add_argument("--gamma-t", type=float, help="training Eb/N0 in dB")
    t.add_argument("--hidden", type=_ints, help="hidden layer sizes, e.g. '32 16 8'")
    t.add_argument("--optimizer", choices=("scg", "gd"))
    t.add_argument("--epochs", type=int)
    t.add_argument("--learning-rate", type=float)
    t.add_argument("--init", choices=("symmetric-uniform", "paper-uniform01"))
    t.add_argument("--scale-inputs", action="store_true", default=None)
    t.add_argument("--net1-model", help="net1 model used to produce the priors of stage net2")
    t.add_argument("--out", help="output model path")

    s = sub.add_parser("simulate", help="Monte-Carlo BER sweep, appended to a CSV file")
    _add_source(s)
    _add_system(s)
    s.add_argument("--receiver", help=f"receiver or comma list of {', '.join(RECEIVERS)}")
    s.add_argument("--sweep", type=_floats, help="Eb/N0 values in dB, increasing")
    s.add_argument("--frames", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--map-mode", choices=("A", "B"))
    s.add_argument("--id-iterations", type=int)
    s.add_argument("--net1-model")
    s.add_argument("--net2-model")
    s.add_argument("--divide-prior", action="store_true", help="divide the net2 output by its prior before demapping")
    s.add_argument("--csv", help="output CSV path")
    s.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")

    a = sub.add_parser("analyze", help="summaries, curve files and dB gaps from result CSVs")
    a.add_argument("csv", nargs="+")
    a.add_argument("--target-ber", type=float, help="BER for the dB-gap report")
    a.add_argument("--out-dir", help="directory for per-receiver curve files")

    d = sub.add_parser("gen-dataset", help="write a training set as CSV")
    _add_source(d)
    _add_system(d)
    d.add_argument("--stage", choices=("net1", "net2"), default=None)
    d.add_argument("--gamma-t", type=float)
    d.add_argument("--net1-model")
    d.add_argument("--out", required=True)

    i = sub.add_parser("inspect-model", help="print the layout of a model file")
    i.add_argument("model")
    return ap


def _base_spec(args) -> tuple[ExperimentSpec, str | None]:
    if getattr(args, "preset", None):
        return load_preset(args.preset)
    if getattr(args, "config", None):
        return load_spec(args.config), None
    return ExperimentSpec(), None


def _system_overrides(cfg: SystemConfig, args) -> SystemConfig:
    upd = {}
    for arg, key in (("mod", "M"), ("fft", "N"), ("code", "code"), ("psi_db", "psi_db"), ("seed", "seed"),
                     ("map_mode", "map_mode"), ("id_iterations", "id_iterations"),
                     ("net1_model", "net1_model"), ("net2_model", "net2_model")):
        v = getattr(args, arg, None)
        if v is not None:
            upd[key] = v
    return replace(cfg, **upd) if upd else cfg


def _load_net(path: str, role: str):
    if not path:
        raise ConfigurationError(f"{role} model path is not set")
    return load_model(path)


# --------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    spec, preset_stage = _base_spec(args)
    stage = args.stage or preset_stage or "net1"
    recipe = spec.train.get(stage, TrainRecipe())
    upd = {k: v for k, v in (("hidden", args.hidden), ("gamma_t_db", args.gamma_t), ("optimizer", args.optimizer),
                             ("epochs", args.epochs), ("learning_rate", args.learning_rate), ("seed", args.seed),
                             ("init_scheme", args.init), ("scale_inputs", args.scale_inputs), ("out", args.out))
           if v is not None}
    recipe = replace(recipe, **upd)
    cfg = _system_overrides(spec.system, args)
    if not recipe.out:
        raise ConfigurationError("no output path: pass --out")
    net1 = None
    if stage == "net2":
        path = args.net1_model or cfg.net1_model
        if not path:
            raise ConfigurationError("stage net2 needs --net1-model")
        net1 = load_model(path)
    try:
        tcfg = TrainConfig(gamma_t_db=recipe.gamma_t_db, learning_rate=recipe.learning_rate, epochs=recipe.epochs,
                           optimizer=recipe.optimizer, seed=recipe.seed, init_scheme=recipe.init_scheme,
                           scale_inputs=recipe.scale_inputs)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    res = train_stage(cfg, recipe.hidden, tcfg, stage, net1=net1)
    out = Path(recipe.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_model(res.net, out)
    rep = res.report
    print(f"stage {stage}: dims {list(res.net.layer_dims)}, {len(res.dataset)} records, "
          f"{rep.epochs_run} epochs ({rep.stop_reason})")
    print(f"initial cross-entropy {rep.initial_loss:.6f}")
    print(f"final train cross-entropy {rep.final_loss:.6f}")
    if rep.best_val_loss is not None:
        print(f"final validation cross-entropy {rep.best_val_loss:.6f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, _ = _base_spec(args)
    cfg = _system_overrides(spec.system, args)
    names = tuple(args.receiver.split(",")) if args.receiver else spec.receiver_list
    for r in names:
        if r not in RECEIVERS:
            raise ConfigurationError(f"unknown receiver {r!r}")
    sweep = args.sweep or spec.sweep
    spec = replace(spec, system=cfg, sweep=sweep, receivers=names,
                   frames=args.frames or spec.frames, batch_size=args.batch_size or spec.batch_size)
    needs1 = any(r in ("nn", "nn-id") for r in names)
    needs2 = "nn-id" in names and cfg.id_iterations >= 2
    net1 = _load_net(cfg.net1_model, "net1") if needs1 else None
    net2 = _load_net(cfg.net2_model, "net2") if needs2 else None
    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1") or 1)
    csv_path = args.csv or spec.csv
    for g in spec.sweep:
        pts = run_named_receivers(with_gamma(cfg, g), spec.frames, names, net1, net2, batch_size=spec.batch_size,
                                  workers=workers, divide_prior=args.divide_prior)
        rows = [pts[r] for r in names]
        append_rows(csv_path, rows)
        for p in rows:
            lo, hi = p.ci
            print(f"{p.gamma_e_db:6.2f} dB  {p.receiver:<6} ber {p.ber:.4e}  [{lo:.2e}, {hi:.2e}]  "
                  f"fer {p.fer:.3f}  bp iters {p.mean_bp_iters:.2f}", flush=True)
    print(f"appended {len(spec.sweep) * len(names)} rows to {csv_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    for p in args.csv:
        if not Path(p).is_file():
            raise FileNotFoundError(f"results file not found: {p}")
    curves = read_results(args.csv)
    if not curves:
        raise ResultsFormatError("no result rows")
    print(format_summary(curves, args.target_ber))
    if args.out_dir:
        for f in write_curves(curves, args.out_dir):
            print(f"wrote {f}")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    spec, preset_stage = _base_spec(args)
    stage = args.stage or preset_stage or "net1"
    cfg = _system_overrides(spec.system, args)
    recipe = spec.train.get(stage, TrainRecipe())
    gamma_t = recipe.gamma_t_db if args.gamma_t is None else args.gamma_t
    net1 = None
    if stage == "net2":
        path = args.net1_model or cfg.net1_model
        if not path:
            raise ConfigurationError("stage net2 needs --net1-model")
        net1 = load_model(path)
    data = gen_dataset(cfg, gamma_t, stage, seed=dataset_seed(recipe.seed, stage), net1=net1)
    data.to_csv(args.out)
    print(f"wrote {len(data)} records with {data.inputs.shape[1]} inputs to {args.out}")
    return EXIT_OK


def cmd_inspect_model(args) -> int:
    net = load_model(args.model)
    n_params = sum(w.size for w in net.weights)
    print(f"layers: {list(net.layer_dims)}")
    print(f"inputs: {net.n_inputs} ({'net1' if net.n_inputs == 3 else 'net2'} layout), outputs: {net.n_outputs}")
    print(f"parameters: {n_params}")
    print(f"input scaler: {'yes' if net.has_scaler else 'no'}")
    out = forward(net, np.zeros((1, net.n_inputs)))[1][0]
    entropy = float(-(out * np.log(np.maximum(out, 1e-300))).sum())
    print(f"output entropy at zero input: {entropy:.4f} nats (uniform: {np.log(net.n_outputs):.4f})")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "simulate": cmd_simulate, "analyze": cmd_analyze,
            "gen-dataset": cmd_gen_dataset, "inspect-model": cmd_inspect_model}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ModelFormatError, AlistError, ResultsFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
