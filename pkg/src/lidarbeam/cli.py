"""Command-line entry point: simulate, train, evaluate, opwindow, overhead, gradcheck.

Exit codes: 0 ok, 2 config error, 3 data-format error, 4 check failure.
"""
import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, from_json, load_config
from .datapipe import (DatasetFormatError, SplitSpec, read_dataset, split_sequences,
                       window_arrays, write_dataset)
from .evalkit import evaluate_table, operation_window_eval, training_overhead
from .nn import grad_check_groups
from .scene import ScenarioConfig, generate_dataset
from .tracker import MODES, TrackerConfig, TrackerParams, loss_and_grad, train

EXIT_OK, EXIT_CONFIG, EXIT_FORMAT, EXIT_CHECK = 0, 2, 3, 4


class CheckFailure(RuntimeError):
    pass


def _load(args):
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _override(section, **values):
    for k, v in values.items():
        if v is not None:
            setattr(section, k, v)


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _split(cfg, records):
    return split_sequences(records, SplitSpec(cfg.training.train_fraction, cfg.seed))


def cmd_simulate(args):
    cfg = _load(args)
    _override(cfg.scenario, num_sequences=args.num_sequences)
    cfg.validate()
    records = generate_dataset(cfg.scenario_config(), cfg.scenario.num_sequences, cfg.seed)
    write_dataset(args.out, records)
    labels = np.concatenate([r.best_index for r in records])
    hist = np.bincount(labels, minlength=cfg.scenario.num_beams + 1)[1:]
    print(f"sequences {len(records)}")
    print(f"steps {len(labels)}")
    print("label histogram " + " ".join(str(int(c)) for c in hist))
    print(f"wrote {args.out} sha256:{_sha(args.out)}")


def _check_dataset(cfg, records):
    D, M = records[0].scans.shape[1], records[0].powers.shape[1]
    if (D, M) != (cfg.scenario.num_bins, cfg.scenario.num_beams):
        raise ConfigError(f"dataset has D={D}, M={M} but config expects "
                          f"D={cfg.scenario.num_bins}, M={cfg.scenario.num_beams}")


def cmd_train(args):
    cfg = _load(args)
    _override(cfg.training, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size)
    cfg.validate()
    records = read_dataset(args.dataset)
    _check_dataset(cfg, records)
    tcfg = cfg.tracker_config(args.mode)
    train_recs, test_recs = _split(cfg, records)
    data = window_arrays(train_recs, tcfg.W, tcfg.V, tcfg.mode, cfg.scenario.max_range)
    params = TrackerParams.init(tcfg, np.random.default_rng(np.random.SeedSequence([cfg.seed, 1])))

    def log(epoch, loss):
        if args.verbose:
            print(f"epoch {epoch + 1} loss {loss:.6f}", flush=True)

    _, curve = train(params, tcfg, data, cfg.train_config(), log)
    save_checkpoint(args.out, params, tcfg, cfg.to_json())
    loss_path = Path(str(args.out) + ".loss.csv")
    loss_path.write_text("epoch,loss\n" + "".join(f"{i + 1},{l:.10f}\n" for i, l in enumerate(curve)))
    print(f"split train={len(train_recs)} test={len(test_recs)} sequences, "
          f"{len(data[0])} training windows")
    if curve:
        print(f"loss initial {curve[0]:.6f} final {curve[-1]:.6f}")
    print(f"wrote {args.out} sha256:{_sha(args.out)}")


def _open_checkpoint(path, expect=None):
    params, tcfg, echo = load_checkpoint(path, expect)
    return params, tcfg, from_json(echo)


def _pick(cfg, records, which):
    if which == "all":
        return records
    train_recs, test_recs = _split(cfg, records)
    return train_recs if which == "train" else test_recs


def cmd_evaluate(args):
    expect = {"mode": args.mode} if args.mode else None
    params, tcfg, cfg = _open_checkpoint(args.checkpoint, expect)
    records = read_dataset(args.dataset)
    _check_dataset(cfg, records)
    recs = _pick(cfg, records, args.split)
    data = window_arrays(recs, tcfg.W, tcfg.V, tcfg.mode, cfg.scenario.max_range)
    table = evaluate_table(params, tcfg, data, cfg.evaluation.ks)
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    print(f"{tcfg.mode} model, {args.split} split, {table.num_samples} samples")
    print(text, end="")


def cmd_opwindow(args):
    if len(args.checkpoint) != 2:
        raise ConfigError("opwindow needs exactly two --checkpoint arguments (baseline and lidar)")
    loaded = [_open_checkpoint(p) for p in args.checkpoint]
    by_mode = {tcfg.mode: (params, tcfg, cfg) for params, tcfg, cfg in loaded}
    if set(by_mode) != set(MODES):
        raise DatasetFormatError("opwindow needs one baseline and one lidar checkpoint")
    bp, bcfg, _ = by_mode["baseline"]
    lp, lcfg, cfg = by_mode["lidar"]
    records = read_dataset(args.dataset)
    _check_dataset(cfg, records)
    recs = _pick(cfg, records, args.split)
    L_max = args.L_max if args.L_max is not None else cfg.evaluation.L_max
    k = args.k if args.k is not None else cfg.evaluation.k
    curve = operation_window_eval(bp, lp, bcfg, lcfg, recs, L_max, k, cfg.scenario.max_range)
    text = curve.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    print(f"{curve.targets} prediction targets, {curve.skipped} sequences skipped (shorter than W+L_max)")
    print(text, end="")


def cmd_overhead(args):
    print(f"{training_overhead(args.L, args.W, args.k, args.M):.4f}")


def gradcheck_report(cfg):
    """Max relative gradient error per parameter group for both modes."""
    g = cfg.gradcheck
    scen = ScenarioConfig(num_bins=g.D, num_beams=g.M, num_elements=g.N, min_steps=g.W + g.V)
    records = generate_dataset(scen, 2, cfg.seed)
    report = {}
    for mode in MODES:
        tcfg = TrackerConfig(mode=mode, W=g.W, V=g.V, gamma=g.V + 1, D=g.D, D_e=g.D_e,
                             M=g.M, M_e=g.M_e, H=g.H)
        params = TrackerParams.init(tcfg, np.random.default_rng(np.random.SeedSequence([cfg.seed, 1])))
        obs, labels = window_arrays(records, g.W, g.V, mode, scen.max_range)
        obs, labels = obs[:g.samples], labels[:g.samples]
        errs = grad_check_groups(lambda: loss_and_grad(params, tcfg, obs, labels),
                                 params.named_arrays(), g.eps, params.frozen_rows())
        report[mode] = errs
    return report


def cmd_gradcheck(args):
    cfg = _load(args)
    report = gradcheck_report(cfg)
    worst = 0.0
    for mode, errs in report.items():
        for name, e in errs.items():
            print(f"{mode:8s} {name:20s} {e:.3e}")
            worst = max(worst, e)
    print(f"max relative error {worst:.3e}")
    if worst > cfg.gradcheck.tolerance:
        raise CheckFailure(f"gradient check failed: {worst:.3e} > {cfg.gradcheck.tolerance:g}")


def build_parser():
    p = argparse.ArgumentParser(prog="lidarbeam", description=__doc__.splitlines()[0],
                                allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_, allow_abbrev=False)
        sp.set_defaults(func=fn)
        return sp

    s = add("simulate", cmd_simulate, "generate a synthetic dataset file and manifest")
    s.add_argument("--config", help="YAML run configuration")
    s.add_argument("--seed", type=int, help="override the top-level seed")
    s.add_argument("--out", required=True, help="dataset file to write")
    s.add_argument("--num-sequences", type=int, help="override scenario.num_sequences")

    s = add("train", cmd_train, "train one model on the train split of a dataset")
    s.add_argument("--config", help="YAML run configuration")
    s.add_argument("--dataset", required=True, help="dataset file")
    s.add_argument("--mode", required=True, choices=MODES, help="model type")
    s.add_argument("--seed", type=int, help="override the top-level seed")
    s.add_argument("--out", required=True, help="checkpoint file to write")
    s.add_argument("--epochs", type=int, help="override training.epochs")
    s.add_argument("--lr", type=float, help="override training.lr")
    s.add_argument("--batch-size", type=int, help="override training.batch_size")
    s.add_argument("--verbose", action="store_true", help="print the loss of every epoch")

    s = add("evaluate", cmd_evaluate, "top-k accuracy table of one checkpoint")
    s.add_argument("--checkpoint", required=True, help="checkpoint file")
    s.add_argument("--dataset", required=True, help="dataset file")
    s.add_argument("--mode", choices=MODES, help="reject checkpoints of the other mode")
    s.add_argument("--split", choices=("test", "train", "all"), default="test",
                   help="which sequences to evaluate (default: test)")
    s.add_argument("--out", help="CSV file for the table")

    s = add("opwindow", cmd_opwindow, "accuracy versus operation window for both models")
    s.add_argument("--checkpoint", action="append", required=True,
                   help="checkpoint file; give one baseline and one lidar checkpoint")
    s.add_argument("--dataset", required=True, help="dataset file")
    s.add_argument("--split", choices=("test", "train", "all"), default="test",
                   help="which sequences to evaluate (default: test)")
    s.add_argument("--L-max", dest="L_max", type=int, help="largest operation window")
    s.add_argument("--k", type=int, help="top-k used for accuracy")
    s.add_argument("--out", help="CSV file for the curve")

    s = add("overhead", cmd_overhead, "beam-training overhead of the LiDAR model relative to the baseline")
    s.add_argument("--L", type=int, default=3, help="operation window (default 3)")
    s.add_argument("--W", type=int, default=8, help="observation window (default 8)")
    s.add_argument("--k", type=int, default=5, help="beams refined per step (default 5)")
    s.add_argument("--M", type=int, default=64, help="codebook size (default 64)")

    s = add("gradcheck", cmd_gradcheck, "finite-difference check of both models on a tiny config")
    s.add_argument("--config", help="YAML run configuration")
    s.add_argument("--seed", type=int, help="override the top-level seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except CheckFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
