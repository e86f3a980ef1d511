"""Command-line entry point: ``ctlsed <command> [flags]``.

Every command takes ``--config <json>``; flags override config entries.
Each run writes ``config.json`` with the fully resolved configuration next
to its outputs, and passing that file back as ``--config`` repeats the run.
All files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("ctlsed")

COMMANDS = ("synth", "train", "eval", "gradcheck", "oracle-check")


class CliError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def atomic_write(path: Path, data: str | bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        tmp.write_text(data)
    else:
        tmp.write_bytes(data)
    tmp.replace(path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def parse_weights(text: str) -> dict[str, float]:
    """``"ctl=1,mil=3.3"`` -> ``{"ctl": 1.0, "mil": 3.3}``."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--weights: expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise CliError(f"--weights: {value!r} is not a number") from None
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return cfg


def prepare_out(out) -> Path | None:
    if out is None:
        return None
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def require_out(args, cfg) -> Path:
    out = args.out or cfg.get("out")
    if out is None:
        raise CliError(f"{args.command} needs --out")
    return prepare_out(out)


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    from .synth import SynthConfig, write_corpus

    cfg = load_config(args.config)
    out = require_out(args, cfg)
    cfg.pop("out", None)
    if args.seed is not None:
        cfg["seed"] = args.seed
    synth_cfg = SynthConfig.from_dict(cfg)
    write_corpus(out, synth_cfg)
    atomic_write(out / "config.json", dump_json({"out": str(out), **synth_cfg.to_dict()}))
    sizes = ", ".join(f"{k}={v}" for k, v in synth_cfg.num_recordings.items())
    print(f"wrote corpus to {out} ({sizes})")
    return 0


# ---------------------------------------------------------------- train


def resolve_train_config(args, cfg: dict) -> dict:
    from .model import TrainConfig

    cfg = dict(cfg)
    corpus = args.corpus or cfg.get("corpus")
    if corpus is None:
        raise CliError("train needs --corpus (or a 'corpus' entry in the config)")
    train_cfg = dict(cfg.get("train", {}))
    if args.loss is not None:
        train_cfg["loss"] = args.loss
    if args.weights is not None:
        train_cfg["loss_weights"] = parse_weights(args.weights)
        train_cfg.setdefault("loss", "combo")
    if args.seed is not None:
        train_cfg["seed"] = args.seed
    model_cfg = dict(cfg.get("model", {}))
    model_cfg.setdefault("seed", train_cfg.get("seed", 0))
    unknown = set(cfg) - {"corpus", "out", "train", "model"}
    if unknown:
        raise CliError(f"unknown config entries: {sorted(unknown)}")
    try:
        resolved = TrainConfig(**train_cfg).to_dict()
    except TypeError as exc:
        raise CliError(f"train config: {exc}") from None
    return {"corpus": str(corpus), "train": resolved, "model": model_cfg}


def cmd_train(args) -> int:
    from .model import PredictorConfig, TrainConfig, save_params, train
    from .synth import read_corpus

    cfg = load_config(args.config)
    out = require_out(args, cfg)
    resolved = resolve_train_config(args, cfg)
    resolved["out"] = str(out)
    vocab, corpus = read_corpus(Path(resolved["corpus"]), ("train", "validation"))
    if not corpus.get("train") or not corpus.get("validation"):
        raise CliError("corpus needs nonempty train and validation splits")

    train_cfg = TrainConfig(**resolved["train"])
    d = corpus["train"][0].features.shape[1]
    model = {"input_dim": d, "n_classes": vocab.n, **resolved["model"], "head": train_cfg.head}
    try:
        pred_cfg = PredictorConfig(**model)
    except TypeError as exc:
        raise CliError(f"model config: {exc}") from None
    if pred_cfg.input_dim != d or pred_cfg.n_classes != vocab.n:
        raise CliError(f"model expects input_dim={pred_cfg.input_dim}, n_classes={pred_cfg.n_classes}; corpus has {d}, {vocab.n}")
    resolved["model"] = pred_cfg.to_dict()
    atomic_write(out / "config.json", dump_json(resolved))

    result = train(pred_cfg, train_cfg, corpus["train"], corpus["validation"], vocab.classes)

    header = list(result.metrics[0]) if result.metrics else ["checkpoint", "minibatches", "train_loss", "val_macro_f1"]
    atomic_write(out / "metrics.csv", rows_to_csv(header, [[m[k] for k in header] for m in result.metrics]))
    save_params(
        out / "params.bin",
        result.params,
        {
            "predictor": pred_cfg.to_dict(),
            "train": train_cfg.to_dict(),
            "vocabulary": list(vocab.classes),
            "seed": train_cfg.seed,
            "best_checkpoint": result.best_checkpoint,
            "best_val_macro_f1": result.best_f1,
        },
    )
    print(f"best checkpoint {result.best_checkpoint}: validation macro F1 {result.best_f1:.4f}")
    print(f"wrote {out / 'metrics.csv'} and {out / 'params.bin'}")
    return 0


# ---------------------------------------------------------------- eval


def posterior_rows(recordings, outs):
    for rec, grid in zip(recordings, outs):
        for t, row in enumerate(grid):
            yield [rec.id, t, *(float(v) for v in row)]


def cmd_eval(args) -> int:
    from .model import PredictorConfig, evaluate, load_params
    from .model.network import check_params
    from .synth import read_corpus

    cfg = load_config(args.config)
    out = require_out(args, cfg)
    params_path = args.params or cfg.get("params")
    corpus_dir = args.corpus or cfg.get("corpus")
    split = args.split or cfg.get("split", "evaluation")
    if params_path is None or corpus_dir is None:
        raise CliError("eval needs --params and --corpus")
    unknown = set(cfg) - {"params", "corpus", "split", "out"}
    if unknown:
        raise CliError(f"unknown config entries: {sorted(unknown)}")
    resolved = {"params": str(params_path), "corpus": str(corpus_dir), "split": split, "out": str(out)}

    try:
        params, header = load_params(params_path)
    except OSError as exc:
        raise CliError(f"cannot read parameters {params_path}: {exc.strerror}") from None
    vocab, corpus = read_corpus(Path(corpus_dir), tuple(dict.fromkeys(("validation", split))))
    if tuple(header.get("vocabulary", ())) != vocab.classes:
        raise CliError(f"vocabulary mismatch: parameters were trained on {header.get('vocabulary')}, corpus has {list(vocab.classes)}")
    if split not in corpus:
        raise CliError(f"corpus has no split {split!r}")
    pred_cfg = PredictorConfig(**header["predictor"])
    check_params(pred_cfg, params)
    atomic_write(out / "config.json", dump_json(resolved))

    thresholds = None
    if pred_cfg.head == "sigmoid":
        _, _, thresholds = evaluate(pred_cfg, params, corpus["validation"])
    report, outs, _ = evaluate(pred_cfg, params, corpus[split], thresholds=thresholds, classes=vocab.classes)

    summary = report.to_dict()
    summary["split"] = split
    summary["loss"] = header.get("train", {}).get("loss")
    summary["thresholds"] = None if thresholds is None else [float(t) for t in thresholds]
    atomic_write(out / "report.json", dump_json(summary))
    atomic_write(out / "report.csv", report.to_csv())

    if pred_cfg.head == "sigmoid":
        columns = list(vocab.classes)
    else:
        columns = ["blank"] + [f"{kind}_{name}" for name in vocab.classes for kind in ("onset", "offset")]
    header_row = ["recording", "frame", *columns]
    atomic_write(out / "posteriors.csv", rows_to_csv(header_row, posterior_rows(corpus[split], outs)))
    print(f"{split}: macro F1 {report.macro:.4f} ({', '.join(f'{c} {f:.4f}' for c, f in zip(vocab.classes, report.per_class))})")
    return 0


# ---------------------------------------------------------------- checks


def _print_table(header, rows) -> None:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h)) for i, h in enumerate(header)]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))


def cmd_gradcheck(args) -> int:
    from .gradcheck import FD_STEP, LOSS_NAMES, TOLERANCE, run_gradcheck

    cfg = load_config(args.config)
    resolved = {
        "seed": 0,
        "instances": 100,
        "tolerance": TOLERANCE,
        "losses": list(LOSS_NAMES),
        "corrupt": [],
        **{k: v for k, v in cfg.items() if k != "out"},
    }
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.loss is not None:
        resolved["losses"] = [args.loss]
    unknown = set(resolved) - {"seed", "instances", "tolerance", "losses", "corrupt"}
    if unknown:
        raise CliError(f"unknown config entries: {sorted(unknown)}")
    bad = set(resolved["losses"]) - set(LOSS_NAMES)
    if bad:
        raise CliError(f"gradcheck losses must be among {LOSS_NAMES}, got {sorted(bad)}")

    rows = run_gradcheck(
        seed=int(resolved["seed"]),
        instances=int(resolved["instances"]),
        losses=tuple(resolved["losses"]),
        tolerance=float(resolved["tolerance"]),
        corrupt=tuple(resolved["corrupt"]),
    )
    print(f"central differences, h={FD_STEP:g}, tolerance {resolved['tolerance']:g}")
    _print_table(
        ["loss", "instances", "max_rel_error", "worst_instance", "result"],
        [[r.loss, r.instances, f"{r.max_rel_error:.3e}", r.worst_instance, "pass" if r.passed else "FAIL"] for r in rows],
    )
    out = args.out or cfg.get("out")
    if out is not None:
        out = prepare_out(out)
        resolved["out"] = str(out)
        atomic_write(out / "config.json", dump_json(resolved))
        atomic_write(
            out / "gradcheck.csv",
            rows_to_csv(
                ["loss", "instances", "max_rel_error", "worst_instance", "passed"],
                [[r.loss, r.instances, r.max_rel_error, r.worst_instance, int(r.passed)] for r in rows],
            ),
        )
    failed = [r for r in rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.loss}: rerun instance {r.worst_instance} (seed:loss-index:instance)", file=sys.stderr)
    return 1 if failed else 0


def cmd_oracle_check(args) -> int:
    from .ctl import CtlConfig, ctl_forward
    from .labels import offset, onset
    from .oracle import ctl_brute_force, run_oracle_check

    cfg = load_config(args.config)
    resolved = {"seed": 0, "trials": 200, "tolerance": 1e-10, **{k: v for k, v in cfg.items() if k != "out"}}
    if args.seed is not None:
        resolved["seed"] = args.seed
    unknown = set(resolved) - {"seed", "trials", "tolerance"}
    if unknown:
        raise CliError(f"unknown config entries: {sorted(unknown)}")
    trials = int(resolved["trials"])
    if trials == 0:
        print("warning: trials=0, the check passes vacuously", file=sys.stderr)

    rows = run_oracle_check(int(resolved["seed"]), trials, float(resolved["tolerance"]))
    print(f"lattice vs enumeration, tolerance {resolved['tolerance']:g}")
    _print_table(
        ["check", "trials", "max_rel_deviation", "worst_instance", "result"],
        [[r.check, r.trials, f"{r.max_rel_deviation:.3e}", r.worst_instance, "pass" if r.passed else "FAIL"] for r in rows],
    )
    L = [onset(0), offset(0)]
    y = np.array([[0.5]])
    print(
        f"worked example: T=1, y=0.5, L=['E `E], C=1: lattice {ctl_forward(y, L, CtlConfig(1)):.10f}, "
        f"enumeration {ctl_brute_force(y, L, CtlConfig(1)):.10f} (0.25 up to clamping)"
    )
    out = args.out or cfg.get("out")
    if out is not None:
        out = prepare_out(out)
        resolved["out"] = str(out)
        atomic_write(out / "config.json", dump_json(resolved))
        atomic_write(
            out / "oracle.csv",
            rows_to_csv(
                ["check", "trials", "max_rel_deviation", "worst_instance", "passed"],
                [[r.check, r.trials, r.max_rel_deviation, r.worst_instance, int(r.passed)] for r in rows],
            ),
        )
    return 0 if all(r.passed for r in rows) else 1


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    from .model.train import LOSSES

    parser = argparse.ArgumentParser(prog="ctlsed", description="Sound event detection with sequential labels.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, loss=False):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        if loss:
            p.add_argument("--loss", choices=LOSSES if loss == "train" else ("strong", "mil", "ctc", "ctl"))
        return p

    common(sub.add_parser("synth", help="generate a synthetic corpus"))
    p = common(sub.add_parser("train", help="train a predictor"), loss="train")
    p.add_argument("--weights", help="loss weights for combo training, e.g. ctl=1,mil=3.3")
    p.add_argument("--corpus", help="corpus directory written by synth")
    p = common(sub.add_parser("eval", help="evaluate trained parameters"))
    p.add_argument("--params", help="parameter file written by train")
    p.add_argument("--corpus", help="corpus directory written by synth")
    p.add_argument("--split", help="split to evaluate (default: evaluation)")
    common(sub.add_parser("gradcheck", help="finite-difference gradient checks"), loss="check")
    common(sub.add_parser("oracle-check", help="lattice vs brute-force enumeration"))
    return parser


HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    from .ctl import InfeasibleLabelError
    from .model.train import MissingLabelError, TrainingDiverged
    from .synth import ConfigError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (CliError, ConfigError, MissingLabelError, InfeasibleLabelError, TrainingDiverged) as exc:
        print(f"ctlsed {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"ctlsed {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
