"""Command-line front end: train, parse, eval, bench, compare and grid.

A trained model lives in a directory holding ``model.bin``, ``vocab.tsv``,
``manifest.json`` (full config, defaults included) and ``train.log`` (one
``epoch<TAB>lr<TAB>mean_loss<TAB>train_acc`` line per epoch).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ffdp import __version__
from ffdp.conllu import read_conllu, save_conllu
from ffdp.datasets import make_splits
from ffdp.features import FeatureTemplate, input_dim
from ffdp.metrics import score, significance, significance_class, throughput
from ffdp.network import REDUCTIONS
from ffdp.trainer import ParserModel, config_for, parse_all, train
from ffdp.transitions import TransitionSystem

logger = logging.getLogger("ffdp")

MODEL_FILE = "model.bin"
VOCAB_FILE = "vocab.tsv"
MANIFEST_FILE = "manifest.json"
LOG_FILE = "train.log"
PREDICTIONS_FILE = "predictions.conllu"
RESULTS_TEXT = "results.txt"
RESULTS_JSONL = "results.jsonl"

# TrainConfig fields settable through ExperimentSpec.overrides
_OVERRIDES = ("epochs", "batch_size", "seed", "hidden_size", "base_lr", "decay_rate", "dropout", "unk_replace")


@dataclass
class ExperimentSpec:
    train: str
    system: str = "arc-standard"
    template: str = "standard"
    reduction: int = 0
    out: str = "."
    dev: Optional[str] = None
    test: Optional[str] = None
    overrides: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentSpec":
        self.train, self.out = str(self.train), str(self.out)
        self.dev = None if self.dev is None else str(self.dev)
        self.test = None if self.test is None else str(self.test)
        self.system = TransitionSystem.coerce(self.system).value
        self.template = FeatureTemplate.coerce(self.template).value
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"--reduce must be one of {REDUCTIONS}, got {self.reduction}")
        unknown = set(self.overrides) - set(_OVERRIDES)
        if unknown:
            raise ValueError(f"unknown training overrides: {sorted(unknown)}")
        for path in (self.train, self.dev, self.test):
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"treebank not found: {path}")
        return self

    def train_config(self):
        return config_for(self.system, self.template, self.reduction, **self.overrides)


@dataclass
class ResultRow:
    treebank: str
    system: str
    template: str
    reduction: int
    input_dim: int
    seed: int
    status: str = "ok"
    las: Optional[float] = None
    uas: Optional[float] = None
    kt_per_sec: Optional[float] = None
    p_value: Optional[float] = None
    significance: Optional[str] = None
    error: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def cell_seed(master_seed: int, *descriptor) -> int:
    """Stable 31-bit seed for one grid cell."""
    key = "|".join(map(str, (master_seed, *descriptor))).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little") & 0x7FFFFFFF


def worker_count() -> int:
    raw = os.environ.get("FFDP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"FFDP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"FFDP_THREADS must be a positive integer, got {raw!r}")
    return n


def _read(path) -> list:
    try:
        return read_conllu(path)
    except OSError as exc:
        raise OSError(f"cannot read treebank {path}: {exc.strerror or exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def treebank_name(path) -> str:
    """``en_ewt-ud-train.conllu`` -> ``en_ewt``; bare ``train.conllu`` -> its directory name."""
    path = Path(path)
    stem = path.stem
    for suffix in ("-ud-train", "-ud-dev", "-ud-test", "-train", "-dev", "-test", "_train", "_dev", "_test"):
        if stem.endswith(suffix):
            stem = stem[:-len(suffix)]
            break
    if stem in ("", "train", "dev", "test"):
        stem = path.resolve().parent.name or stem
    return stem


def load_model_dir(path) -> ParserModel:
    path = Path(path)
    return ParserModel.load(path / MODEL_FILE, path / VOCAB_FILE)


def cmd_train(spec: ExperimentSpec) -> tuple[ParserModel, dict]:
    """Train per ``spec`` and write the model directory; returns (model, manifest)."""
    spec.validate()
    config = spec.train_config()
    treebank = _read(spec.train)
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    model, log = train(treebank, config)
    model.save(out / MODEL_FILE, out / VOCAB_FILE)
    _write_text(out / LOG_FILE, "".join(e.line() + "\n" for e in log))
    manifest = {
        "ffdp_version": __version__,
        "treebank": treebank_name(spec.train),
        "spec": asdict(spec),
        "train_config": config.to_dict(),
        "input_dim": model.params.input_dim,
        "n_transitions": len(model.inventory),
        "vocab_hash": model.vocab.hash(),
        "vocab_sizes": model.vocab.sizes,
        "instances": model.meta["instances"],
        "skipped_sentences": model.meta["skipped"],
        "final_train_acc": log[-1].train_acc,
    }
    if spec.dev:
        dev = _read(spec.dev)
        manifest["dev_las"] = score(dev, parse_all(model, dev)).las
        logger.info("dev LAS %.2f", manifest["dev_las"])
    _write_text(out / MANIFEST_FILE, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return model, manifest


def cmd_parse(model_dir, input_path, out) -> Path:
    model = load_model_dir(model_dir)
    sentences = _read(input_path)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / PREDICTIONS_FILE
    save_conllu(target, sentences, parse_all(model, sentences))
    return target


def cmd_eval(model_dir, test_path, out, baseline=None, runs=5, iterations=10000,
             seed=0, treebank=None) -> ResultRow:
    """Parse, score and time the test set; classify against ``baseline`` outputs if given."""
    model = load_model_dir(model_dir)
    test = _read(test_path)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    predicted = parse_all(model, test)
    save_conllu(out / PREDICTIONS_FILE, test, predicted)
    scores = score(test, predicted)
    speed = throughput(model, test, runs=runs)
    row = ResultRow(treebank or treebank_name(test_path), model.system.value, model.template.value,
                    model.config.sizes.reduction_percent, model.params.input_dim, model.config.seed,
                    las=scores.las, uas=scores.uas, kt_per_sec=speed.kt_per_sec)
    _write_text(out / "score.txt", scores.to_text())
    _write_text(out / "throughput.txt", speed.to_text())
    if baseline is not None:
        base_trees = [s.gold_tree() for s in _read(baseline)]
        if len(base_trees) != len(test):
            raise ValueError(f"baseline {baseline} has {len(base_trees)} sentences, test set has {len(test)}")
        report = significance(test, predicted, base_trees, iterations, np.random.default_rng(seed))
        diff = scores.las - score(test, base_trees).las
        row.p_value = report.p_value
        row.significance = significance_class(diff, report.p_value)
        _write_text(out / "significance.txt", report.to_text())
    write_results(out / RESULTS_JSONL, [row])
    return row


# ---------------------------------------------------------------- result tables

_COLUMNS = (("treebank", "{}"), ("system", "{}"), ("template", "{}"), ("reduction", "{}"),
            ("input_dim", "{}"), ("las", "{:.2f}"), ("uas", "{:.2f}"), ("kt_per_sec", "{:.2f}"),
            ("p_value", "{:.4f}"), ("significance", "{}"))


def render_table(rows) -> str:
    """Fixed-width text table, one row per cell; failed cells show ERROR."""
    header = [name for name, _ in _COLUMNS]
    body = []
    for r in rows:
        cells = []
        for name, fmt in _COLUMNS:
            value = getattr(r, name)
            if r.status != "ok" and name == "las":
                cells.append("ERROR")
            elif value is None:
                cells.append("-")
            else:
                cells.append(fmt.format(value))
        body.append(cells)
    widths = [max([len(h)] + [len(b[i]) for b in body]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for b in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip())
    for r in rows:
        if r.error:
            lines.append(f"# {r.system}/{r.template}/{r.reduction}: {r.error}")
    return "\n".join(lines) + "\n"


def dumps_results(rows) -> str:
    return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in rows)


def loads_results(text: str) -> list:
    return [ResultRow.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def write_results(path, rows) -> None:
    _write_text(Path(path), dumps_results(rows))


def read_results(path) -> list:
    return loads_results(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- grid

def _train_cell(spec: ExperimentSpec) -> Optional[str]:
    try:
        cmd_train(spec)
        return None
    except Exception as exc:  # a failed cell must not stop the grid
        return f"{type(exc).__name__}: {exc}"


def cmd_grid(train_path, test_path, out, systems, templates, reductions, seed=0, dev_path=None,
             runs=5, iterations=10000, overrides=None, workers=None) -> list:
    """Train and evaluate every systems x templates x reductions cell.

    Training may run in ``workers`` processes; parsing and timing always
    run one cell at a time in this process. Each system's standard/0% cell,
    when present, is the significance baseline for the others.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    treebank = treebank_name(train_path)
    overrides = dict(overrides or {})
    cells = [(TransitionSystem.coerce(s).value, FeatureTemplate.coerce(t).value, int(r))
             for s in systems for t in templates for r in reductions]
    # baselines first so their outputs are available when the other cells are scored
    cells.sort(key=lambda c: (c[0], c[1] != "standard" or c[2] != 0))
    specs = []
    for system, template, reduction in cells:
        spec = ExperimentSpec(train_path, system, template, reduction,
                              str(out / f"{system}_{template}_{reduction}"), dev_path, test_path,
                              {**overrides, "seed": cell_seed(seed, treebank, system, template, reduction)})
        specs.append(spec)
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_train_cell, specs))
    else:
        errors = [_train_cell(s) for s in specs]

    rows, baselines = [], {}
    test = _read(test_path) if specs else []
    for cell, spec, error in zip(cells, specs, errors):
        seed_used = spec.overrides["seed"]
        try:
            dim = input_dim(spec.template, spec.train_config().sizes)
        except ValueError:
            dim = 0
        row = ResultRow(treebank, spec.system, spec.template, spec.reduction, dim, seed_used)
        if error is None:
            try:
                model = load_model_dir(spec.out)
                predicted = parse_all(model, test)
                save_conllu(Path(spec.out) / PREDICTIONS_FILE, test, predicted)
                scores = score(test, predicted)
                row.las, row.uas = scores.las, scores.uas
                row.kt_per_sec = throughput(model, test, runs=runs).kt_per_sec
                base = baselines.get(spec.system)
                if spec.template == "standard" and spec.reduction == 0:
                    baselines[spec.system] = (predicted, scores.las)
                elif base is not None:
                    rng = np.random.default_rng(cell_seed(seed, "significance", *cell))
                    report = significance(test, predicted, base[0], iterations, rng)
                    row.p_value = report.p_value
                    row.significance = significance_class(scores.las - base[1], report.p_value)
            except Exception as exc:
                error = f"{type(exc).__name__}: {exc}"
        if error is not None:
            row.status, row.error = "ERROR", error
            logger.error("cell %s/%s/%d failed: %s", spec.system, spec.template, spec.reduction, error)
        rows.append(row)
    write_results(out / RESULTS_JSONL, rows)
    _write_text(out / RESULTS_TEXT, render_table(rows))
    return rows


# ---------------------------------------------------------------- argparse

def _csv(kind):
    def convert(text):
        return [kind(x) for x in text.split(",") if x.strip()]
    return convert


def _overrides(args) -> dict:
    out = {}
    for flag, name in (("epochs", "epochs"), ("batch", "batch_size"), ("seed", "seed"), ("hidden", "hidden_size")):
        value = getattr(args, flag, None)
        if value is not None:
            out[name] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ffdp", description="Feed-forward transition-based dependency parser.")
    p.add_argument("--version", action="version", version=f"ffdp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def training_flags(sp, many=False):
        if many:
            sp.add_argument("--system", type=_csv(str), default=["arc-standard"],
                            help="comma-separated systems (arc-standard, swap)")
            sp.add_argument("--template", type=_csv(str), default=["standard", "no-gd", "no-gd-d"],
                            help="comma-separated templates (standard, no-gd, no-gd-d)")
            sp.add_argument("--reduce", type=_csv(int), default=[0], help="comma-separated percents (0..50 step 10)")
        else:
            sp.add_argument("--system", default="arc-standard", choices=[s.value for s in TransitionSystem])
            sp.add_argument("--template", default="standard", choices=[t.value for t in FeatureTemplate])
            sp.add_argument("--reduce", type=int, default=0, choices=REDUCTIONS)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--hidden", type=int)

    sp = sub.add_parser("train", help="train a model directory")
    sp.add_argument("train_file")
    sp.add_argument("--dev", help="dev treebank, scored once after training (monitoring only)")
    training_flags(sp)
    sp.add_argument("--out", required=True, help="model directory")

    sp = sub.add_parser("parse", help="parse a CoNLL-U file")
    sp.add_argument("model_dir")
    sp.add_argument("input_file")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("eval", help="score, time and optionally compare against baseline outputs")
    sp.add_argument("model_dir")
    sp.add_argument("test_file")
    sp.add_argument("--baseline", help="baseline outputs (CoNLL-U) aligned with the test file")
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--iterations", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("bench", help="single-thread throughput in kt/s")
    sp.add_argument("model_dir")
    sp.add_argument("test_file")
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--out")

    sp = sub.add_parser("compare", help="significance test between two outputs")
    sp.add_argument("gold_file")
    sp.add_argument("outputs_a")
    sp.add_argument("outputs_b")
    sp.add_argument("--iterations", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = sub.add_parser("grid", help="train and evaluate a systems x templates x reductions grid")
    sp.add_argument("train_file")
    sp.add_argument("test_file")
    sp.add_argument("--dev")
    training_flags(sp, many=True)
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--iterations", type=int, default=10000)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("make-treebank", help="write synthetic UD-style train/dev/test files")
    sp.add_argument("--train-size", type=int, default=1500)
    sp.add_argument("--dev-size", type=int, default=200)
    sp.add_argument("--test-size", type=int, default=400)
    sp.add_argument("--nonprojective-rate", type=float, default=0.25)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    return p


def _report(out, name, report) -> None:
    print(report.to_text(), end="")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        _write_text(Path(out) / f"{name}.txt", report.to_text())
        _write_text(Path(out) / f"{name}.json", report.to_json() + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "train":
            spec = ExperimentSpec(args.train_file, args.system, args.template, args.reduce,
                                  args.out, args.dev, None, _overrides(args))
            _, manifest = cmd_train(spec)
            print(f"wrote {args.out} (input_dim {manifest['input_dim']}, "
                  f"{manifest['skipped_sentences']} skipped sentences)")
        elif args.command == "parse":
            print(cmd_parse(args.model_dir, args.input_file, args.out))
        elif args.command == "eval":
            row = cmd_eval(args.model_dir, args.test_file, args.out, args.baseline,
                           args.runs, args.iterations, args.seed)
            print(render_table([row]), end="")
        elif args.command == "bench":
            model = load_model_dir(args.model_dir)
            _report(args.out, "throughput", throughput(model, _read(args.test_file), runs=args.runs))
        elif args.command == "compare":
            gold = _read(args.gold_file)
            a = [s.gold_tree() for s in _read(args.outputs_a)]
            b = [s.gold_tree() for s in _read(args.outputs_b)]
            report = significance(gold, a, b, args.iterations, np.random.default_rng(args.seed))
            _report(args.out, "significance", report)
        elif args.command == "grid":
            overrides = _overrides(args)
            seed = overrides.pop("seed", 0)
            rows = cmd_grid(args.train_file, args.test_file, args.out, args.system, args.template,
                            args.reduce, seed, args.dev, args.runs, args.iterations, overrides)
            print(render_table(rows), end="")
        elif args.command == "make-treebank":
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            splits = make_splits(args.train_size, args.dev_size, args.test_size, random_state=args.seed,
                                 nonprojective_rate=args.nonprojective_rate)
            for name, sentences in zip(("train", "dev", "test"), splits):
                save_conllu(out / f"{name}.conllu", sentences)
                print(out / f"{name}.conllu")
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"ffdp: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
