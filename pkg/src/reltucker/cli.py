"""Command-line interface.

Commands: ``build-vocab``, ``train``, ``evaluate``, ``count-params``,
``inspect-core`` and ``sweep``.  Run configurations are flat
``key = value`` files; every key can also be given as ``--key-name``.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import checkpoint, kgdata, params, rtucker, training
from .evaluation import evaluate


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig(training.TrainConfig):
    model: str = "drt"
    d_e: int = 100
    d_r: int = 0  # 0: implied by the model kind
    layout: str = ""
    init_scale: float = 0.1
    data: str = ""
    out: str = "run"

    def __post_init__(self):
        super().__post_init__()
        if self.model not in rtucker.MODEL_KINDS:
            raise ValueError(f"model must be one of {rtucker.MODEL_KINDS}, got {self.model!r}")
        if self.d_e < 1:
            raise ValueError("d_e must be positive")
        if self.model in ("drt", "srt") and self.d_r < 1:
            raise ValueError(f"{self.model} needs d_r >= 1")

    def train_config(self) -> training.TrainConfig:
        names = {f.name for f in fields(training.TrainConfig)}
        return training.TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    t = _FIELD_TYPES[key]
    try:
        if t in (int, "int"):
            return int(value)
        if t in (float, "float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        values[key] = _coerce(key, value.strip())
    return values


def read_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_config_text(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def make_run_config(values: dict) -> RunConfig:
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))


def _build_model(cfg: RunConfig, N: int, K: int) -> rtucker.RTModel:
    rng = np.random.default_rng([cfg.seed, 1])
    if cfg.model == "constrained":
        return rtucker.init_model("constrained", N, K, cfg.d_e, rng=rng, scale=cfg.init_scale)
    return rtucker.init_model(
        cfg.model,
        N,
        K,
        cfg.d_e,
        cfg.d_r or None,
        rng=rng,
        scale=cfg.init_scale,
        layout=cfg.layout or None,
    )


def run_training(cfg: RunConfig) -> training.FitResult:
    """Train per ``cfg`` and write checkpoint, logs, vocabulary and config echo to ``cfg.out``."""
    if not cfg.data:
        raise ConfigError("no dataset directory given (data = ...)")
    splits = kgdata.load_dataset(cfg.data)
    model = _build_model(cfg, splits.vocab.num_entities, splits.vocab.num_relations)
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.txt"), "w", encoding="utf-8") as f:
        f.write(format_config(cfg))
    splits.vocab.save(cfg.out)
    log_path = os.path.join(cfg.out, "train.log")
    timing_path = os.path.join(cfg.out, "timing.log")
    with open(log_path, "w", encoding="utf-8") as logf, open(timing_path, "w", encoding="utf-8") as timef:
        logf.write("epoch\tloss\tmrr\thits1\thits3\thits10\tsparsity_pct\n")
        timef.write("epoch\tseconds\n")

        def on_epoch(rec):
            logf.write(rec.log_line(with_time=False) + "\n")
            logf.flush()
            timef.write(f"{rec.epoch}\t{rec.seconds:.3f}\n")

        result = training.fit(model, splits, cfg.train_config(), on_epoch=on_epoch)
        logf.write(f"# best_epoch\t{result.best_epoch}\n")
    checkpoint.save(result.model, os.path.join(cfg.out, "checkpoint.rtk"))
    return result


def cmd_build_vocab(args):
    vocab = kgdata.build_vocab(args.files)
    vocab.save(args.out)
    print(f"entities: {vocab.num_entities}")
    print(f"relations: {vocab.num_relations}")


def _config_from_args(args) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = _coerce(name, v)
    return make_run_config(values)


def cmd_train(args):
    cfg = _config_from_args(args)
    result = run_training(cfg)
    best = result.best
    print(f"best epoch {result.best_epoch}: valid MRR {100 * best.mrr:.1f}")
    print(f"checkpoint: {os.path.join(cfg.out, 'checkpoint.rtk')}")


def _check_dims(model, vocab):
    if model.N != vocab.num_entities or model.K != vocab.num_relations:
        raise ConfigError(
            f"checkpoint does not match data: expected N={vocab.num_entities}, K={vocab.num_relations}; "
            f"found N={model.N}, K={model.K} (d_e={model.d_e}, d_r={model.d_r})"
        )


def cmd_evaluate(args):
    model = checkpoint.load(args.checkpoint)
    splits = kgdata.load_dataset(args.data)
    _check_dims(model, splits.vocab)
    names = kgdata.parse_filter_splits(args.filter_splits)
    index = kgdata.build_filter_index([splits.split(n) for n in names])
    report = evaluate(model, splits.split(args.split), index, tie_policy=args.tie_policy)
    print(report.human_text())
    print(report.machine_line())


def cmd_count_params(args):
    model = checkpoint.load(args.checkpoint)
    print(f"kind: {model.kind}")
    for line in params.param_report(model).lines():
        print(line)


def _resolve_relation(token: str, model, vocab_dir):
    if token.lstrip("-").isdigit():
        k = int(token)
    else:
        if not vocab_dir:
            raise ConfigError("relation given by name; pass --vocab DIR (a run or vocabulary directory)")
        vocab = kgdata.Vocabulary.load(vocab_dir)
        if token not in vocab.relation_index:
            raise ConfigError(f"unknown relation {token!r}")
        k = vocab.relation_index[token]
    if not 0 <= k < model.K:
        raise ConfigError(f"relation index {k} out of range [0, {model.K})")
    return k


def mixing_csv(model, k: int) -> tuple[str, float]:
    m = model.mixing_matrices(k)
    text = "".join(",".join(repr(float(x)) for x in row) + "\n" for row in m)
    return text, float(np.abs(np.diag(m)).sum())


def cmd_inspect_core(args):
    model = checkpoint.load(args.checkpoint)
    k = _resolve_relation(args.relation, model, args.vocab)
    text, diag = mixing_csv(model, k)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    print(f"# relation {k} diag_abs_sum = {diag!r}")


def parse_grid_text(text: str) -> dict[str, list]:
    grid: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"grid line {lineno}: expected 'key = v1, v2, ...'")
        key = key.strip()
        values = grid.setdefault(key, [])
        for v in value.split(","):
            v = _coerce(key, v.strip())
            if v not in values:
                values.append(v)
    return grid


def grid_runs(grid: dict[str, list], max_runs: int | None = None) -> list[dict]:
    keys = list(grid)
    runs = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    return runs[:max_runs] if max_runs else runs


def _sweep_one(job):
    idx, base, overrides, out_dir = job
    values = dict(base, **overrides, out=os.path.join(out_dir, f"run_{idx:03d}"))
    try:
        result = run_training(make_run_config(values))
        return idx, overrides, result.best.mrr, "ok"
    except Exception as exc:  # one failed run must not end the sweep
        return idx, overrides, float("nan"), f"failed: {exc}"


def run_sweep(base: dict, grid: dict, out_dir: str, max_runs=None, jobs: int = 1):
    jobs_list = [(i, base, o, out_dir) for i, o in enumerate(grid_runs(grid, max_runs))]
    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(j) for j in jobs_list]
    rows.sort(key=lambda r: (-r[2] if r[2] == r[2] else np.inf, r[0]))
    keys = list(grid)
    lines = ["run\tmrr\tstatus\t" + "\t".join(keys)]
    for idx, o, mrr, status in rows:
        lines.append(f"{idx}\t{mrr!r}\t{status}\t" + "\t".join(str(o[k]) for k in keys))
    table = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "sweep.tsv"), "w", encoding="utf-8") as f:
        f.write(table)
    return rows, table


def cmd_sweep(args):
    base = read_config(args.config) if args.config else {}
    try:
        with open(args.grid, encoding="utf-8") as f:
            grid = parse_grid_text(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read grid {args.grid}: {exc.strerror}") from None
    _, table = run_sweep(base, grid, args.out, args.max_runs, args.jobs)
    sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reltucker", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-vocab", help="collect entity and relation names from triple files")
    s.add_argument("files", nargs="+")
    s.add_argument("--out", required=True, help="directory for entities.txt / relations.txt")
    s.set_defaults(func=cmd_build_vocab)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--config", help="key = value configuration file")
    for f in fields(RunConfig):
        s.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar=f.name.upper())
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="filtered ranking metrics of a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True, help="directory with train/valid/test.txt")
    s.add_argument("--split", default="test", choices=kgdata.SPLITS)
    s.add_argument("--filter-splits", default="train,valid,test")
    s.add_argument("--tie-policy", default="mean")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("count-params", help="effective parameter counts of a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.set_defaults(func=cmd_count_params)

    s = sub.add_parser("inspect-core", help="CSV of one relation's mixing matrix")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--relation", required=True, help="relation index or name")
    s.add_argument("--vocab", help="directory holding relations.txt (needed for names)")
    s.add_argument("--output", help="write the CSV here instead of stdout")
    s.set_defaults(func=cmd_inspect_core)

    s = sub.add_parser("sweep", help="train every combination of a hyperparameter grid")
    s.add_argument("--grid", required=True)
    s.add_argument("--config", help="base configuration")
    s.add_argument("--out", required=True)
    s.add_argument("--max-runs", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except training.TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, checkpoint.CheckpointError, kgdata.TripleFormatError, OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
