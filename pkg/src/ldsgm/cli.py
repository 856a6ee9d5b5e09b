"""Command surface: synth, train, eval, predict, gradcheck and ablate.

Every command reads one JSON run config (``--config``), applies ``--set
key=value`` overrides and writes under ``<root>/<command>-<hash>/`` where the
hash covers the settings that determine the output. ``LDSGM_OUTPUT_ROOT``
overrides the root directory named in the config.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .corpus import (CorpusError, Instance, SyntheticSpec, build_vocab, encode_batch, generate_synthetic,
                     load_jsonl, make_instance, tokenize, write_jsonl)
from .decoder import predict_path
from .encoder import EncoderConfig
from .evaluation import EvalReport, evaluate, mean_metrics, write_report
from .hierarchy import HierarchyError, load_hierarchy, pdtb_hierarchy
from .model import LDSGM, SCHEMES
from .training import (CheckpointError, TrainConfig, TrainingError, check_gradients, load_checkpoint,
                       save_checkpoint, train)

log = logging.getLogger("ldsgm")

ENV_ROOT = "LDSGM_OUTPUT_ROOT"
SPLITS = ("train", "valid", "test")
LAMBDA_SWEEP = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)

# variant name -> (dotted train overrides, evaluation scheme)
VARIANTS = {
    "full": ({}, None),
    "no_gcn": ({"model.no_gcn": True}, None),
    "no_label_attention": ({"model.no_label_attention": True}, None),
    "no_prev_pred": ({"model.no_prev_pred": True}, None),
    "no_mutual_learning": ({"no_mutual_learning": True}, None),
    "multitask_baseline": ({"model.multitask_baseline": True}, "multitask"),
    "ensemble_eval": ({"ensemble_eval": True}, "ensemble"),
}

TINY_MODEL = {"layers": 1, "d_w": 16, "heads": 2, "d_ff": 32, "d_e": 8, "gcn_layers": 2, "d_h": 16,
              "dropout": 0.0, "max_arg_len": 16}


class ConfigError(ValueError):
    """Bad config document or override; exit code 1."""


# --- run config ---------------------------------------------------------------

@dataclass(frozen=True)
class DataPaths:
    """Corpus on disk. With ``hierarchy`` unset the ``synthetic`` settings generate one instead."""

    hierarchy: str | None = None
    train: str | None = None
    valid: str | None = None
    test: str | None = None


@dataclass(frozen=True)
class EvalSettings:
    scheme: str | None = None     # None: ensemble if train.ensemble_eval, else the model default
    split: str = "test"
    batch_size: int = 256


@dataclass(frozen=True)
class AblateSettings:
    lambda_sweep: bool = True
    lambdas: tuple[float, ...] = LAMBDA_SWEEP
    variants: tuple[str, ...] = tuple(VARIANTS)
    jobs: int = 1


@dataclass(frozen=True)
class GradcheckSettings:
    branching: tuple[int, ...] = (3, 2, 2)
    batch_size: int = 4
    coords_per_param: int = 20
    h: float = 1e-5
    tol: float = 1e-4
    seed: int = 0
    variants: tuple[str, ...] = ("full",)
    model: dict = field(default_factory=lambda: dict(TINY_MODEL))


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    data: DataPaths = field(default_factory=DataPaths)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    eval: EvalSettings = field(default_factory=EvalSettings)
    ablate: AblateSettings = field(default_factory=AblateSettings)
    gradcheck: GradcheckSettings = field(default_factory=GradcheckSettings)

    def to_dict(self) -> dict:
        return asdict(self)

    def section_hash(self, *keys) -> str:
        d = self.to_dict()
        if "train" in d:
            d["train"] = self.train.effective().to_dict()
        blob = json.dumps({k: d[k] for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def output_root(self) -> Path:
        return Path(os.environ.get(ENV_ROOT) or self.output_dir)


def _strict(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    out = {}
    for f in fields(cls):
        if f.name in d:
            v = d[f.name]
            out[f.name] = tuple(v) if isinstance(v, list) else v
    return out


def config_from_dict(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig`, rejecting unknown keys at every level."""
    kw = _strict(RunConfig, doc, "config")
    try:
        if "train" in kw:
            t = dict(kw["train"])
            if "model" in t:
                _strict(EncoderConfig, t["model"], "train.model")
            _strict(TrainConfig, t, "train")
            kw["train"] = TrainConfig.from_dict(t)
        if "synthetic" in kw:
            kw["synthetic"] = SyntheticSpec(**_strict(SyntheticSpec, kw["synthetic"], "synthetic"))
            kw["synthetic"].validate()
        for key, cls in (("data", DataPaths), ("eval", EvalSettings), ("ablate", AblateSettings),
                         ("gradcheck", GradcheckSettings)):
            if key in kw:
                kw[key] = cls(**_strict(cls, kw[key], key))
        cfg = RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not cfg.seeds:
        raise ConfigError("seeds: need at least one seed")
    if cfg.eval.scheme is not None and cfg.eval.scheme not in SCHEMES:
        raise ConfigError(f"eval.scheme: unknown scheme {cfg.eval.scheme!r}; choose from {SCHEMES}")
    if cfg.eval.split not in SPLITS:
        raise ConfigError(f"eval.split: must be one of {SPLITS}")
    bad = sorted(set(cfg.ablate.variants) - set(VARIANTS)) + sorted(set(cfg.gradcheck.variants) - set(VARIANTS))
    if bad:
        raise ConfigError(f"unknown variants {bad}; choose from {sorted(VARIANTS)}")
    _strict(EncoderConfig, cfg.gradcheck.model, "gradcheck.model")
    return cfg


def parse_override(text: str):
    """``a.b=value``; the value is read as JSON when it parses, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = json.loads(json.dumps(doc))
    for key, value in overrides:
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            child = node.setdefault(p, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override {key}: {p} is not an object")
            node = child
        node[parts[-1]] = value
    return doc


def load_config(path=None, overrides=()) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(apply_overrides(doc, [parse_override(o) for o in overrides]))


def _with_train(cfg: RunConfig, overrides: dict) -> RunConfig:
    d = cfg.train.to_dict()
    for key, value in overrides.items():
        *path, last = key.split(".")
        node = d
        for p in path:
            node = node[p]
        node[last] = value
    return replace(cfg, train=TrainConfig.from_dict(d))


# --- shared plumbing ---------------------------------------------------------------

def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _prepare(root: Path, cfg: RunConfig) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", cfg.to_dict())
    return root


def load_data(cfg: RunConfig):
    """``(hierarchy, {split: instances})`` from disk or from the synthetic spec."""
    d = cfg.data
    if d.hierarchy is None and d.train is None:
        h, *sets = generate_synthetic(cfg.synthetic)
        return h, dict(zip(SPLITS, sets))
    h = pdtb_hierarchy() if d.hierarchy in (None, "pdtb") else load_hierarchy(d.hierarchy)
    out = {}
    for split in SPLITS:
        path = getattr(d, split)
        if path is None:
            raise ConfigError(f"data.{split}: path required when loading a corpus from disk")
        out[split] = load_jsonl(path, h)
    return h, out


def run_dir(cfg: RunConfig) -> Path:
    return cfg.output_root() / f"run-{cfg.section_hash('train', 'synthetic', 'data', 'seeds')}"


def eval_scheme(cfg: RunConfig, train_cfg: TrainConfig | None = None) -> str:
    t = (train_cfg or cfg.train)
    if cfg.eval.scheme is not None:
        return cfg.eval.scheme
    if t.model.multitask_baseline:
        return "multitask"
    return "ensemble" if t.ensemble_eval else "topdown"


def train_seed(cfg: RunConfig, seed: int, data, hierarchy, out: Path):
    """Train one seed into ``out``; returns the best checkpoint record."""
    out.mkdir(parents=True, exist_ok=True)
    tcfg = replace(cfg.train, seed=seed)
    record, _ = train(tcfg, data["train"], data["valid"], hierarchy,
                      log_path=out / "metrics.jsonl", dump_path=out / "failure.json")
    save_checkpoint(record, out / "checkpoint.ldsg")
    return record


def _checkpoint_paths(cfg: RunConfig, explicit=None):
    if explicit:
        return [(None, Path(p)) for p in explicit]
    base = run_dir(cfg)
    paths = [(s, base / f"seed-{s}" / "checkpoint.ldsg") for s in cfg.seeds]
    missing = [str(p) for _, p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError(f"no checkpoint at {missing[0]}; run `train` with the same config first")
    return paths


# --- commands ------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out=None) -> Path:
    h, train_set, valid_set, test_set = generate_synthetic(cfg.synthetic)
    root = Path(out) if out else cfg.output_root() / f"synth-{cfg.section_hash('synthetic')}"
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", {"synthetic": cfg.synthetic.to_dict()})
    h.save(root / "hierarchy.json")
    for name, split in zip(SPLITS, (train_set, valid_set, test_set)):
        write_jsonl(root / f"{name}.jsonl", split)
    print(f"wrote {len(train_set)}/{len(valid_set)}/{len(test_set)} instances to {root}")
    return root


def cmd_train(cfg: RunConfig) -> Path:
    h, data = load_data(cfg)
    root = _prepare(run_dir(cfg), cfg)
    for seed in cfg.seeds:
        record = train_seed(cfg, seed, data, h, root / f"seed-{seed}")
        print(f"seed {seed}: best epoch {record.epoch}, valid accuracy "
              + " ".join(f"{a:.4f}" for a in record.metrics["accuracy"]))
    print(f"run directory {root}")
    return root


def evaluate_checkpoints(cfg: RunConfig, paths, scheme=None, split=None, data=None) -> EvalReport:
    split = split or cfg.eval.split
    per_seed, seeds = [], []
    for seed, path in paths:
        record = load_checkpoint(path)
        model, vocab, h = record.build()
        if data is None:
            _, data = load_data(cfg)
        sch = scheme or eval_scheme(cfg, record.train_config())
        metrics = evaluate(model, data[split], vocab, sch, cfg.eval.batch_size)
        metrics["best_epoch"] = record.epoch
        per_seed.append(metrics)
        seeds.append(seed if seed is not None else record.train_config().seed)
        scheme = sch
    return EvalReport(scheme=scheme, split=split, seeds=seeds, per_seed=per_seed,
                      mean=mean_metrics(per_seed), config=cfg.to_dict())


def cmd_eval(cfg: RunConfig, checkpoints=None) -> Path:
    report = evaluate_checkpoints(cfg, _checkpoint_paths(cfg, checkpoints))
    root = _prepare(run_dir(cfg), cfg)
    path = root / f"report-{report.scheme}-{report.split}.json"
    write_report(report, path)
    acc = " ".join(f"{a:.4f}" for a in report.mean["accuracy"])
    f1 = " ".join(f"{a:.4f}" for a in report.mean["macro_f1"])
    print(f"{report.scheme} on {report.split} ({len(report.seeds)} seeds): accuracy {acc} | macro-F1 {f1}")
    for key in ("top_sec", "top_sec_con"):
        if report.mean[key] is not None:
            print(f"{key}: {report.mean[key]:.4f}")
    print(f"report {path}")
    return path


def _read_predict_input(path, hierarchy):
    """JSONL with ``arg1``/``arg2`` and optional ``labels``."""
    out, golds = [], []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict) or "arg1" not in obj or "arg2" not in obj:
                    raise CorpusError("need an object with arg1 and arg2")
                if obj.get("labels") is not None:
                    inst = make_instance(obj["arg1"], obj["arg2"], obj["labels"], hierarchy)
                else:
                    a1, a2 = tokenize(obj["arg1"]), tokenize(obj["arg2"])
                    if not a1 or not a2:
                        raise CorpusError("empty argument")
                    inst = Instance(a1, a2, ())
            except (CorpusError, json.JSONDecodeError) as exc:
                raise CorpusError(f"{path} line {no}: {exc}") from None
            out.append(inst)
            golds.append(list(inst.gold_path) or None)
    return out, golds


def cmd_predict(cfg: RunConfig, input_path, checkpoint=None, out=None, scheme=None) -> Path:
    path = Path(checkpoint) if checkpoint else _checkpoint_paths(cfg)[0][1]
    record = load_checkpoint(path)
    model, vocab, h = record.build()
    scheme = scheme or eval_scheme(cfg, record.train_config())
    instances, golds = _read_predict_input(input_path, h)
    rows = []
    for s in range(0, len(instances), cfg.eval.batch_size):
        chunk = instances[s:s + cfg.eval.batch_size]
        dists = model.distributions(encode_batch(chunk, vocab, None, model.config.max_arg_len), scheme)
        probs = dists.arrays()
        for i, (names, valid) in enumerate(predict_path(dists, h)):
            k = s + i
            rows.append({"index": k, "scheme": scheme, "labels": list(names), "valid_path": valid,
                         "gold": golds[k],
                         "confidence": [float(p[i].max()) for p in probs]})
    if out is None:
        digest = hashlib.sha256(Path(input_path).read_bytes()).hexdigest()[:12]
        out = path.parent / f"predictions-{scheme}-{digest}.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"{len(rows)} predictions written to {out}")
    return Path(out)


def gradcheck(cfg: RunConfig, grad_hook=None) -> dict:
    """Check every configured variant on one tiny synthetic batch; returns the report dict."""
    g = cfg.gradcheck
    h, train_set, _, _ = generate_synthetic(SyntheticSpec(branching=g.branching, n_train=max(g.batch_size, 8),
                                                          n_valid=0, n_test=0, seed=g.seed))
    vocab = build_vocab(train_set)
    rows = []
    for name in g.variants:
        tcfg = replace(_with_train(cfg, VARIANTS[name][0]).train, seed=g.seed)
        tcfg = TrainConfig.from_dict({**tcfg.to_dict(), "model": {**asdict(tcfg.model), **g.model}})
        model = LDSGM(h, len(vocab), tcfg.model, seed=g.seed)
        batch = encode_batch(train_set[:g.batch_size], vocab, h, tcfg.model.max_arg_len)
        res = check_gradients(model, batch, tcfg, h=g.h, coords_per_param=g.coords_per_param, seed=g.seed,
                              grad_hook=grad_hook, tol=g.tol)
        partitions = sorted({model.params.partition_of(n) for n in res.per_param})
        rows.append({"variant": name, "passed": res.passed(g.tol), "max_rel_error": res.max_rel_error,
                     "worst_param": res.worst_param, "worst_index": res.worst_index, "checked": res.checked,
                     "skipped": res.skipped, "unresolved": res.unresolved, "partitions": partitions})
    return {"passed": all(r["passed"] for r in rows), "tol": g.tol, "variants": rows}


def cmd_gradcheck(cfg: RunConfig, grad_hook=None) -> bool:
    report = gradcheck(cfg, grad_hook)
    root = cfg.output_root() / f"gradcheck-{cfg.section_hash('train', 'gradcheck')}"
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "gradcheck.json", {**report, "config": cfg.to_dict()})
    for r in report["variants"]:
        print(f"{r['variant']}: {'PASS' if r['passed'] else 'FAIL'} max relative error {r['max_rel_error']:.3e} "
              f"(worst {r['worst_param']}{list(r['worst_index'] or [])}; {r['checked']} checked, "
              f"{r['skipped']} at kinks, {r['unresolved']} below resolution; partitions {','.join(r['partitions'])})")
    print(f"gradcheck {'passed' if report['passed'] else 'FAILED'} at tolerance {report['tol']:g}")
    return report["passed"]


# --- ablation ----------------------------------------------------------------------

def ablation_rows(cfg: RunConfig) -> list[dict]:
    """Row specs ``{name, config, scheme, hash}``; every row shares the data and seeds.

    Rows decode with their own scheme regardless of ``eval.scheme``.
    """
    rows = []
    for name in cfg.ablate.variants:
        overrides, scheme = VARIANTS[name]
        rows.append({"name": name, "config": _with_train(cfg, overrides), "scheme": scheme or "topdown"})
    if cfg.ablate.lambda_sweep:
        for lam in cfg.ablate.lambdas:
            rows.append({"name": f"lambda={float(lam):g}", "config": _with_train(cfg, {"lam": float(lam)}),
                         "scheme": "topdown"})
    for r in rows:
        r["hash"] = r["config"].train.digest(include_seed=False)
    return rows


def _cell_key(cfg: RunConfig, seed: int) -> str:
    # ensemble_eval only changes decoding, so it shares the trained model
    t = replace(cfg.train, ensemble_eval=False, seed=seed)
    return f"{cfg.section_hash('synthetic', 'data')}-{t.digest()}"


def _train_cell(args):
    cfg, seed, out = args
    ckpt = Path(out) / "checkpoint.ldsg"
    if ckpt.exists():
        return str(ckpt)
    h, data = load_data(cfg)
    train_seed(cfg, seed, data, h, Path(out))
    return str(ckpt)


def _fmt(x):
    return "-" if x is None else f"{x:.4f}"


def format_table(table: list[dict], depth: int) -> str:
    head = ["variant", "scheme"] + [f"acc{m}" for m in range(1, depth + 1)] + \
           [f"f1_{m}" for m in range(1, depth + 1)] + ["top_sec", "top_sec_con", "config"]
    body = [[r["name"], r["scheme"]] + [_fmt(a) for a in r["mean"]["accuracy"]]
            + [_fmt(a) for a in r["mean"]["macro_f1"]]
            + [_fmt(r["mean"]["top_sec"]), _fmt(r["mean"]["top_sec_con"]), r["hash"]] for r in table]
    widths = [max(len(str(row[i])) for row in [head] + body) for i in range(len(head))]
    lines = []
    for row in [head] + body:
        cells = [str(c).ljust(w) if i < 2 else str(c).rjust(w) for i, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def run_ablation(cfg: RunConfig) -> tuple[Path, list[dict]]:
    rows = ablation_rows(cfg)
    root = cfg.output_root()
    cells = {}
    for r in rows:
        for seed in cfg.seeds:
            key = _cell_key(r["config"], seed)
            cells.setdefault(key, (r["config"], seed, str(root / "cells" / key)))
    jobs = list(cells.values())
    if cfg.ablate.jobs > 1:
        with ProcessPoolExecutor(cfg.ablate.jobs) as pool:
            list(pool.map(_train_cell, jobs))
    else:
        for job in jobs:
            _train_cell(job)

    h, data = load_data(cfg)
    table = []
    for r in rows:
        paths = [(s, Path(cells[_cell_key(r["config"], s)][2]) / "checkpoint.ldsg") for s in cfg.seeds]
        report = evaluate_checkpoints(r["config"], paths, r["scheme"], data=data)
        table.append({"name": r["name"], "scheme": r["scheme"], "hash": r["hash"], "seeds": list(cfg.seeds),
                      "per_seed": [{k: v for k, v in m.items() if k != "labelwise"} for m in report.per_seed],
                      "mean": report.mean, "train": r["config"].train.effective().to_dict()})
    out = root / f"ablate-{cfg.section_hash('train', 'synthetic', 'data', 'seeds', 'eval', 'ablate')}"
    _prepare(out, cfg)
    _write_json(out / "ablation.json", {"rows": table, "split": cfg.eval.split, "config": cfg.to_dict()})
    (out / "ablation.txt").write_text(format_table(table, h.depth), encoding="utf-8")
    return out, table


def cmd_ablate(cfg: RunConfig) -> Path:
    out, table = run_ablation(cfg)
    print((out / "ablation.txt").read_text(encoding="utf-8"), end="")
    print(f"{len(table)} rows written to {out}")
    return out


# --- entry point -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ldsgm", description="Label-dependence-aware sequence generation for hierarchical labels.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="JSON run config (defaults apply when omitted)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, e.g. train.lam=0.5 (repeatable)")
        s.add_argument("-v", "--verbose", action="store_true")
        return s

    s = add("synth", "generate a synthetic corpus")
    s.add_argument("--out", help="directory to write into instead of the hashed default")
    add("train", "train one model per configured seed")
    s = add("eval", "evaluate trained checkpoints")
    s.add_argument("--checkpoint", action="append", help="explicit checkpoint file (repeatable)")
    s = add("predict", "label paths for a JSONL file of argument pairs")
    s.add_argument("--input", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--scheme", choices=SCHEMES)
    s.add_argument("--out")
    s = add("gradcheck", "finite-difference check of the analytic gradients")
    s.add_argument("--corrupt", type=float, default=0.0, help=argparse.SUPPRESS)
    add("ablate", "variant grid and lambda sweep")
    return p


def _corruptor(scale):
    def hook(grads):
        return {k: g + scale for k, g in grads.items()}
    return hook


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "synth":
            cmd_synth(cfg, args.out)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, args.checkpoint)
        elif args.command == "predict":
            cmd_predict(cfg, args.input, args.checkpoint, args.out, args.scheme)
        elif args.command == "gradcheck":
            if not cmd_gradcheck(cfg, _corruptor(args.corrupt) if args.corrupt else None):
                return 2
        elif args.command == "ablate":
            cmd_ablate(cfg)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 1
    except (HierarchyError, CorpusError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, TrainingError, FileNotFoundError, OSError, FloatingPointError, ValueError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
