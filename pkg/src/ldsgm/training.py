"""Mutual-learning objectives, the partitioned training loop and checkpoints."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import numerics as nx
from .corpus import Vocab, batches, build_vocab, encode_batch
from .decoder import LevelDistributions
from .encoder import EncoderConfig
from .evaluation import accuracy, index_to_names, predict_dataset
from .hierarchy import LabelHierarchy, from_document
from .model import LDSGM

log = logging.getLogger(__name__)

MAGIC = b"LDSG"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 15
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    min_count: int = 1
    no_mutual_learning: bool = False
    ensemble_eval: bool = False
    aux_updates_encoder: bool = False
    select_every_batch: bool = False
    patience: int | None = None
    model: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def effective(self) -> "TrainConfig":
        """Collapse equivalent settings: lam=0 means no mutual learning and vice versa."""
        no_ml = self.no_mutual_learning or self.lam == 0 or self.model.multitask_baseline
        return replace(self, no_mutual_learning=no_ml, lam=0.0 if no_ml else self.lam,
                       aux_updates_encoder=False if no_ml else self.aux_updates_encoder)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        model = d.pop("model", {})
        known = {f.name for f in fields(cls)} - {"model"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys {sorted(unknown)}")
        mknown = {f.name for f in fields(EncoderConfig)}
        if set(model) - mknown:
            raise ValueError(f"unknown model config keys {sorted(set(model) - mknown)}")
        return cls(model=EncoderConfig(**model), **d)

    def digest(self, include_seed=True) -> str:
        d = self.effective().to_dict()
        if not include_seed:
            d.pop("seed")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


class TrainingError(RuntimeError):
    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


# --- objectives --------------------------------------------------------------

def _objective(own: LevelDistributions, partner, gold, lam):
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    gold = np.asarray(gold).reshape(-1, len(own.probs))
    total = None
    for m, pred in enumerate(own.probs):
        term = nx.cross_entropy_onehot(pred, gold[:, m])
        if lam != 0 and partner is not None:
            target = nx.detach(partner.probs[m])
            term = term + lam * nx.kl_divergence(target, pred)
        total = term if total is None else total + term
    return nx.mean(total)


def loss_main(topdown: LevelDistributions, bottomup, gold, lam) -> nx.Tensor:
    """Sum over levels of CE(top-down) + lam * KL(bottom-up || top-down), batch mean.

    The bottom-up distribution is a constant target here.
    """
    return _objective(topdown, bottomup, gold, lam)


def loss_aux(topdown, bottomup: LevelDistributions, gold, lam) -> nx.Tensor:
    """Mirror of :func:`loss_main` for the auxiliary decoder."""
    return _objective(bottomup, topdown, gold, lam)


# --- checkpoints ------------------------------------------------------------

class CheckpointError(ValueError):
    pass


@dataclass
class CheckpointRecord:
    params: dict[str, np.ndarray]
    partitions: dict[str, str]
    config: dict
    epoch: int
    metrics: dict
    vocab: list[str]
    hierarchy: dict

    @classmethod
    def capture(cls, model: LDSGM, config: TrainConfig, vocab: Vocab, epoch, metrics):
        return cls(params=model.params.snapshot(),
                   partitions={n: model.params.partition_of(n) for n in model.params.names()},
                   config=config.to_dict(), epoch=epoch, metrics=metrics,
                   vocab=list(vocab.tokens), hierarchy=model.hierarchy.to_document())

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.config)

    def build(self):
        """Return ``(model, vocab, hierarchy)`` with the stored weights."""
        hierarchy = from_document(self.hierarchy)
        vocab = Vocab(self.vocab[4:])
        model = LDSGM(hierarchy, len(vocab), self.train_config().model, seed=0)
        model.params.load(self.params)
        return model, vocab, hierarchy


def save_checkpoint(record: CheckpointRecord, path):
    header = json.dumps({"config": record.config, "epoch": record.epoch, "metrics": record.metrics,
                         "vocab": record.vocab, "hierarchy": record.hierarchy},
                        sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header,
             struct.pack("<I", len(record.params))]
    for name, arr in record.params.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<BI", nx.PARTITIONS.index(record.partitions[name]), arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path) -> CheckpointRecord:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    version, hlen = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt)")
    try:
        pos = 12
        header = json.loads(body[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        params, partitions = {}, {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", body, pos)
            pos += 4
            name = body[pos:pos + nlen].decode("utf-8")
            pos += nlen
            part, ndim = struct.unpack_from("<BI", body, pos)
            pos += 5
            shape = struct.unpack_from(f"<{ndim}I", body, pos)
            pos += 4 * ndim
            n = int(np.prod(shape))
            params[name] = np.frombuffer(body, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
            partitions[name] = nx.PARTITIONS[part]
            pos += 8 * n
        if pos != len(body):
            raise CheckpointError(f"{path}: trailing bytes after parameter blobs")
    except (struct.error, ValueError, IndexError, UnicodeDecodeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return CheckpointRecord(params, partitions, header["config"], header["epoch"], header["metrics"],
                            header["vocab"], header["hierarchy"])


# --- training loop -----------------------------------------------------------

class Trainer:
    """Holds the model and both optimisers; one :meth:`step` per batch.

    Step 1 updates encoder and top-down decoder from :func:`loss_main`; step 2
    updates the auxiliary decoder from :func:`loss_aux`. Both objectives are
    evaluated on the same forward pass.
    """

    def __init__(self, model: LDSGM, config: TrainConfig, rng=None):
        self.model = model
        self.config = config.effective()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        c = self.config
        self.use_aux = not c.no_mutual_learning
        self.main_params = model.params.tensors(("encoder", "decoder"))
        aux_parts = ("encoder", "aux_decoder") if c.aux_updates_encoder else ("aux_decoder",)
        self.aux_params = model.params.tensors(aux_parts)
        self.adam_main = nx.AdamState(c.lr, c.beta1, c.beta2, c.adam_eps)
        self.adam_aux = nx.AdamState(c.lr, c.beta1, c.beta2, c.adam_eps)

    def losses(self, batch, training=True):
        """Forward pass under the current tape; returns ``(loss_main, loss_aux | None)``."""
        m, c = self.model, self.config
        encoded = m.encode(batch, training=training, rng=self.rng)
        if c.model.multitask_baseline:
            return loss_main(m.multitask(encoded), None, batch.gold, 0.0), None
        td = m.topdown(encoded, batch.gold)
        if not self.use_aux:
            return loss_main(td, None, batch.gold, 0.0), None
        bu = m.bottomup(encoded, batch.gold)
        return loss_main(td, bu, batch.gold, c.lam), loss_aux(td, bu, batch.gold, c.lam)

    def gradients(self, batch):
        with nx.GradientTape(persistent=True) as tape:
            lm, la = self.losses(batch)
        grads_main = tape.backward(lm, self.main_params)
        grads_aux = tape.backward(la, self.aux_params) if la is not None else None
        return lm, la, grads_main, grads_aux

    def step(self, batch) -> tuple[float, float | None]:
        lm, la, gm, ga = self.gradients(batch)
        values = (float(lm.data), None if la is None else float(la.data))
        if not all(math.isfinite(v) for v in values if v is not None):
            raise FloatingPointError(f"non-finite loss {values}")
        self.update_main(gm)
        if ga is not None:
            self.update_aux(ga)
        return values

    def update_main(self, grads):
        nx.adam_step(self.adam_main, self.main_params, grads)

    def update_aux(self, grads):
        nx.adam_step(self.adam_aux, self.aux_params, grads)


def agreement_kl(model: LDSGM, dataset, vocab, batch_size=256) -> float:
    """Mean over instances and levels of KL(bottom-up || top-down) in inference mode."""
    total, count = 0.0, 0
    for s in range(0, len(dataset), batch_size):
        batch = encode_batch(dataset[s:s + batch_size], vocab, None, model.config.max_arg_len)
        encoded = model.encode(batch)
        td, bu = model.topdown(encoded), model.bottomup(encoded)
        for p, q in zip(bu.probs, td.probs):
            total += float(nx.kl_divergence(p, q).data.sum())
            count += len(batch)
    return total / count


def validate(model: LDSGM, dataset, vocab, with_kl: bool) -> dict:
    idx, _ = predict_dataset(model, dataset, vocab)
    preds = index_to_names(idx, model.hierarchy)
    golds = [inst.gold_path for inst in dataset]
    accs = [accuracy(preds, golds, m) for m in range(1, model.hierarchy.depth + 1)]
    out = {"accuracy": accs, "mean_accuracy": float(np.mean(accs))}
    out["kl"] = agreement_kl(model, dataset, vocab) if with_kl else None
    return out


def _dump_state(trainer: Trainer, epoch, batch_index, exc, dump_path):
    state = {"epoch": epoch, "batch": batch_index, "error": str(exc),
             "param_norms": {t.name: float(np.linalg.norm(t.data)) if np.all(np.isfinite(t.data)) else None
                             for t in trainer.model.params.tensors()},
             "adam_steps": [trainer.adam_main.step, trainer.adam_aux.step]}
    if dump_path is not None:
        with open(dump_path, "w", encoding="utf-8") as fh:
            json.dump(state, fh, indent=2, sort_keys=True)
    return state


def train(config: TrainConfig, train_set, valid_set, hierarchy: LabelHierarchy, vocab: Vocab | None = None,
          log_path=None, dump_path=None, on_epoch=None):
    """Run mutual-learning training; return ``(best CheckpointRecord, epoch log)``.

    Model selection keeps the checkpoint with the best mean per-level
    validation accuracy (once per epoch, or per batch with
    ``select_every_batch``).
    """
    if not train_set or not valid_set:
        raise ValueError("training and validation sets must be nonempty")
    cfg = config.effective()
    vocab = vocab or build_vocab(train_set, cfg.min_count)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    model = LDSGM(hierarchy, len(vocab), cfg.model, seed=int(seeds[0].generate_state(1)[0]))
    trainer = Trainer(model, cfg, rng=np.random.default_rng(seeds[1]))
    with_kl = trainer.use_aux

    best, best_score, stale, history = None, -math.inf, 0, []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None

    def consider(epoch, metrics):
        nonlocal best, best_score
        if metrics["mean_accuracy"] > best_score:
            best_score = metrics["mean_accuracy"]
            best = CheckpointRecord.capture(model, cfg, vocab, epoch, metrics)
            return True
        return False

    try:
        for epoch in range(1, cfg.epochs + 1):
            sums, n_batches, improved = [0.0, 0.0], 0, False
            for bi, chunk in enumerate(batches(train_set, cfg.batch_size, cfg.seed, epoch)):
                batch = encode_batch(chunk, vocab, hierarchy, cfg.model.max_arg_len)
                try:
                    lm, la = trainer.step(batch)
                except FloatingPointError as exc:
                    state = _dump_state(trainer, epoch, bi, exc, dump_path)
                    raise TrainingError(f"non-finite values at epoch {epoch}, batch {bi}: {exc}", state) from exc
                sums[0] += lm
                sums[1] += la or 0.0
                n_batches += 1
                if cfg.select_every_batch:
                    improved |= consider(epoch, validate(model, valid_set, vocab, False))
            metrics = validate(model, valid_set, vocab, with_kl)
            improved |= consider(epoch, metrics)
            entry = {"epoch": epoch, "train_loss_main": sums[0] / n_batches,
                     "train_loss_aux": sums[1] / n_batches if with_kl else None,
                     "valid_accuracy": metrics["accuracy"], "valid_mean_accuracy": metrics["mean_accuracy"],
                     "valid_kl": metrics["kl"], "best": improved}
            history.append(entry)
            log.info("epoch %d loss %.4f valid %.4f", epoch, entry["train_loss_main"], metrics["mean_accuracy"])
            if log_fh:
                log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
                log_fh.flush()
            if on_epoch is not None:
                on_epoch(entry, model)
            stale = 0 if improved else stale + 1
            if cfg.patience is not None and stale >= cfg.patience:
                break
    finally:
        if log_fh:
            log_fh.close()
    return best, history


def check_gradients(model: LDSGM, batch, config: TrainConfig, h=1e-5, coords_per_param=6, seed=0,
                    grad_hook=None, tol=1e-4) -> nx.GradCheckResult:
    """Finite-difference check of both objectives over every partition they update.

    Each objective sees its partner's distributions as constants, exactly what
    the detach in the objective means, so the partner is frozen at its current
    value while the objective's own parameters are perturbed. Dropout is off.
    """
    cfg = config.effective()
    m = model
    gold = batch.gold

    def frozen(d):
        return LevelDistributions([nx.Tensor(p.data) for p in d.probs], d.direction)

    if cfg.model.multitask_baseline:
        checks = [(lambda: loss_main(m.multitask(m.encode(batch)), None, gold, 0.0), ("encoder", "decoder"))]
    else:
        encoded = m.encode(batch)
        td, bu = frozen(m.topdown(encoded, gold)), frozen(m.bottomup(encoded, gold))
        lam = cfg.lam
        aux_parts = ("encoder", "aux_decoder") if cfg.aux_updates_encoder else ("aux_decoder",)
        checks = [
            (lambda: loss_main(m.topdown(m.encode(batch), gold), bu, gold, lam), ("encoder", "decoder")),
            (lambda: loss_aux(td, m.bottomup(m.encode(batch), gold), gold, max(lam, 0.0)), aux_parts),
        ]
        if cfg.no_mutual_learning:
            # aux decoder is never trained without mutual learning; still verify its CE gradient
            checks[1] = (lambda: loss_aux(td, m.bottomup(m.encode(batch), gold), gold, 0.0), ("aux_decoder",))

    results = [nx.finite_diff_check(fn, m.params.tensors(parts), h=h, coords_per_param=coords_per_param,
                                    seed=seed + i, grad_hook=grad_hook, tol=tol)
               for i, (fn, parts) in enumerate(checks)]
    worst = max(results, key=lambda r: r.max_rel_error)
    per_param = {}
    for r in results:
        for k, v in r.per_param.items():
            per_param[k] = max(per_param.get(k, 0.0), v)
    return nx.GradCheckResult(worst.max_rel_error, worst.worst_param, worst.worst_index,
                              sum(r.checked for r in results), sum(r.skipped for r in results),
                              sum(r.unresolved for r in results), per_param)
