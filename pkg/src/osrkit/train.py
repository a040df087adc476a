"""Optimizers, the deterministic training loop, and the ablation sweep.

Training is bit-deterministic for a fixed (seed, config, split): batch
order comes from one seeded generator, batches run single-threaded, and
the last partial batch is kept. Margins are projected back to >= 0 after
every optimizer step.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable

import numpy as np

from .errors import ConfigError, NumericError, UsageError
from .evaluate import evaluate, predict_closed
from .losses import LossConfig, classification_logits, total_loss
from .model import Embedder, ModelConfig, ReciprocalBank, embed_backward, embed_forward, init_model
from .numerics import Metric


@dataclass
class TrainConfig:
    model: ModelConfig
    loss: LossConfig = field(default_factory=LossConfig)
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # adam | sgd
    seed: int = 0
    eval_every: int = 10

    def validate(self) -> None:
        self.model.validate()
        self.loss.validate()
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")


def paper_preset(model: ModelConfig, loss: LossConfig | None = None) -> TrainConfig:
    """Hyperparameters matching the published training recipe."""
    return TrainConfig(
        model=model, loss=loss or LossConfig(), epochs=90, batch_size=64,
        learning_rate=1e-5, optimizer="adam",
    )


def desk_preset(model: ModelConfig, loss: LossConfig | None = None) -> TrainConfig:
    """Fast defaults for small synthetic runs (the `paper` preset's learning
    rate underfits toy MLPs in any reasonable time)."""
    return TrainConfig(
        model=model, loss=loss or LossConfig(), epochs=200, batch_size=32,
        learning_rate=1e-3, optimizer="adam",
    )


def variant_loss(variant: str, base: LossConfig | None = None) -> LossConfig:
    """Named objective arms.

    - full: angular classification + margin + overconfidence hinge
    - euclidean: composite euclidean classification, other terms kept
    - uncalibrated: angular classification, overconfidence weight zeroed
    """
    cfg = base or LossConfig()
    if variant == "full":
        return replace(cfg, classification_metric=Metric.ANGULAR)
    if variant == "euclidean":
        return replace(cfg, classification_metric=Metric.EUCLIDEAN)
    if variant == "uncalibrated":
        return replace(cfg, classification_metric=Metric.ANGULAR, beta=0.0)
    raise ConfigError(f"unknown variant {variant!r}")


@dataclass
class EpochRecord:
    epoch: int
    total: float
    classification: float
    margin: float
    overconfidence: float
    val_accuracy: float  # nan when not evaluated this epoch


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


class SGD:
    def __init__(self, learning_rate: float):
        self.learning_rate = float(learning_rate)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _check_shapes(params, grads)
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    """Standard Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _check_shapes(params, grads)
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(self.m) != len(params) or any(
            m.shape != p.shape for m, p in zip(self.m, params)
        ):
            raise UsageError("optimizer state does not match parameter shapes")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _check_shapes(params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    if len(params) != len(grads):
        raise UsageError(f"{len(params)} params vs {len(grads)} grads")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise UsageError(f"param {i} shape {p.shape} != grad shape {g.shape}")


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return SGD(config.learning_rate)


def model_arrays(embedder: Embedder, bank: ReciprocalBank) -> list[np.ndarray]:
    """The trainable arrays, in a fixed order shared with gradient packing."""
    return [*embedder.weights, *embedder.biases, bank.points, bank.margins]


def optimizer_step(optimizer, embedder: Embedder, bank: ReciprocalBank,
                   grads: list[np.ndarray]) -> None:
    """One in-place update over all trainable arrays, then margin projection."""
    optimizer.step(model_arrays(embedder, bank), grads)
    bank.project_margins()


def _validation_accuracy(embedder, bank, dataset, loss_cfg: LossConfig) -> float:
    feats, _ = embed_forward(embedder, dataset.inputs)
    logits = classification_logits(feats, bank, loss_cfg.classification_metric, loss_cfg.tau)
    return float((predict_closed(logits) == dataset.labels).mean())


def train(split, config: TrainConfig) -> tuple[Embedder, ReciprocalBank, TrainHistory]:
    """Fit the embedder and bank on split.train; deterministic per config."""
    config.validate()
    k = split.num_known
    if config.model.layer_dims[0] != split.train.inputs.shape[1]:
        raise ConfigError(
            f"model input dim {config.model.layer_dims[0]} != "
            f"data dim {split.train.inputs.shape[1]}"
        )
    embedder, bank = init_model(config.model, k)
    optimizer = make_optimizer(config)
    rng = np.random.default_rng(int(config.seed))
    n = len(split.train)
    history = TrainHistory()
    alpha, beta = config.loss.alpha, config.loss.beta
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        sums = {"classification": 0.0, "margin": 0.0, "overconfidence": 0.0}
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            x = split.train.inputs[batch]
            y = split.train.labels[batch]
            feats, cache = embed_forward(embedder, x)
            out = total_loss(feats, bank, y, config.loss)
            if not np.isfinite(out.value):
                raise NumericError(
                    f"non-finite loss {out.value} at epoch {epoch}, batch {start // config.batch_size}"
                )
            egrads, _ = embed_backward(cache, out.grad_features)
            grads = [*egrads.weights, *egrads.biases, out.grad_points, out.grad_margins]
            optimizer_step(optimizer, embedder, bank, grads)
            for key in sums:
                sums[key] += out.parts[key] * len(batch)
        means = {key: sums[key] / n for key in sums}
        total = means["classification"] + alpha * means["margin"] + beta * means["overconfidence"]
        if (epoch + 1) % config.eval_every == 0 or epoch == config.epochs - 1:
            val_acc = _validation_accuracy(embedder, bank, split.test_known, config.loss)
        else:
            val_acc = float("nan")
        history.records.append(
            EpochRecord(epoch, total, means["classification"], means["margin"],
                        means["overconfidence"], val_acc)
        )
    return embedder, bank, history


def write_history_csv(path, history: TrainHistory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,total,cls,amc,coc,val_acc\n")
        for r in history.records:
            fh.write(
                f"{r.epoch},{r.total:.17g},{r.classification:.17g},{r.margin:.17g},"
                f"{r.overconfidence:.17g},{r.val_accuracy:.17g}\n"
            )


# ---------------------------------------------------------------------------
# Sweep harness


@dataclass
class SweepRow:
    overrides: dict[str, object]
    accuracy: float | None
    auroc: float | None
    oscr: float | None
    error: str | None = None


def cartesian_cells(grid: dict[str, Iterable]) -> list[dict[str, object]]:
    """Expand named value lists into override dicts, in deterministic order."""
    names = list(grid.keys())
    cells = []
    for combo in product(*(list(grid[n]) for n in names)):
        cells.append(dict(zip(names, combo)))
    return cells


def gap_threshold_cells() -> list[dict[str, object]]:
    """Five-point threshold sweep for the overconfidence hinge."""
    return [{"gap_threshold": t} for t in (0.0, 0.25, 0.5, 1.0, 2.0)]


def weight_cells() -> list[dict[str, object]]:
    """The seven (alpha, beta) combinations of the weight ablation."""
    combos = [(0.05, 0.05), (0.05, 0.1), (0.1, 0.05), (0.1, 0.1),
              (0.1, 0.5), (0.5, 0.1), (0.5, 0.5)]
    return [{"alpha": a, "beta": b} for a, b in combos]


def margin_metric_cells() -> list[dict[str, object]]:
    """All four distance metrics for the margin hinge."""
    return [{"margin_metric": m}
            for m in (Metric.EUCLIDEAN, Metric.ANGULAR, Metric.MANHATTAN, Metric.CHEBYSHEV)]


def _apply_overrides(config: TrainConfig, overrides: dict[str, object]) -> TrainConfig:
    loss_fields = {f.name for f in dataclasses.fields(LossConfig)}
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    model_fields = {f.name for f in dataclasses.fields(ModelConfig)}
    loss_over = {}
    train_over = {}
    model_over = {}
    for name, value in overrides.items():
        if name in loss_fields:
            loss_over[name] = value
        elif name in train_fields:
            train_over[name] = value
        elif name in model_fields:
            model_over[name] = value
        else:
            raise ConfigError(f"unknown sweep parameter {name!r}")
    cfg = replace(config, **train_over)
    if loss_over:
        cfg = replace(cfg, loss=replace(config.loss, **loss_over))
    if model_over:
        cfg = replace(cfg, model=replace(config.model, **model_over))
    return cfg


def sweep(base: TrainConfig, cells: list[dict[str, object]], split) -> list[SweepRow]:
    """Train and evaluate one run per cell; failures mark the row, not the run."""
    rows = []
    for overrides in cells:
        cfg = _apply_overrides(base, overrides)
        try:
            embedder, bank, _ = train(split, cfg)
            report = evaluate(embedder, bank, split, cfg.loss)
            rows.append(SweepRow(overrides, report.closed_accuracy, report.auroc, report.oscr))
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            rows.append(SweepRow(overrides, None, None, None, error=str(exc)))
    return rows


def _cell_value(v: object) -> str:
    if isinstance(v, Metric):
        return v.value
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    if not rows:
        raise UsageError("no sweep rows to write")
    names = list(rows[0].overrides.keys())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names + ["acc", "auroc", "oscr"]) + "\n")
        for row in rows:
            cells = [_cell_value(row.overrides[n]) for n in names]
            if row.error is not None:
                cells += ["error", "error", "error"]
            else:
                cells += [f"{row.accuracy:.17g}", f"{row.auroc:.17g}", f"{row.oscr:.17g}"]
            fh.write(",".join(cells) + "\n")
