import numpy as np
import pytest

from osrkit.benchmark import benchmark_config, benchmark_split
from osrkit.data import SplitSpec, apply_split, gen_synthetic
from osrkit.errors import ConfigError, UsageError
from osrkit.losses import LossConfig
from osrkit.model import ModelConfig, init_model
from osrkit.numerics import Metric
from osrkit.train import (
    Adam,
    SGD,
    TrainConfig,
    cartesian_cells,
    desk_preset,
    gap_threshold_cells,
    margin_metric_cells,
    optimizer_step,
    paper_preset,
    sweep,
    train,
    variant_loss,
    weight_cells,
    write_history_csv,
    write_sweep_csv,
)


def small_split(seed=0):
    ds = gen_synthetic(4, 30, 5, 4.0, 0.8, seed=seed)
    return apply_split(ds, SplitSpec([0, 1], [2, 3]), 0.3, seed=seed)


def small_config(seed=0, epochs=3, **loss_kwargs):
    loss = LossConfig(**loss_kwargs) if loss_kwargs else LossConfig()
    return TrainConfig(
        model=ModelConfig([5, 8, 4], seed=seed),
        loss=loss,
        epochs=epochs,
        batch_size=8,
        learning_rate=1e-3,
        seed=seed,
    )


class TestOptimizers:
    def test_zero_gradients_leave_params(self):
        for opt in (SGD(0.1), Adam(0.1)):
            p = [np.array([1.0, -2.0]), np.array([[3.0]])]
            before = [a.copy() for a in p]
            opt.step(p, [np.zeros(2), np.zeros((1, 1))])
            for a, b in zip(p, before):
                np.testing.assert_array_equal(a, b)

    def test_sgd_definition(self):
        p = [np.array([0.0])]
        SGD(0.1).step(p, [np.array([1.0])])
        assert p[0][0] == pytest.approx(-0.1, abs=1e-15)

    def test_adam_first_step_magnitude(self):
        # bias-corrected first step has magnitude ~lr regardless of |g|
        for g in (1e-3, 1.0, 1e3):
            p = [np.array([0.0])]
            Adam(0.01).step(p, [np.array([g])])
            assert abs(p[0][0]) == pytest.approx(0.01, abs=1e-6)
            assert p[0][0] < 0

    def test_shape_mismatch(self):
        with pytest.raises(UsageError):
            SGD(0.1).step([np.zeros(2)], [np.zeros(3)])
        with pytest.raises(UsageError):
            Adam(0.1).step([np.zeros(2)], [np.zeros(3), np.zeros(1)])

    def test_optimizer_step_projects_margins(self):
        emb, bank = init_model(ModelConfig([3, 2], seed=0), 2)
        bank.margins[:] = [0.05, 0.0]
        grads = [np.zeros_like(a) for a in (*emb.weights, *emb.biases)]
        grads += [np.zeros_like(bank.points), np.array([1.0, 1.0])]
        optimizer_step(SGD(1.0), emb, bank, grads)
        # raw update would be [-0.95, -1.0]; projection clamps to zero
        np.testing.assert_array_equal(bank.margins, [0.0, 0.0])


class TestTrain:
    def test_zero_epochs_returns_initialized_model(self):
        split = small_split()
        cfg = small_config(epochs=0)
        emb, bank, history = train(split, cfg)
        emb0, bank0 = init_model(cfg.model, split.num_known)
        for a, b in zip(emb.weights, emb0.weights):
            assert (a == b).all()
        assert (bank.points == bank0.points).all()
        assert len(history) == 0

    def test_bit_deterministic(self):
        split = small_split()
        r1 = train(split, small_config(epochs=4))
        r2 = train(split, small_config(epochs=4))
        for a, b in zip(r1[0].weights, r2[0].weights):
            assert a.tobytes() == b.tobytes()
        assert r1[1].points.tobytes() == r2[1].points.tobytes()
        assert r1[1].margins.tobytes() == r2[1].margins.tobytes()
        for ra, rb in zip(r1[2].records, r2[2].records):
            assert np.array_equal(
                np.array([ra.epoch, ra.total, ra.classification, ra.margin,
                          ra.overconfidence, ra.val_accuracy]),
                np.array([rb.epoch, rb.total, rb.classification, rb.margin,
                          rb.overconfidence, rb.val_accuracy]),
                equal_nan=True,
            )

    def test_history_identity_and_margins(self):
        split = small_split()
        cfg = small_config(epochs=5, alpha=0.2, beta=0.3, gap_threshold=0.1)
        emb, bank, history = train(split, cfg)
        assert len(history) == 5
        for r in history.records:
            expected = r.classification + 0.2 * r.margin + 0.3 * r.overconfidence
            assert r.total == pytest.approx(expected, abs=1e-12)
        assert (bank.margins >= 0).all()

    def test_training_makes_progress_on_benchmark(self):
        split = benchmark_split(seed=0)
        cfg = benchmark_config("full", seed=0)
        _, _, history = train(split, cfg)
        assert history.records[-1].classification < history.records[0].classification

    def test_input_dim_mismatch(self):
        split = small_split()
        cfg = small_config()
        cfg.model.layer_dims[0] = 7
        with pytest.raises(ConfigError):
            train(split, cfg)

    def test_val_accuracy_recorded_on_schedule(self):
        split = small_split()
        cfg = small_config(epochs=5)
        cfg.eval_every = 2
        _, _, history = train(split, cfg)
        evaluated = [i for i, r in enumerate(history.records) if not np.isnan(r.val_accuracy)]
        assert evaluated == [1, 3, 4]  # every 2nd epoch plus the last

    def test_history_csv(self, tmp_path):
        split = small_split()
        _, _, history = train(split, small_config(epochs=2))
        path = tmp_path / "history.csv"
        write_history_csv(path, history)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,total,cls,amc,coc,val_acc"
        assert len(lines) == 3


class TestPresets:
    def test_paper_preset_values(self):
        cfg = paper_preset(ModelConfig([4, 2], seed=0))
        assert (cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.optimizer) == (
            90, 64, 1e-5, "adam",
        )

    def test_desk_preset_values(self):
        cfg = desk_preset(ModelConfig([4, 2], seed=0))
        assert (cfg.epochs, cfg.batch_size, cfg.learning_rate) == (200, 32, 1e-3)

    def test_variant_arms_expressible_via_config_only(self):
        full = variant_loss("full")
        assert full.classification_metric is Metric.ANGULAR and full.beta > 0
        eucl = variant_loss("euclidean")
        assert eucl.classification_metric is Metric.EUCLIDEAN and eucl.beta > 0
        uncal = variant_loss("uncalibrated")
        assert uncal.classification_metric is Metric.ANGULAR and uncal.beta == 0.0

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            variant_loss("bogus")


class TestSweep:
    def test_preset_grids_have_published_row_counts(self):
        assert len(gap_threshold_cells()) == 5
        assert len(weight_cells()) == 7
        assert len(margin_metric_cells()) == 4

    def test_cartesian_order(self):
        cells = cartesian_cells({"a": [1, 2], "b": [10, 20]})
        assert cells == [
            {"a": 1, "b": 10},
            {"a": 1, "b": 20},
            {"a": 2, "b": 10},
            {"a": 2, "b": 20},
        ]

    def test_sweep_rows_and_determinism(self, tmp_path):
        split = small_split()
        base = small_config(epochs=2)
        cells = [{"gap_threshold": t} for t in (0.1, 0.5)]
        rows1 = sweep(base, cells, split)
        rows2 = sweep(base, cells, split)
        assert len(rows1) == 2
        p1, p2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        write_sweep_csv(p1, rows1)
        write_sweep_csv(p2, rows2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "gap_threshold,acc,auroc,oscr"

    def test_failed_cell_marks_row(self, tmp_path):
        split = small_split()
        base = small_config(epochs=1)
        rows = sweep(base, [{"tau": -1.0}, {"tau": 1.0}], split)
        assert rows[0].error is not None
        assert rows[1].error is None
        path = tmp_path / "s.csv"
        write_sweep_csv(path, rows)
        assert "error" in path.read_text().splitlines()[1]

    def test_unknown_parameter_rejected(self):
        split = small_split()
        with pytest.raises(ConfigError):
            sweep(small_config(epochs=1), [{"nonsense": 1}], split)

    def test_metric_cells_swap_margin_metric(self):
        split = small_split()
        base = small_config(epochs=1)
        rows = sweep(base, margin_metric_cells(), split)
        assert [r.overrides["margin_metric"] for r in rows] == [
            Metric.EUCLIDEAN, Metric.ANGULAR, Metric.MANHATTAN, Metric.CHEBYSHEV,
        ]
        assert all(r.error is None for r in rows)
