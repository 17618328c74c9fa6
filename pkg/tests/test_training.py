import numpy as np
import pytest
import torch

from errors import ArchitectureMismatchError, ChecksumError, FormatError, InputDomainError, NonFiniteError
from model import ARCHITECTURES, LrSchedule, TrainConfig
from neuralops.factory import build_model
from neuralops.gradients import loss_and_grad
from training.checkpoint import load_checkpoint, read_checkpoint_header, save_checkpoint
from training.optimizer import AdamState, adam_step
from training.record import EpochRow, TrainRecord, read_record
from training.schedule import lr_at
from training.trainer import ConvergenceMonitor, dataset_tensors, train


def scalar_tree(value):
    return {"p": torch.tensor([value], dtype=torch.float64)}


def tiny_config(tiny_dims, **overrides):
    fields = dict(
        architecture="deeponet",
        seed=0,
        batch_size=4,
        max_epochs=4,
        dims=tiny_dims,
        schedule=LrSchedule(initial=1e-3, peak=5e-3, end=1e-4, cycles=1, horizon=1000),
    )
    fields.update(overrides)
    return TrainConfig(**fields)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params, grads = scalar_tree(1.0), scalar_tree(2.0)
        new, state = adam_step(params, grads, AdamState.zeros_like(params), lr=0.1)
        assert new["p"].item() == pytest.approx(0.9, abs=1e-9)
        assert state.t == 1
        assert params["p"].item() == 1.0

    def test_state_is_not_mutated(self):
        params = scalar_tree(1.0)
        state = AdamState.zeros_like(params)
        adam_step(params, scalar_tree(3.0), state, lr=0.1)
        assert state.t == 0 and state.m["p"].item() == 0.0 and state.v["p"].item() == 0.0

    def test_update_is_nearly_scale_invariant(self):
        def trajectory(c):
            p = scalar_tree(1.0)
            state = AdamState.zeros_like(p)
            path = []
            for _ in range(100):
                g = {"p": c * 1e3 * p["p"]}
                p, state = adam_step(p, g, state, lr=0.01)
                path.append(p["p"].item())
            return np.array(path)

        assert np.max(np.abs(trajectory(1.0) - trajectory(10.0))) < 1e-9

    def test_bad_inputs(self):
        params = scalar_tree(1.0)
        state = AdamState.zeros_like(params)
        with pytest.raises(InputDomainError):
            adam_step(params, scalar_tree(1.0), state, lr=0.0)
        with pytest.raises(InputDomainError):
            adam_step(params, {"q": torch.zeros(1, dtype=torch.float64)}, state, lr=0.1)
        with pytest.raises(NonFiniteError):
            adam_step(params, scalar_tree(float("nan")), state, lr=0.1)


class TestSchedule:
    @pytest.mark.parametrize(
        "epoch, expected",
        [(0, 1e-4), (3750, 1.55e-3), (7500, 3e-3), (25_000, 5e-6), (32_500, 2.1e-3)],
    )
    def test_examples(self, epoch, expected):
        assert lr_at(LrSchedule(), epoch) == pytest.approx(expected, rel=1e-12)

    def test_cycle_ends_near_floor(self):
        assert lr_at(LrSchedule(), 24_999) == pytest.approx(5e-6, rel=1e-3)

    def test_epochs_outside_horizon(self):
        with pytest.raises(InputDomainError):
            lr_at(LrSchedule(), 100_000)
        with pytest.raises(InputDomainError):
            lr_at(LrSchedule(), -1)


class TestConvergenceMonitor:
    def test_needs_two_windows(self):
        monitor = ConvergenceMonitor(2, 1e-3)
        assert not any(monitor.update(v) for v in (1.0, 1.0, 1.0))
        assert monitor.update(1.0)

    def test_keeps_going_while_improving(self):
        monitor = ConvergenceMonitor(2, 1e-3, history=[4.0, 4.0, 1.0])
        assert not monitor.update(1.0)


def test_record_round_trip(tmp_path):
    path = tmp_path / "train_record.csv"
    record = TrainRecord(path)
    rows = [EpochRow(0, 0.5, 0.9, 1e-4, 0.01), EpochRow(1, 0.25, 0.7, 2e-4, 0.01)]
    for row in rows:
        record.append(row)
    loaded = read_record(path)
    assert [r.rel_l2 for r in loaded] == [0.9, 0.7]
    assert loaded[1].lr == 2e-4
    with pytest.raises(ValueError):
        record.append(EpochRow(1, 0.1, 0.1, 1e-4, 0.0))


class TestCheckpoint:
    def test_round_trip(self, tmp_path, tiny_dims):
        model = build_model("fno_pose", tiny_dims, seed=7)
        params = {n: p.detach() for n, p in model.named_parameters()}
        grads = {n: torch.ones_like(p) for n, p in params.items()}
        _, adam = adam_step(params, grads, AdamState.zeros_like(params), lr=1e-3)

        path = save_checkpoint(tmp_path / "m.ckpt", model, adam, epoch=3, history=[0.5, 0.4])
        ckpt = load_checkpoint(path, "fno_pose")
        assert ckpt.epoch == 3 and ckpt.history == [0.5, 0.4]
        assert ckpt.adam.t == 1
        for (name, p), (_, q) in zip(model.named_parameters(), ckpt.model.named_parameters()):
            assert torch.equal(p, q)
            assert torch.equal(adam.v[name], ckpt.adam.v[name])
        assert read_checkpoint_header(path)["architecture"] == "fno_pose"

    def test_architecture_mismatch(self, tmp_path, tiny_dims):
        path = save_checkpoint(tmp_path / "m.ckpt", build_model("deeponet", tiny_dims))
        with pytest.raises(ArchitectureMismatchError):
            load_checkpoint(path, "deeponet_pose")

    def test_corruption_is_detected(self, tmp_path, tiny_dims):
        path = save_checkpoint(tmp_path / "m.ckpt", build_model("deeponet", tiny_dims))
        data = bytearray(path.read_bytes())
        data[-10] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_inference_only_checkpoint_cannot_resume(self, tmp_path, tiny_dims, tiny_dataset):
        path = save_checkpoint(tmp_path / "m.ckpt", build_model("deeponet", tiny_dims), epoch=2)
        ckpt = load_checkpoint(path)
        assert ckpt.adam is None
        with pytest.raises(FormatError):
            train(build_model("deeponet", tiny_dims), tiny_dataset, tiny_config(tiny_dims), resume=ckpt)


def test_training_rejects_bad_setups(tiny_dims, tiny_dataset):
    model = build_model("deeponet", tiny_dims)
    with pytest.raises(InputDomainError):
        train(model, tiny_dataset, tiny_config(tiny_dims), train_idx=[])
    with pytest.raises(InputDomainError):
        train(model, tiny_dataset, tiny_config(tiny_dims, max_epochs=1001))
    with pytest.raises(InputDomainError):
        train(model, tiny_dataset.with_split([], []), tiny_config(tiny_dims))


def test_training_writes_record_and_checkpoint(tmp_path, tiny_dims, tiny_dataset):
    cfg = tiny_config(tiny_dims, architecture="fno", checkpoint_every=2)
    result = train(build_model("fno", tiny_dims), tiny_dataset, cfg, out_dir=tmp_path)
    assert result.epochs == 4 and not result.stopped_early
    assert [r.epoch for r in read_record(tmp_path / "train_record.csv")] == [0, 1, 2, 3]
    assert load_checkpoint(result.checkpoint, "fno").epoch == 4


@pytest.mark.parametrize("dropout", [0.0, 0.2])
def test_resumed_training_matches_uninterrupted(tmp_path, tiny_dims, tiny_dataset, dropout):
    cfg = tiny_config(tiny_dims, architecture="deeponet_pose", dropout=dropout)
    straight = train(build_model("deeponet_pose", tiny_dims), tiny_dataset, cfg)

    first = train(
        build_model("deeponet_pose", tiny_dims), tiny_dataset, cfg.model_copy(update={"max_epochs": 2}), out_dir=tmp_path
    )
    ckpt = load_checkpoint(first.checkpoint, "deeponet_pose")
    resumed = train(build_model("deeponet_pose", tiny_dims), tiny_dataset, cfg, resume=ckpt)

    assert resumed.epochs == 4
    assert resumed.record.rel_l2 == straight.record.rel_l2[2:]
    for p, q in zip(straight.model.parameters(), resumed.model.parameters()):
        assert torch.equal(p, q)


def test_same_seed_trains_identically(tiny_dims, tiny_dataset):
    cfg = tiny_config(tiny_dims, architecture="fno_pose")
    a = train(build_model("fno_pose", tiny_dims), tiny_dataset, cfg)
    b = train(build_model("fno_pose", tiny_dims), tiny_dataset, cfg)
    assert a.record.rel_l2 == b.record.rel_l2


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_small_learning_rate_descends_on_a_frozen_batch(arch, tiny_dims, tiny_dataset):
    model = build_model(arch, tiny_dims, seed=1)
    batch = dataset_tensors(tiny_dataset).take(np.asarray(tiny_dataset.train_idx[:6]))
    adam = AdamState.zeros_like({name: p.detach() for name, p in model.named_parameters()})

    losses = []
    for _ in range(50):
        loss, _, grads = loss_and_grad(model, batch)
        losses.append(float(loss))
        params = {name: p.detach() for name, p in model.named_parameters()}
        new_params, adam = adam_step(params, grads, adam, lr=1e-5)
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(new_params[name])

    assert all(np.isfinite(losses))
    assert losses[-1] < losses[0]


@pytest.mark.slow
@pytest.mark.parametrize("arch, epochs", [("deeponet", 5000), ("fno", 1500)])
def test_network_overfits_eight_designs(arch, epochs, tiny_dataset):
    # 주기 하나가 학습 전체를 덮도록 horizon = 4 × epochs
    cfg = TrainConfig(
        architecture=arch,
        batch_size=8,
        max_epochs=epochs,
        stop_threshold=1e-12,
        schedule=LrSchedule(horizon=4 * epochs),
    )
    train_idx = np.asarray(tiny_dataset.train_idx[:8])
    result = train(build_model(arch, cfg.dims, seed=0), tiny_dataset, cfg, train_idx=train_idx)
    assert min(result.record.rel_l2) < 0.01
