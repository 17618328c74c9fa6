import numpy as np
import pytest
import torch
from torch.func import functional_call

from dataset.normalization import normalize_design
from errors import FrameDegeneracyError, InputDomainError
from model import ARCHITECTURES, ModelDims
from neuralops.factory import build_model, count_parameters, predict_tendon_curves, predict_tendons
from neuralops.frames import gram_schmidt_frame, pose_from_frames, pose_outputs_to_tendons, pose_to_tendons
from neuralops.gradients import TensorBatch, grad, loss_and_grad
from neuralops.layers import FourierLayer, Mlp, apply_dropout
from neuralops.losses import loss_pose, loss_tendon
from rodmodel.shooting import solve_equilibrium
from tests.conftest import make_design


def t(x):
    return torch.as_tensor(np.asarray(x), dtype=torch.float64)


def small_batch(n_designs=3, n_nodes=8, seed=0) -> TensorBatch:
    rng = np.random.default_rng(seed)
    designs = np.stack(
        [
            make_design(
                tensions=rng.uniform(0, 2, 4), offsets=rng.uniform(0.005, 0.01, 4), pitches=rng.uniform(-5, 5, 4)
            ).to_array()
            for _ in range(n_designs)
        ]
    )
    s = np.linspace(0.0, 1.0, n_nodes)[None, :] * designs[:, 13:14]
    targets = rng.normal(scale=0.01, size=(n_designs, n_nodes, 12))
    return TensorBatch.from_arrays(normalize_design(designs), designs, s, targets)


def mlp_layout(sizes):
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


class TestParameterCounts:
    def test_deeponet_layout(self):
        for arch, c in (("deeponet", 12), ("deeponet_pose", 9)):
            branch = mlp_layout([15, 64, 64, 64, 64, 100 * c])
            trunk = mlp_layout([1, 128, 128, 128, 128, 100 * c])
            assert count_parameters(build_model(arch)) == branch + trunk

    def test_fno_layout(self):
        for arch, c in (("fno", 12), ("fno_pose", 9)):
            expected = (16 * 128 + 128) + 5 * (2 * 5 * 128 * 128 + 128 * 128 + 128) + (128 * c + c)
            assert count_parameters(build_model(arch)) == expected

    def test_default_counts(self):
        counts = {arch: count_parameters(build_model(arch)) for arch in ARCHITECTURES}
        assert counts == {"deeponet": 296_096, "deeponet_pose": 237_896, "fno": 905_484, "fno_pose": 905_097}
        assert counts["fno"] - counts["fno_pose"] == 387


def test_unknown_architecture_is_rejected():
    with pytest.raises(InputDomainError):
        build_model("transformer")


def test_same_seed_gives_same_initialization(tiny_dims):
    a, b = build_model("fno", tiny_dims, seed=4), build_model("fno", tiny_dims, seed=4)
    c = build_model("fno", tiny_dims, seed=5)
    for (_, pa), (_, pb), (_, pc) in zip(a.named_parameters(), b.named_parameters(), c.named_parameters()):
        assert torch.equal(pa, pb)
    assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_output_shapes(arch, tiny_dims):
    model = build_model(arch, tiny_dims)
    batch = small_batch()
    out = model(batch.d_norm, batch.s)
    assert out.shape == (3, 8, 9 if arch.endswith("_pose") else 12)
    assert out.dtype == torch.float64


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_gradients_match_finite_differences(arch, tiny_dims):
    model = build_model(arch, tiny_dims, seed=1)
    batch = small_batch(seed=2)
    grads = grad(model, batch)

    h = 1e-6
    checked = 0
    for name, param in model.named_parameters():
        flat = param.data.view(-1)
        for k in (0, flat.numel() // 2, flat.numel() - 1):
            orig = flat[k].item()
            flat[k] = orig + h
            up = loss_and_grad(model, batch)[0].item()
            flat[k] = orig - h
            down = loss_and_grad(model, batch)[0].item()
            flat[k] = orig
            fd = (up - down) / (2 * h)
            g = grads[name].view(-1)[k].item()
            assert abs(fd - g) <= 1e-6 * max(1.0, abs(g)) + 1e-9, name
            checked += 1
    assert checked == 3 * len(list(model.parameters()))


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_gradcheck_through_output_layer(arch, tiny_dims):
    model = build_model(arch, tiny_dims, seed=6)
    batch = small_batch(n_designs=2)
    name, param = list(model.named_parameters())[-1]

    def loss_of(w):
        out = functional_call(model, {name: w}, (batch.d_norm, batch.s))
        if model.is_pose:
            out = pose_outputs_to_tendons(out, batch.designs, batch.s, strict=False)
        return loss_tendon(out, batch.targets)

    assert torch.autograd.gradcheck(loss_of, (param.detach().clone().requires_grad_(True),))


def test_gradient_tree_matches_parameters(tiny_dims):
    model = build_model("deeponet", tiny_dims)
    grads = grad(model, small_batch())
    assert list(grads) == [name for name, _ in model.named_parameters()]
    assert all(grads[name].shape == p.shape for name, p in model.named_parameters())


def test_loss_scale_scales_gradients(tiny_dims):
    model = build_model("deeponet_pose", tiny_dims)
    batch = small_batch()
    plain, scaled = grad(model, batch), grad(model, batch, scale=8.0)
    for name in plain:
        assert torch.allclose(scaled[name], 8.0 * plain[name], rtol=1e-12, atol=0.0)


def test_deeponet_matches_explicit_inner_products(tiny_dims):
    model = build_model("deeponet", tiny_dims, seed=3)
    batch = small_batch()
    out = model(batch.d_norm, batch.s)

    coeff = model.encode(batch.d_norm)
    basis = model.trunk_basis(batch.s)
    for b in range(coeff.shape[0]):
        for j in range(batch.s.shape[1]):
            for k in range(model.channels):
                value = sum(coeff[b, k, l] * basis[b, j, k, l] for l in range(model.basis))
                assert abs(out[b, j, k].item() - value.item()) < 1e-12


def test_deeponet_is_pointwise_in_arclength(tiny_dims):
    model = build_model("deeponet", tiny_dims)
    design = make_design(tensions=(1.0, 0.0, 0.5, 0.0))
    fine = np.linspace(0.0, 0.2, 81)
    coarse = fine[::4]
    a = predict_tendon_curves(model, design, fine)
    b = predict_tendon_curves(model, design, coarse)
    assert a.shape == (4, 81, 3)
    assert np.allclose(a[:, ::4], b, atol=1e-12)


def test_fno_needs_enough_nodes(tiny_dims):
    model = build_model("fno", tiny_dims)
    batch = small_batch(n_nodes=2 * tiny_dims.fno_modes - 1)
    with pytest.raises(InputDomainError):
        model(batch.d_norm, batch.s)


def test_fno_rejects_uneven_query_grid(tiny_dims):
    model = build_model("fno", tiny_dims)
    with pytest.raises(InputDomainError):
        predict_tendon_curves(model, make_design(), [0.0, 0.01, 0.05, 0.1, 0.15, 0.2])


def test_spectral_path_matches_direct_transform():
    gen = torch.Generator().manual_seed(0)
    layer = FourierLayer(width=4, modes=3, generator=gen)
    x = torch.randn(2, 10, 4, generator=gen, dtype=torch.float64)
    got = layer.spectral_path(x).detach().numpy()

    xn = x.numpy()
    n = xn.shape[1]
    W = layer.spectral.detach().numpy()
    W = W[..., 0] + 1j * W[..., 1]
    j = np.arange(n)
    expected = np.zeros_like(xn)
    for k in range(layer.modes):
        X = np.einsum("bji,j->bi", xn, np.exp(-2j * np.pi * j * k / n))
        Y = np.einsum("bi,io->bo", X, W[k])
        wave = np.exp(2j * np.pi * j * k / n)
        term = np.real(Y[:, None, :] * wave[None, :, None])
        expected += term / n if k == 0 else 2.0 * term / n
    assert np.max(np.abs(got - expected)) < 1e-10


def test_mlp_requires_two_widths():
    with pytest.raises(InputDomainError):
        Mlp([3])


def test_gram_schmidt_examples():
    frame = gram_schmidt_frame(t([2.0, 0.0, 0.0]), t([1.0, 3.0, 0.0]))
    assert torch.allclose(frame, torch.eye(3, dtype=torch.float64), atol=1e-15)

    tilted = gram_schmidt_frame(t([[0.0, 0.0, 5.0]]), t([[1.0, 0.0, 1.0]]))
    assert torch.allclose(tilted[0, :, 1], t([1.0, 0.0, 0.0]), atol=1e-15)
    assert torch.allclose(tilted[0].T @ tilted[0], torch.eye(3, dtype=torch.float64), atol=1e-14)
    assert torch.linalg.det(tilted[0]).item() == pytest.approx(1.0)


def test_gram_schmidt_degenerate_inputs():
    with pytest.raises(FrameDegeneracyError):
        gram_schmidt_frame(t([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]), t([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]))
    with pytest.raises(FrameDegeneracyError):
        gram_schmidt_frame(t([1.0, 0.0, 0.0]), t([2.0, 0.0, 0.0]))

    soft = gram_schmidt_frame(t([0.0, 0.0, 0.0]), t([0.0, 1.0, 0.0]), strict=False)
    assert torch.isfinite(soft).all()


def test_pose_reconstruction_of_straight_rod():
    design = make_design(offsets=0.01)
    designs = t(design.to_array()[None])
    s = t([[0.0, 0.1]])
    frames = torch.eye(3, dtype=torch.float64).expand(1, 2, 3, 3)
    curves = pose_to_tendons(torch.zeros(1, 2, 3, dtype=torch.float64), frames, designs, s)
    expected = t([0.01, 0.0, 0.0, 0.0, 0.01, 0.0, -0.01, 0.0, 0.0, 0.0, -0.01, 0.0])
    assert torch.allclose(curves[0, 0], expected, atol=1e-15)

    shift = t([0.1, -0.2, 0.3])
    moved = pose_to_tendons(shift.expand(1, 2, 3), frames, designs, s)
    assert torch.allclose(moved - curves, shift.repeat(4).expand(1, 2, 12), atol=1e-15)


def test_pose_reconstruction_matches_solver(helical_design):
    eq = solve_equilibrium(helical_design)
    designs = t(helical_design.to_array()[None])
    curves = pose_to_tendons(t(eq.backbone[None]), t(eq.frames[None]), designs, t(eq.arclengths[None]))
    assert np.max(np.abs(curves[0].numpy() - eq.targets())) < 1e-14

    pose = pose_from_frames(t(eq.backbone[None]), t(eq.frames[None]))
    assert loss_pose(pose, t(eq.targets()[None]), designs, t(eq.arclengths[None])).item() < 1e-20


def test_loss_tendon_examples():
    target = torch.zeros(1, 5, 12, dtype=torch.float64)
    pred = target.clone()
    pred[..., 0:3] = t([3.0, 4.0, 0.0])
    assert loss_tendon(pred, target).item() == pytest.approx(25.0)
    assert loss_tendon(target, target).item() == 0.0
    with pytest.raises(ValueError):
        loss_tendon(pred[..., :9], target)


def test_dropout_statistics():
    gen = torch.Generator().manual_seed(0)
    x = torch.ones(200_000, dtype=torch.float64)
    y = apply_dropout(x, 0.3, gen)
    assert abs((y == 0).double().mean().item() - 0.3) < 0.01
    assert abs(y.mean().item() - 1.0) < 0.01
    assert torch.equal(apply_dropout(x, 0.3, gen, training=False), x)
    with pytest.raises(InputDomainError):
        apply_dropout(x, 1.0, gen)


def test_prediction_is_chunk_independent(tiny_dims):
    model = build_model("deeponet_pose", tiny_dims, seed=2)
    batch = small_batch(n_designs=5)
    designs, s = batch.designs.numpy(), batch.s.numpy()
    whole = predict_tendons(model, designs, s)
    chunked = predict_tendons(model, designs, s, chunk=2)
    assert whole.shape == (5, 8, 12)
    np.testing.assert_allclose(chunked, whole, rtol=0, atol=1e-13)


def test_dims_are_validated():
    with pytest.raises(ValueError):
        ModelDims(basis=0)


@pytest.mark.parametrize("arch", ["deeponet_pose", "fno_pose"])
def test_fresh_pose_model_has_usable_frames_at_base(arch):
    model = build_model(arch, ModelDims(), seed=0)
    batch = small_batch(n_designs=2, n_nodes=42)
    s = batch.s.clone()
    with torch.no_grad():
        raw = model(batch.d_norm, s)
    assert raw[:, 0, :].abs().max().item() > 1e-6
    assert any(p.abs().max().item() > 0 for name, p in model.named_parameters() if name.endswith("bias"))

    curves = predict_tendons(model, batch.designs.numpy(), s.numpy())
    assert curves.shape == (2, 42, 12)
    assert np.isfinite(curves).all()
