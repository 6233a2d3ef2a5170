# tests/test_nn.py
import numpy as np
import pytest
import torch

from skillchain.errors import ContextOverflow, SchemaError
from skillchain.nn import (ChunkHead, CausalTransformer, DiffusionHead, Mlp, PointSetEncoder, clip_gradients, gae,
                           init_orthogonal, load_checkpoint, load_module, save_checkpoint, save_module)
from skillchain.nn.diffusion import ddpm_train_loss
from skillchain.schema.model_schema import DiffusionHeadSpec, MlpSpec, TransformerSpec

GAMMA, LAM = 0.96, 0.95


def _reference_advantages(r, v, d, gamma, lam, last):
    T = len(r)
    nxt = np.append(v[1:], last)
    delta = r + gamma * nxt * (1.0 - d) - v
    out = np.zeros(T)
    for t in range(T):
        coef = 1.0
        for k in range(t, T):
            out[t] += coef * delta[k]
            if d[k]:
                break
            coef *= gamma * lam
    return out


def test_gae_small_example():
    adv, ret = gae([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], GAMMA, LAM)
    assert adv.tolist() == pytest.approx([(GAMMA * LAM) ** 2, GAMMA * LAM, 1.0], abs=1e-6)
    assert torch.equal(ret, adv)


def test_gae_matches_forward_sums():
    rng = np.random.default_rng(0)
    for _ in range(200):
        T = int(rng.integers(1, 25))
        r, v = rng.normal(size=T), rng.normal(size=T)
        d = (rng.random(T) < 0.2).astype(float)
        last = float(rng.normal())
        adv, ret = gae(torch.as_tensor(r), torch.as_tensor(v), torch.as_tensor(d), GAMMA, LAM, last_value=last)
        expected = _reference_advantages(r, v, d, GAMMA, LAM, last)
        assert np.allclose(adv.numpy(), expected, atol=1e-6)
        assert np.allclose(ret.numpy(), expected + v, atol=1e-6)


def test_gae_works_per_environment_column():
    r = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    v = torch.zeros_like(r)
    d = torch.tensor([[0.0, 1.0], [1.0, 0.0]], dtype=torch.float64)
    adv, _ = gae(r, v, d, GAMMA, LAM)
    assert adv[:, 0].tolist() == pytest.approx([1.0, 0.0])
    assert adv[:, 1].tolist() == pytest.approx([0.0, 1.0])


def test_gae_rejects_bad_inputs():
    with pytest.raises(ValueError):
        gae([0.0, 1.0], [0.0], [0.0, 0.0], GAMMA, LAM)
    with pytest.raises(ValueError):
        gae([0.0], [0.0], [0.0], 1.5, LAM)
    adv, ret = gae([], [], [], GAMMA, LAM)
    assert adv.numel() == 0 and ret.numel() == 0


@pytest.mark.parametrize("shape", [(8, 3), (3, 8), (5, 5)])
def test_orthogonal_blocks(shape):
    w = init_orthogonal(shape, gain=2.0, rng=np.random.default_rng(1)).double()
    gram = w.T @ w if shape[0] >= shape[1] else w @ w.T
    assert torch.allclose(gram, 4.0 * torch.eye(min(shape), dtype=torch.float64), atol=1e-5)


def test_orthogonal_rejects_non_matrix_shapes():
    with pytest.raises(ValueError):
        init_orthogonal((2, 3, 4))


def test_zero_final_gain_gives_zero_output():
    mlp = Mlp(6, 3, MlpSpec(widths=[16, 16]), final_gain=0.0, rng=np.random.default_rng(0))
    assert torch.count_nonzero(mlp(torch.randn(4, 6))) == 0


def test_mlp_init_is_reproducible():
    a = Mlp(4, 2, MlpSpec(widths=[8]), rng=np.random.default_rng(3))
    b = Mlp(4, 2, MlpSpec(widths=[8]), rng=np.random.default_rng(3))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_mlp_gradients_match_finite_differences():
    torch.manual_seed(0)
    mlp = Mlp(3, 2, MlpSpec(widths=[5], activation="tanh"), rng=np.random.default_rng(0)).double()
    x = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(mlp, (x,), eps=1e-6, atol=1e-5)


def test_chunk_head_shape():
    head = ChunkHead(10, 3, 4, MlpSpec(widths=[8]))
    assert head(torch.randn(2, 10)).shape == (2, 4, 3)


def test_point_set_encoder_ignores_point_order():
    torch.manual_seed(0)
    enc = PointSetEncoder(feature=16)
    pts = torch.randn(2, 30, 2)
    perm = torch.randperm(30)
    assert torch.allclose(enc(pts), enc(pts[:, perm]), atol=1e-6)


def _small_transformer():
    torch.manual_seed(0)
    return CausalTransformer(5, TransformerSpec(hidden=16, heads=2, blocks=2, context=6)).eval()


def test_transformer_is_causal():
    model = _small_transformer()
    x = torch.randn(1, 6, 5)
    y = x.clone()
    y[:, 4:] = torch.randn(1, 2, 5)
    with torch.no_grad():
        a, b = model(x), model(y)
    assert torch.allclose(a[:, :4], b[:, :4], atol=1e-6)
    assert not torch.allclose(a[:, 4:], b[:, 4:])


def test_transformer_context_overflow():
    model = _small_transformer()
    assert model(torch.randn(2, 6, 5)).shape == (2, 6, 16)
    with pytest.raises(ContextOverflow):
        model(torch.randn(1, 7, 5))


def test_transformer_gradients_match_finite_differences():
    model = _small_transformer().double()
    x = torch.randn(1, 3, 5, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda t: model(t).sum(dim=-1), (x,), eps=1e-6, atol=1e-4)


def test_checkpoint_round_trip(tmp_path):
    mlp = Mlp(4, 2, MlpSpec(widths=[8]), rng=np.random.default_rng(0))
    path = save_module(mlp, {"kind": "mlp", "in": 4}, tmp_path / "m.ckpt")
    fresh = Mlp(4, 2, MlpSpec(widths=[8]), rng=np.random.default_rng(9))
    spec = load_module(fresh, path)
    assert spec == {"kind": "mlp", "in": 4}
    x = torch.randn(3, 4)
    assert torch.equal(mlp(x), fresh(x))


def test_checkpoint_keeps_scalars_and_order(tmp_path):
    tensors = {"b": torch.tensor(2.5), "a": torch.arange(6, dtype=torch.float32).view(2, 3)}
    spec, back = load_checkpoint(save_checkpoint(tmp_path / "t.ckpt", {}, tensors))
    assert list(back) == ["b", "a"]
    assert back["b"].shape == () and float(back["b"]) == 2.5
    assert torch.equal(back["a"], tensors["a"])


def test_checkpoint_rejects_corruption(tmp_path):
    path = save_checkpoint(tmp_path / "t.ckpt", {"x": 1}, {"w": torch.ones(3)})
    data = path.read_bytes()

    bad = tmp_path / "magic.ckpt"
    bad.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(SchemaError, match="not a skillchain checkpoint"):
        load_checkpoint(bad)

    bad = tmp_path / "version.ckpt"
    bad.write_bytes(data[:4] + (7).to_bytes(4, "little") + data[8:])
    with pytest.raises(SchemaError, match="version 7"):
        load_checkpoint(bad)

    bad = tmp_path / "trailing.ckpt"
    bad.write_bytes(data + b"\x00" * 4)
    with pytest.raises(SchemaError, match="trailing"):
        load_checkpoint(bad)


def test_load_module_rejects_mismatched_tensors(tmp_path):
    path = save_checkpoint(tmp_path / "t.ckpt", {}, {"w": torch.ones(3)})
    with pytest.raises(SchemaError):
        load_module(Mlp(4, 2, MlpSpec(widths=[8])), path)


def test_clip_gradients_reports_the_raw_norm():
    p = torch.nn.Parameter(torch.zeros(4))
    p.grad = torch.full((4,), 3.0)
    assert clip_gradients([p], 1.0) == pytest.approx(6.0)
    assert float(p.grad.norm()) == pytest.approx(1.0, rel=1e-4)


def _tiny_diffusion():
    spec = DiffusionHeadSpec(pred_horizon=8, action_horizon=4, train_timesteps=20, inference_steps=4,
                             embed_dim=16, down_dims=[16, 32], width_scale=1.0, n_groups=8)
    torch.manual_seed(0)
    return DiffusionHead(12, 3, spec)


def test_diffusion_loss_backpropagates():
    head = _tiny_diffusion()
    feat, chunk = torch.randn(2, 12), torch.rand(2, 8, 3) * 2 - 1
    loss = head.loss(feat, chunk, torch.Generator().manual_seed(0))
    assert torch.isfinite(loss)
    loss.backward()
    assert any(p.grad is not None and torch.any(p.grad != 0) for p in head.parameters())


def test_diffusion_rejects_wrong_chunk_length():
    head = _tiny_diffusion()
    with pytest.raises(ValueError, match="prediction horizon"):
        ddpm_train_loss(head, torch.randn(1, 12), torch.zeros(1, 5, 3))


def test_diffusion_sampling_is_seeded():
    head = _tiny_diffusion().eval()
    feat = torch.randn(2, 12)
    a = head.sample(feat, torch.Generator().manual_seed(4))
    b = head.sample(feat, torch.Generator().manual_seed(4))
    assert a.shape == (2, 8, 3)
    assert torch.equal(a, b)
    assert torch.all(a.abs() <= 1.0 + 1e-6)


def test_diffusion_horizon_must_survive_downsampling():
    spec = DiffusionHeadSpec(pred_horizon=6, action_horizon=4, down_dims=[16, 32, 64], width_scale=1.0)
    with pytest.raises(ValueError):
        DiffusionHead(4, 2, spec)
