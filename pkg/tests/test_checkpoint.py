import torch

from anchorhdr.checkpoint import (
    load_checkpoint,
    restore_optimizer,
    save_checkpoint,
)
from anchorhdr.config import RunConfig, config_hash
from anchorhdr.model import build_model


def tiny_config():
    cfg = RunConfig()
    cfg.model.c = 4
    cfg.model.c_prime = 4
    cfg.model.k_blocks = 1
    cfg.train.seed = 1
    return cfg


def test_save_load_save_identical_bytes(tmp_path):
    torch.manual_seed(0)
    cfg = tiny_config()
    model = build_model(cfg)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    # take one real step so the optimizer state is populated
    x, _ = model(torch.rand(1, 2, 3, 8, 8), torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8))
    x.mean().backward()
    opt.step()

    first = tmp_path / "a.ckpt"
    save_checkpoint(first, model, opt, step=1, config=cfg)
    ckpt = load_checkpoint(first)

    model2 = build_model(ckpt.config)
    model2.load_state_dict(ckpt.model_state)
    opt2 = torch.optim.Adam(model2.parameters(), lr=1e-3)
    restore_optimizer(opt2, ckpt)
    second = tmp_path / "b.ckpt"
    save_checkpoint(second, model2, opt2, step=ckpt.step, config=ckpt.config)
    assert first.read_bytes() == second.read_bytes()


def test_loaded_model_outputs_bit_identical(tmp_path):
    torch.manual_seed(1)
    cfg = tiny_config()
    model = build_model(cfg)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, None, step=0, config=cfg)
    ckpt = load_checkpoint(path)
    model2 = build_model(ckpt.config)
    model2.load_state_dict(ckpt.model_state)

    backbone = torch.rand(1, 3, 3, 8, 8)
    low, high = torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8)
    with torch.no_grad():
        xa, za = model(backbone, low, high)
        xb, zb = model2(backbone, low, high)
    assert torch.equal(xa, xb)
    assert torch.equal(za, zb)


def test_config_embedded_and_hashed(tmp_path):
    cfg = tiny_config()
    cfg.loss.lambda_t = 0.77
    model = build_model(cfg)
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, model, None, step=5, config=cfg)
    ckpt = load_checkpoint(path)
    assert ckpt.step == 5
    assert ckpt.config.loss.lambda_t == 0.77
    assert ckpt.config_sha == config_hash(cfg)
    assert ckpt.optim_state == {}


def test_rejects_corrupt_file(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"XXXX" + b"\x00" * 64)
    try:
        load_checkpoint(p)
    except ValueError as exc:
        assert "not a checkpoint" in str(exc)
    else:
        raise AssertionError("corrupt file accepted")


def test_optimizer_state_round_trips_training(tmp_path):
    """Resuming from the serialized Adam state continues identically."""
    torch.manual_seed(2)
    cfg = tiny_config()
    model = build_model(cfg)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    data = torch.rand(1, 2, 3, 8, 8), torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8)
    for _ in range(2):
        x, _ = model(*data)
        opt.zero_grad()
        x.mean().backward()
        opt.step()
    save_checkpoint(tmp_path / "s.ckpt", model, opt, step=2, config=cfg)

    # one more step on the live model
    x, _ = model(*data)
    opt.zero_grad()
    x.mean().backward()
    opt.step()
    expected = [p.detach().clone() for p in model.parameters()]

    # same step from the restored model + optimizer
    ckpt = load_checkpoint(tmp_path / "s.ckpt")
    model2 = build_model(ckpt.config)
    model2.load_state_dict(ckpt.model_state)
    opt2 = torch.optim.Adam(model2.parameters(), lr=1e-3)
    restore_optimizer(opt2, ckpt)
    x, _ = model2(*data)
    opt2.zero_grad()
    x.mean().backward()
    opt2.step()
    for got, want in zip(model2.parameters(), expected):
        assert torch.equal(got.detach(), want)
