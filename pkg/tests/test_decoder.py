import numpy as np
import pytest
import torch
from dataclasses import replace

from nrvb.decoder import (
    DecoderConfig,
    DecoderModel,
    decode_frame,
    load_tensors,
    natural_widths,
    parameter_balance_report,
    predicted_params,
    save_tensors,
    solve_architecture,
    variant_reductions,
)


def desk_cfg(variant="hnerv_boost", **kw):
    base = dict(variant=variant, strides=(5, 3, 2, 2, 2), c1=24, grid_h=1, grid_w=2)
    base.update(kw)
    return DecoderConfig(**base)


class TestParameterCounting:
    @pytest.mark.parametrize("variant", ["hnerv_boost", "nerv_boost", "enerv_boost"])
    def test_predicted_matches_instantiated(self, variant):
        cfg = desk_cfg(variant, c1=28)
        model = DecoderModel(cfg)
        assert predicted_params(cfg) == sum(p.numel() for p in model.parameters())

    @pytest.mark.parametrize("variant", ["hnerv_boost", "nerv_boost"])
    def test_predicted_matches_without_tat(self, variant):
        cfg = desk_cfg(variant, c1=30, use_tat=False, activation="gelu")
        model = DecoderModel(cfg)
        assert predicted_params(cfg) == sum(p.numel() for p in model.parameters())

    def test_predicted_matches_with_slacked_widths(self):
        cfg = desk_cfg("hnerv_boost", c1=30, widths=(30, 23, 19, 15, 12, 12))
        model = DecoderModel(cfg)
        assert predicted_params(cfg) == sum(p.numel() for p in model.parameters())


class TestWidthChain:
    def test_reduction_tables(self):
        assert [str(r) for r in variant_reductions(desk_cfg("hnerv_boost"))] == ["6/5"] * 5
        assert [str(r) for r in variant_reductions(desk_cfg("nerv_boost"))] == ["1", "2", "2", "2", "2"]
        assert [str(r) for r in variant_reductions(desk_cfg("enerv_boost"))] == ["1/3", "2", "2", "2", "2"]

    def test_chain_recurrence(self):
        cfg = desk_cfg("hnerv_boost", c1=64)
        widths = natural_widths(cfg)
        assert widths[0] == 64
        prev = 64
        for w in widths[1:]:
            expected = max(int(prev / 1.2 + 1e-9), cfg.c_min)
            assert w == expected
            prev = w

    def test_c_min_floor(self):
        cfg = desk_cfg("hnerv_boost", c1=13)
        assert min(natural_widths(cfg)) == cfg.c_min

    def test_enerv_expansion(self):
        cfg = desk_cfg("enerv_boost", c1=20)
        widths = natural_widths(cfg)
        assert widths[1] == 60  # 1/3 reduction = 3x expansion

    def test_solver_tightened_widths_respect_law(self):
        cfg = desk_cfg("hnerv_boost")
        solved = solve_architecture(cfg, 412_345)
        if solved.widths is None:
            return
        nat = natural_widths(replace(cfg, c1=solved.c1))
        for w, n in zip(solved.widths, nat):
            assert cfg.c_min <= w <= n
        # effective reductions never weaker than the table default
        for w_in, w_out in zip(solved.widths, solved.widths[1:]):
            if w_out > cfg.c_min:
                assert w_in / w_out >= 1.2 - 1e-9


class TestBudget:
    def test_3m_target_within_paper_band(self):
        cfg = DecoderConfig(variant="hnerv_boost", strides=(5, 3, 2, 2, 2), grid_h=9, grid_w=16)
        solved = solve_architecture(cfg, 3_000_000)
        realized = predicted_params(solved)
        assert 2_910_000 <= realized <= 3_090_000

    @pytest.mark.parametrize("variant", ["hnerv_boost", "nerv_boost", "enerv_boost"])
    def test_random_targets_within_3pct(self, variant, rng):
        cfg = DecoderConfig(variant=variant, strides=(5, 3, 2, 2, 2), grid_h=1, grid_w=2)
        for target in rng.integers(300_000, 3_000_001, size=12):
            solved = solve_architecture(cfg, int(target))
            realized = predicted_params(solved)
            assert abs(realized - target) / target <= 0.03

    def test_unreachable_target_raises(self):
        cfg = desk_cfg("hnerv_boost")
        with pytest.raises(ValueError):
            solve_architecture(cfg, 1_000)

    def test_natural_chain_preferred_when_feasible(self):
        cfg = DecoderConfig(variant="hnerv_boost", strides=(5, 3, 2, 2, 2), grid_h=9, grid_w=16)
        solved = solve_architecture(cfg, 3_000_000)
        assert solved.widths is None


class TestShapesAndIdentity:
    @pytest.mark.parametrize("variant", ["hnerv_boost", "nerv_boost", "enerv_boost"])
    def test_shape_law_random_configs(self, variant, rng):
        for _ in range(6):
            n_stages = int(rng.integers(2, 5))
            strides = tuple(int(s) for s in rng.choice([1, 2, 3], size=n_stages))
            c1 = int(rng.integers(13, 40))
            gh, gw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            cfg = DecoderConfig(variant=variant, strides=strides, c1=c1,
                                grid_h=gh, grid_w=gw, pe_dim=32)
            model = DecoderModel(cfg)
            up = cfg.upscale
            if variant == "hnerv_boost":
                content = torch.randn(1, cfg.embed_dim, gh, gw)
            else:
                content = torch.randn(1, cfg.pe_dim)
            out = model(content, torch.randn(1, 32, 1, 1))
            assert out.shape == (1, 3, gh * up, gw * up)

    def test_full_1080p_shape_law(self):
        cfg = DecoderConfig(variant="hnerv_boost", strides=(5, 3, 2, 2, 2), c1=16,
                            grid_h=9, grid_w=16)
        model = DecoderModel(cfg)
        with torch.no_grad():
            out = model(torch.randn(1, 16, 9, 16), torch.randn(1, 32, 1, 1))
        assert out.shape == (1, 3, 1080, 1920)

    def test_deterministic_forward(self):
        model = DecoderModel(desk_cfg())
        y = torch.randn(1, 16, 1, 2)
        z = torch.randn(1, 32, 1, 1)
        assert torch.equal(model(y, z), model(y, z))

    def test_z_invariance_at_initialization(self):
        model = DecoderModel(desk_cfg())
        y = torch.randn(1, 16, 1, 2)
        out1 = model(y, torch.randn(1, 32, 1, 1))
        out2 = model(y, torch.randn(1, 32, 1, 1) * 50)
        assert torch.equal(out1, out2)

    def test_decode_frame_clamps_at_eval(self):
        model = DecoderModel(desk_cfg(c1=16))
        with torch.no_grad():
            model.head.bias.fill_(3.0)
        frame = decode_frame(torch.randn(16, 1, 2), torch.randn(1, 32, 1, 1), model)
        assert frame.min() >= 0.0 and frame.max() <= 1.0
        raw = decode_frame(torch.randn(16, 1, 2), torch.randn(1, 32, 1, 1), model, clamp=False)
        assert raw.max() > 1.0

    def test_gradients_flow_end_to_end(self):
        model = DecoderModel(desk_cfg(c1=16))
        y = torch.randn(1, 16, 1, 2, requires_grad=True)
        out = model(y, model.znet(torch.randn(1, model.cfg.pe_dim, 1, 1)))
        out.square().mean().backward()
        assert y.grad is not None and torch.isfinite(y.grad).all()
        grads = [p.grad for p in model.parameters() if p.grad is not None]
        assert len(grads) > 0

    def test_finite_difference_on_decoder_parameters(self, rng):
        torch.manual_seed(4)
        cfg = DecoderConfig(variant="hnerv_boost", strides=(2, 2), c1=14,
                            grid_h=3, grid_w=3, pe_dim=16)
        model = DecoderModel(cfg).double()
        # knock the zero-initialized convs off their identity point
        with torch.no_grad():
            for p in model.parameters():
                p.add_(torch.randn_like(p) * 0.05)
        y = torch.randn(1, 16, 3, 3, dtype=torch.float64)
        pe = torch.randn(1, 16, 1, 1, dtype=torch.float64)
        x_ref = torch.rand(1, 3, 12, 12, dtype=torch.float64)

        from nrvb.losses import distortion_loss

        def loss_value():
            return distortion_loss(x_ref, model(y, model.znet(pe)))

        loss = loss_value()
        model.zero_grad()
        loss.backward()
        params = [p for p in model.parameters() if p.numel() > 0]
        flat = [(p, i) for p in params for i in range(min(p.numel(), 3))]
        picks = rng.choice(len(flat), size=10, replace=False)
        h = 1e-6
        for idx in picks:
            p, i = flat[int(idx)]
            with torch.no_grad():
                orig = float(p.flatten()[i])
                p.flatten()[i] = orig + h
                up = float(loss_value())
                p.flatten()[i] = orig - h
                dn = float(loss_value())
                p.flatten()[i] = orig
            fd = (up - dn) / (2 * h)
            an = float(p.grad.flatten()[i])
            assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-2


class TestAblationVariants:
    def test_no_tat_model_has_no_znet(self):
        model = DecoderModel(desk_cfg(use_tat=False, activation="gelu"))
        assert model.znet is None
        out = model(torch.randn(1, 16, 1, 2), None)
        assert out.shape == (1, 3, 120, 240)

    def test_adain_modulation_variant_builds(self):
        model = DecoderModel(desk_cfg(modulation="adain", c1=16))
        out = model(torch.randn(1, 16, 1, 2), torch.randn(1, 32, 1, 1))
        assert out.shape == (1, 3, 120, 240)

    def test_gelu_activation_variant(self):
        model = DecoderModel(desk_cfg(activation="gelu", c1=16))
        out = model(torch.randn(1, 16, 1, 2), torch.randn(1, 32, 1, 1))
        assert torch.isfinite(out).all()


class TestBalanceReport:
    def test_counts_sum_to_total(self):
        model = DecoderModel(desk_cfg(c1=20))
        rep = parameter_balance_report(model)
        assert rep.total == sum(p.numel() for p in model.parameters())
        assert sum(rep.groups.values()) == rep.total

    def test_single_stage_zero_std(self):
        cfg = DecoderConfig(variant="nerv_boost", strides=(2,), c1=16,
                            grid_h=2, grid_w=2, pe_dim=16)
        rep = parameter_balance_report(DecoderModel(cfg))
        assert len(rep.stage_counts) == 1
        assert rep.std == 0.0

    def test_hnerv_more_balanced_than_nerv_at_equal_size(self):
        target = 3_000_000
        cfgs = {
            v: solve_architecture(
                DecoderConfig(variant=v, strides=(5, 3, 2, 2, 2), grid_h=9, grid_w=16), target
            )
            for v in ("hnerv_boost", "nerv_boost")
        }
        reports = {v: parameter_balance_report(DecoderModel(c)) for v, c in cfgs.items()}
        assert reports["hnerv_boost"].cv < reports["nerv_boost"].cv


class TestCheckpointTensors:
    def test_round_trip(self, tmp_path, rng):
        named = {
            "model.head.weight": rng.normal(0, 1, size=(3, 12, 1, 1)).astype(np.float32),
            "model.head.bias": rng.normal(0, 1, size=(3,)).astype(np.float32),
        }
        path = tmp_path / "ck.nrvc"
        save_tensors(path, "variant=hnerv_boost\n", named)
        text, back = load_tensors(path)
        assert text == "variant=hnerv_boost\n"
        assert set(back) == set(named)
        for k in named:
            assert np.array_equal(back[k], named[k])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.nrvc"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_tensors(path)


class TestConfigDict:
    def test_round_trip(self):
        cfg = desk_cfg("enerv_boost", c1=21, widths=(21, 63, 31, 15, 12, 12), activation="gelu",
                       use_tat=False)
        back = DecoderConfig.from_dict(cfg.to_dict())
        assert back == cfg

    def test_widths_none_round_trip(self):
        cfg = desk_cfg()
        assert DecoderConfig.from_dict(cfg.to_dict()) == cfg

    def test_invalid_widths_rejected(self):
        with pytest.raises(ValueError):
            desk_cfg(widths=(10, 10))
        with pytest.raises(ValueError):
            desk_cfg(c1=24, widths=(23, 20, 17, 14, 12, 12))
