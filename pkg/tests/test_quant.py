import math

import numpy as np
import pytest
import torch

from nrvb.quant import (
    EntropyModelParams,
    P_MIN,
    QuantParams,
    SIGMA_MIN,
    TensorQuantizer,
    cem_loss,
    RateBudget,
    compute_target_bpp,
    dequantize,
    estimate_rate_bits,
    estimate_rate_bits_exact,
    fit_entropy_model,
    fit_entropy_model_t,
    init_quant_params,
    make_rate_budget,
    mixed_quantize,
    quantize,
    symbol_likelihood,
)


class TestQuantizeDequantize:
    def test_symmetric_example(self):
        q = QuantParams(scale=0.5)
        assert quantize(np.array([1.3]), q)[0] == 3
        assert dequantize(np.array([3]), q)[0] == 1.5

    def test_asymmetric_exact_roundtrip(self):
        q = QuantParams(scale=0.2, offset=0.1, mode="asymmetric")
        assert quantize(np.array([0.9]), q)[0] == 4
        assert dequantize(np.array([4]), q)[0] == 0.9  # exact in f64

    def test_half_to_even_tiebreak(self):
        q = QuantParams(scale=0.5)
        assert quantize(np.array([1.25]), q)[0] == 2  # 2.5 rounds to even
        assert quantize(np.array([1.75]), q)[0] == 4  # 3.5 rounds to even

    def test_roundtrip_error_bound(self, rng):
        for _ in range(50):
            scale = float(10 ** rng.uniform(-4, 1))
            offset = float(rng.normal(0, 2))
            q = QuantParams(scale=scale, offset=offset, mode="asymmetric")
            x = rng.normal(0, 3, size=200)
            err = np.abs(dequantize(quantize(x, q), q) - x)
            assert err.max() <= scale / 2 + 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            quantize(np.array([np.nan]), QuantParams(scale=1.0))

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            QuantParams(scale=1.0, offset=0.5, mode="symmetric")
        with pytest.raises(ValueError):
            QuantParams(scale=0.0)
        with pytest.raises(ValueError):
            QuantParams(scale=1.0, mode="diagonal")


class TestMixedQuantize:
    def test_noisy_view_is_zero_mean_around_symbols(self, rng):
        x = torch.zeros(200_000, dtype=torch.float64) + 0.37
        scale = torch.tensor(0.1, dtype=torch.float64)
        torch.manual_seed(0)
        noisy, _ = mixed_quantize(x, scale)
        assert float(noisy.mean()) == pytest.approx(3.7, abs=5e-3)

    def test_ste_view_identity_gradient(self):
        x = torch.randn(64, dtype=torch.float64, requires_grad=True)
        scale = torch.tensor(0.25, dtype=torch.float64)
        _, ste = mixed_quantize(x, scale, noise=torch.zeros_like(x))
        ste.sum().backward()
        assert torch.allclose(x.grad, torch.ones_like(x))

    def test_ste_view_equals_plain_quantization(self, rng):
        x = torch.from_numpy(rng.normal(0, 1, 128))
        q = QuantParams(scale=0.3, offset=0.05, mode="asymmetric")
        _, ste = mixed_quantize(x, torch.tensor(0.3), torch.tensor(0.05))
        expected = dequantize(quantize(x.numpy(), q), q)
        np.testing.assert_allclose(ste.numpy(), expected, atol=1e-12)

    def test_rate_gradient_wrt_scale_finite_difference(self):
        torch.manual_seed(1)
        x = torch.randn(400, dtype=torch.float64)
        noise = torch.rand(400, dtype=torch.float64) - 0.5

        def rate(scale_val):
            s = torch.tensor(scale_val, dtype=torch.float64, requires_grad=True)
            noisy, _ = mixed_quantize(x, s, 0.0, noise=noise)
            mu, sig = fit_entropy_model_t(x, s, 0.0)
            return estimate_rate_bits(noisy, mu, sig), s

        r, s = rate(0.08)
        r.backward()
        h = 1e-7
        fd = (float(rate(0.08 + h)[0]) - float(rate(0.08 - h)[0])) / (2 * h)
        assert abs(fd - float(s.grad)) / max(abs(fd), 1e-9) < 1e-3

    def test_rate_invariant_to_offset(self):
        # the symbol-domain mean refits, so the rate cannot see a lattice shift
        torch.manual_seed(2)
        x = torch.randn(300, dtype=torch.float64)
        noise = torch.rand(300, dtype=torch.float64) - 0.5

        def rate(offset_val):
            o = torch.tensor(offset_val, dtype=torch.float64)
            noisy, _ = mixed_quantize(x, torch.tensor(0.1, dtype=torch.float64), o, noise=noise)
            mu, sig = fit_entropy_model_t(x, torch.tensor(0.1, dtype=torch.float64), o)
            return float(estimate_rate_bits(noisy, mu, sig))

        assert rate(0.0) == pytest.approx(rate(0.37), rel=1e-12)


class TestEntropyModel:
    def test_constant_tensor_floors_sigma(self):
        m = fit_entropy_model(np.full(64, 1.23), QuantParams(scale=0.5))
        assert m.sigma_s == SIGMA_MIN

    def test_balanced_pm_one(self):
        x = np.array([-1.0, 1.0] * 32)
        m = fit_entropy_model(x, QuantParams(scale=1.0))
        assert (m.mu_s, m.sigma_s) == (0.0, 1.0)

    def test_joint_rescale_invariance(self, rng):
        x = rng.normal(0, 2, 256)
        m1 = fit_entropy_model(x, QuantParams(scale=0.25))
        m2 = fit_entropy_model(x * 4, QuantParams(scale=1.0))
        assert m1.mu_s == pytest.approx(m2.mu_s, rel=1e-12)
        assert m1.sigma_s == pytest.approx(m2.sigma_s, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fit_entropy_model(np.array([]), QuantParams(scale=1.0))

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            EntropyModelParams(mu_s=0.0, sigma_s=0.0)


class TestSymbolLikelihood:
    def test_center_of_standard_normal(self):
        # Phi(0.5) - Phi(-0.5) = erf(0.5/sqrt(2))
        expected = math.erf(0.5 / math.sqrt(2.0))
        assert expected == pytest.approx(0.382925, abs=1e-6)
        assert symbol_likelihood(0.0, EntropyModelParams(0.0, 1.0)) == pytest.approx(expected, abs=1e-15)

    def test_wide_sigma_floors_at_p_min(self):
        m = EntropyModelParams(mu_s=0.0, sigma_s=1e9)
        assert symbol_likelihood(0.0, m) >= P_MIN
        m2 = EntropyModelParams(mu_s=0.0, sigma_s=1e12)
        assert symbol_likelihood(5.0, m2) == P_MIN

    def test_six_sigma_mass(self):
        m = EntropyModelParams(mu_s=0.3, sigma_s=2.5)
        lo = int(math.floor(m.mu_s - 6 * m.sigma_s)) - 1
        hi = int(math.ceil(m.mu_s + 6 * m.sigma_s)) + 1
        assert sum(symbol_likelihood(v, m) for v in range(lo, hi + 1)) >= 0.999

    def test_valid_sub_pmf_over_eight_sigma(self, rng):
        for _ in range(20):
            m = EntropyModelParams(mu_s=float(rng.normal(0, 10)), sigma_s=float(10 ** rng.uniform(-3, 2)))
            lo = int(math.floor(m.mu_s - 8 * m.sigma_s)) - 1
            hi = int(math.ceil(m.mu_s + 8 * m.sigma_s)) + 1
            total = 0.0
            for v in range(lo, hi + 1):
                p = symbol_likelihood(v, m)
                assert p >= 0.0
                total += p
            assert total <= 1.0 + 1e-6


class TestRateEstimation:
    def test_half_probability_symbols_cost_one_bit(self):
        # find sigma with p(mu | mu, sigma) == 0.5 by bisection (test-local oracle)
        lo, hi = 0.1, 5.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if math.erf(0.5 / (mid * math.sqrt(2.0))) > 0.5:
                lo, hi = mid, hi
            else:
                lo, hi = lo, mid
            if math.erf(0.5 / (lo * math.sqrt(2.0))) > 0.5:
                lo = lo
        sigma = 0.5 * (lo + hi)
        m = EntropyModelParams(mu_s=7.0, sigma_s=sigma)
        n = 1000
        bits = estimate_rate_bits_exact(np.full(n, 7), m)
        assert bits == pytest.approx(n, rel=1e-9)

    def test_p_min_caps_per_element_cost(self):
        m = EntropyModelParams(mu_s=0.0, sigma_s=1.0)
        bits = estimate_rate_bits_exact(np.array([10_000]), m)
        assert bits == pytest.approx(-math.log2(P_MIN), rel=1e-12)
        assert bits < 29.9

    def test_matches_brute_force_oracle_bit_for_bit(self, rng):
        m = EntropyModelParams(mu_s=0.7, sigma_s=3.3)
        symbols = rng.integers(-15, 16, size=5_000)

        total = 0.0
        for v in symbols.tolist():
            hi = 0.5 * math.erfc(-((v + 0.5 - m.mu_s) / m.sigma_s) / math.sqrt(2.0))
            lo = 0.5 * math.erfc(-((v - 0.5 - m.mu_s) / m.sigma_s) / math.sqrt(2.0))
            total += -math.log2(max(hi - lo, 1e-9))
        assert estimate_rate_bits_exact(symbols, m) == total  # bit-for-bit

    def test_gaussian_rate_near_differential_entropy(self, rng):
        sigma = 7.0
        m = EntropyModelParams(mu_s=0.0, sigma_s=sigma)
        symbols = np.round(rng.normal(0, sigma, size=200_000)).astype(int)
        bits_per = estimate_rate_bits_exact(symbols, m) / len(symbols)
        # brute-force entropy of the discretized Gaussian (oracle)
        span = np.arange(int(-8 * sigma), int(8 * sigma) + 1)
        p = np.array([symbol_likelihood(v, m) for v in span])
        h_disc = float(-(p * np.log2(p)).sum())
        assert bits_per == pytest.approx(h_disc, rel=5e-3)
        assert h_disc == pytest.approx(0.5 * math.log2(2 * math.pi * math.e * sigma ** 2), rel=1e-2)

    def test_rate_at_mean_monotone_in_sigma(self):
        costs = [
            -math.log2(symbol_likelihood(0.0, EntropyModelParams(0.0, s)))
            for s in (1.0, 2.0, 4.0, 8.0, 32.0)
        ]
        assert all(a < b for a, b in zip(costs, costs[1:]))

    def test_torch_path_matches_exact_closely(self, rng):
        m = EntropyModelParams(mu_s=0.5, sigma_s=3.0)
        symbols = rng.integers(-10, 11, size=2_000)
        exact = estimate_rate_bits_exact(symbols, m)
        t = float(
            estimate_rate_bits(
                torch.tensor(symbols, dtype=torch.float64),
                torch.tensor(0.5, dtype=torch.float64),
                torch.tensor(3.0, dtype=torch.float64),
            )
        )
        assert t == pytest.approx(exact, rel=1e-9)


class TestBudgetAndLoss:
    def test_target_bpp_arithmetic(self):
        assert compute_target_bpp(10 ** 6, 4.0, 132, 720, 1280) == pytest.approx(0.032881, abs=1e-6)

    def test_cem_loss_above_target(self):
        budget = RateBudget(b_avg=4.0, kappa=0.5, rate_bpp=0.05, target_bpp=0.032881)
        out = cem_loss(torch.tensor(1.0, dtype=torch.float64), torch.tensor(0.05, dtype=torch.float64), budget)
        assert float(out) == pytest.approx(1.0 + 0.5 * (0.05 - 0.032881), abs=1e-9)
        assert float(out) == pytest.approx(1.0 + 0.008560, abs=5e-6)

    def test_cem_loss_clamps_below_target(self):
        budget = RateBudget(b_avg=4.0, kappa=0.5, rate_bpp=0.01, target_bpp=0.0329)
        rate = torch.tensor(0.01, requires_grad=True)
        out = cem_loss(torch.tensor(2.0), rate, budget)
        assert float(out) == 2.0
        out.backward()
        assert float(rate.grad) == 0.0

    def test_make_rate_budget(self):
        b = make_rate_budget(1000, 4.0, 0.2, rate_bits=5000.0, t=2, height=10, width=10)
        assert b.rate_bpp == pytest.approx(25.0)
        assert b.target_bpp == pytest.approx(20.0)

    def test_gradient_checks_through_cem_loss(self):
        # d(cem)/d(scale) and d(cem)/d(offset) with fixed noise, rate term active
        torch.manual_seed(5)
        x = torch.randn(256, dtype=torch.float64) * 2
        noise = torch.rand(256, dtype=torch.float64) - 0.5
        budget = RateBudget(b_avg=2.0, kappa=0.7, rate_bpp=0.0, target_bpp=0.001)

        def loss_fn(scale_v, offset_v, as_tensor=True):
            s = torch.tensor(scale_v, dtype=torch.float64, requires_grad=as_tensor)
            o = torch.tensor(offset_v, dtype=torch.float64, requires_grad=as_tensor)
            noisy, _ = mixed_quantize(x, s, o, noise=noise)
            mu, sig = fit_entropy_model_t(x, s, o)
            rate_bpp = estimate_rate_bits(noisy, mu, sig) / 100.0
            return cem_loss(torch.tensor(0.0, dtype=torch.float64), rate_bpp, budget), s, o

        loss, s, o = loss_fn(0.11, 0.03)
        loss.backward()
        h = 1e-7
        fd_s = (float(loss_fn(0.11 + h, 0.03, False)[0]) - float(loss_fn(0.11 - h, 0.03, False)[0])) / (2 * h)
        fd_o = (float(loss_fn(0.11, 0.03 + h, False)[0]) - float(loss_fn(0.11, 0.03 - h, False)[0])) / (2 * h)
        assert abs(fd_s - float(s.grad)) / max(abs(fd_s), 1e-9) < 1e-3
        assert abs(fd_o - float(o.grad)) <= 1e-3 * max(abs(fd_o), 1.0)


class TestTensorQuantizer:
    def test_init_lattice_spans_tensor(self, rng):
        x = rng.normal(0, 1, 512)
        scale, offset = init_quant_params(x, "asymmetric", b_avg=4.0)
        q = QuantParams(scale=scale, offset=offset, mode="asymmetric")
        symbols = quantize(x, q)
        # extremes sit at +-(2^b - 1)/2 and may round outward by half a step
        assert symbols.max() - symbols.min() <= 2 ** 4

    def test_scale_stays_positive(self):
        tq = TensorQuantizer(0.1, mode="symmetric")
        with torch.no_grad():
            tq.log_scale.fill_(-50.0)
        assert float(tq.scale) > 0.0

    def test_quant_params_are_f32(self):
        tq = TensorQuantizer(0.1234567891234, 0.9876543219876, mode="asymmetric")
        qp = tq.quant_params()
        assert qp.scale == float(np.float32(qp.scale))
        assert qp.offset == float(np.float32(qp.offset))

    def test_symmetric_offset_is_zero(self):
        tq = TensorQuantizer(0.5, mode="symmetric")
        assert float(tq.offset) == 0.0
        assert tq.quant_params().offset == 0.0
