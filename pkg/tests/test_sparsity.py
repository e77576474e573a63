import numpy as np
import pytest

from reltucker.sparsity import (
    HardConcreteGates,
    L0Config,
    apply_gates,
    deterministic_gates,
    expected_l0,
    expected_l0_grad,
    gate_grad,
    prob_nonzero,
    sample_gates,
    sparsity_report,
)

from conftest import central_diff, rel_error


def gates(values):
    return HardConcreteGates(np.asarray(values, dtype=float))


class TestConstants:
    def test_defaults(self):
        g = gates([0.0])
        assert (g.beta, g.zeta, g.gamma, g.loc_mean, g.loc_std) == (2 / 3, 1.1, -0.1, 3.0, 1.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            HardConcreteGates(np.zeros(2), beta=1.5)
        with pytest.raises(ValueError):
            HardConcreteGates(np.zeros(2), gamma=0.1)
        with pytest.raises(ValueError):
            HardConcreteGates(np.array([np.inf]))

    def test_initialize(self, rng):
        g = HardConcreteGates.initialize((200, 50), rng)
        assert abs(g.log_alpha.mean() - 3.0) < 0.05
        assert abs(g.log_alpha.std() - 1.0) < 0.05

    def test_warmup(self):
        cfg = L0Config(0.5)
        assert cfg.weight(24) == 0.0 and cfg.weight(25) == 0.5
        with pytest.raises(ValueError):
            L0Config(-1.0)


class TestSampling:
    def test_range(self, rng):
        z = sample_gates(HardConcreteGates.initialize((1000,), rng, loc_std=4.0), rng).z
        assert z.min() >= 0.0 and z.max() <= 1.0

    def test_saturation(self, rng):
        assert np.all(sample_gates(gates(np.full(1000, 60.0)), rng).z == 1.0)
        assert np.all(sample_gates(gates(np.full(1000, -60.0)), rng).z == 0.0)

    def test_prob_nonzero_monte_carlo(self, rng):
        for la in (-1.0, 0.0, 1.5):
            z = sample_gates(gates(np.full(100_000, la)), rng).z
            p = prob_nonzero(gates([la]))[0]
            assert abs(np.mean(z > 0) - p) <= 0.01 * p

    def test_fixed_noise_replays(self, rng):
        g = gates(rng.normal(size=10))
        s1 = sample_gates(g, rng)
        s2 = sample_gates(g, u=s1.u)
        np.testing.assert_array_equal(s1.z, s2.z)

    def test_needs_noise(self):
        with pytest.raises(ValueError):
            sample_gates(gates([0.0]))

    @pytest.mark.parametrize("la", [0.0, 3.0, -3.0])
    def test_median_rule(self, la, rng):
        # deterministic gate is the sample median where clamping or symmetry makes them agree
        z = sample_gates(gates(np.full(100_000, la)), rng).z
        assert abs(np.median(z) - deterministic_gates(gates([la]))[0]) <= 0.02


class TestDeterministic:
    def test_values(self):
        z = deterministic_gates(gates([0.0, 3.0, -20.0]))
        assert z[0] == pytest.approx(0.5, abs=1e-15)
        assert z[1] == 1.0
        assert z[2] == 0.0

    def test_range(self, rng):
        z = deterministic_gates(gates(rng.normal(0, 5, size=1000)))
        assert z.min() >= 0.0 and z.max() <= 1.0


class TestExpectedL0:
    def test_half(self):
        g = gates([0.0])
        g.log_alpha[0] = g.beta * np.log(-g.gamma / g.zeta)
        assert expected_l0(g) == pytest.approx(0.5, abs=1e-15)

    def test_monotone(self, rng):
        g = gates(rng.normal(size=20))
        base = expected_l0(g)
        for i in range(20):
            g.log_alpha[i] += 0.1
            assert expected_l0(g) > base
            g.log_alpha[i] -= 0.1

    def test_gradient(self, rng):
        g = gates(rng.normal(0, 2, size=(3, 4)))
        num = central_diff(lambda: expected_l0(g), g.log_alpha)
        np.testing.assert_allclose(expected_l0_grad(g), num, atol=1e-8)


class TestApply:
    def test_ones_and_zeros(self, rng):
        g = rng.normal(size=(2, 3, 3))
        np.testing.assert_array_equal(apply_gates(g, np.ones_like(g)), g)
        assert not apply_gates(g, np.zeros_like(g)).any()

    def test_shape(self, rng):
        with pytest.raises(ValueError):
            apply_gates(np.ones((2, 2)), np.ones(3))

    def test_gate_gradient_fixed_noise(self, rng):
        """d/dlog_alpha of sum(W * (G * z)) under fixed u matches finite differences."""
        hg = gates(rng.normal(0, 1, size=(2, 3, 3)))
        G = rng.normal(size=hg.shape)
        W = rng.normal(size=hg.shape)
        u = rng.uniform(0.05, 0.95, size=hg.shape)
        sample = sample_gates(hg, u=u)
        inside = (sample.stretched > 1e-3) & (sample.stretched < 1 - 1e-3)
        f = lambda: float(np.sum(W * apply_gates(G, sample_gates(hg, u=u).z)))
        num = central_diff(f, hg.log_alpha)
        ana = gate_grad(hg, sample, W * G)
        assert rel_error(ana[inside], num[inside]) <= 1e-6
        np.testing.assert_array_equal(ana[sample.stretched >= 1.0], 0.0)


class TestReport:
    def test_open(self):
        assert sparsity_report(gates(np.full(10, 3.0))) == 0.0

    def test_closed(self):
        assert sparsity_report(gates(np.full(10, -10.0))) == 1.0

    def test_half(self):
        assert sparsity_report(gates([10.0, -10.0] * 5)) == 0.5
