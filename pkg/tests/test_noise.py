import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sefv.errors import BadDecay, DimensionMismatch, ModeOutOfRange, NegativeAmplitude, VacuumState
from sefv.noise import (
    build_noise,
    energy_dominance_constants,
    ito_correction_density,
    noise_momentum_increment,
    psi_field,
    psi_k,
    sample_increments,
    standard_normals,
)
from sefv.physics import EosParams, State, entropy


def unit_model(beta=0.1):
    return build_noise(1, beta, 2.0, {"A": [1.0], "B": [1.0]}, dim=1, spatial="none")


class TestBuild:
    def test_deterministic_model(self):
        model = build_noise(0)
        assert model.k_modes == 0
        x = np.zeros((1, 3))
        state = State(np.ones(3), np.ones((1, 3)))
        np.testing.assert_array_equal(noise_momentum_increment(model, x, state, np.zeros(0)), 0.0)

    def test_beta_sequence(self):
        np.testing.assert_allclose(build_noise(4, 0.1, 2.0).beta, [0.1, 0.025, 0.1 / 9, 0.00625])

    def test_negative_amplitude(self):
        with pytest.raises(NegativeAmplitude):
            build_noise(2, -1.0)

    def test_bad_decay(self):
        with pytest.raises(BadDecay):
            build_noise(2, 0.1, q=1.0)

    def test_coefficient_bounds(self):
        with pytest.raises(ValueError):
            build_noise(1, 0.1, coeff_spec={"A": [1.5], "B": [0.5]})
        with pytest.raises(ValueError):
            build_noise(1, 0.1, coeff_spec={"A": [0.5], "B": [[[2.0]]]})
        with pytest.raises(DimensionMismatch):
            build_noise(1, 0.1, coeff_spec={"A": [0.5], "B": [[[1.0, 0.0]]]})


class TestPsi:
    def test_hand_value(self):
        val = psi_k(unit_model(), 1, np.zeros(1), 2.0, np.array([3.0]))
        assert float(val[0]) == pytest.approx(0.5)

    def test_mode_range(self):
        with pytest.raises(ModeOutOfRange):
            psi_k(build_noise(2), 3, np.zeros(1), 1.0, np.zeros(1))

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_vanishes_at_zero_state(self, d, rng):
        model = build_noise(6, 0.3, dim=d)
        x = rng.uniform(0, 1, (d, 7))
        for k in range(1, 7):
            assert np.all(psi_k(model, k, x, np.zeros(7), np.zeros((d, 7))) == 0)

    def test_field_agrees_with_single_modes(self, rng):
        model = build_noise(5, 0.2, dim=2)
        x = rng.uniform(0, 1, (2, 4, 4))
        state = State(rng.uniform(0.5, 2, (4, 4)), rng.normal(size=(2, 4, 4)))
        field = psi_field(model, x, state)
        for k in range(1, 6):
            np.testing.assert_allclose(field[k - 1], psi_k(model, k, x, state.rho, state.m), rtol=1e-14)

    def test_direction_cycles_through_axes(self):
        model = build_noise(5, 0.1, dim=2, spatial="none")
        rho = np.array(1.0)
        m = np.zeros(2)
        assert [int(np.argmax(np.abs(psi_k(model, k, np.zeros(2), rho, m)))) for k in range(1, 6)] == [0, 1, 0, 1, 0]

    @pytest.mark.parametrize("coeffs", ["default", {"A": [1.0, -1.0, 0.3], "B": [1.0, -0.7, 0.0]}])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_sampled_lipschitz_bound(self, coeffs, d):
        rng = np.random.default_rng(d)
        model = build_noise(3, 0.4, 1.5, coeffs, dim=d)
        n = 10_000
        x = rng.uniform(0, 1, (d, n))
        r1, r2 = rng.uniform(0, 5, n), rng.uniform(0, 5, n)
        m1, m2 = rng.normal(0, 3, (d, n)), rng.normal(0, 3, (d, n))
        for k in range(1, 4):
            diff = psi_k(model, k, x, r1, m1) - psi_k(model, k, x, r2, m2)
            lhs = np.sqrt(np.sum(diff**2, axis=0))
            rhs = model.beta[k - 1] * (np.abs(r1 - r2) + np.sqrt(np.sum((m1 - m2) ** 2, axis=0)))
            assert np.all(lhs <= rhs + 1e-10)

    def test_default_family_satisfies_derivative_sum_bound(self):
        # |d_rho Psi_k| + ||grad_m Psi_k|| = beta_k |chi| (|A_k| + ||B_k||) <= beta_k
        model = build_noise(4, 0.3, dim=3)
        norms = np.abs(model.A) + np.linalg.norm(model.B, ord=2, axis=(1, 2))
        assert np.all(norms <= 1.0 + 1e-15)


class TestIncrements:
    def test_empty(self):
        assert sample_increments((1, 2, 3), 0.1, 0).dw.shape == (0,)

    def test_reproducible(self):
        a = sample_increments((7, 3, 11), 0.01, 8)
        b = sample_increments((7, 3, 11), 0.01, 8)
        assert a.dw.tobytes() == b.dw.tobytes()

    def test_distinct_lineages_differ(self):
        base = standard_normals((7, 3, 11), 4)
        for other in [(8, 3, 11), (7, 4, 11), (7, 3, 12)]:
            assert not np.array_equal(base, standard_normals(other, 4))

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            sample_increments((0, 0, 0), 0.0, 2)

    def test_mean_and_variance(self):
        dt = 0.003
        n = 100_000
        dw = np.array([sample_increments((5, 0, j), dt, 2).dw for j in range(n)])
        z = dw[:, 0] / np.sqrt(dt)
        assert abs(z.mean()) <= 4 / np.sqrt(n)
        for k in range(2):
            assert abs(dw[:, k].var() / dt - 1) <= 5 * np.sqrt(2 / n)

    def test_independence_across_keys(self):
        n = 20_000
        by_step = np.array([standard_normals((1, 0, j), 3) for j in range(n)])
        by_path = np.array([standard_normals((1, j, 0), 3) for j in range(n)])
        pairs = [
            (by_step[:, 0], by_step[:, 1]),
            (by_step[:, 0], by_path[:, 0]),
            (by_step[:-1, 0], by_step[1:, 0]),
            (by_path[:-1, 2], by_path[1:, 2]),
        ]
        for a, b in pairs:
            assert abs(np.corrcoef(a, b)[0, 1]) <= 4 / np.sqrt(n)


class TestMomentumIncrement:
    def test_zero_state(self):
        model = build_noise(3, 0.5, dim=2)
        x = np.zeros((2, 3, 3))
        state = State(np.zeros((3, 3)), np.zeros((2, 3, 3)))
        assert np.all(noise_momentum_increment(model, x, state, np.ones(3)) == 0)

    def test_single_cell_single_mode(self):
        model = unit_model()
        state = State(np.array([2.0]), np.array([[3.0]]))
        out = noise_momentum_increment(model, np.zeros((1, 1)), state, np.array([0.2]))
        assert float(out[0, 0]) == pytest.approx(0.5 * 0.2)

    def test_wrong_increment_count(self):
        with pytest.raises(DimensionMismatch):
            noise_momentum_increment(build_noise(2), np.zeros((1, 2)), State(np.ones(2), np.ones((1, 2))), np.ones(3))


class TestItoCorrection:
    def test_deterministic(self):
        out = ito_correction_density(build_noise(0), np.zeros((1, 2)), State(np.ones(2), np.ones((1, 2))))
        np.testing.assert_array_equal(out, 0.0)

    def test_hand_value(self):
        # Psi_1 = 0.5 at rho = 1, m = 0 with beta = 0.5 and A = 1
        model = build_noise(1, 0.5, 2.0, {"A": [1.0], "B": [1.0]}, spatial="none")
        val = ito_correction_density(model, np.zeros((1, 1)), State(np.array([1.0]), np.array([[0.0]])))
        assert float(val[0]) == pytest.approx(0.125)

    def test_vacuum(self):
        with pytest.raises(VacuumState):
            ito_correction_density(build_noise(1), np.zeros((1, 1)), State(np.array([0.0]), np.array([[0.0]])))

    @given(st.floats(1.05, 3.0), st.floats(0.2, 3.0), st.integers(1, 3))
    def test_dominated_by_energy(self, gamma, a, d):
        rng = np.random.default_rng(int(gamma * 1000) + d)
        eos = EosParams(gamma, a)
        model = build_noise(4, 0.8, 1.5, {"A": [1.0, -1.0, 1.0, 0.5], "B": [1.0, 1.0, -1.0, 0.2]}, dim=d)
        c, c0 = energy_dominance_constants(model, eos)
        rho = 10 ** rng.uniform(-4, 3, 2000)
        m = rng.normal(size=(d, 2000)) * 10 ** rng.uniform(-3, 3, 2000)
        x = rng.uniform(0, 1, (d, 2000))
        lhs = ito_correction_density(model, x, State(rho, m))
        rhs = c * entropy(rho, m, eos) + c0
        assert np.all(lhs <= rhs * (1 + 1e-12))
