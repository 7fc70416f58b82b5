import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from heatgraph.diffusion import (
    SourceConfig,
    TimeGrid,
    field_at,
    heat_kernel_weights,
    input_kernel_weights,
    relative_integral,
    simulate_field,
)
from heatgraph.graph import Spectrum, build_laplacian, eigendecompose, random_connected_graph
from heatgraph.sampling import build_A, build_B


def spectrum_of(lams):
    lams = np.asarray(lams, dtype=float)
    return Spectrum(lams, np.eye(len(lams)))


def random_instance(seed, n=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(3, 9))
    L = build_laplacian(random_connected_graph(n, rng))
    return L, eigendecompose(L), rng.normal(size=n), rng.normal(size=n)


def euler(L, x0, q, t, step=1e-5):
    # independent forward integration of dx/dt = -L x + q
    x = x0.copy()
    steps = int(round(t / step))
    for _ in range(steps):
        x = x + step * (q - L @ x)
    return x


class TestHeatKernel:
    def test_zero_time(self):
        assert np.array_equal(heat_kernel_weights(spectrum_of([0, 1, 5]), 0.0), [1, 1, 1])

    def test_zero_frequency(self):
        for t in (0.0, 0.3, 100.0):
            assert heat_kernel_weights(spectrum_of([0, 2]), t)[0] == 1.0

    def test_closed_form(self):
        assert heat_kernel_weights(spectrum_of([2.0]), 0.5)[0] == pytest.approx(0.36787944117144233, rel=1e-15)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            heat_kernel_weights(spectrum_of([1.0]), -0.1)


class TestInputKernel:
    @pytest.mark.parametrize("t", [0.0, 0.16, 1.0, 7.5])
    def test_zero_frequency_is_t(self, t):
        assert input_kernel_weights(spectrum_of([0.0]), t)[0] == t

    @pytest.mark.parametrize("lam", [0.0, 1e-9, 0.5, 30.0])
    def test_zero_time_is_zero(self, lam):
        assert input_kernel_weights(spectrum_of([lam]), 0.0)[0] == 0.0

    def test_matches_quadrature(self):
        lam, t = 3.0, 0.7
        expected, _ = quad(lambda s: np.exp(-lam * s), 0, t, epsabs=1e-14, epsrel=1e-14)
        assert abs(input_kernel_weights(spectrum_of([lam]), t)[0] - expected) <= 1e-10

    @pytest.mark.parametrize("lam", [1e-14, 1e-10])
    def test_small_argument_bound(self, lam):
        t = 1.0
        assert abs(input_kernel_weights(spectrum_of([lam]), t)[0] - t) <= t * t * lam

    def test_taylor_branch_is_continuous(self):
        z = np.array([0.99999e-4, 1.00001e-4])
        exact = -np.expm1(-z) / z
        np.testing.assert_allclose(relative_integral(z), exact, rtol=1e-15)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            input_kernel_weights(spectrum_of([1.0]), -1.0)

    @settings(max_examples=100, deadline=None)
    @given(lam=st.floats(0, 1e3), t=st.floats(0, 1e2))
    def test_ranges(self, lam, t):
        s = spectrum_of([lam])
        a = heat_kernel_weights(s, t)[0]
        b = input_kernel_weights(s, t)[0]
        assert 0 <= a <= 1
        assert 0 <= b <= t * (1 + 1e-15)
        if t > 0 and lam * t < 700:
            assert a > 0


class TestTimeGrid:
    def test_start_index(self):
        np.testing.assert_allclose(TimeGrid(0.16, 10, 0).times[[0, -1]], [0.0, 1.44])
        np.testing.assert_allclose(TimeGrid(0.16, 10, 1).times[[0, -1]], [0.16, 1.6])

    @pytest.mark.parametrize("args", [(0.0, 3), (-1.0, 3), (0.1, 0), (0.1, 3, 2)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            TimeGrid(*args)


class TestFieldAt:
    def test_time_zero_is_initial_field(self):
        _, s, x0, q = random_instance(0)
        np.testing.assert_allclose(field_at(s, SourceConfig(x0, q), 0.0), x0, rtol=0, atol=1e-14)

    def test_long_time_is_mean(self):
        _, s, x0, _ = random_instance(1)
        t = 1e3 / s.eigenvalues[1]
        x = field_at(s, SourceConfig.initial(x0), t)
        np.testing.assert_allclose(x, np.full_like(x0, x0.mean()), rtol=0, atol=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_euler_integration(self, seed):
        L, s, x0, q = random_instance(seed, n=6)
        x = field_at(s, SourceConfig(x0, q), 0.3)
        ref = euler(L, x0, q, 0.3)
        assert np.linalg.norm(x - ref) <= 1e-4 * np.linalg.norm(ref)

    def test_dimension_mismatch(self):
        _, s, _, _ = random_instance(0, n=5)
        with pytest.raises(ValueError):
            field_at(s, SourceConfig.initial(np.ones(4)), 0.1)

    def test_source_lengths_must_agree(self):
        with pytest.raises(ValueError):
            SourceConfig(np.ones(3), np.ones(4))

    @pytest.mark.parametrize("seed", range(5))
    def test_semigroup(self, seed):
        _, s, x0, _ = random_instance(seed)
        t1, t2 = 0.37, 0.81
        direct = field_at(s, SourceConfig.initial(x0), t1 + t2)
        mid = field_at(s, SourceConfig.initial(x0), t1)
        twice = field_at(s, SourceConfig.initial(mid), t2)
        assert np.linalg.norm(direct - twice) <= 1e-10 * np.linalg.norm(direct)

    def test_steady_state_with_input(self):
        # with q orthogonal to the constant mode, x(t) -> L^+ q
        L, s, _, q = random_instance(4)
        q = q - q.mean()
        x = field_at(s, SourceConfig.input(q), 200.0 / s.eigenvalues[1])
        np.testing.assert_allclose(x, np.linalg.pinv(L) @ q, atol=1e-8)


class TestSimulateField:
    def test_single_sample_at_zero(self):
        _, s, x0, q = random_instance(2)
        X = simulate_field(s, SourceConfig(x0, q), TimeGrid(0.5, 1, 0))
        np.testing.assert_allclose(X[:, 0], x0, atol=1e-14)

    def test_columns_are_field_at(self):
        _, s, x0, q = random_instance(3)
        grid = TimeGrid(0.16, 10, 1)
        src = SourceConfig(x0, q)
        X = simulate_field(s, src, grid)
        for k, t in enumerate(grid.times):
            assert np.array_equal(X[:, k], field_at(s, src, t))

    def test_matrix_form(self):
        _, s, x0, q = random_instance(5)
        grid = TimeGrid(0.2, 7, 1)
        U = s.eigenvectors
        xf, qf = U.T @ x0, U.T @ q
        expected = U @ np.diag(xf) @ build_A(s, grid).T + U @ np.diag(qf) @ build_B(s, grid).T
        np.testing.assert_allclose(simulate_field(s, SourceConfig(x0, q), grid), expected, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_energy_decays_without_input(self, seed):
        _, s, x0, _ = random_instance(seed)
        X = simulate_field(s, SourceConfig.initial(x0), TimeGrid(0.1, 20, 0))
        norms = np.linalg.norm(X, axis=0)
        assert np.all(np.diff(norms) <= 1e-12)
