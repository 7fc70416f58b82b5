import json

import numpy as np
import pytest

from heatgraph.diffusion import SourceConfig, TimeGrid, field_at, simulate_field
from heatgraph.graph import build_laplacian, eigendecompose, random_connected_graph
from heatgraph.recovery import (
    RankDeficientError,
    identifiability_check,
    recover_external_input,
    recover_initial_field,
    recover_joint,
    solve_least_squares,
)
from heatgraph.sampling import (
    VertexSelection,
    build_case1_operator,
    build_case2_operator,
    build_joint_operator,
    random_selection,
    vec,
)


def rel_err(est, truth):
    return np.linalg.norm(est - truth) / np.linalg.norm(truth)


def spectrum_of(n, seed):
    return eigendecompose(build_laplacian(random_connected_graph(n, seed)))


class TestInitialField:
    def test_plate_two_hot_spots(self, plate_spectrum, plate_grid, plate_selection, hot_spots):
        Y = plate_selection.observe(simulate_field(plate_spectrum, SourceConfig.initial(hot_spots), plate_grid))
        op = build_case1_operator(plate_spectrum, plate_grid, plate_selection)
        res = recover_initial_field(Y, op, plate_spectrum)
        assert rel_err(res.x0_hat, hot_spots) <= 1e-6
        assert res.rank_status == "full"
        assert res.q_hat is None

    def test_zero_data(self):
        s = spectrum_of(6, 0)
        grid = TimeGrid(0.1, 6)
        op = build_case1_operator(s, grid, VertexSelection((0, 3), 6))
        res = recover_initial_field(np.zeros((2, 6)), op, s)
        assert not np.any(res.x0_hat)
        assert res.residual_norm == 0.0

    def test_dense_field_from_two_sensors(self, rng):
        s = spectrum_of(6, 1)
        grid = TimeGrid(0.1, 6)
        sel = VertexSelection((1, 4), 6)
        x0 = rng.normal(size=6)
        Y = sel.observe(simulate_field(s, SourceConfig.initial(x0), grid))
        res = recover_initial_field(Y, build_case1_operator(s, grid, sel), s)
        assert rel_err(res.x0_hat, x0) <= 1e-8
        np.testing.assert_allclose(s.eigenvectors @ res.spectral["x0"], res.x0_hat)

    def test_too_few_observations(self):
        s = spectrum_of(10, 2)
        grid = TimeGrid(0.1, 3)
        op = build_case1_operator(s, grid, VertexSelection((0, 5), 10))
        with pytest.raises(RankDeficientError) as info:
            recover_initial_field(np.zeros((2, 3)), op, s)
        assert info.value.rank == 6 and info.value.n_unknowns == 10

    def test_shape_and_kind_checks(self):
        s = spectrum_of(6, 3)
        grid = TimeGrid(0.1, 6)
        sel = VertexSelection((0, 3), 6)
        op = build_case1_operator(s, grid, sel)
        with pytest.raises(ValueError, match="shape"):
            recover_initial_field(np.zeros((6, 2)), op, s)
        with pytest.raises(ValueError, match="initial_only"):
            recover_initial_field(np.zeros((2, 6)), build_case2_operator(s, grid, sel), s)


class TestExternalInput:
    def test_dense_input(self, rng):
        s = spectrum_of(8, 4)
        grid = TimeGrid(0.1, 5)
        sel = VertexSelection((0, 3, 6), 8)
        q = rng.normal(size=8)
        Y = sel.observe(simulate_field(s, SourceConfig.input(q), grid))
        res = recover_external_input(Y, build_case2_operator(s, grid, sel), s)
        assert rel_err(res.q_hat, q) <= 1e-8
        assert res.x0_hat is None

    def test_zero_input(self):
        s = spectrum_of(8, 4)
        grid = TimeGrid(0.1, 5)
        op = build_case2_operator(s, grid, VertexSelection((0, 3, 6), 8))
        assert not np.any(recover_external_input(np.zeros((3, 5)), op, s).q_hat)

    def test_single_sample_at_zero_is_rank_error(self):
        s = spectrum_of(4, 5)
        with pytest.warns(UserWarning):
            op = build_case2_operator(s, TimeGrid(0.1, 1, 0), VertexSelection((0, 1, 2, 3), 4))
        with pytest.raises(RankDeficientError):
            recover_external_input(np.zeros((4, 1)), op, s)


class TestJoint:
    def test_plate_hot_spots_and_smooth_input(self, plate_spectrum, plate_grid, plate_selection, hot_spots):
        P = 5
        q = plate_spectrum.lowpass_basis(P) @ np.array([40.0, -15.0, 10.0, 6.0, -4.0])
        X = simulate_field(plate_spectrum, SourceConfig(hot_spots, q), plate_grid)
        op = build_joint_operator(plate_spectrum, plate_grid, plate_selection, P)
        res = recover_joint(plate_selection.observe(X), op, plate_spectrum, P)
        assert rel_err(res.x0_hat, hot_spots) <= 1e-6
        assert rel_err(res.q_hat, q) <= 1e-6

    def test_zero_sources(self):
        s = spectrum_of(12, 6)
        grid = TimeGrid(0.1, 5)
        op = build_joint_operator(s, grid, VertexSelection((0, 3, 7, 10), 12), 2)
        res = recover_joint(np.zeros((4, 5)), op, s)
        assert not np.any(res.x0_hat) and not np.any(res.q_hat)

    def test_small_graph(self, rng):
        s = spectrum_of(12, 7)
        grid = TimeGrid(0.1, 5)
        sel = VertexSelection((0, 3, 7, 10), 12)
        x0 = rng.normal(size=12)
        qfp = rng.normal(size=2)
        q = s.lowpass_basis(2) @ qfp
        Y = sel.observe(simulate_field(s, SourceConfig(x0, q), grid))
        res = recover_joint(Y, build_joint_operator(s, grid, sel, 2), s)
        assert rel_err(res.x0_hat, x0) <= 1e-8
        assert rel_err(res.q_hat, q) <= 1e-8
        np.testing.assert_allclose(res.spectral["q"], qfp, rtol=1e-8)

    def test_bandwidth_mismatch(self):
        s = spectrum_of(12, 6)
        op = build_joint_operator(s, TimeGrid(0.1, 5), VertexSelection((0, 3, 7, 10), 12), 2)
        with pytest.raises(ValueError, match="bandwidth"):
            recover_joint(np.zeros((4, 5)), op, s, 3)


class TestIdentifiability:
    def test_too_few_rows(self):
        s = spectrum_of(10, 8)
        op = build_case1_operator(s, TimeGrid(0.1, 2), VertexSelection((0, 1, 2), 10))
        status = identifiability_check(op)
        assert not status and status.underdetermined
        assert "KT < M" in status.reason

    def test_unconstrained_joint_needs_all_vertices(self):
        s = spectrum_of(10, 9)
        grid = TimeGrid(0.1, 30)
        status = identifiability_check(build_joint_operator(s, grid, VertexSelection((0, 3, 6, 9), 10), 10))
        assert not status and not status.underdetermined
        # rank is capped by N + K: one decay per frequency plus a constant per sensor
        assert status.rank <= 14

    def test_full_observation_recovers_both(self):
        s = spectrum_of(10, 9)
        op = build_joint_operator(s, TimeGrid(0.2, 3), VertexSelection(tuple(range(10)), 10), 10)
        status = identifiability_check(op)
        assert status and status.rank == 20


def noiseless_trial(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 21))
    s = spectrum_of(n, rng)
    grid = TimeGrid(0.1, 8)
    k = -(-n // 8) + 1
    sel = random_selection(n, k, rng)
    x0 = rng.normal(size=n)
    Y = sel.observe(simulate_field(s, SourceConfig.initial(x0), grid))
    return s, build_case1_operator(s, grid, sel), Y, x0, sel, grid


@pytest.mark.parametrize("seed", range(50))
def test_noiseless_exactness(seed):
    s, op, Y, x0, _, _ = noiseless_trial(seed)
    assert identifiability_check(op)
    assert rel_err(recover_initial_field(Y, op, s).x0_hat, x0) <= 1e-8


def test_estimator_is_linear(rng):
    s, op, Y1, _, _, _ = noiseless_trial(3)
    Y2 = rng.normal(size=Y1.shape)
    a, b = 1.7, -0.4
    combo = recover_initial_field(a * Y1 + b * Y2, op, s).spectral["x0"]
    parts = a * recover_initial_field(Y1, op, s).spectral["x0"] + b * recover_initial_field(Y2, op, s).spectral["x0"]
    assert np.linalg.norm(combo - parts) <= 1e-10 * np.linalg.norm(parts)


def test_residual_is_orthogonal(rng):
    s, op, Y, _, _, _ = noiseless_trial(4)
    Y = Y + rng.normal(scale=1e-2, size=Y.shape)
    y = vec(Y)
    theta = solve_least_squares(op, y)
    grad = op.matrix.T @ (op.matrix @ theta - y)
    assert np.abs(grad).max() <= 1e-8 * np.linalg.norm(op.matrix, 2) * np.linalg.norm(y)


def test_batched_solve_matches_columns(rng):
    s, op, Y, _, _, _ = noiseless_trial(5)
    ys = vec(Y)[:, None] + rng.normal(size=(Y.size, 3))
    batch = solve_least_squares(op, ys)
    for j in range(3):
        np.testing.assert_allclose(batch[:, j], solve_least_squares(op, ys[:, j]), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_unobserved_vertices_are_reconstructed(seed):
    s, op, Y, x0, sel, grid = noiseless_trial(seed)
    x0_hat = recover_initial_field(Y, op, s).x0_hat
    hidden = np.setdiff1d(np.arange(s.n), sel.index)
    for t in grid.times:
        truth = field_at(s, SourceConfig.initial(x0), t)[hidden]
        est = field_at(s, SourceConfig.initial(x0_hat), t)[hidden]
        assert np.linalg.norm(est - truth) <= 1e-6 * np.linalg.norm(truth)


def test_result_serializes(rng):
    s, op, Y, _, _, _ = noiseless_trial(6)
    d = json.loads(recover_initial_field(Y, op, s).to_json())
    assert d["rank_status"] == "full"
    assert len(d["x0_hat"]) == s.n and d["q_hat"] is None
    assert isinstance(d["operator_condition"], float)
