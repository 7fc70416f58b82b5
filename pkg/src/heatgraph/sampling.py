"""Observation operators for spatially subsampled, uniformly timed heat data.

Observing vertices ``S`` at times ``t_1..t_T`` gives ``Y = X[S, :]``
(K x T). Stacking the columns of ``Y`` (``y = vec(Y)``, time-major blocks
of K sensor rows) turns the forward model into a linear system in the
spectral coefficients of the sources:

* initial field only:  ``y = (A o U_S) x_f0``
* input only:          ``y = (B o U_S) q_f``
* both, ``q`` limited to the ``P`` lowest frequencies:
  ``y = [A o U_S | (B o U_S)[:, :P]] [x_f0; q_fP]``

where ``o`` is the column-wise Kronecker (Khatri-Rao) product and ``U_S``
holds the rows of the eigenvector matrix at the observed vertices.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .diffusion import heat_kernel_weights, input_kernel_weights

INITIAL_ONLY = "initial_only"
INPUT_ONLY = "input_only"
JOINT_BANDLIMITED = "joint_bandlimited"

_ZERO_COLUMN_TOL = 1e-12


class IdentifiabilityError(ValueError):
    """The requested configuration cannot determine the unknowns uniquely."""


@dataclass(frozen=True)
class VertexSelection:
    """Sorted, distinct observed vertices (0-based) out of ``total``.

    Acts as the K x N selection matrix; :meth:`matrix` materializes it.
    """

    vertices: tuple
    total: int

    def __post_init__(self):
        v = tuple(int(i) for i in self.vertices)
        object.__setattr__(self, "vertices", v)
        if not v:
            raise ValueError("selection must contain at least one vertex")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("selected vertices must be strictly increasing")
        if v[0] < 0 or v[-1] >= self.total:
            raise ValueError(f"selected vertex outside [0, {self.total})")

    @classmethod
    def of(cls, vertices, total):
        return cls(tuple(sorted(set(int(i) for i in vertices))), total)

    @property
    def k(self):
        return len(self.vertices)

    @property
    def index(self):
        return np.array(self.vertices, dtype=np.int64)

    def matrix(self):
        Phi = np.zeros((self.k, self.total))
        Phi[np.arange(self.k), self.index] = 1.0
        return Phi

    def observe(self, X):
        """Rows of ``X`` at the selected vertices (``Phi @ X``)."""
        X = np.asarray(X)
        if X.shape[0] != self.total:
            raise ValueError(f"expected {self.total} rows, got {X.shape[0]}")
        return X[self.index]

    def to_json(self):
        return json.dumps([i + 1 for i in self.vertices])

    @classmethod
    def from_json(cls, text, total):
        raw = json.loads(text)
        if any(int(i) != i or not 1 <= i <= total for i in raw):
            raise ValueError(f"selection indices must be integers in [1, {total}]")
        return cls(tuple(int(i) - 1 for i in raw), total)

    def write(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def read(cls, path, total):
        return cls.from_json(Path(path).read_text(), total)


@dataclass(frozen=True)
class ConditioningReport:
    sigma_min: float
    sigma_max: float
    condition_number: float
    rank: int
    rank_tol: float
    shape: tuple

    @property
    def full_column_rank(self):
        return self.rank == self.shape[1]


def conditioning_report(op):
    """Extreme singular values, condition number and numerical rank.

    ``op`` may be an :class:`ObservationOperator` or any 2-D array. The
    rank counts singular values above ``max(m, n) * eps * sigma_max``.
    For a wide matrix ``sigma_min`` is the smallest of its ``m`` singular
    values.
    """
    if isinstance(op, ObservationOperator):
        s = op.singular_values
        M = op.matrix
    else:
        M = np.asarray(op, dtype=float)
        s = np.linalg.svd(M, compute_uv=False)
    m, n = M.shape
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if s.size else 0.0
    tol = max(m, n) * np.finfo(float).eps * smax
    rank = int(np.count_nonzero(s > tol))
    cond = smax / smin if smin > 0 else np.inf
    return ConditioningReport(smin, smax, cond, rank, tol, (m, n))


@dataclass(frozen=True, eq=False)
class ObservationOperator:
    """Matrix mapping source spectra to ``vec(Y)``.

    ``kind`` is one of ``initial_only``, ``input_only`` or
    ``joint_bandlimited``; for the joint kind the first ``N`` columns act
    on ``x_f0`` and the last ``bandwidth`` on the leading input
    coefficients.
    """

    matrix: np.ndarray
    kind: str
    grid: object
    selection: VertexSelection
    bandwidth: int | None = None

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def svd(self):
        return np.linalg.svd(self.matrix, full_matrices=False)

    @property
    def singular_values(self):
        return self.svd[1]

    def __matmul__(self, other):
        return self.matrix @ other


def build_A(spectrum, grid):
    """T x N matrix whose row ``k`` is ``a(t_k)``."""
    return np.vstack([heat_kernel_weights(spectrum, t) for t in grid.times])


def build_B(spectrum, grid):
    """T x N matrix whose row ``k`` is ``b(t_k)``."""
    return np.vstack([input_kernel_weights(spectrum, t) for t in grid.times])


def khatri_rao(A, C):
    """Column-wise Kronecker product; row ``k * C.shape[0] + r`` is ``A[k] * C[r]``.

    With this ordering ``vec(C @ diag(b) @ A.T) == khatri_rao(A, C) @ b``
    for column-stacking ``vec``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if A.shape[1] != C.shape[1]:
        raise ValueError(f"column counts differ: {A.shape[1]} vs {C.shape[1]}")
    return scipy.linalg.khatri_rao(A, C)


def vec(Y):
    """Column-stacking vectorization."""
    return np.asarray(Y).reshape(-1, order="F")


def _observed_basis(spectrum, selection):
    if selection.total != spectrum.n:
        raise ValueError(f"selection is over {selection.total} vertices, graph has {spectrum.n}")
    US = spectrum.eigenvectors[selection.index]
    dead = np.flatnonzero(np.abs(US).max(axis=0) <= _ZERO_COLUMN_TOL)
    if dead.size:
        raise IdentifiabilityError(
            f"eigenvector {dead[0]} vanishes on every observed vertex; "
            "its coefficient cannot be observed"
        )
    return US


def build_case1_operator(spectrum, grid, selection):
    """Operator ``A o U_S`` for recovering the initial field."""
    US = _observed_basis(spectrum, selection)
    return ObservationOperator(khatri_rao(build_A(spectrum, grid), US), INITIAL_ONLY, grid, selection)


def build_case2_operator(spectrum, grid, selection):
    """Operator ``B o U_S`` for recovering a constant input."""
    US = _observed_basis(spectrum, selection)
    if grid.start_index == 0:
        warnings.warn(
            "sampling at t=0 contributes all-zero rows to the input operator",
            stacklevel=2,
        )
    return ObservationOperator(khatri_rao(build_B(spectrum, grid), US), INPUT_ONLY, grid, selection)


def build_joint_operator(spectrum, grid, selection, bandwidth, allow_underdetermined=False):
    """Operator ``[A o U_S | (B o U_S)[:, :P]]`` for an initial field plus a bandlimited input.

    Restricting the input to the first ``P`` eigenvectors multiplies
    ``B o U_S`` by ``U^T U_P``, which is the first ``P`` columns of the
    identity, so only those columns are kept. Systems with fewer rows
    than unknowns raise :class:`IdentifiabilityError` unless
    ``allow_underdetermined`` is set.
    """
    N = spectrum.n
    if not 1 <= bandwidth <= N:
        raise ValueError(f"bandwidth must lie in [1, {N}], got {bandwidth}")
    rows = selection.k * grid.count
    if rows < N + bandwidth:
        msg = f"{rows} observations for {N + bandwidth} unknowns"
        if not allow_underdetermined:
            raise IdentifiabilityError(msg)
        warnings.warn(msg, stacklevel=2)
    US = _observed_basis(spectrum, selection)
    left = khatri_rao(build_A(spectrum, grid), US)
    right = khatri_rao(build_B(spectrum, grid)[:, :bandwidth], US[:, :bandwidth])
    return ObservationOperator(
        np.hstack([left, right]), JOINT_BANDLIMITED, grid, selection, bandwidth
    )


MIN_CONDITION = "min_condition"
MAX_MIN_SINGULAR = "max_min_singular"


def _score(R, block):
    # singular values of [R; block]; R is the triangular factor of the rows chosen so far
    M = block if R is None else np.vstack([R, block])
    s = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * np.finfo(float).eps * s[0]
    full = M.shape[0] >= M.shape[1] and s[-1] > tol
    return s[-1], s[0] / s[-1] if s[-1] > 0 else np.inf, full


def greedy_sensor_order(spectrum, grid, k, objective=MAX_MIN_SINGULAR):
    """Vertices in the order forward greedy selection adds them.

    Every step adds the vertex that maximizes the smallest singular value
    of the stacked initial-field operator (``max_min_singular``) or, once
    some candidate gives full column rank, minimizes its condition number
    (``min_condition``). Ties go to the lowest vertex index. A step never
    depends on ``k``, so the first ``j`` entries are the greedy choice
    for ``j`` sensors.
    """
    if objective not in (MIN_CONDITION, MAX_MIN_SINGULAR):
        raise ValueError(f"unknown objective {objective!r}")
    N = spectrum.n
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= {N}, got {k}")
    A = build_A(spectrum, grid)
    U = spectrum.eigenvectors
    chosen = []
    R = None
    remaining = list(range(N))
    for _ in range(k):
        scores = [_score(R, A * U[v]) for v in remaining]
        use_cond = objective == MIN_CONDITION and any(full for _, _, full in scores)
        best = None
        best_key = None
        for pos, (smin, cond, full) in enumerate(scores):
            if use_cond:
                key = (1, -cond) if full else (0, smin)
            else:
                key = (smin,)
            if best_key is None or key > best_key:
                best, best_key = pos, key
        v = remaining.pop(best)
        chosen.append(v)
        block = A * U[v]
        stacked = block if R is None else np.vstack([R, block])
        R = scipy.linalg.qr(stacked, mode="r")[0]
        R = R[: min(R.shape)]
    return chosen


def greedy_sensor_selection(spectrum, grid, k, objective=MAX_MIN_SINGULAR):
    """Greedy choice of ``k`` observed vertices; see :func:`greedy_sensor_order`."""
    return VertexSelection.of(greedy_sensor_order(spectrum, grid, k, objective), spectrum.n)


def random_selection(n, k, rng):
    rng = np.random.default_rng(rng)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    return VertexSelection.of(rng.choice(n, size=k, replace=False), n)
