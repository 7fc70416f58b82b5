"""Least-squares recovery of diffusion sources from subsampled observations.

All estimators solve ``op @ theta = vec(Y)`` through the SVD of the
operator, so the operator's conditioning is never squared. A numerically
rank-deficient operator is an error: a minimum-norm answer would not be
the source that generated the data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sampling import (
    INITIAL_ONLY,
    INPUT_ONLY,
    JOINT_BANDLIMITED,
    IdentifiabilityError,
    ObservationOperator,
    conditioning_report,
    vec,
)


class RankDeficientError(IdentifiabilityError):
    def __init__(self, message, rank, n_unknowns):
        super().__init__(message)
        self.rank = rank
        self.n_unknowns = n_unknowns


@dataclass(frozen=True)
class Identifiability:
    identifiable: bool
    rank: int
    n_unknowns: int
    n_observations: int
    sigma_min: float
    reason: str = ""

    @property
    def underdetermined(self):
        return self.n_observations < self.n_unknowns

    def __bool__(self):
        return self.identifiable


def identifiability_check(op):
    """Full numerical column rank of ``op`` (an operator or a plain matrix)."""
    report = conditioning_report(op)
    m, n = report.shape
    if report.full_column_rank:
        return Identifiability(True, report.rank, n, m, report.sigma_min)
    if m < n:
        reason = f"KT < M: {m} observations for {n} unknowns (rank {report.rank})"
    else:
        reason = f"numerical rank {report.rank} < {n} unknowns, sigma_min {report.sigma_min:.3e}"
    return Identifiability(False, report.rank, n, m, report.sigma_min, reason)


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """Estimated sources plus fit diagnostics.

    ``spectral`` maps ``"x0"`` and/or ``"q"`` to the raw least-squares
    coefficients; the vertex-domain estimates are their inverse graph
    Fourier transforms (through ``U_P`` for a bandlimited input).
    """

    x0_hat: np.ndarray | None
    q_hat: np.ndarray | None
    spectral: dict
    residual_norm: float
    operator_condition: float
    rank: int
    n_unknowns: int

    @property
    def rank_status(self):
        return "full" if self.rank == self.n_unknowns else f"deficient({self.rank})"

    def to_dict(self):
        def arr(v):
            return None if v is None else np.asarray(v).tolist()

        return {
            "x0_hat": arr(self.x0_hat),
            "q_hat": arr(self.q_hat),
            "spectral": {k: arr(v) for k, v in self.spectral.items()},
            "residual_norm": float(self.residual_norm),
            "operator_condition": float(self.operator_condition),
            "rank_status": self.rank_status,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def solve_least_squares(op, y):
    """Pseudoinverse solve of ``op @ theta = y`` via the operator's SVD.

    ``y`` may be a vector or a matrix whose columns are independent
    right-hand sides. Raises :class:`RankDeficientError` when ``op`` lacks
    full numerical column rank.
    """
    if not isinstance(op, ObservationOperator):
        raise TypeError("expected an ObservationOperator")
    m, n = op.shape
    y = np.asarray(y, dtype=float)
    if y.shape[0] != m:
        raise ValueError(f"operator has {m} rows, data has {y.shape[0]}")
    report = conditioning_report(op)
    if not report.full_column_rank:
        status = identifiability_check(op)
        raise RankDeficientError(f"operator is not identifiable: {status.reason}", report.rank, n)
    W, s, Vt = op.svd
    coeff = W.T @ y
    coeff = coeff / (s[:, None] if y.ndim == 2 else s)
    theta = Vt.T @ coeff
    return theta


def _prepare(Y, op, spectrum, kind):
    if op.kind != kind:
        raise ValueError(f"expected a {kind} operator, got {op.kind}")
    if op.selection.total != spectrum.n:
        raise ValueError("operator and spectrum describe different graphs")
    Y = np.asarray(Y, dtype=float)
    expected = (op.selection.k, op.grid.count)
    if Y.shape != expected:
        raise ValueError(f"observations must have shape {expected}, got {Y.shape}")
    return vec(Y)


def _finish(op, y, theta, x0_hat, q_hat, spectral):
    report = conditioning_report(op)
    residual = float(np.linalg.norm(op.matrix @ theta - y))
    return RecoveryResult(
        x0_hat, q_hat, spectral, residual, report.condition_number, report.rank, op.shape[1]
    )


def recover_initial_field(Y, op, spectrum):
    """Estimate ``x0`` from ``Y`` (K x T) when the input is zero."""
    y = _prepare(Y, op, spectrum, INITIAL_ONLY)
    xf = solve_least_squares(op, y)
    return _finish(op, y, xf, spectrum.eigenvectors @ xf, None, {"x0": xf})


def recover_external_input(Y, op, spectrum):
    """Estimate ``q`` from ``Y`` (K x T) when the initial field is zero."""
    y = _prepare(Y, op, spectrum, INPUT_ONLY)
    qf = solve_least_squares(op, y)
    return _finish(op, y, qf, None, spectrum.eigenvectors @ qf, {"q": qf})


def recover_joint(Y, op, spectrum, bandwidth=None):
    """Estimate ``x0`` and a bandlimited ``q``.

    ``bandwidth`` defaults to the one the operator was built with; passing
    a different value is an error.
    """
    y = _prepare(Y, op, spectrum, JOINT_BANDLIMITED)
    if bandwidth is not None and bandwidth != op.bandwidth:
        raise ValueError(f"operator was built for bandwidth {op.bandwidth}, not {bandwidth}")
    theta = solve_least_squares(op, y)
    N, P = spectrum.n, op.bandwidth
    xf, qfp = theta[:N], theta[N:]
    return _finish(
        op,
        y,
        theta,
        spectrum.eigenvectors @ xf,
        spectrum.lowpass_basis(P) @ qfp,
        {"x0": xf, "q": qfp},
    )


def recover(Y, op, spectrum):
    """Dispatch on the operator kind."""
    return {
        INITIAL_ONLY: recover_initial_field,
        INPUT_ONLY: recover_external_input,
        JOINT_BANDLIMITED: recover_joint,
    }[op.kind](Y, op, spectrum)
