"""Heat diffusion on a graph, ``dx/dt = -L x + q``, solved in the eigenbasis of ``L``.

A field driven by an initial state ``x0`` and a constant input ``q`` is

    x(t) = U diag(U^T x0) a(t) + U diag(U^T q) b(t)

with ``a_n(t) = exp(-lam_n t)`` and ``b_n(t) = (1 - exp(-lam_n t)) / lam_n``
(``b_n(t) = t`` when ``lam_n = 0``). The diffusion constant is fixed so
that the Laplacian enters with a minus sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import gft

_TAYLOR_CUTOFF = 1e-4


@dataclass(frozen=True, eq=False)
class SourceConfig:
    """Initial field ``x0`` and time-invariant input ``q`` (either may be zero)."""

    x0: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if x0.ndim != 1 or x0.shape != q.shape:
            raise ValueError(f"x0 and q must be vectors of equal length, got {x0.shape} and {q.shape}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "q", q)

    @classmethod
    def initial(cls, x0):
        x0 = np.asarray(x0, dtype=float)
        return cls(x0, np.zeros_like(x0))

    @classmethod
    def input(cls, q):
        q = np.asarray(q, dtype=float)
        return cls(np.zeros_like(q), q)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sample times ``t_k = delta * (start_index + k)`` for ``k = 0..count-1``.

    ``start_index=1`` gives ``delta, 2*delta, ...``; ``start_index=0``
    starts sampling at ``t = 0``.
    """

    delta: float
    count: int
    start_index: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"time step must be positive, got {self.delta}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"sample count must be a positive integer, got {self.count}")
        if self.start_index not in (0, 1):
            raise ValueError(f"start_index must be 0 or 1, got {self.start_index}")

    @property
    def times(self):
        return self.delta * (self.start_index + np.arange(self.count))


def _check_time(t):
    if not t >= 0:
        raise ValueError(f"time must be nonnegative, got {t}")


def heat_kernel_weights(spectrum, t):
    """``a(t)``: the decay ``exp(-lam_n t)`` of every graph frequency."""
    _check_time(t)
    return np.exp(-spectrum.eigenvalues * t)


def relative_integral(z):
    """``(1 - exp(-z)) / z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _TAYLOR_CUTOFF
    zs = z[small]
    out[small] = 1.0 - zs / 2.0 * (1.0 - zs / 3.0 * (1.0 - zs / 4.0))
    zl = z[~small]
    out[~small] = -np.expm1(-zl) / zl
    return out


def input_kernel_weights(spectrum, t):
    """``b(t)``: ``f_t(lam) = integral_0^t exp(-lam s) ds`` for every graph frequency."""
    _check_time(t)
    return t * relative_integral(spectrum.eigenvalues * t)


def field_at(spectrum, sources, t):
    """The field at time ``t`` on every vertex."""
    n = spectrum.n
    if sources.x0.shape[0] != n:
        raise ValueError(f"sources have length {sources.x0.shape[0]}, graph has {n} vertices")
    xf0 = gft(spectrum, sources.x0)
    qf = gft(spectrum, sources.q)
    a = heat_kernel_weights(spectrum, t)
    b = input_kernel_weights(spectrum, t)
    return spectrum.eigenvectors @ (xf0 * a + qf * b)


def simulate_field(spectrum, sources, grid):
    """Data matrix ``X`` (N x T); column ``k`` is :func:`field_at` at ``grid.times[k]``."""
    return np.column_stack([field_at(spectrum, sources, t) for t in grid.times])
