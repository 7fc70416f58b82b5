"""Graphs, Laplacians, spectra and the graph Fourier transform.

Vertices are indexed from 0 inside the library. Files on disk use 1-based
indices; :func:`read_graph` and :func:`write_graph` do the conversion.

Laplacians and graph signals are plain ``numpy`` arrays. A :class:`Spectrum`
holds the ascending eigenvalues and the matching orthonormal eigenvectors
(one per column) and is the frequency basis every other module works in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

EPS_EIG = 1e-10
EPS_ORTH = 1e-10
EPS_RECON = 1e-8


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on ``n`` vertices.

    ``edges`` is a sequence of ``(i, j, weight)`` triples with 0-based
    vertex indices. Validation happens in :meth:`validate`, which
    :func:`build_laplacian` and :func:`write_graph` call.
    """

    n: int
    edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        )

    def validate(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={self.n}")
        seen = set()
        for pos, (i, j, w) in enumerate(self.edges):
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {pos} ({i}, {j}) has a vertex outside [0, {self.n})")
            if i == j:
                raise ValueError(f"edge {pos} is a self-loop on vertex {i}")
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"edge {pos} has invalid weight {w}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"edge {pos} duplicates edge {key}")
            seen.add(key)

    def adjacency(self):
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i, j] = w
            W[j, i] = w
        return W

    def is_connected(self):
        if self.n == 1:
            return True
        rows = [i for i, j, w in self.edges if w > 0]
        cols = [j for i, j, w in self.edges if w > 0]
        A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        ncomp, _ = connected_components(A, directed=False)
        return ncomp == 1


def path_graph(n, weight=1.0):
    return Graph(n, [(i, i + 1, weight) for i in range(n - 1)])


def cycle_graph(n, weight=1.0):
    return Graph(n, [(i, (i + 1) % n, weight) for i in range(n)])


def complete_graph(n, weight=1.0):
    return Graph(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)])


def random_connected_graph(n, rng, edge_prob=0.3, weights=(0.5, 2.0)):
    """Random spanning tree plus Erdos-Renyi extra edges, uniform weights.

    Connectivity is guaranteed by the tree, so no rejection loop is needed.
    """
    rng = np.random.default_rng(rng)
    order = rng.permutation(n)
    lo, hi = weights
    edges = {}
    for pos in range(1, n):
        parent = order[rng.integers(pos)]
        child = order[pos]
        edges[(min(parent, child), max(parent, child))] = rng.uniform(lo, hi)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < edge_prob:
                edges[(i, j)] = rng.uniform(lo, hi)
    return Graph(n, [(i, j, w) for (i, j), w in sorted(edges.items())])


def build_laplacian(graph):
    """Combinatorial Laplacian ``D - W`` as a dense symmetric array."""
    graph.validate()
    W = graph.adjacency()
    L = np.diag(W.sum(axis=1)) - W
    return L


def check_laplacian(L, atol=1e-12):
    """Raise ``ValueError`` unless ``L`` is square, exactly symmetric and has zero row sums."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"Laplacian must be square, got shape {L.shape}")
    if not np.array_equal(L, L.T):
        raise ValueError("Laplacian is not exactly symmetric")
    scale = max(np.abs(L).max(initial=0.0), 1.0)
    worst = np.abs(L.sum(axis=1)).max(initial=0.0)
    if worst > atol * scale:
        raise ValueError(f"Laplacian row sums deviate from zero by {worst:.3e}")
    return L


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs of a graph Laplacian.

    Attributes
    ----------
    eigenvalues : (N,) array
        Graph frequencies, ascending.
    eigenvectors : (N, N) array
        Orthonormal columns; column ``n`` pairs with ``eigenvalues[n]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.shape[0]

    def __len__(self):
        return self.n

    def has_distinct_eigenvalues(self, tol=1e-9):
        """True when consecutive eigenvalues differ by more than ``tol`` relative to the largest."""
        lam = self.eigenvalues
        if lam.size < 2:
            return True
        scale = max(abs(lam[-1]), 1.0)
        return bool(np.all(np.diff(lam) > tol * scale))

    def lowpass_basis(self, p):
        """The first ``p`` eigenvectors, spanning the bandlimited signals."""
        if not 1 <= p <= self.n:
            raise ValueError(f"bandwidth must lie in [1, {self.n}], got {p}")
        return self.eigenvectors[:, :p]


def _fix_signs(U):
    # flip columns so the largest-magnitude entry (lowest index on ties) is positive
    mags = np.abs(U)
    peak = mags.max(axis=0)
    lead = np.argmax(mags >= peak * (1 - 1e-9), axis=0)
    signs = np.sign(U[lead, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigendecompose(L):
    """Symmetric eigendecomposition ``L = U diag(lam) U^T`` with ascending ``lam``.

    Eigenvalues within ``EPS_EIG`` (relative to the spectral radius) of zero
    are clamped to exactly zero, which makes the constant mode of a
    connected graph carry frequency 0.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(np.abs(L).max(initial=0.0), 1.0)):
        raise ValueError("eigendecompose needs a symmetric matrix")
    try:
        lam, U = scipy.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        off = L - np.diag(np.diag(L))
        raise np.linalg.LinAlgError(
            f"symmetric eigensolver failed for order {L.shape[0]} "
            f"(off-diagonal Frobenius norm {np.linalg.norm(off):.3e}): {exc}"
        ) from exc
    scale = max(abs(lam[-1]), abs(lam[0]), 1.0)
    if lam[0] < -EPS_EIG * scale:
        raise ValueError(f"matrix is not positive semidefinite: smallest eigenvalue {lam[0]:.3e}")
    lam = np.where(np.abs(lam) <= EPS_EIG * scale, 0.0, lam)
    return Spectrum(lam, _fix_signs(U))


def _match(spectrum, x, what):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spectrum.n:
        raise ValueError(f"{what} has length {x.shape[0]}, graph has {spectrum.n} vertices")
    return x


def gft(spectrum, x):
    """Graph Fourier transform ``U^T x``. Columns of a 2-D ``x`` are transformed independently."""
    x = _match(spectrum, x, "signal")
    return spectrum.eigenvectors.T @ x


def igft(spectrum, x_f):
    """Inverse transform ``U x_f``."""
    x_f = _match(spectrum, x_f, "spectral coefficients")
    return spectrum.eigenvectors @ x_f


def apply_graph_filter(spectrum, h_f, x):
    """Filter ``x`` with frequency response ``h_f``: ``U diag(h_f) U^T x``."""
    h_f = _match(spectrum, h_f, "frequency response")
    if h_f.ndim != 1:
        raise ValueError("frequency response must be a vector")
    x_f = gft(spectrum, x)
    if x_f.ndim == 2:
        return igft(spectrum, h_f[:, None] * x_f)
    return igft(spectrum, h_f * x_f)


def read_graph(path):
    """Load a graph from JSON ``{"n": N, "edges": [[i, j, w], ...]}`` (1-based)."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        n = int(data["n"])
        raw = data["edges"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: graph file needs 'n' and 'edges'") from exc
    edges = []
    for pos, entry in enumerate(raw):
        if len(entry) != 3:
            raise ValueError(f"{path}: edge {pos} must be [i, j, w]")
        i, j, w = entry
        if int(i) != i or int(j) != j:
            raise ValueError(f"{path}: edge {pos} has non-integer vertex index")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"{path}: edge {pos} index out of range [1, {n}]")
        edges.append((int(i) - 1, int(j) - 1, float(w)))
    graph = Graph(n, edges)
    graph.validate()
    return graph


def write_graph(graph, path):
    graph.validate()
    data = {"n": graph.n, "edges": [[i + 1, j + 1, w] for i, j, w in graph.edges]}
    Path(path).write_text(json.dumps(data) + "\n")
