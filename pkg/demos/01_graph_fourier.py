"""
Graph Fourier basics
====================

Build a small weighted graph, look at its Laplacian spectrum and filter a
noisy signal in the graph frequency domain.
"""

import numpy as np

from heatgraph import build_laplacian, cycle_graph, eigendecompose, gft, igft, apply_graph_filter

# a 12-vertex ring: its eigenvalues come in pairs 2 - 2cos(2 pi k / 12)
graph = cycle_graph(12)
L = build_laplacian(graph)
spectrum = eigendecompose(L)
print("eigenvalues:", np.round(spectrum.eigenvalues, 4))
print("distinct eigenvalues:", spectrum.has_distinct_eigenvalues())

# a smooth signal plus noise
rng = np.random.default_rng(0)
angle = 2 * np.pi * np.arange(12) / 12
clean = np.cos(angle)
noisy = clean + 0.3 * rng.normal(size=12)

# the GFT is an orthogonal change of basis, so energy is preserved
coeffs = gft(spectrum, noisy)
print("energy (vertex, spectral):", noisy @ noisy, coeffs @ coeffs)
print("round trip error:", np.abs(igft(spectrum, coeffs) - noisy).max())

# ideal low-pass: keep the frequencies below 0.5, where cos(angle) lives
h = (spectrum.eigenvalues < 0.5).astype(float)
smoothed = apply_graph_filter(spectrum, h, noisy)
print("error before filtering:", np.linalg.norm(noisy - clean))
print("error after filtering: ", np.linalg.norm(smoothed - clean))
