"""Seeded model generators for grid and chain benchmark families."""

from __future__ import annotations

import numpy as np

from .models import CliqueTerm, DiscreteFactorModel, GaussianInfoModel, Hypergraph


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
    return edges


def generate_ising_grid(
    m: int, sigma: float, mode: str = "attractive", seed: int = 0
) -> DiscreteFactorModel:
    """Grid model with N(0, sigma^2) node terms and unit edge couplings.

    Attractive mode uses +1 on every edge; frustrated mode draws each edge
    coupling uniformly from {-1, +1}. Reproducible for a fixed seed (PCG64).
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if mode not in ("attractive", "frustrated"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    n = m * m
    coeffs = {}
    node_thetas = rng.normal(0.0, sigma, size=n) if sigma > 0 else np.zeros(n)
    for v in range(n):
        coeffs[(v,)] = float(node_thetas[v])
    for e in grid_edges(m, m):
        if mode == "attractive":
            coeffs[e] = 1.0
        else:
            coeffs[e] = float(rng.choice([-1.0, 1.0]))
    return DiscreteFactorModel(Hypergraph(n, tuple(coeffs)), coeffs)


def _regularized_model(n, structural, eps, h):
    """Node cliques plus structural cliques, with eps spread over every
    clique touching a vertex so each term is strictly positive definite."""
    count = np.ones(n)  # the node clique itself
    for verts, _ in structural:
        for v in verts:
            count[v] += 1
    terms = []
    for v in range(n):
        terms.append(CliqueTerm((v,), np.array([[eps / count[v]]]), np.array([h[v]])))
    seen = {(v,) for v in range(n)}
    for verts, J in structural:
        J = J.copy()
        for k, v in enumerate(verts):
            J[k, k] += eps / count[v]
        key = tuple(sorted(verts))
        if key in seen:
            raise ValueError(f"duplicate clique support {key}")
        seen.add(key)
        terms.append(CliqueTerm(verts, J, np.zeros(len(verts))))
    return GaussianInfoModel.from_cliques(n, terms)


def generate_thin_membrane(m: int, eps: float = 0.01, seed: int = 0) -> GaussianInfoModel:
    """Smoothness prior on an m x m grid: -(x_i - x_j)^2 per edge.

    Each difference penalty contributes the singular block 2[[1,-1],[-1,1]],
    so an eps*x_v^2 regularization is distributed across the cliques at
    each vertex to make every term strictly positive definite. The linear
    term is a seeded standard normal.
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    n = m * m
    h = rng.normal(0.0, 1.0, size=n)
    diff = 2.0 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    structural = [(e, diff) for e in grid_edges(m, m)]
    return _regularized_model(n, structural, eps, h)


def generate_thin_plate(m: int, eps: float = 0.01, seed: int = 0) -> GaussianInfoModel:
    """Curvature prior: -(x_i - mean of neighbors)^2 per grid node."""
    if m < 3:
        raise ValueError("m must be at least 3")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    n = m * m
    h = rng.normal(0.0, 1.0, size=n)
    idx = lambda r, c: r * m + c
    structural = []
    for r in range(m):
        for c in range(m):
            nbrs = []
            if r > 0:
                nbrs.append(idx(r - 1, c))
            if r + 1 < m:
                nbrs.append(idx(r + 1, c))
            if c > 0:
                nbrs.append(idx(r, c - 1))
            if c + 1 < m:
                nbrs.append(idx(r, c + 1))
            verts = tuple(sorted([idx(r, c)] + nbrs))
            a = np.zeros(len(verts))
            a[verts.index(idx(r, c))] = 1.0
            for u in nbrs:
                a[verts.index(u)] = -1.0 / len(nbrs)
            structural.append((verts, 2.0 * np.outer(a, a)))
    return _regularized_model(n, structural, eps, h)


def generate_chain_membrane(n: int, eps: float = 1e-4, seed: int = 0) -> GaussianInfoModel:
    """1D smoothness chain; small eps gives correlation length ~ 1/sqrt(eps)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    h = rng.normal(0.0, 1.0, size=n)
    diff = 2.0 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    structural = [((v, v + 1), diff) for v in range(n - 1)]
    return _regularized_model(n, structural, eps, h)
