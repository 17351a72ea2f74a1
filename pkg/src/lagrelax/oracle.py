"""Independent exact references for certification and tests.

These deliberately share no inference code with the solver modules:
brute force enumerates states, the grid reference is a column-state
dynamic program, and the Gaussian reference is a direct factorization.
"""

from __future__ import annotations

import numpy as np

from .models import (
    DiscreteFactorModel,
    GaussianInfoModel,
    ModelError,
    NotPositiveDefiniteError,
)

BRUTE_FORCE_CAP = 24
GRID_CAP = 12
GAUSS_CAP = 10_000
_DENSE_GAUSS = 2048


class OracleCapError(ModelError):
    """Instance exceeds the oracle's hard size cap."""


def _label_matrix(n: int, offset: int, count: int) -> np.ndarray:
    codes = np.arange(offset, offset + count, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return 1.0 - 2.0 * bits  # bit 0 -> +1, bit 1 -> -1


def brute_force_map(model: DiscreteFactorModel, atol: float = 1e-9):
    """Exhaustive maximum and the set of all maximizers."""
    n = model.n
    if n > BRUTE_FORCE_CAP:
        raise OracleCapError(f"n={n} exceeds brute-force cap {BRUTE_FORCE_CAP}")
    edges = model.graph.hyperedges
    thetas = np.array([model.theta(e) for e in edges])
    best = -np.inf
    argmax: list[np.ndarray] = []
    chunk = 1 << min(n, 16)
    for offset in range(0, 1 << n, chunk):
        X = _label_matrix(n, offset, min(chunk, (1 << n) - offset))
        f = np.zeros(X.shape[0])
        for t, e in zip(thetas, edges):
            f += t * np.prod(X[:, list(e)], axis=1)
        m = float(np.max(f))
        if m > best + atol:
            best = m
            argmax = [X[i].copy() for i in np.where(f >= m - atol)[0]]
        elif m > best - atol:
            best = max(best, m)
            argmax.extend(X[i].copy() for i in np.where(f >= best - atol)[0])
    return best, argmax


def _grid_params(model: DiscreteFactorModel, m: int):
    theta_v = np.zeros((m, m))
    theta_h = np.zeros((m, m))  # (r,c)-(r,c+1)
    theta_u = np.zeros((m, m))  # (r,c)-(r+1,c)
    idx = lambda r, c: r * m + c
    for e, t in model.coefficients.items():
        if len(e) == 1:
            theta_v[e[0] // m, e[0] % m] = t
        elif len(e) == 2:
            (r1, c1), (r2, c2) = (e[0] // m, e[0] % m), (e[1] // m, e[1] % m)
            if r1 == r2 and abs(c1 - c2) == 1:
                theta_h[r1, min(c1, c2)] = t
            elif c1 == c2 and abs(r1 - r2) == 1:
                theta_u[min(r1, r2), c1] = t
            else:
                raise ModelError(f"edge {e} is not a grid edge for m={m}")
        else:
            raise ModelError("grid oracle handles pairwise models only")
    return theta_v, theta_h, theta_u


def exact_grid_map(model: DiscreteFactorModel, m: int | None = None):
    """Exact grid maximum by a (max,+) sweep over column states."""
    if m is None:
        m = int(np.sqrt(model.n))
    if m * m != model.n:
        raise ModelError(f"n={model.n} is not a square grid")
    if m > GRID_CAP:
        raise OracleCapError(f"m={m} exceeds grid cap {GRID_CAP}")
    theta_v, theta_h, theta_u = _grid_params(model, m)
    S = 1 << m
    X = _label_matrix(m, 0, S)  # column states: row r is bit r

    def intra(c):
        f = X @ theta_v[:, c]
        f += (X[:, :-1] * X[:, 1:]) @ theta_u[:-1, c]
        return f

    score = intra(0)
    back = []
    for c in range(1, m):
        couple = (X * theta_h[:, c - 1]) @ X.T  # [prev, cur]
        total = score[:, None] + couple
        back.append(np.argmax(total, axis=0))
        score = np.max(total, axis=0) + intra(c)
    best_state = int(np.argmax(score))
    f_star = float(np.max(score))
    states = [best_state]
    for c in range(m - 1, 0, -1):
        states.append(int(back[c - 1][states[-1]]))
    states.reverse()
    x = np.empty(model.n)
    for c, s in enumerate(states):
        for r in range(m):
            x[r * m + c] = X[s, r]
    return f_star, x


def exact_gaussian_solve(model: GaussianInfoModel):
    """Exact means, marginal variances, and optimum 1/2 h^T J^{-1} h."""
    n = model.n
    if n > GAUSS_CAP:
        raise OracleCapError(f"n={n} exceeds Gaussian cap {GAUSS_CAP}")
    J, h = model.aggregate_dense
    if n <= _DENSE_GAUSS:
        try:
            L = np.linalg.cholesky(J)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("aggregate J is not PD") from exc
        cov = np.linalg.inv(J)
        mean = cov @ h
        return mean, np.diag(cov).copy(), float(0.5 * h @ mean)
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    Js = sp.csc_matrix(J)
    lu = spla.splu(Js)
    mean = lu.solve(h)
    var = np.empty(n)
    block = 256
    for start in range(0, n, block):
        stop = min(start + block, n)
        eye = np.zeros((n, stop - start))
        eye[np.arange(start, stop), np.arange(stop - start)] = 1.0
        cols = lu.solve(eye)
        var[start:stop] = cols[np.arange(start, stop), np.arange(stop - start)]
    return mean, var, float(0.5 * h @ mean)
