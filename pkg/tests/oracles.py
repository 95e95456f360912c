"""Independent numerical oracles used to derive expected test values.

These deliberately avoid the analytic code paths they are used to
check: gradients come from central finite differences, optima from
dense grid enumeration, expectations from Monte Carlo.
"""

import numpy as np


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar f at x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def finite_diff_cross_div(k, x, y, h=1e-4):
    """sum_i d^2 k / dx_i dy_i via 4-point central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        total += (
            k(x + e, y + e) - k(x + e, y - e) - k(x - e, y + e) + k(x - e, y - e)
        ) / (4.0 * h * h)
    return total


def finite_diff_grad_x(k, x, y, h=1e-5):
    """Gradient of k(x, y) in its first argument."""
    return finite_diff_grad(lambda u: k(u, y), x, h)


def finite_diff_grad_y(k, x, y, h=1e-5):
    """Gradient of k(x, y) in its second argument."""
    return finite_diff_grad(lambda v: k(x, v), y, h)


def simplex_grid(n, step):
    """All lattice points of the probability simplex with resolution ``step``.

    Yields weight vectors in chunks (2-d arrays) to bound memory.
    """
    m = int(round(1.0 / step))
    if n == 2:
        i = np.arange(m + 1)
        w = np.stack([i, m - i], axis=1) / m
        yield w
    elif n == 3:
        for i in range(m + 1):
            j = np.arange(m - i + 1)
            w = np.stack([np.full_like(j, i), j, m - i - j], axis=1) / m
            yield w
    elif n == 4:
        for i in range(m + 1):
            rem = m - i
            j_grid, k_grid = np.meshgrid(np.arange(rem + 1), np.arange(rem + 1), indexing="ij")
            mask = j_grid + k_grid <= rem
            j = j_grid[mask]
            k = k_grid[mask]
            w = np.stack([np.full_like(j, i), j, k, rem - j - k], axis=1) / m
            yield w
    else:
        raise ValueError("simplex_grid supports n in {2, 3, 4}")


def grid_min_quadratic(K, step=1e-3):
    """Minimum of w^T K w over the simplex grid (brute force oracle)."""
    K = np.asarray(K, dtype=float)
    best = np.inf
    for w in simplex_grid(K.shape[0], step):
        vals = np.einsum("ij,jk,ik->i", w, K, w)
        best = min(best, float(vals.min()))
    return best


def grid_min_distance(v, step=1e-3):
    """argmin over the simplex grid of ||w - v||; returns (w, distance)."""
    v = np.asarray(v, dtype=float)
    best_w, best_d = None, np.inf
    for w in simplex_grid(v.size, step):
        d = np.linalg.norm(w - v[None, :], axis=1)
        i = int(np.argmin(d))
        if d[i] < best_d:
            best_d = float(d[i])
            best_w = w[i]
    return best_w, best_d


def mc_gaussian_expectation(f, d, n_draws, rng):
    """Monte Carlo E f(Z), Z ~ N(0, I_d); returns (mean, standard error)."""
    z = rng.standard_normal((n_draws, d))
    vals = f(z)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws))
