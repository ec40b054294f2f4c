"""Shared builders for randomized test instances."""

import numpy as np

import spatial_pricing as sp


def region_from_points(points, mask=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if mask is None:
        mask = np.full(n, sp.Mask.NONE, dtype=np.int8)
    return sp.Region(points=pts, mask=np.asarray(mask, dtype=np.int8), boundary_of_fixed=np.zeros(n, dtype=bool))


def random_kernel(rng, n=None):
    """A random cost kernel; custom tables are symmetric with zero diagonal."""
    k = rng.integers(0, 4)
    if k == 0:
        return sp.CostKernel.metric(1.0)
    if k == 1:
        return sp.CostKernel.metric(float(rng.uniform(0.3, 1.0)))
    if k == 2:
        return sp.CostKernel.quadratic()
    t = rng.uniform(0.05, 2.0, (n, n))
    t = 0.5 * (t + t.T)
    np.fill_diagonal(t, 0.0)
    return sp.CostKernel.custom(t)


def random_points(rng, n, d=1, span=1.0):
    pts = rng.uniform(0.0, span, (n, d))
    if d == 1:
        pts = np.sort(pts, axis=0)
    return pts


def random_partitioned_region(rng, n, d=1):
    """Region with at least one FIXED and one FREE point."""
    while True:
        mask = np.where(rng.uniform(size=n) < 0.4, sp.Mask.FIXED, sp.Mask.FREE).astype(np.int8)
        if (mask == sp.Mask.FIXED).any() and (mask == sp.Mask.FREE).any():
            break
    return region_from_points(random_points(rng, n, d), mask)


def brute_force_price_profit(prices_grid, kernel, region, f):
    """Enumerate all price patterns from per-point candidate lists; return the best profit.

    Independent of the solver path: evaluates the customer problem and the
    price-maximizing tie rule directly per pattern.
    """
    from itertools import product

    from spatial_pricing.model_one import profit_from_prices

    best = -np.inf
    best_pattern = None
    for combo in product(*prices_grid):
        p = sp.PricePattern(np.asarray(combo, dtype=float))
        val = profit_from_prices(p, kernel, region, f)
        if val > best:
            best = val
            best_pattern = p
    return best, best_pattern
