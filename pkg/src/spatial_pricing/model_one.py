"""Whole-region pricing: the agent chooses prices everywhere under a cap.

The profit of a price pattern p sums, over customers, the price actually paid
at the tie-broken purchase location.  The same profit can be evaluated from
the customer value function v alone, which is the variable the general solver
searches over: every candidate is projected onto the feasible set (cost
concave, between 0 and the outside-option value) by clamping and a double
transform, so the search never leaves the admissible class.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ctransform as ct
from ._search import BudgetExceededError, coordinate_ascent, exhaustive_product
from .geometry import CostKernel, CustomerMeasure, PricePattern, Region, eval_cost

__all__ = [
    "SearchMode",
    "SearchConfig",
    "ModelOneSolveReport",
    "BudgetExceededError",
    "profit_from_prices",
    "profit_from_values",
    "solve_metric",
    "solve_general",
    "quadratic_1d_reference",
]

METHOD_METRIC = "metric_closed_form"
METHOD_GENERAL = "general_search"
METHOD_QUADRATIC_REFERENCE = "quadratic_1d_reference"


class SearchMode(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    ASCENT = "ascent"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the discrete solvers.

    levels       : quantization levels per point (exhaustive grid, initial
                   ascent step = cap / (levels - 1)).
    multistarts  : total number of ascent starts (a few deterministic ones
                   plus seeded random ones).
    grid_n       : per-axis resolution of the low-dimensional scans
                   (two-parameter interval solver, boundary controls).
    price_cap    : optional absolute cap overriding the derived per-point caps.
    """

    mode: SearchMode = SearchMode.ASCENT
    levels: int = 8
    multistarts: int = 16
    seed: int = 0
    max_candidates: int = 2_000_000
    max_sweeps: int = 8
    refine_halvings: int = 6
    grid_n: int = 201
    price_cap: Optional[float] = None


@dataclass
class ModelOneSolveReport:
    optimal_price: PricePattern
    optimal_value: ct.ValueFunction
    profit: float
    assignment: ct.AssignmentMap
    method: str
    diagnostics: dict = field(default_factory=dict)


def profit_from_prices(
    p: PricePattern | np.ndarray,
    kernel: CostKernel,
    region: Region,
    f: CustomerMeasure,
    tol: Optional[float] = None,
) -> float:
    """Total income: each customer pays the price at their tie-broken choice."""
    assign = ct.assignment(p, kernel, region, tol=tol)
    prices = p.values if isinstance(p, PricePattern) else np.asarray(p, dtype=float)
    return float(np.dot(f.weights, prices[assign.choice]))


def profit_from_values(
    v: ct.ValueFunction | np.ndarray,
    kernel: CostKernel,
    region: Region,
    f: CustomerMeasure,
    tol: Optional[float] = None,
) -> float:
    """Profit evaluated from a cost-concave value function.

    Each customer contributes v(x) minus the cheapest transport into the
    superdifferential at x.  Rejects inputs that fail the concavity check.
    """
    cost = eval_cost(kernel, region)
    values = v.values if isinstance(v, ct.ValueFunction) else np.asarray(v, dtype=float)
    tol = ct.scale_tol(cost) if tol is None else tol
    if not ct._is_c_concave_table(values, cost, None, tol):
        raise ct.NotCConcaveError("profit_from_values requires a cost-concave input")
    member = ct.superdifferential_mask(values, cost, tol=tol)
    delta = np.where(member, cost, np.inf).min(axis=1)
    return float(np.dot(f.weights, values - delta))


def solve_metric(
    p0: PricePattern,
    kernel: CostKernel,
    region: Region,
    f: CustomerMeasure,
) -> ModelOneSolveReport:
    """Closed form for metric costs: p(x) = min over y of {p0(y) + d(x, y)}.

    The optimal pattern does not depend on the customer distribution; f only
    enters the reported profit.
    """
    if not kernel.is_metric:
        raise ValueError("the closed form needs a metric cost kernel")
    cost = eval_cost(kernel, region)
    bound = p0.values
    if not np.isfinite(bound).any():
        raise ValueError("improper price bound: +inf everywhere")
    popt = np.min(cost + bound[None, :], axis=1)
    price = PricePattern(popt)
    value = ct.value_function(price, kernel, region)
    assign = ct.assignment(price, kernel, region)
    profit = float(np.dot(f.weights, popt[assign.choice]))
    return ModelOneSolveReport(
        optimal_price=price,
        optimal_value=value,
        profit=profit,
        assignment=assign,
        method=METHOD_METRIC,
        diagnostics={"f_independent": True},
    )


def _batch_value_profit(cost: np.ndarray, v0: np.ndarray, weights: np.ndarray, tol: float):
    """Batched generator-price objective: project candidates and evaluate the profit.

    A candidate price vector g induces v(x) = min_y {c(x, y) + g(y)}; the
    candidate value is clamped to [0, v0] and re-projected by a double
    transform, which keeps it cost concave without leaving [0, v0].
    """

    def eval_batch(G: np.ndarray) -> np.ndarray:
        V = np.min(cost[None, :, :] + G[:, None, :], axis=2)
        V = np.clip(V, 0.0, v0[None, :])
        VC = np.min(cost[None, :, :] - V[:, :, None], axis=1)
        VP = np.min(cost[None, :, :] - VC[:, None, :], axis=2)
        member = VP[:, :, None] + VC[:, None, :] - cost[None, :, :] >= -tol
        delta = np.where(member, cost[None, :, :], np.inf).min(axis=2)
        return ((VP - delta) * weights[None, :]).sum(axis=1)

    def project(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = np.min(cost + g[None, :], axis=1)
        v = np.clip(v, 0.0, v0)
        vc = np.min(cost - v[:, None], axis=0)
        vp = np.min(cost - vc[None, :], axis=1)
        return vp, vc

    return eval_batch, project


def solve_general(
    p0: PricePattern,
    kernel: CostKernel,
    region: Region,
    f: CustomerMeasure,
    search: SearchConfig = SearchConfig(),
) -> ModelOneSolveReport:
    """Discrete maximization of the value-function profit over feasible values.

    EXHAUSTIVE enumerates quantized generator prices (refused beyond the
    candidate budget); ASCENT runs multi-start coordinate ascent with step
    halving.  The report's price is the canonical one recovered from the best
    value function, and the reported profit is its price-side evaluation.
    """
    cost = eval_cost(kernel, region)
    tol = ct.scale_tol(cost)
    if not p0.is_proper():
        raise ValueError("improper price bound: +inf everywhere")
    v0 = np.min(cost + p0.values[None, :], axis=1)
    if search.price_cap is not None:
        caps = np.full(region.size, float(search.price_cap))
    else:
        # pricing above the reservation cap -v0^c never attracts a customer
        caps = -np.min(cost - v0[:, None], axis=0)
        caps = np.maximum(caps, 0.0)
    eval_batch, project = _batch_value_profit(cost, v0, f.weights, tol)

    if search.mode is SearchMode.EXHAUSTIVE:
        g_best, val_best, n_eval = exhaustive_product(
            eval_batch, caps, search.levels, search.max_candidates
        )
        diagnostics = {"mode": "exhaustive", "evaluations": n_eval, "search_space": search.levels ** region.size}
    else:
        rng = np.random.default_rng(search.seed)
        starts = [np.zeros_like(caps), caps, 0.5 * caps, v0.copy(), 0.5 * v0]
        while len(starts) < search.multistarts:
            starts.append(rng.uniform(0.0, caps))
        cap_global = float(caps.max()) if caps.size else 0.0
        step0 = cap_global / max(search.levels - 1, 1)
        min_step = step0 / 2**search.refine_halvings if step0 > 0 else 0.0
        if step0 == 0.0:
            g_best, val_best, n_eval = np.zeros_like(caps), float(eval_batch(np.zeros((1, caps.size)))[0]), 1
        else:
            g_best, val_best, n_eval = coordinate_ascent(
                eval_batch, caps, starts, step0, max(min_step, 1e-12), search.max_sweeps
            )
        diagnostics = {"mode": "ascent", "evaluations": n_eval, "starts": len(starts)}

    v_best, vc_best = project(g_best)
    price = PricePattern(-vc_best)
    value = ct.ValueFunction(v_best, ct.ValueKind.FULL, None)
    assign = ct.assignment(price, kernel, region, tol=tol)
    profit = float(np.dot(f.weights, price.values[assign.choice]))
    check_tol = 10.0 * tol * (1.0 + f.total_mass)
    if abs(profit - val_best) > check_tol:
        raise RuntimeError(
            f"price-side and value-side profits disagree: {profit} vs {val_best}"
        )
    if np.any(price.values > p0.values + tol):
        raise RuntimeError("optimal price exceeds the bound")
    if np.any(v_best < -tol) or np.any(v_best > v0 + tol):
        raise RuntimeError("optimal value leaves [0, v0]")
    diagnostics["profit_value_form"] = val_best
    return ModelOneSolveReport(
        optimal_price=price,
        optimal_value=value,
        profit=profit,
        assignment=assign,
        method=METHOD_GENERAL,
        diagnostics=diagnostics,
    )


def quadratic_1d_reference(x):
    """Closed-form optimum on [0, 1] for quadratic cost with bound x - x^2/2.

    Returns (value, price, purchase_location) at x; accepts scalars or arrays.
    The purchase location is max(2x - 1, 0): customers left of 1/2 travel to 0.
    """
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("the reference solution lives on [0, 1]")
    v = np.where(arr <= 0.5, 0.5 * arr**2, -0.5 * arr**2 + arr - 0.25)
    p = 0.5 * arr - 0.25 * arr**2
    q = np.maximum(2.0 * arr - 1.0, 0.0)
    if np.isscalar(x) or arr.ndim == 0:
        return float(v), float(p), float(q)
    return v, p, q
