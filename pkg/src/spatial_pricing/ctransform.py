"""Transforms and value functions for cost-concave pricing analysis.

Everything here reduces to exact min-plus arithmetic on the finite cost
table: the customer value function v(x) = min_y {c(x, y) + p(y)}, the
c-transform v^c(y) = min_x {c(x, y) - v(x)}, superdifferentials, and the
tie-breaking rule used when several purchase locations are cost-equivalent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import CostKernel, PricePattern, Region, eval_cost

__all__ = [
    "ValueKind",
    "ValueFunction",
    "AssignmentMap",
    "NotCConcaveError",
    "scale_tol",
    "value_function",
    "c_transform",
    "back_transform",
    "double_transform",
    "is_c_concave",
    "superdifferential",
    "superdifferential_mask",
    "assignment",
    "tie_break",
]


class ValueKind(enum.Enum):
    FULL = "full"          # concave w.r.t. generators on the whole region
    SUBREGION = "subregion"  # generators restricted to a point subset


class NotCConcaveError(ValueError):
    """Raised when an operation requires a cost-concave input and the check fails."""


def scale_tol(cost: np.ndarray) -> float:
    """Scale-aware equality tolerance used for all argmin/profit comparisons."""
    return 1e-9 * (1.0 + float(np.max(np.abs(cost))))


@dataclass(frozen=True)
class ValueFunction:
    """Pointwise minimal-expenditure function over the region.

    values     : one real per region point.
    kind       : FULL when generated over the whole region, SUBREGION when
                 generated over `generators` only.
    generators : index set of admissible purchase points (None = all).
    """

    values: np.ndarray
    kind: ValueKind = ValueKind.FULL
    generators: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if self.generators is not None:
            g = np.sort(np.asarray(self.generators, dtype=int))
            object.__setattr__(self, "generators", g)

    def generator_indices(self, n: int) -> np.ndarray:
        return np.arange(n) if self.generators is None else self.generators


def _prices_array(p, n: Optional[int] = None) -> np.ndarray:
    v = p.values if isinstance(p, PricePattern) else np.asarray(p, dtype=float)
    if n is not None and v.shape != (n,):
        raise ValueError("price vector does not match the region size")
    return v


def _values_array(v) -> np.ndarray:
    return v.values if isinstance(v, ValueFunction) else np.asarray(v, dtype=float)


def _min_plus(prices: np.ndarray, cost: np.ndarray, candidates: Optional[np.ndarray]) -> np.ndarray:
    cols = cost if candidates is None else cost[:, candidates]
    pvals = prices if candidates is None else prices[candidates]
    if not np.isfinite(pvals).any():
        raise ValueError("improper prices: no finite value inside the candidate set")
    return np.min(cols + pvals[None, :], axis=1)


def value_function(
    p: PricePattern | np.ndarray,
    kernel: CostKernel,
    region: Region,
    restrict_to: Optional[np.ndarray] = None,
) -> ValueFunction:
    """v(x) = min over candidate y of {c(x, y) + p(y)}; +inf prices are skipped.

    With `restrict_to` the minimum runs over that subset only, which yields
    the subregion value function.
    """
    cost = eval_cost(kernel, region)
    prices = _prices_array(p, region.size)
    vals = _min_plus(prices, cost, restrict_to)
    if restrict_to is None:
        return ValueFunction(vals, ValueKind.FULL, None)
    return ValueFunction(vals, ValueKind.SUBREGION, np.asarray(restrict_to, dtype=int))


def c_transform_table(values: np.ndarray, cost: np.ndarray, target: Optional[np.ndarray] = None) -> np.ndarray:
    """v^c(y) = min_x {c(x, y) - v(x)} for y in target (default: all points)."""
    if not np.all(np.isfinite(values)):
        raise ValueError("c-transform requires finite values everywhere")
    cols = cost if target is None else cost[:, target]
    return np.min(cols - values[:, None], axis=0)


def back_transform_table(vc: np.ndarray, cost: np.ndarray, generators: Optional[np.ndarray] = None) -> np.ndarray:
    """Envelope min over generator y of {c(x, y) - v^c(y)} for every x."""
    cols = cost if generators is None else cost[:, generators]
    return np.min(cols - vc[None, :], axis=1)


def double_transform_table(values: np.ndarray, cost: np.ndarray, generators: Optional[np.ndarray] = None) -> np.ndarray:
    """Smallest cost-concave (w.r.t. the generators) function above `values`."""
    return back_transform_table(c_transform_table(values, cost, generators), cost, generators)


def c_transform(
    v: ValueFunction | np.ndarray,
    kernel: CostKernel,
    region: Region,
    target: Optional[np.ndarray] = None,
) -> np.ndarray:
    cost = eval_cost(kernel, region)
    return c_transform_table(_values_array(v), cost, target)


def back_transform(vc: np.ndarray, kernel: CostKernel, region: Region, generators: Optional[np.ndarray] = None) -> np.ndarray:
    cost = eval_cost(kernel, region)
    return back_transform_table(np.asarray(vc, dtype=float), cost, generators)


def double_transform(
    v: ValueFunction | np.ndarray,
    kernel: CostKernel,
    region: Region,
    generators: Optional[np.ndarray] = None,
) -> np.ndarray:
    cost = eval_cost(kernel, region)
    return double_transform_table(_values_array(v), cost, generators)


def _is_c_concave_table(values: np.ndarray, cost: np.ndarray, within: Optional[np.ndarray], tol: Optional[float]) -> bool:
    tol = scale_tol(cost) if tol is None else tol
    return bool(np.max(np.abs(double_transform_table(values, cost, within) - values)) <= tol)


def is_c_concave(
    v: ValueFunction | np.ndarray,
    kernel: CostKernel,
    region: Region,
    within: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> bool:
    """True iff the double transform (over `within`) reproduces v up to tol."""
    cost = eval_cost(kernel, region)
    return _is_c_concave_table(_values_array(v), cost, within, tol)


def superdifferential_mask(
    values: np.ndarray,
    cost: np.ndarray,
    within: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    vc: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Boolean (n, |within|) membership table of y in the superdifferential at x.

    Raises NotCConcaveError when some point has an empty superdifferential,
    which signals that `values` is not cost-concave w.r.t. `within`.
    """
    tol = scale_tol(cost) if tol is None else tol
    if vc is None:
        vc = c_transform_table(values, cost, within)
    cols = cost if within is None else cost[:, within]
    member = np.abs(values[:, None] + vc[None, :] - cols) <= tol
    if not member.any(axis=1).all():
        raise NotCConcaveError("empty superdifferential: values are not cost-concave on the given set")
    return member


def superdifferential(
    v: ValueFunction | np.ndarray,
    kernel: CostKernel,
    region: Region,
    x: int,
    within: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> np.ndarray:
    """Global indices y in `within` with v(x) + v^c(y) = c(x, y) up to tol."""
    cost = eval_cost(kernel, region)
    values = _values_array(v)
    tol = scale_tol(cost) if tol is None else tol
    vc = c_transform_table(values, cost, within)
    cols = cost[x] if within is None else cost[x, within]
    local = np.nonzero(np.abs(values[x] + vc - cols) <= tol)[0]
    if local.size == 0:
        raise NotCConcaveError(f"empty superdifferential at point {x}")
    return local if within is None else np.asarray(within)[local]


@dataclass(frozen=True)
class AssignmentMap:
    """Customer assignment: argmin sets, tie-broken choices, expenditures.

    candidates  : sorted global indices of admissible purchase points.
    member      : (n, len(candidates)) bool, y in the argmin set of x.
    expenditure : (n,) minimal total expenditure v_p(x).
    choice      : (n,) global index of the tie-broken purchase point.
    """

    candidates: np.ndarray
    member: np.ndarray
    expenditure: np.ndarray
    choice: np.ndarray

    def argmin_set(self, x: int) -> np.ndarray:
        return self.candidates[self.member[x]]


def assignment(
    p: PricePattern | np.ndarray,
    kernel: CostKernel,
    region: Region,
    candidates: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> AssignmentMap:
    """Argmin sets of c(x, y) + p(y) over the candidate set, with tie-broken choice.

    The choice maximizes the price over the argmin set (equivalently minimizes
    transport); remaining ties go to the smallest point index.
    """
    cost = eval_cost(kernel, region)
    prices = _prices_array(p, region.size)
    tol = scale_tol(cost) if tol is None else tol
    cand = np.arange(region.size) if candidates is None else np.sort(np.asarray(candidates, dtype=int))
    if not np.isfinite(prices[cand]).any():
        raise ValueError("improper prices: no finite value inside the candidate set")
    totals = cost[:, cand] + prices[cand][None, :]
    expenditure = totals.min(axis=1)
    member = totals <= expenditure[:, None] + tol
    priced = np.where(member, prices[cand][None, :], -np.inf)
    choice = cand[np.argmax(priced, axis=1)]  # argmax takes the first max: smallest index
    return AssignmentMap(candidates=cand, member=member, expenditure=expenditure, choice=choice)


def tie_break(
    assign: AssignmentMap,
    p: PricePattern | np.ndarray,
    within: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Chosen purchase point per customer, restricted to `within`.

    Among the argmin set intersected with `within`, picks the price-maximizing
    point, then the smallest index.  Customers whose intersection is empty get
    -1 (they are lost to the outside option).
    """
    prices = _prices_array(p)
    if within is None:
        keep = np.ones(len(assign.candidates), dtype=bool)
    else:
        keep = np.isin(assign.candidates, np.asarray(within, dtype=int))
    member = assign.member & keep[None, :]
    priced = np.where(member, prices[assign.candidates][None, :], -np.inf)
    has_any = member.any(axis=1)
    choice = np.where(has_any, assign.candidates[np.argmax(priced, axis=1)], -1)
    return choice
