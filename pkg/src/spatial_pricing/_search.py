"""Generic quantized-vector search: exhaustive product scan and coordinate ascent.

Both searches maximize a batched objective over vectors u with 0 <= u_i <=
caps_i.  Candidate evaluation is pure, so batches can be evaluated in any
order; ties are resolved deterministically (lexicographically first candidate
for the exhaustive scan, no-move for the ascent).
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

__all__ = ["BudgetExceededError", "exhaustive_product", "coordinate_ascent"]

EvalBatch = Callable[[np.ndarray], np.ndarray]  # (B, m) -> (B,)


class BudgetExceededError(RuntimeError):
    """An exhaustive scan was refused because the candidate count exceeds the budget."""


def exhaustive_product(
    eval_batch: EvalBatch,
    caps: np.ndarray,
    levels: int,
    max_candidates: int,
    feasible: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    chunk: int = 4096,
) -> tuple[np.ndarray, float, int]:
    """Scan all level combinations u_i in linspace(0, caps_i, levels).

    Returns (best_u, best_value, evaluations).  Ties keep the
    lexicographically first candidate.
    """
    caps = np.asarray(caps, dtype=float)
    m = caps.size
    total = levels**m
    if total > max_candidates:
        raise BudgetExceededError(
            f"exhaustive scan needs {total} candidates, budget is {max_candidates}"
        )
    scale = caps / max(levels - 1, 1)
    best_u, best_val = None, -np.inf
    n_eval = 0
    radix = levels ** np.arange(m - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (ids[:, None] // radix[None, :]) % levels
        cand = digits * scale[None, :]
        if feasible is not None:
            keep = feasible(cand)
            if not keep.any():
                continue
            cand = cand[keep]
        vals = eval_batch(cand)
        n_eval += len(cand)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_u = cand[j].copy()
    if best_u is None:
        raise ValueError("no feasible candidate in the exhaustive scan")
    return best_u, best_val, n_eval


def coordinate_ascent(
    eval_batch: EvalBatch,
    caps: np.ndarray,
    starts: list[np.ndarray],
    step0: float,
    min_step: float,
    max_sweeps: int = 8,
    feasible: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, float, int]:
    """Multi-start coordinate ascent with step halving.

    Each coordinate tries moves of +-step and +-2*step (plus the box
    endpoints) while the others are held; accepted moves must improve
    strictly.  The step halves whenever a full sweep makes no progress,
    down to min_step.
    """
    caps = np.asarray(caps, dtype=float)
    m = caps.size
    accept_eps = 1e-13 * (1.0 + float(np.max(caps, initial=0.0)))
    best_u, best_val = None, -np.inf
    n_eval = 0
    for u0 in starts:
        u = np.clip(np.asarray(u0, dtype=float), 0.0, caps)
        if feasible is not None and not feasible(u[None])[0]:
            continue
        cur = float(eval_batch(u[None])[0])
        n_eval += 1
        step = step0
        while step >= min_step:
            for _ in range(max_sweeps):
                improved = False
                for i in range(m):
                    base = u[i]
                    trials = np.unique(
                        np.clip(
                            np.array([base - 2 * step, base - step, base + step, base + 2 * step, 0.0, caps[i]]),
                            0.0,
                            caps[i],
                        )
                    )
                    trials = trials[np.abs(trials - base) > 1e-15]
                    if trials.size == 0:
                        continue
                    batch = np.repeat(u[None, :], trials.size, axis=0)
                    batch[:, i] = trials
                    if feasible is not None:
                        keep = feasible(batch)
                        batch, trials = batch[keep], trials[keep]
                        if trials.size == 0:
                            continue
                    vals = eval_batch(batch)
                    n_eval += len(batch)
                    j = int(np.argmax(vals))
                    if vals[j] > cur + accept_eps:
                        cur = float(vals[j])
                        u[i] = trials[j]
                        improved = True
                if not improved:
                    break
            step *= 0.5
        if cur > best_val:
            best_val = cur
            best_u = u.copy()
    if best_u is None:
        raise ValueError("no feasible start for the coordinate ascent")
    return best_u, best_val, n_eval
