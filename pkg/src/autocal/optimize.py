"""Small damped-least-squares (Levenberg-Marquardt style) helper used by the
refinement stages. Jacobians are numeric central differences so every cost
function stays testable against finite differences by construction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class OptimizeResult:
    x: np.ndarray
    cost: float
    cost_history: list
    iterations: int
    converged: bool


def numeric_jacobian(fn, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(fn(x))
    jac = np.empty((len(r0), len(x)))
    for i in range(len(x)):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fn(xp)) - np.asarray(fn(xm))) / (2 * h)
    return jac


def damped_least_squares(residual_fn, x0, *, max_iters: int = 200,
                         cost_tol: float = 1e-8, cost_floor: float = 0.0,
                         lam0: float = 1e-3, rel_step: float = 1e-6,
                         monitor_fn=None) -> OptimizeResult:
    """Minimize 0.5*||r(x)||^2. Steps are accepted only when the cost
    decreases, so the recorded cost history is non-increasing.

    `monitor_fn(x) -> float`, when given, replaces the acceptance metric
    (the squared norm is still used to build the normal equations).
    Trial points where the model cannot be evaluated count as rejected
    steps. Iteration stops early once the cost falls to `cost_floor`.
    """
    x = np.asarray(x0, dtype=float).copy()

    def cost_of(xv):
        if monitor_fn is not None:
            return float(monitor_fn(xv))
        r = np.asarray(residual_fn(xv))
        return float(r @ r)

    cost = cost_of(x)
    history = [cost]
    lam = lam0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if cost <= cost_floor:
            converged = True
            it -= 1
            break
        r = np.asarray(residual_fn(x))
        jac = numeric_jacobian(residual_fn, x, rel_step)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        for _ in range(12):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.maximum(
                    np.diag(jtj), 1e-12)), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = x + step
            try:
                c = cost_of(cand)
            except (ValueError, ArithmeticError):
                c = math.inf
            if c < cost:
                x, cost = cand, c
                lam = max(lam / 10, 1e-12)
                accepted = True
                break
            lam *= 10
        history.append(cost)
        if not accepted:
            converged = True
            break
        prev = history[-2]
        if prev - cost <= cost_tol * max(prev, 1e-30):
            converged = True
            break
    return OptimizeResult(x=x, cost=cost, cost_history=history,
                          iterations=it, converged=converged)
