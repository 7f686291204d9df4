"""Right-preconditioned GMRES (modified Gram-Schmidt Arnoldi, Givens rotations)."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from heatkkt.config import GmresParams

log = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]


class GmresDivergenceError(ArithmeticError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite value in the Krylov basis at iteration {iteration}")
        self.iteration = iteration


@dataclass
class GmresResult:
    solution: np.ndarray
    converged: bool
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    true_final_relres: float = 0.0


def _identity(v: np.ndarray) -> np.ndarray:
    return v


def gmres_solve(
    apply_operator: LinearMap,
    b: np.ndarray,
    apply_preconditioner: LinearMap | None = None,
    params: GmresParams | None = None,
    x0: np.ndarray | None = None,
) -> GmresResult:
    """Solve ``K x = b`` as ``K M^{-1} y = b``, ``x = M^{-1} y``.

    With right preconditioning the Givens residual estimate is the residual of
    the unpreconditioned system, so the stopping test is on ``||b - K x||``.
    Iterations count Arnoldi steps across restart cycles.
    """
    params = params or GmresParams()
    precond = apply_preconditioner or _identity
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return GmresResult(np.zeros_like(b), True, 0, [], 0.0)

    history: list[float] = []
    target = params.tol * bnorm
    restart = params.restart or params.max_iters
    converged = False
    iterations = 0
    r = b - apply_operator(x) if x0 is not None else b.copy()

    while iterations < params.max_iters and not converged:
        beta = np.linalg.norm(r)
        if beta <= target:
            converged = True
            break
        m = min(restart, params.max_iters - iterations)
        basis = [r / beta]
        h = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        k = 0
        for j in range(m):
            w = np.array(apply_operator(precond(basis[j])), dtype=float)  # callbacks may alias input
            for i in range(j + 1):
                h[i, j] = np.dot(basis[i], w)
                w -= h[i, j] * basis[i]
            h[j + 1, j] = hnext = np.linalg.norm(w)
            if not np.all(np.isfinite(h[: j + 2, j])):
                raise GmresDivergenceError(iterations + 1)
            for i in range(j):
                hij = cs[i] * h[i, j] + sn[i] * h[i + 1, j]
                h[i + 1, j] = -sn[i] * h[i, j] + cs[i] * h[i + 1, j]
                h[i, j] = hij
            breakdown = hnext <= params.happy_breakdown_tol * beta
            denom = np.hypot(h[j, j], h[j + 1, j])
            cs[j], sn[j] = h[j, j] / denom, h[j + 1, j] / denom
            h[j, j] = denom
            h[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            iterations += 1
            k = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            log.debug("gmres it %d relres %.3e", iterations, history[-1])
            if abs(g[j + 1]) <= target or breakdown:
                converged = True
                break
            basis.append(w / hnext)
        y = np.linalg.solve(np.triu(h[:k, :k]), g[:k]) if k else np.zeros(0)
        update = np.zeros_like(b)
        for i in range(k):
            update += y[i] * basis[i]
        x = x + precond(update)
        r = b - apply_operator(x)

    true_relres = float(np.linalg.norm(b - apply_operator(x)) / bnorm)
    return GmresResult(x, converged, iterations, history, true_relres)
