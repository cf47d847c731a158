"""Vertex chains on the boundary: perimeter, gradient, Newton polish.

A chain is an array of unwrapped normal angles ``psi_0 < ... < psi_q``.
The reflection law at an interior vertex is equivalent to stationarity of
the total chord length in that vertex.
"""

import numpy as np

from .billiard import chord_partials_psi
from .errors import ConvergenceFailure


def chain_length(h, chain) -> np.ndarray:
    chain = np.atleast_2d(chain)
    l = chord_partials_psi(h, chain[:, :-1], chain[:, 1:])[0]
    return l.sum(axis=1)


def chain_gradient(h, chain):
    """Total length, gradient and tridiagonal Hessian over interior vertices.

    Returns ``L (m,)``, ``g (m, q-1)``, ``H (m, q-1, q-1)`` for a batch of
    ``m`` chains with ``q`` edges.
    """
    chain = np.atleast_2d(chain)
    m, q1 = chain.shape
    l, l1, l2, l11, l12, l22 = chord_partials_psi(h, chain[:, :-1], chain[:, 1:])
    # edge e joins vertex e and e+1; interior vertices are 1..q-1
    g = l2[:, :-1] + l1[:, 1:]
    H = np.zeros((m, q1 - 2, q1 - 2))
    idx = np.arange(q1 - 2)
    H[:, idx, idx] = l22[:, :-1] + l11[:, 1:]
    if q1 > 3:
        H[:, idx[:-1], idx[1:]] = l12[:, 1:-1]
        H[:, idx[1:], idx[:-1]] = l12[:, 1:-1]
    return l.sum(axis=1), g, H


def polish_chain(h, chain, tol: float = 1e-13, max_iter: int = 50):
    """Newton iteration to a length-stationary chain with fixed endpoints.

    A backtracking step keeps vertices ordered and the length from
    decreasing, so iterates stay on the maximizing branch.
    """
    chain = np.array(np.atleast_2d(chain), dtype=float)
    if chain.shape[1] < 3:
        return chain, chain_length(h, chain)
    for _ in range(max_iter):
        L, g, H = chain_gradient(h, chain)
        if np.abs(g).max() < tol:
            return chain, L
        try:
            step = -np.linalg.solve(H, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = 1e-3 * g
        t = np.ones(chain.shape[0])
        for _ in range(30):
            trial = chain.copy()
            trial[:, 1:-1] += t[:, None] * step
            ordered = np.all(np.diff(trial, axis=1) > 0, axis=1) & np.all(
                np.diff(trial, axis=1) < 2 * np.pi, axis=1)
            ok = ordered & (chain_length(h, trial) >= L - 1e-12 * np.abs(L))
            if ok.all():
                break
            t = np.where(ok, t, 0.5 * t)
        chain[:, 1:-1] += t[:, None] * step
    L, g, _ = chain_gradient(h, chain)
    if np.abs(g).max() > 1e3 * tol:
        raise ConvergenceFailure(f"chain polish stalled at gradient {np.abs(g).max():.2e}")
    return chain, L
