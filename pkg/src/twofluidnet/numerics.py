"""Small nonlinear-solver toolkit shared by the analysis modules."""

from __future__ import annotations

import numpy as np

from .model import NetworkError

__all__ = ["StepCollapseError", "ConvergenceError", "fd_jacobian", "newton", "pseudo_arclength"]


class StepCollapseError(NetworkError):
    """Continuation could not converge even at the minimum step."""


class ConvergenceError(NetworkError):
    pass


def fd_jacobian(F, u, F0=None, rel_step=1e-6):
    """Central-difference Jacobian of ``F`` at ``u``."""
    u = np.asarray(u, dtype=float)
    cols = []
    for k in range(u.size):
        h = rel_step * max(1.0, abs(u[k]))
        up = u.copy()
        um = u.copy()
        up[k] += h
        um[k] -= h
        cols.append((np.asarray(F(up)) - np.asarray(F(um))) / (2 * h))
    return np.column_stack(cols)


def newton(F, u0, tol=1e-12, maxiter=40, jac=None, valid=None):
    """Damped Newton for a square system.

    ``valid(u)`` may reject trial points (outside the model domain); the step
    is halved until a valid point with a smaller residual is found.
    """
    u = np.asarray(u0, dtype=float).copy()
    Fu = np.asarray(F(u), dtype=float)
    for _ in range(maxiter):
        if np.max(np.abs(Fu)) < tol:
            return u
        J = jac(u) if jac is not None else fd_jacobian(F, u)
        try:
            du = np.linalg.solve(J, -Fu)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian") from exc
        lam = 1.0
        norm0 = np.max(np.abs(Fu))
        while True:
            trial = u + lam * du
            ok = valid is None or valid(trial)
            if ok:
                try:
                    Ft = np.asarray(F(trial), dtype=float)
                except NetworkError:
                    ok = False
            if ok and np.all(np.isfinite(Ft)) and (np.max(np.abs(Ft)) < norm0 or lam < 1e-3):
                break
            lam *= 0.5
            if lam < 1e-6:
                raise ConvergenceError("line search failed")
        u, Fu = trial, Ft
    if np.max(np.abs(Fu)) < tol:
        return u
    raise ConvergenceError(f"Newton did not converge (|F|={np.max(np.abs(Fu)):.3g})")


def pseudo_arclength(
    F,
    u0,
    u1,
    ds_max,
    ds_min=1e-9,
    tol=1e-12,
    stop=None,
    max_points=100000,
    scale=None,
    max_newton=8,
    max_turn=0.35,
    ds_init=None,
):
    """Trace the solution curve of ``F: R^n -> R^(n-1)`` starting from two points.

    Tangents are secants of the last two accepted points.  Each step predicts
    along the tangent and corrects with Newton on ``F`` augmented by the
    arclength constraint ``t . (u - u_pred) = 0``.  The step grows after easy
    corrections and halves on failure or when the secant turns by more than
    ``max_turn`` radians.  ``scale`` divides each coordinate before lengths
    and angles are measured.  Returns the accepted points, ending with the
    first point for which ``stop(u)`` is true.
    """
    scale = np.ones(len(u0)) if scale is None else np.asarray(scale, dtype=float)
    pts = [np.asarray(u0, dtype=float), np.asarray(u1, dtype=float)]
    w_prev = pts[0] / scale
    w = pts[1] / scale
    ds = ds_init if ds_init is not None else min(ds_max, np.linalg.norm(w - w_prev))
    ds = max(ds, ds_min)

    def G(wv):
        return np.asarray(F(wv * scale), dtype=float)

    while len(pts) < max_points:
        t = w - w_prev
        t /= np.linalg.norm(t)
        accepted = False
        while not accepted:
            wp = w + ds * t
            wn = wp.copy()
            ok = False
            try:
                for it in range(max_newton):
                    Fv = G(wn)
                    J = np.vstack([fd_jacobian(G, wn, Fv), t])
                    rhs = -np.concatenate([Fv, [t @ (wn - wp)]])
                    dw = np.linalg.solve(J, rhs)
                    wn = wn + dw
                    if np.max(np.abs(G(wn))) < tol and np.max(np.abs(dw)) < 1e-6 * max(ds, 1e-3):
                        ok = True
                        break
            except (NetworkError, np.linalg.LinAlgError, FloatingPointError):
                ok = False
            if ok:
                sec = wn - w
                nsec = np.linalg.norm(sec)
                if nsec == 0 or np.arccos(np.clip(sec @ t / nsec, -1, 1)) > max_turn:
                    ok = False
            if ok:
                accepted = True
                w_prev, w = w, wn
                pts.append(wn * scale)
                if it <= 2:
                    ds = min(ds * 1.5, ds_max)
            else:
                ds *= 0.5
                if ds < ds_min:
                    err = StepCollapseError(f"step collapsed near {w * scale}")
                    err.points = pts
                    raise err
        if stop is not None and stop(pts[-1]):
            break
    return pts
