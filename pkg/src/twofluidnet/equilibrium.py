"""Equilibria of the network flow equation.

At equilibrium every vessel carries a uniform volume fraction fixed by the
node rules, so the loop flow satisfies the scalar fixed-point problem
``q_c = psi(q_c)`` with

    psi = (q1 R_A - q2 R_B) / (R_A + R_B + R_C),   R_i = r_i mu(Phi_i).

Roots are located by a dense bracketing scan (closely spaced roots occur near
folds) and polished with Brent's method.  Equilibrium curves in the
``(q1, q_c)`` plane are traced by pseudo-arclength continuation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import DomainError, NetworkConfig, NetworkError, SingularityError
from .numerics import StepCollapseError, pseudo_arclength

__all__ = [
    "EquilibriumState",
    "EquilibriumCurve",
    "SaddleNodePoint",
    "Onset",
    "phase_fractions",
    "flow_map",
    "psi_residual",
    "psi_slope",
    "equilibrium_state",
    "solve_equilibria",
    "nearest_equilibrium",
    "continue_curve",
    "detect_folds",
    "refine_fold",
    "fold_criterion",
    "onset_contrast",
    "trivial_q1",
    "EDGE",
    "RESIDUAL_TOL",
]

log = logging.getLogger(__name__)

# admissible q_c interval is shrunk by this much at the starved-vessel ends
EDGE = 1e-9
RESIDUAL_TOL = 1e-12
SLOPE_STEP = 1e-6
END_TOL = 1e-4


def _positive_branch(q1, phi1, phi2, law, qc):
    """Volume fractions for ``qc >= 0`` as (through, other, cross) arrays.

    ``through`` is the vessel leaving the node that feeds C, ``other`` the
    vessel leaving the receiving node.
    """
    q2 = 1.0 - q1
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(q1 > 0, qc / q1, 0.0)
    if np.any(x >= 1.0) or np.any(q2 + qc <= 0):
        raise DomainError("q_c reaches a starved-vessel endpoint")
    fx = law.f(x)
    phi_c = phi1 * fx
    phi_t = phi1 * law.through(x)
    phi_o = (phi2 * q2 + phi_c * qc) / (q2 + qc)
    return phi_t, phi_o, phi_c


def phase_fractions(config: NetworkConfig, q_c, side: int = 1):
    """Equilibrium ``(phi_a, phi_b, phi_c)`` for loop flow ``q_c``.

    Negative flows are evaluated through the A/B exchange symmetry.  At
    ``q_c == 0`` the cross-vessel fraction is the one-sided limit chosen by
    ``side`` (the separation rule of the node that would feed C).
    """
    q1 = config.q1
    inl = config.inlets
    law = config.separation
    qc = np.asarray(q_c, dtype=float)
    scalar = qc.ndim == 0
    qc = np.atleast_1d(qc)
    if np.any(qc > q1) or np.any(qc < -(1.0 - q1)):
        raise DomainError(f"q_c outside admissible interval [{-(1 - q1)}, {q1}]")
    pos = (qc > 0) | ((qc == 0) & (side >= 0))
    pa = np.empty_like(qc)
    pb = np.empty_like(qc)
    pc = np.empty_like(qc)
    if np.any(pos):
        t, o, c = _positive_branch(q1, inl.phi1, inl.phi2, law, qc[pos])
        pa[pos], pb[pos], pc[pos] = t, o, c
    neg = ~pos
    if np.any(neg):
        t, o, c = _positive_branch(1.0 - q1, inl.phi2, inl.phi1, law, -qc[neg])
        pb[neg], pa[neg], pc[neg] = t, o, c
    if scalar:
        return float(pa[0]), float(pb[0]), float(pc[0])
    return pa, pb, pc


def flow_map(config: NetworkConfig, q_c, side: int = 1):
    """The loop flow ``psi(q_c)`` implied by the resistances at equilibrium."""
    pa, pb, pc = phase_fractions(config, q_c, side)
    r = config.geometry.resistances
    mu = config.viscosity.relative
    ra = r[0] * mu(pa)
    rb = r[1] * mu(pb)
    rc = r[2] * mu(pc)
    q1 = config.q1
    return (q1 * ra - (1.0 - q1) * rb) / (ra + rb + rc)


def psi_residual(config: NetworkConfig, q_c, side: int = 1):
    """``psi(q_c) - q_c``; equilibria are its zeros."""
    return flow_map(config, q_c, side) - q_c


def psi_slope(config: NetworkConfig, q_c: float, h: float = SLOPE_STEP) -> float:
    """``d psi / d q_c`` by central differences.

    Stencils that would straddle ``q_c = 0`` (a constitutive kink for
    asymmetric separation rules) fall back to a one-sided difference.
    """
    lo, hi = -(1.0 - config.q1) + EDGE, config.q1 - EDGE
    side = 1 if q_c > 0 or (q_c == 0 and hi > 0) else -1
    if abs(q_c) >= h and lo <= q_c - h and q_c + h <= hi:
        fa = float(flow_map(config, q_c - h, side))
        fb = float(flow_map(config, q_c + h, side))
        return (fb - fa) / (2 * h)
    # second-order one-sided stencil pointing away from the kink or the edge
    direction = side if abs(q_c) < h else (1 if q_c - h < lo else -1)
    f0, f1, f2 = (float(flow_map(config, q_c + direction * k * h, side)) for k in range(3))
    return direction * (-3 * f0 + 4 * f1 - f2) / (2 * h)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class EquilibriumState:
    """One root of the flow equation with every derived quantity."""

    q1: float
    q_c: float
    q_a: float
    q_b: float
    phi_a: float
    phi_b: float
    phi_c: float
    mu_a: float
    mu_b: float
    mu_c: float
    res_a: float
    res_b: float
    res_c: float
    tau_a: float
    tau_b: float
    tau_c: float
    residual: float = 0.0
    boundary: bool = False

    @property
    def flows(self):
        return np.array([self.q_a, self.q_b, self.q_c])

    @property
    def fractions(self):
        return np.array([self.phi_a, self.phi_b, self.phi_c])

    @property
    def resistances(self):
        return np.array([self.res_a, self.res_b, self.res_c])

    @property
    def transit_times(self):
        return np.array([self.tau_a, self.tau_b, self.tau_c])


def equilibrium_state(config: NetworkConfig, q_c: float, side: int = 1) -> EquilibriumState:
    q_c = float(q_c)
    q1 = config.q1
    pa, pb, pc = phase_fractions(config, q_c, side)
    mu = config.viscosity.relative
    ma, mb, mc = float(mu(pa)), float(mu(pb)), float(mu(pc))
    r = config.geometry.resistances
    v = config.geometry.volume_fractions
    qa, qb = q1 - q_c, (1.0 - q1) + q_c
    with np.errstate(divide="ignore"):
        taus = [vi / abs(qi) if qi != 0 else math.inf for vi, qi in zip(v, (qa, qb, q_c))]
    ra, rb, rc = r[0] * ma, r[1] * mb, r[2] * mc
    psi = (q1 * ra - (1.0 - q1) * rb) / (ra + rb + rc)
    return EquilibriumState(
        q1=q1, q_c=q_c, q_a=qa, q_b=qb,
        phi_a=pa, phi_b=pb, phi_c=pc,
        mu_a=ma, mu_b=mb, mu_c=mc,
        res_a=ra, res_b=rb, res_c=rc,
        tau_a=taus[0], tau_b=taus[1], tau_c=taus[2],
        residual=psi - q_c,
        boundary=q1 in (0.0, 1.0),
    )


def _admissible(config: NetworkConfig):
    q1 = config.q1
    return -(1.0 - q1) + EDGE, q1 - EDGE


def _roots_on_piece(config, a, b, n, side):
    """Brackets and polishes sign changes of the residual on ``[a, b]``."""
    if b <= a or n < 2:
        return []
    xs = np.linspace(a, b, n)
    ys = psi_residual(config, xs, side)
    fun = lambda q: float(psi_residual(config, q, side))
    roots = list(xs[ys == 0.0])
    idx = np.nonzero(ys[:-1] * ys[1:] < 0)[0]
    for i in idx:
        roots.append(brentq(fun, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    return roots


def solve_equilibria(config: NetworkConfig, n_scan: int = 2001, tol: float = RESIDUAL_TOL):
    """Every equilibrium in the admissible interval, sorted by ``q_c``.

    The interval is split at ``q_c = 0`` so each side uses its own separation
    rule; ``q_c = 0`` counts as a root only where both one-sided residuals
    vanish (or only one side of the interval exists).
    """
    lo, hi = _admissible(config)
    if hi <= lo:
        raise DomainError("empty admissible interval")
    roots = []
    span = hi - lo
    if lo < 0 < hi:
        n_neg = max(3, int(round(n_scan * (-lo) / span)))
        n_pos = max(3, n_scan - n_neg)
        neg = _roots_on_piece(config, lo, 0.0, n_neg, -1)
        pos = _roots_on_piece(config, 0.0, hi, n_pos, 1)
        zero_neg = any(r == 0.0 for r in neg)
        zero_pos = any(r == 0.0 for r in pos)
        neg = [r for r in neg if r != 0.0]
        pos = [r for r in pos if r != 0.0]
        if zero_neg and zero_pos:
            roots.append(0.0)
        elif zero_neg or zero_pos:
            r_m = float(psi_residual(config, 0.0, -1))
            r_p = float(psi_residual(config, 0.0, 1))
            if abs(r_m) < tol and abs(r_p) < tol:
                roots.append(0.0)
        roots += neg + pos
    else:
        side = 1 if lo >= 0 else -1
        roots = _roots_on_piece(config, lo, hi, n_scan, side)

    roots = sorted(set(roots))
    states = []
    for r in roots:
        side = 1 if r >= 0 else -1
        st = equilibrium_state(config, r, side)
        if abs(st.residual) >= tol:
            log.warning("equilibrium at q_c=%.17g only converged to %.3g", r, st.residual)
        states.append(st)
    return states


def nearest_equilibrium(config: NetworkConfig, q_c: float, max_distance: float = math.inf):
    states = solve_equilibria(config)
    if not states:
        return None
    best = min(states, key=lambda s: abs(s.q_c - q_c))
    if abs(best.q_c - q_c) > max_distance:
        return None
    return best


def trivial_q1(config: NetworkConfig) -> float:
    """Inlet split at which ``q_c = 0`` is an equilibrium."""
    inl = config.inlets
    mu = config.viscosity.relative
    rb = config.geometry.rb_rc * float(mu(inl.phi2))
    ra = config.geometry.ra_rc * float(mu(inl.phi1))
    return rb / (rb + ra)


# --------------------------------------------------------------------------
# continuation in q1


@dataclass
class EquilibriumCurve:
    """Equilibrium branch ``(q1(s), q_c(s))`` ordered by arclength ``s``."""

    config: NetworkConfig
    s: np.ndarray
    q1: np.ndarray
    q_c: np.ndarray
    states: list = field(default_factory=list)
    fold_indices: list = field(default_factory=list)

    def __len__(self):
        return len(self.s)

    def config_at(self, i: int) -> NetworkConfig:
        return self.config.with_q1(float(self.q1[i]))


def _residual_2d(config, u):
    q1, qc = float(u[0]), float(u[1])
    if not (0.0 <= q1 <= 1.0):
        raise DomainError("q1 left [0, 1]")
    cfg = config.with_q1(q1)
    lo, hi = -(1.0 - q1), q1
    if not (lo < qc < hi):
        raise DomainError("q_c left admissible interval")
    side = 1 if qc >= 0 else -1
    return np.array([float(psi_residual(cfg, qc, side))])


def continue_curve(
    config: NetworkConfig,
    q1_range=(0.0, 1.0),
    ds_max: float = 0.005,
    ds_min: float = 1e-9,
    seed_qc: float | None = None,
    max_points: int = 200000,
) -> EquilibriumCurve:
    """Trace the equilibrium branch through ``q1_range`` by pseudo-arclength.

    The seed is the equilibrium at ``q1_range[0]`` nearest ``seed_qc``
    (lowest ``q_c`` when not given).  The curve passes through folds where
    ``dq1/ds`` changes sign and ends when ``q1`` leaves the range.
    """
    q_start, q_end = float(q1_range[0]), float(q1_range[1])
    direction = 1.0 if q_end >= q_start else -1.0
    seeds = solve_equilibria(config.with_q1(q_start))
    if not seeds:
        raise NetworkError(f"no equilibrium at q1={q_start}")
    if seed_qc is None:
        seed = seeds[0]
    else:
        seed = min(seeds, key=lambda s: abs(s.q_c - seed_qc))

    # second point from a small q1 perturbation gives the first secant
    dq = direction * min(ds_max, abs(q_end - q_start)) * 0.1
    nxt = solve_equilibria(config.with_q1(q_start + dq))
    if not nxt:
        raise NetworkError(f"no equilibrium near q1={q_start + dq}")
    nb = min(nxt, key=lambda s: abs(s.q_c - seed.q_c))
    u0 = np.array([q_start, seed.q_c])
    u1 = np.array([q_start + dq, nb.q_c])

    def stop(u):
        return (u[0] - q_end) * direction >= 0 or (u[0] - q_start) * direction < 0

    try:
        pts = pseudo_arclength(
            lambda u: _residual_2d(config, u),
            u0,
            u1,
            ds_max=ds_max,
            ds_min=ds_min,
            tol=RESIDUAL_TOL,
            stop=stop,
            max_points=max_points,
        )
    except StepCollapseError as err:
        # the domain edge at q1 = 0 or 1 blocks the last steps; accept if close
        pts = getattr(err, "points", None)
        if pts is None or abs(pts[-1][0] - q_end) > END_TOL:
            raise
        pts = list(pts)
        pts[-1] = np.array([q_end, pts[-1][1]])
    pts = np.asarray(pts)
    # clip the overshooting last point back onto the range end
    if len(pts) > 1 and (stop(pts[-1]) or pts[-1][0] == q_end):
        last = pts[-1]
        target = q_end if (last[0] - q_end) * direction >= 0 else q_start
        cfg = config.with_q1(target)
        st = nearest_equilibrium(cfg, last[1])
        if st is not None:
            pts[-1] = [target, st.q_c]
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    states = []
    for q1, qc in pts:
        side = 1 if qc >= 0 else -1
        states.append(equilibrium_state(config.with_q1(q1), qc, side))
    curve = EquilibriumCurve(config, s, pts[:, 0].copy(), pts[:, 1].copy(), states)
    curve.fold_indices = [i for i in range(1, len(curve) - 1)
                          if (curve.q1[i] - curve.q1[i - 1]) * (curve.q1[i + 1] - curve.q1[i]) < 0]
    return curve


# --------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class SaddleNodePoint:
    q1: float
    q_c: float
    contrast: float
    side: int

    @property
    def point(self):
        return (self.q1, self.q_c)


def fold_system(config: NetworkConfig, q1: float, q_c: float) -> np.ndarray:
    """Saddle-node conditions: ``psi - q_c`` and ``d psi/d q_c - 1``."""
    cfg = config.with_q1(q1)
    side = 1 if q_c >= 0 else -1
    return np.array([float(psi_residual(cfg, q_c, side)), psi_slope(cfg, q_c) - 1.0])


def refine_fold(config: NetworkConfig, q1: float, q_c: float, tol: float = 1e-10, maxiter: int = 50):
    """Newton on the fold system in ``(q1, q_c)`` at fixed contrast."""
    u = np.array([q1, q_c], dtype=float)
    side0 = 1 if q_c >= 0 else -1
    for _ in range(maxiter):
        F = fold_system(config, *u)
        if np.max(np.abs(F)) < tol:
            break
        J = np.empty((2, 2))
        for k in range(2):
            h = 1e-6 * max(1.0, abs(u[k]))
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            if k == 1 and up[1] * um[1] < 0:
                # keep the stencil on one side of the q_c = 0 kink
                if side0 > 0:
                    um[1], up[1] = u[1], u[1] + 2 * h
                else:
                    um[1], up[1] = u[1] - 2 * h, u[1]
            J[:, k] = (fold_system(config, *up) - fold_system(config, *um)) / (up[k] - um[k])
        try:
            du = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NetworkError("singular fold Jacobian") from exc
        step = 1.0
        while step > 1e-4:
            trial = u + step * du
            if 0 <= trial[0] <= 1 and -(1 - trial[0]) < trial[1] < trial[0]:
                break
            step *= 0.5
        u = u + step * du
    F = fold_system(config, *u)
    if np.max(np.abs(F)) > max(tol * 100, 1e-8):
        raise NetworkError(f"fold refinement did not converge (|F|={np.max(np.abs(F)):.3g})")
    return u


def detect_folds(curve: EquilibriumCurve):
    """Saddle-node points where ``dq1/ds`` changes sign along the curve."""
    if len(curve) < 3:
        return []
    out = []
    dq = np.diff(curve.q1)
    for i in range(1, len(curve) - 1):
        if dq[i - 1] * dq[i] < 0:
            j = i
            try:
                q1, qc = refine_fold(curve.config, curve.q1[j], curve.q_c[j])
            except NetworkError as exc:
                log.warning("fold near index %d not refined: %s", j, exc)
                q1, qc = curve.q1[j], curve.q_c[j]
            out.append(SaddleNodePoint(float(q1), float(qc), curve.config.contrast, 1 if qc >= 0 else -1))
    return out


def fold_criterion(config: NetworkConfig, state: EquilibriumState) -> float:
    """Relative defect of the zero-flow fold condition

        R_A + R_B + R_C = ln(contrast) (R_A (phi1 - phi_C) + R_B (phi2 - phi_C)).

    Vanishes at saddle-nodes located at ``q_c = 0``.
    """
    inl = config.inlets
    lhs = state.res_a + state.res_b + state.res_c
    rhs = config.viscosity.log_contrast * (
        state.res_a * (inl.phi1 - state.phi_c) + state.res_b * (inl.phi2 - state.phi_c)
    )
    return (lhs - rhs) / lhs


@dataclass(frozen=True)
class Onset:
    """Critical contrast for the birth of multiple equilibria at ``q_c = 0``."""

    contrast: float
    approximation: float
    q1: float


def onset_contrast(config: NetworkConfig) -> Onset:
    """Solve ``1 + r_C / (mu_1 (r_A + r_B)) = ln(mu_1)`` with ``mu_1 = contrast**phi1``.

    Requires identical inlet fluids and a separation rule with ``f(0) = 0``.
    The approximation ``exp(1/phi1)`` drops the ``r_C`` correction.
    """
    inl = config.inlets
    if abs(inl.phi1 - inl.phi2) > 1e-12:
        raise DomainError("onset criterion needs phi1 == phi2")
    if abs(float(config.separation.f(0.0))) > 1e-12:
        raise DomainError("onset criterion needs f(0) == 0")
    if inl.phi1 <= 0:
        raise DomainError("onset criterion needs phi1 > 0")
    g = config.geometry
    rho = 1.0 / (g.ra_rc + g.rb_rc)
    # y = ln(mu_1) solves y = 1 + rho exp(-y), unique root in [1, 1 + rho]
    y = brentq(lambda y: 1.0 + rho * math.exp(-y) - y, 1.0, 1.0 + rho + 1e-300, xtol=1e-15) if rho > 0 else 1.0
    q1 = g.rb_rc / (g.ra_rc + g.rb_rc)
    return Onset(contrast=math.exp(y / inl.phi1), approximation=math.exp(1.0 / inl.phi1), q1=q1)
