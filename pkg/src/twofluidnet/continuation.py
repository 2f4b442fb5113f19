"""Two-parameter continuation of saddle-node and Hopf bifurcations.

Saddle-nodes satisfy ``psi = q_c`` and ``d psi / d q_c = 1``; Hopf points
satisfy ``psi = q_c`` and ``chi(i omega) = 0``.  Both are traced through the
``(q1, contrast)`` plane by pseudo-arclength continuation with the
logarithm of the contrast as the extra unknown.  The module also classifies
``(q1, contrast)`` cells into the phase-diagram regions

    i    one stable equilibrium
    ii   two stable equilibria
    iii  one stable equilibrium and one oscillatory
    iv   one oscillatory equilibrium
    v    two oscillatory equilibria

and extracts threshold contrasts from the traced curves.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    SaddleNodePoint,
    continue_curve,
    detect_folds,
    fold_system,
    nearest_equilibrium,
    onset_contrast,
    solve_equilibria,
)
from .model import DomainError, NetworkConfig, NetworkError, config_to_dict
from .numerics import ConvergenceError, StepCollapseError, newton, pseudo_arclength
from .stability import (
    OSCILLATORY,
    SADDLE,
    STABLE,
    HopfPoint,
    char_coefficients,
    classify_state,
    find_eigenvalues,
    hopf_scan,
    hopf_system,
)

__all__ = [
    "BifurcationCurve",
    "PhaseDiagram",
    "AmbiguousCountError",
    "REGIONS",
    "track_saddle_node",
    "track_hopf",
    "saddle_node_branches",
    "hopf_branches",
    "default_slices",
    "minimum_contrast",
    "crossings",
    "boundary_contrast",
    "destabilizing_minima",
    "instability_threshold",
    "equilibrium_labels",
    "classify_region",
    "build_phase_diagram",
    "THREADS_ENV",
]

log = logging.getLogger(__name__)

REGIONS = ("i", "ii", "iii", "iv", "v")
_REGION_OF = {(1, 0): "i", (2, 0): "ii", (1, 1): "iii", (0, 1): "iv", (0, 2): "v"}
THREADS_ENV = "TWOFLUIDNET_THREADS"

SADDLE_NODE = "saddle-node"
HOPF = "hopf"
POINT_TOL = 1e-10
OMEGA_FLOOR = 1e-3


class AmbiguousCountError(NetworkError):
    """The equilibrium count does not fit any region (a root was missed)."""


@dataclass
class BifurcationCurve:
    """Ordered points ``(q1, contrast, q_c, omega)``; omega is NaN for folds."""

    kind: str
    points: np.ndarray
    label: str = ""
    ends: tuple = ()

    def __len__(self):
        return len(self.points)

    @property
    def q1(self):
        return self.points[:, 0]

    @property
    def contrast(self):
        return self.points[:, 1]

    @property
    def q_c(self):
        return self.points[:, 2]

    @property
    def omega(self):
        return self.points[:, 3]

    def residuals(self, config: NetworkConfig) -> np.ndarray:
        """Defining-system residual of every point, evaluated from scratch."""
        out = []
        for q1, m, qc, w in self.points:
            cfg = config.with_contrast(m)
            if self.kind == HOPF:
                r = hopf_system(cfg, q1, qc, w)
            else:
                r = fold_system(cfg, q1, qc)
            out.append(np.max(np.abs(r)))
        return np.array(out)

    def to_dict(self) -> dict:
        cols = ("q1", "contrast", "q_c", "omega")
        pts = [{k: (None if not math.isfinite(v) else float(v)) for k, v in zip(cols, row)}
               for row in self.points]
        return {"kind": self.kind, "label": self.label, "ends": list(self.ends), "points": pts}


# --------------------------------------------------------------------------
# tracing


def _land(F, u, col, value):
    """Solve ``F`` with coordinate ``col`` pinned to ``value`` starting at ``u``."""
    free = [k for k in range(len(u)) if k != col]

    def G(v):
        w = np.empty(len(u))
        w[free] = v
        w[col] = value
        return F(w)

    v = newton(G, np.asarray(u)[free], tol=POINT_TOL)
    w = np.empty(len(u))
    w[free] = v
    w[col] = value
    return w


def _finish(F, pts, bounds):
    """Replace a final point that overshot one of ``bounds`` by a point on it.

    ``bounds`` holds ``(column, lo, hi)`` triples.  Returns the points and
    the column that was landed on (None when nothing overshot).
    """
    if len(pts) < 2:
        return pts, None
    prev, last = pts[-2], pts[-1]
    for col, lo, hi in bounds:
        v = last[col]
        if lo <= v <= hi or not (lo <= prev[col] <= hi):
            continue
        edge = hi if v > hi else lo
        t = (edge - prev[col]) / (v - prev[col])
        guess = prev + t * (last - prev)
        try:
            return np.vstack([pts[:-1], _land(F, guess, col, edge)]), col
        except NetworkError:
            return pts[:-1], col
    return pts, None


def _trace(F, u0, u1, stop, scale, ds_max, tol, max_points, bounds=()):
    """One direction of pseudo-arclength; returns (points, end reason).

    A step collapse next to ``q1 = 0`` or ``q1 = 1`` is a boundary exit; the
    final point is then solved on the boundary itself.  A final point past
    one of ``bounds`` is likewise moved onto that bound.
    """
    try:
        pts = pseudo_arclength(F, u0, u1, ds_max=ds_max, ds_min=1e-7, tol=tol, stop=stop,
                               max_points=max_points, scale=scale)
    except StepCollapseError as exc:
        pts = np.asarray(getattr(exc, "points", [u0, u1]))
        last = pts[-1]
        for edge in (0.0, 1.0):
            if abs(last[0] - edge) < 5e-3:
                try:
                    pts = np.vstack([pts, _land(F, last, 0, edge)])
                except NetworkError:
                    pass
                return pts, "boundary"
        return pts, "collapse"
    pts = np.asarray(pts)
    if len(pts) >= max_points:
        return pts, "max_points"
    pts, col = _finish(F, pts, bounds)
    return pts, "boundary" if col == 0 else "stop"


def _both_ways(F, seed, nxt, stop, scale, ds_max, tol, max_points, bounds=()):
    fwd, end_f = _trace(F, seed, nxt, stop, scale, ds_max, tol, max_points, bounds)
    back, end_b = _trace(F, nxt, seed, stop, scale, ds_max, tol, max_points, bounds)
    pts = np.vstack([back[:1:-1], fwd]) if len(back) > 2 else fwd
    return pts, (end_b, end_f)


def _in_domain(q1, qc):
    return 0.0 <= q1 <= 1.0 and -(1.0 - q1) < qc < q1


def _fold_F(config):
    def F(u):
        q1, qc, lm = u
        if not _in_domain(q1, qc):
            raise DomainError("fold point left the admissible region")
        return fold_system(config.with_contrast(math.exp(lm)), q1, qc)
    return F


def _hopf_F(config):
    def F(u):
        q1, qc, w, lm = u
        if not _in_domain(q1, qc) or w <= 0:
            raise DomainError("Hopf point left the admissible region")
        return hopf_system(config.with_contrast(math.exp(lm)), q1, qc, w)
    return F


def track_saddle_node(config: NetworkConfig, seed: SaddleNodePoint, contrast_range=(2.0, 500.0),
                      ds_max: float = 0.01, max_points: int = 20000, delta: float = 2e-3) -> BifurcationCurve:
    """Continue a fold through ``(q1, contrast)``.

    A seed at ``q_c = 0`` (the onset cusp) starts the branch on the side
    given by ``seed.side`` and runs towards larger contrast; any other seed
    is continued in both directions.  Branches end at the contrast range,
    at the q1 boundary, or where the fold returns to ``q_c = 0``.
    """
    lo, hi = map(math.log, contrast_range)
    F = _fold_F(config)
    side = seed.side if seed.side else 1
    u_seed = np.array([seed.q1, seed.q_c, math.log(seed.contrast)])

    def stop(u):
        return not (lo <= u[2] <= hi) or u[1] * side < 0 or not (0.0 <= u[0] <= 1.0)

    scale = np.array([1.0, 1.0, 2.0])
    bounds = ((2, lo, hi), (0, 0.0, 1.0))
    if seed.q_c == 0.0:
        qc = side * delta
        sub = newton(lambda v: F([v[0], qc, v[1]]), [seed.q1, u_seed[2]], tol=POINT_TOL)
        nxt = np.array([sub[0], qc, sub[1]])
        pts, end = _trace(F, u_seed, nxt, stop, scale, ds_max, POINT_TOL, max_points, bounds)
        ends = ("onset", end)
    else:
        lm = u_seed[2] + delta
        sub = newton(lambda v: F([v[0], v[1], lm]), u_seed[:2], tol=POINT_TOL)
        nxt = np.array([sub[0], sub[1], lm])
        pts, ends = _both_ways(F, u_seed, nxt, stop, scale, ds_max, POINT_TOL, max_points, bounds)
    pts = pts[(pts[:, 2] >= lo - 1e-12) & (pts[:, 2] <= hi + 1e-12) & (pts[:, 1] * side >= 0)]
    out = np.column_stack([pts[:, 0], np.exp(pts[:, 2]), pts[:, 1], np.full(len(pts), np.nan)])
    return BifurcationCurve(SADDLE_NODE, out, f"sn_{'pos' if side > 0 else 'neg'}", ends)


def track_hopf(config: NetworkConfig, seed: HopfPoint, contrast_range=(2.0, 500.0),
               ds_max: float = 0.01, max_points: int = 20000, delta: float = 1e-3) -> BifurcationCurve:
    """Continue a Hopf point through ``(q1, contrast)`` in both directions.

    Branches end at the contrast range, at the q1 boundary, or where the
    frequency drops to zero (the Hopf curve meets a fold).
    """
    lo, hi = map(math.log, contrast_range)
    F = _hopf_F(config)
    u_seed = np.array([seed.q1, seed.q_c, seed.omega, math.log(seed.contrast)])

    def stop(u):
        return (not (lo <= u[3] <= hi) or not (0.0 <= u[0] <= 1.0) or u[2] < OMEGA_FLOOR)

    nxt = None
    # the second point: a small contrast step, or a q1 step at a contrast turn
    for fix, d in ((3, delta), (3, -delta), (0, delta), (0, -delta)):
        val = u_seed[fix] + d
        free = [k for k in range(4) if k != fix]

        def G(v, fix=fix, val=val, free=free):
            u = np.empty(4)
            u[free] = v
            u[fix] = val
            return F(u)

        try:
            sub = newton(G, u_seed[free], tol=POINT_TOL)
        except NetworkError:
            continue
        nxt = np.empty(4)
        nxt[free] = sub
        nxt[fix] = val
        break
    if nxt is None:
        raise ConvergenceError(f"cannot start Hopf continuation from {seed}")
    scale = np.array([1.0, 1.0, 10.0, 2.0])
    bounds = ((3, lo, hi), (0, 0.0, 1.0))
    pts, ends = _both_ways(F, u_seed, nxt, stop, scale, ds_max, POINT_TOL, max_points, bounds)
    pts = pts[(pts[:, 3] >= lo - 1e-12) & (pts[:, 3] <= hi + 1e-12) & (pts[:, 2] > 0)]
    out = np.column_stack([pts[:, 0], np.exp(pts[:, 3]), pts[:, 1], pts[:, 2]])
    return BifurcationCurve(HOPF, out, "hopf", ends)


def saddle_node_branches(config: NetworkConfig, contrast_range=(2.0, 500.0), **kw):
    """Both fold branches, started at the onset cusp when it exists.

    Configurations without a ``q_c = 0`` onset (unequal inlet fluids or
    ``f(0) != 0``) are seeded from the folds found at the top contrast.
    """
    try:
        on = onset_contrast(config)
    except DomainError:
        on = None
    if on is not None and contrast_range[0] <= on.contrast <= contrast_range[1]:
        return [track_saddle_node(config, SaddleNodePoint(on.q1, 0.0, on.contrast, s), contrast_range, **kw)
                for s in (-1, 1)]
    top = config.with_contrast(contrast_range[1])
    out = []
    for k, fp in enumerate(detect_folds(continue_curve(top))):
        bc = track_saddle_node(config, fp, contrast_range, **kw)
        bc.label = f"sn_{k}"
        out.append(bc)
    return out


def _on_branch(hp: HopfPoint, branch: BifurcationCurve, tol=1e-3) -> bool:
    """Whether ``hp`` lies on ``branch`` (distance to its polyline)."""
    if len(branch) < 2:
        return False
    # scaled coordinates: q1, log contrast, omega / 10
    P = np.column_stack([branch.q1, np.log(branch.contrast), branch.omega / 10])
    x = np.array([hp.q1, math.log(hp.contrast), hp.omega / 10])
    a, b = P[:-1], P[1:]
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", x - a, d) / np.maximum(np.einsum("ij,ij->i", d, d), 1e-300), 0, 1)
    dist = np.linalg.norm(a + t[:, None] * d - x, axis=1)
    return bool(dist.min() < tol)


def default_slices(contrast_range, n=8):
    """Log-spaced seeding contrasts; low ones catch branches that end early."""
    return [float(v) for v in np.geomspace(contrast_range[0], contrast_range[1], n)[1:]]


def hopf_branches(config: NetworkConfig, slices=None, contrast_range=(2.0, 500.0),
                  omega_range=(0.05, 40.0), **kw):
    """Hopf branches seeded by scanning equilibrium curves at ``slices``.

    Seeds are processed in order of increasing frequency; a seed already on a
    traced branch is skipped.  Branch labels follow that order.
    """
    branches = []
    for m in default_slices(contrast_range) if slices is None else slices:
        curve = continue_curve(config.with_contrast(m))
        seeds = sorted(hopf_scan(curve, omega_range), key=lambda h: (h.omega, h.q1))
        for hp in seeds:
            if any(_on_branch(hp, b) for b in branches):
                continue
            try:
                b = track_hopf(config, hp, contrast_range, **kw)
            except NetworkError as exc:
                log.warning("Hopf seed %s not continued: %s", hp, exc)
                continue
            b.label = f"hopf_{len(branches)}"
            branches.append(b)
    return branches


# --------------------------------------------------------------------------
# thresholds


def minimum_contrast(curve: BifurcationCurve):
    """``(q1, contrast)`` at the lowest contrast of a branch.

    Interior minima are polished by a parabola in log contrast.
    """
    lm = np.log(curve.contrast)
    k = int(np.argmin(lm))
    if 0 < k < len(curve) - 1:
        x = curve.q1[k - 1:k + 2]
        y = lm[k - 1:k + 2]
        s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
        A = np.vander(s, 3)
        try:
            c2, c1, c0 = np.linalg.solve(A, y)
            if c2 > 0:
                sm = -c1 / (2 * c2)
                if s[0] <= sm <= s[2]:
                    return float(np.interp(sm, s, x)), float(math.exp(c0 + c1 * sm + c2 * sm * sm))
        except np.linalg.LinAlgError:
            pass
    return float(curve.q1[k]), float(curve.contrast[k])


def crossings(a: BifurcationCurve, b: BifurcationCurve):
    """Intersections of two branches in the ``(q1, log contrast)`` plane."""
    pa = np.column_stack([a.q1, np.log(a.contrast)])
    pb = np.column_stack([b.q1, np.log(b.contrast)])
    out = []
    for i in range(len(pa) - 1):
        p0, p1 = pa[i], pa[i + 1]
        lo = np.minimum(p0, p1)
        hi = np.maximum(p0, p1)
        q0, q1_ = pb[:-1], pb[1:]
        # bounding-box prefilter
        m = ((np.maximum(q0[:, 0], q1_[:, 0]) >= lo[0]) & (np.minimum(q0[:, 0], q1_[:, 0]) <= hi[0])
             & (np.maximum(q0[:, 1], q1_[:, 1]) >= lo[1]) & (np.minimum(q0[:, 1], q1_[:, 1]) <= hi[1]))
        for j in np.nonzero(m)[0]:
            r = p1 - p0
            s = q1_[j] - q0[j]
            den = r[0] * s[1] - r[1] * s[0]
            if den == 0:
                continue
            w = q0[j] - p0
            t = (w[0] * s[1] - w[1] * s[0]) / den
            u = (w[0] * r[1] - w[1] * r[0]) / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                x = p0 + t * r
                out.append((float(x[0]), float(math.exp(x[1]))))
    return out


def destabilizing_minima(config: NetworkConfig, branches, rel: float = 0.02):
    """Interior contrast minima of Hopf branches that destabilize an equilibrium.

    A minimum qualifies when the equilibrium nearest the branch point is
    stable at ``contrast * (1 - rel)`` and oscillatory at ``contrast * (1 + rel)``;
    Hopf crossings on already unstable (saddle) equilibria are dropped.
    Returns ``[(q1, contrast, omega, label), ...]`` sorted by contrast.
    """
    out = []
    for b in branches:
        if b.kind != HOPF or len(b) < 3:
            continue
        k = int(np.argmin(b.contrast))
        if not 0 < k < len(b) - 1:
            continue
        q1, m = minimum_contrast(b)
        qc = float(b.q_c[k])
        labels = []
        for f in (1 - rel, 1 + rel):
            cfg = config.with_q1(q1).with_contrast(m * f)
            st = nearest_equilibrium(cfg, qc, max_distance=0.05)
            labels.append(None if st is None else classify_state(cfg, st)[0])
        if labels == [STABLE, OSCILLATORY]:
            out.append((q1, m, float(b.omega[k]), b.label))
    return sorted(out, key=lambda r: r[1])


def boundary_contrast(curve: BifurcationCurve, q1_value: float):
    """Contrasts where a branch crosses the line ``q1 = q1_value``."""
    x = curve.q1 - q1_value
    out = []
    for i in range(len(x) - 1):
        if x[i] == 0:
            out.append(float(curve.contrast[i]))
        elif x[i] * x[i + 1] < 0:
            t = x[i] / (x[i] - x[i + 1])
            lm = np.log(curve.contrast)
            out.append(float(math.exp(lm[i] + t * (lm[i + 1] - lm[i]))))
    if x[-1] == 0:
        out.append(float(curve.contrast[-1]))
    return out


def _branch_state(config, side):
    eqs = solve_equilibria(config)
    if not eqs:
        return None
    return eqs[-1] if side > 0 else eqs[0]


def instability_threshold(config: NetworkConfig, q1: float, side: int, contrast_range=(2.0, 500.0),
                          n_scan: int = 80, rtol: float = 1e-7) -> HopfPoint | None:
    """Lowest contrast at which the ``side`` equilibrium at ``q1`` turns oscillatory.

    ``side`` picks the largest (+1) or smallest (-1) equilibrium ``q_c``.
    The contrast is bracketed on a log grid, bisected on the stability
    label and polished by Newton on the Hopf system at fixed ``q1``.
    """
    cfg = config.with_q1(q1)

    def label(m):
        st = _branch_state(cfg.with_contrast(m), side)
        if st is None:
            return None, None
        return classify_state(cfg.with_contrast(m), st)[0], st

    grid = np.geomspace(contrast_range[0], contrast_range[1], n_scan)
    prev = grid[0]
    if label(prev)[0] == OSCILLATORY:
        return None
    hit = None
    for m in grid[1:]:
        if label(m)[0] == OSCILLATORY:
            hit = m
            break
        prev = m
    if hit is None:
        return None
    lo, hi = prev, hit
    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        if label(mid)[0] == OSCILLATORY:
            hi = mid
        else:
            lo = mid
    _, st = label(hi)
    cf_cfg = cfg.with_contrast(hi)
    roots = find_eigenvalues(char_coefficients(st, cf_cfg), window=(-0.5, 0.5, 0.0, 60.0), grid=(120, 1200))
    cands = [r for r in roots if r.omega > 0]
    if not cands:
        return HopfPoint(q1, st.q_c, float(hi), float("nan"), float("nan"))
    w0 = min(cands, key=lambda r: abs(r.sigma)).omega

    def F(v):
        qc, w, lm = v
        return hopf_system(cfg.with_contrast(math.exp(lm)), q1, qc, w)

    try:
        qc, w, lm = newton(F, [st.q_c, w0, math.log(hi)], tol=1e-11)
    except NetworkError:
        return HopfPoint(q1, st.q_c, float(hi), float(w0), float(np.max(np.abs(F([st.q_c, w0, math.log(hi)])))))
    res = float(np.max(np.abs(F([qc, w, lm]))))
    return HopfPoint(float(q1), float(qc), float(math.exp(lm)), float(w), res)


# --------------------------------------------------------------------------
# regions


def equilibrium_labels(config: NetworkConfig):
    """``[(state, label, n_unstable), ...]`` for every equilibrium."""
    out = []
    for st in solve_equilibria(config):
        lab, n = classify_state(config, st)
        out.append((st, lab, n))
    return out


def classify_region(config: NetworkConfig) -> str:
    """Phase-diagram region of ``config`` at its ``(q1, contrast)``."""
    labs = equilibrium_labels(config)
    if len(labs) % 2 == 0:
        raise AmbiguousCountError(
            f"{len(labs)} equilibria at q1={config.q1}, contrast={config.contrast}")
    n_stable = sum(1 for _, lab, _ in labs if lab == STABLE)
    n_osc = sum(1 for _, lab, _ in labs if lab == OSCILLATORY)
    n_saddle = sum(1 for _, lab, _ in labs if lab == SADDLE)
    key = (n_stable, n_osc)
    if key not in _REGION_OF or n_saddle != len(labs) // 2:
        raise AmbiguousCountError(
            f"unexpected stability counts stable={n_stable} oscillatory={n_osc} saddle={n_saddle}")
    return _REGION_OF[key]


@dataclass
class PhaseDiagram:
    """Region raster over ``(q1, contrast)`` with overlaid branches.

    ``labels[j, i]`` belongs to ``contrast[j]`` and ``q1[i]``; failed cells
    hold an empty string and are listed in ``failures``.
    """

    q1: np.ndarray
    contrast: np.ndarray
    labels: np.ndarray
    curves: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    config: NetworkConfig | None = None

    def rows(self):
        """``(q1, contrast, region)`` per cell, contrast-major."""
        return [(float(q), float(m), self.labels[j, i])
                for j, m in enumerate(self.contrast) for i, q in enumerate(self.q1)]

    def regions_present(self, min_contrast: float = 0.0):
        m = self.contrast >= min_contrast
        return sorted({lab for lab in self.labels[m].ravel() if lab})

    def label_at(self, q1: float, contrast: float) -> str:
        i = int(np.argmin(np.abs(self.q1 - q1)))
        j = int(np.argmin(np.abs(np.log(self.contrast / contrast))))
        return self.labels[j, i]

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / self.labels.size

    def meta(self) -> dict:
        return {
            "config": config_to_dict(self.config) if self.config is not None else None,
            "q1": [float(v) for v in self.q1],
            "contrast": [float(v) for v in self.contrast],
            "failures": [{"q1": q, "contrast": m, "error": e} for q, m, e in self.failures],
            "curves": [c.label for c in self.curves],
        }


def _classify_row(args):
    config, m, q1s = args
    row, fails = [], []
    cfg_m = config.with_contrast(m)
    for q in q1s:
        try:
            row.append(classify_region(cfg_m.with_q1(q)))
        except (NetworkError, ValueError, ArithmeticError) as exc:
            row.append("")
            fails.append((float(q), float(m), str(exc)))
    return row, fails


def _workers(threads):
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    return max(1, int(threads))


def build_phase_diagram(config: NetworkConfig, q1_grid=None, contrast_grid=None, curves: bool = True,
                        hopf_slices=None, threads: int | None = None) -> PhaseDiagram:
    """Classify every cell and trace the bifurcation branches.

    Defaults: 201 values of q1 on [0, 1] and 120 log-spaced contrasts on
    [2, 500].  Hopf branches are seeded at ``hopf_slices`` (default: the top
    contrast and a few intermediate ones).  Cells are processed in parallel
    over contrast rows when ``threads`` (or the environment variable
    ``TWOFLUIDNET_THREADS``) exceeds one.
    """
    q1s = np.linspace(0.0, 1.0, 201) if q1_grid is None else np.asarray(q1_grid, dtype=float)
    ms = np.geomspace(2.0, 500.0, 120) if contrast_grid is None else np.asarray(contrast_grid, dtype=float)
    if q1s.size < 2 or ms.size < 2:
        raise ValueError("phase diagram grids need at least 2 points per axis")
    jobs = [(config, float(m), q1s) for m in ms]
    n = _workers(threads)
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(_classify_row, jobs))
    else:
        results = [_classify_row(j) for j in jobs]
    labels = np.array([r[0] for r in results], dtype=object)
    failures = [f for r in results for f in r[1]]
    out = PhaseDiagram(q1s, ms, labels, [], failures, config)
    if curves:
        crange = (float(ms.min()), float(ms.max()))
        try:
            out.curves.extend(saddle_node_branches(config, crange))
        except NetworkError as exc:
            log.warning("saddle-node tracking failed: %s", exc)
        if hopf_slices is None:
            hopf_slices = default_slices(crange)
        try:
            out.curves.extend(hopf_branches(config, hopf_slices, crange))
        except NetworkError as exc:
            log.warning("Hopf tracking failed: %s", exc)
    return out
