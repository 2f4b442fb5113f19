"""Linear stability of network equilibria.

Small perturbations of an equilibrium grow like ``exp(lambda t)`` where
``lambda`` solves the transcendental characteristic equation

    chi(lambda) = a K(lambda tau_A) + (b + d e^{-lambda tau_C}) K(lambda tau_B)
                  + c K(lambda tau_C) - 1 = 0,        K(z) = (1 - e^{-z}) / z,

with coefficients built from the equilibrium and transit times
``tau_i = V_i / (V |Q_i|)``.  Roots are located as intersections of the zero
contours of ``Re chi`` and ``Im chi`` and polished by complex Newton.  The
number of right-half-plane roots is counted independently with the argument
principle, which is what stability labels are based on.
"""

from __future__ import annotations

import logging
import cmath
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .equilibrium import (
    EquilibriumCurve,
    EquilibriumState,
    equilibrium_state,
    nearest_equilibrium,
    psi_residual,
)
from .model import DomainError, NetworkConfig, NetworkError, SingularityError
from .numerics import ConvergenceError, newton

__all__ = [
    "CharCoefficients",
    "Eigenvalue",
    "HopfPoint",
    "ContourField",
    "CurveStability",
    "StabilitySegment",
    "STABLE",
    "SADDLE",
    "OSCILLATORY",
    "char_coefficients",
    "coefficients_at",
    "delay_kernel",
    "delay_kernel_prime",
    "chi",
    "chi_prime",
    "eigen_contours",
    "contour_intersections",
    "find_eigenvalues",
    "dominant_eigenvalue",
    "count_unstable",
    "stability_label",
    "classify_state",
    "hopf_system",
    "refine_hopf",
    "hopf_scan",
    "classify_stability",
]

log = logging.getLogger(__name__)

STABLE = "stable"
SADDLE = "saddle"
OSCILLATORY = "oscillatory"

OMEGA_MIN = 0.05
# cap on the adaptive number of frequency rows in find_eigenvalues
MAX_ROWS = 20000
DEFAULT_WINDOW = (-2.0, 1.0, 0.0, 40.0)
SERIES_RADIUS = 1e-4


@dataclass(frozen=True)
class CharCoefficients:
    """Coefficients and delays of the characteristic equation."""

    a: float
    b: float
    c: float
    d: float
    tau_a: float
    tau_b: float
    tau_c: float

    @property
    def coefficients(self):
        return np.array([self.a, self.b, self.c, self.d])

    @property
    def taus(self):
        return np.array([self.tau_a, self.tau_b, self.tau_c])

    @property
    def chi0(self) -> float:
        """``chi(0)``; positive values imply a real unstable root."""
        return self.a + self.b + self.c + self.d - 1.0

    @property
    def is_trivial(self) -> bool:
        return self.a == 0 and self.b == 0 and self.c == 0 and self.d == 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Eigenvalue:
    sigma: float
    omega: float
    residual: float = 0.0

    @property
    def value(self) -> complex:
        return complex(self.sigma, self.omega)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HopfPoint:
    """Equilibrium with a root ``lambda = i omega`` on the imaginary axis."""

    q1: float
    q_c: float
    contrast: float
    omega: float
    residual: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# coefficients


def char_coefficients(state: EquilibriumState, config: NetworkConfig) -> CharCoefficients:
    """Characteristic-equation coefficients at an equilibrium.

    States with ``q_c < 0`` are mapped through the A/B exchange so that the
    cross vessel always runs from node 1 to node 2.  The combination
    ``Phi_C (Q_C/Q_1) f'/f`` is evaluated as ``Phi_1 x f'(x)``, which stays
    finite where ``f`` vanishes.
    """
    if state.q_c < 0:
        config = config.swapped()
        state = equilibrium_state(config, -state.q_c)
    q1, qc = state.q1, state.q_c
    x = qc / q1 if q1 > 0 else 0.0
    g = config.inlets.phi1 * float(config.separation.x_fprime(x))
    if not math.isfinite(g):
        raise SingularityError(f"separation term diverges at q1={q1}, q_c={qc}")
    dl = config.viscosity.dlog
    dla, dlb, dlc = float(dl(state.phi_a)), float(dl(state.phi_b)), float(dl(state.phi_c))
    total = state.res_a + state.res_b + state.res_c
    wa, wb, wc = state.res_a / total, state.res_b / total, state.res_c / total
    a = -((state.phi_c - state.phi_a) + g) * wa * dla
    b = -(state.phi_c - state.phi_b) * wb * dlb
    c = -g * wc * dlc
    d = -g * wb * dlb
    # +0.0 folds negative zeros so trivial cases compare cleanly
    return CharCoefficients(float(a) + 0.0, float(b) + 0.0, float(c) + 0.0, float(d) + 0.0,
                            float(state.tau_a), float(state.tau_b), float(state.tau_c))


def coefficients_at(config: NetworkConfig, q1: float, q_c: float) -> CharCoefficients:
    """Coefficients at ``(q1, q_c)``, whether or not it is an equilibrium."""
    cfg = config.with_q1(q1)
    side = 1 if q_c >= 0 else -1
    return char_coefficients(equilibrium_state(cfg, q_c, side), cfg)


# --------------------------------------------------------------------------
# characteristic function


def _cexpm1(z: complex) -> complex:
    """``e^z - 1`` for a complex scalar without cancellation near 0."""
    x, y = z.real, z.imag
    re = math.expm1(x) * math.cos(y) - 2.0 * math.sin(0.5 * y) ** 2
    return complex(re, math.exp(x) * math.sin(y))


def _kernel_scalar(z: complex) -> complex:
    if abs(z) < SERIES_RADIUS:
        return 1 - z / 2 + z * z / 6 - z**3 / 24
    return -_cexpm1(-z) / z


def _kernel_prime_scalar(z: complex) -> complex:
    if abs(z) < 1e-2:
        return -0.5 + z / 3 - z**2 / 8 + z**3 / 30 - z**4 / 144
    return (cmath.exp(-z) * (1 + z) - 1) / (z * z)


def delay_kernel(z):
    """``(1 - e^{-z}) / z`` with its Taylor series near the origin."""
    if isinstance(z, (complex, float, int)):
        return _kernel_scalar(complex(z))
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < SERIES_RADIUS
    zs = z[small]
    out[small] = 1 - zs / 2 + zs**2 / 6 - zs**3 / 24
    zl = z[~small]
    out[~small] = -np.expm1(-zl) / zl
    return out[()] if out.ndim == 0 else out


def delay_kernel_prime(z):
    """Derivative of the delay kernel."""
    if isinstance(z, (complex, float, int)):
        return _kernel_prime_scalar(complex(z))
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    out[small] = -0.5 + zs / 3 - zs**2 / 8 + zs**3 / 30 - zs**4 / 144
    zl = z[~small]
    out[~small] = (np.exp(-zl) * (1 + zl) - 1) / zl**2
    return out[()] if out.ndim == 0 else out


def _chi_scalar(co, lam: complex) -> complex:
    out = -1.0 + 0j
    if co.a:
        out += co.a * _kernel_scalar(lam * co.tau_a)
    if co.b or co.d:
        lead = co.b + co.d * cmath.exp(-lam * co.tau_c) if co.d else co.b
        out += lead * _kernel_scalar(lam * co.tau_b)
    if co.c:
        out += co.c * _kernel_scalar(lam * co.tau_c)
    return out


def _chi_prime_scalar(co, lam: complex) -> complex:
    ta, tb, tc = co.tau_a, co.tau_b, co.tau_c
    out = 0j
    if co.a:
        out += co.a * ta * _kernel_prime_scalar(lam * ta)
    if co.b or co.d:
        ec = cmath.exp(-lam * tc) if co.d else 0.0
        out += (co.b + co.d * ec) * tb * _kernel_prime_scalar(lam * tb)
        if co.d:
            out -= co.d * tc * ec * _kernel_scalar(lam * tb)
    if co.c:
        out += co.c * tc * _kernel_prime_scalar(lam * tc)
    return out


def chi(coeffs: CharCoefficients, lam):
    """Characteristic function; vectorized over ``lam``.

    Terms with a zero coefficient are skipped, so an infinite delay (a
    stagnant cross vessel) only matters when it actually contributes.
    """
    lam = np.asarray(lam, dtype=complex)
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    out = np.full(lam.shape, -1.0 + 0j)
    if a:
        out += a * delay_kernel(lam * coeffs.tau_a)
    if b or d:
        lead = b + d * np.exp(-lam * coeffs.tau_c) if d else b
        out += lead * delay_kernel(lam * coeffs.tau_b)
    if c:
        out += c * delay_kernel(lam * coeffs.tau_c)
    return out[()] if out.ndim == 0 else out


def chi_prime(coeffs: CharCoefficients, lam):
    """``d chi / d lambda``."""
    if isinstance(lam, (complex, float, int)):
        return _chi_prime_scalar(coeffs, complex(lam))
    lam = np.asarray(lam, dtype=complex)
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    ta, tb, tc = coeffs.tau_a, coeffs.tau_b, coeffs.tau_c
    out = np.zeros(lam.shape, dtype=complex)
    if a:
        out += a * ta * delay_kernel_prime(lam * ta)
    if b or d:
        ec = np.exp(-lam * tc) if d else 0.0
        out += (b + d * ec) * tb * delay_kernel_prime(lam * tb)
        if d:
            out -= d * tc * ec * delay_kernel(lam * tb)
    if c:
        out += c * tc * delay_kernel_prime(lam * tc)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# zero contours


@dataclass
class ContourField:
    """``Re chi`` and ``Im chi`` sampled on a rectangle.

    ``x`` is the horizontal coordinate (a growth rate, or arclength along an
    equilibrium curve), ``omega`` the vertical one; ``R`` and ``I`` have shape
    ``(len(omega), len(x))``.
    """

    x: np.ndarray
    omega: np.ndarray
    R: np.ndarray
    I: np.ndarray
    xname: str = "sigma"

    def rows(self):
        """Long-format rows ``(x, omega, R, I)``."""
        X, W = np.meshgrid(self.x, self.omega)
        return np.column_stack([X.ravel(), W.ravel(), self.R.ravel(), self.I.ravel()])


def eigen_contours(coeffs: CharCoefficients, sigma_range=(-2.0, 1.0), omega_range=(0.0, 40.0),
                   grid=400) -> ContourField:
    """Sample ``chi`` on a ``(sigma, omega)`` rectangle."""
    ns, nw = (grid, grid) if np.isscalar(grid) else grid
    if ns < 2 or nw < 2:
        raise ValueError("contour grid needs at least 2 points per axis")
    sig = np.linspace(sigma_range[0], sigma_range[1], int(ns))
    om = np.linspace(omega_range[0], omega_range[1], int(nw))
    v = chi(coeffs, sig[None, :] + 1j * om[:, None])
    return ContourField(sig, om, v.real, v.imag, "sigma")


def _cell_segments(v00, v10, v01, v11):
    """Zero-level segments of one cell in unit coordinates.

    Corners are ``v[ix][iy]``.  Saddle cells are split using the centre value.
    """
    corners = [(0.0, 0.0, v00), (1.0, 0.0, v10), (1.0, 1.0, v11), (0.0, 1.0, v01)]
    pts = []
    for k in range(4):
        x0, y0, f0 = corners[k]
        x1, y1, f1 = corners[(k + 1) % 4]
        if (f0 < 0) != (f1 < 0):
            t = f0 / (f0 - f1)
            pts.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
    if len(pts) == 2:
        return [(pts[0], pts[1])]
    if len(pts) == 4:
        centre = 0.25 * (v00 + v10 + v01 + v11)
        # pair edges so that the centre lies on the side matching its sign
        if (centre < 0) == (v00 < 0):
            return [(pts[0], pts[1]), (pts[2], pts[3])]
        return [(pts[3], pts[0]), (pts[1], pts[2])]
    return []


def _segment_cross(p, q):
    (x1, y1), (x2, y2) = p
    (x3, y3), (x4, y4) = q
    den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    if den == 0:
        return None
    t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
    u = ((x1 - x3) * (y1 - y2) - (y1 - y3) * (x1 - x2)) / den
    eps = 1e-9
    if -eps <= t <= 1 + eps and -eps <= u <= 1 + eps:
        return x1 + t * (x2 - x1), y1 + t * (y2 - y1)
    return None


def contour_intersections(fld: ContourField, include_near: bool = False):
    """Crossings of the ``R = 0`` and ``I = 0`` contours by marching squares.

    Returns ``(x, omega)`` seeds.  With ``include_near`` the centres of cells
    where both fields change sign but the linear segments miss each other are
    returned too, which helps with coarse grids.
    """
    R, I = fld.R, fld.I
    ok = np.isfinite(R) & np.isfinite(I)

    def changes(F):
        s = F < 0
        c = s[:-1, :-1] ^ s[1:, :-1] | s[:-1, :-1] ^ s[:-1, 1:] | s[:-1, :-1] ^ s[1:, 1:]
        return c

    good = ok[:-1, :-1] & ok[1:, :-1] & ok[:-1, 1:] & ok[1:, 1:]
    cand = np.argwhere(changes(R) & changes(I) & good)
    seeds = []
    for j, i in cand:
        # corners indexed as v[ix][iy] with x horizontal (columns)
        rs = _cell_segments(R[j, i], R[j, i + 1], R[j + 1, i], R[j + 1, i + 1])
        im = _cell_segments(I[j, i], I[j, i + 1], I[j + 1, i], I[j + 1, i + 1])
        hit = None
        for p in rs:
            for q in im:
                hit = _segment_cross(p, q)
                if hit is not None:
                    break
            if hit is not None:
                break
        if hit is None:
            if not include_near:
                continue
            hit = (0.5, 0.5)
        x0, x1 = fld.x[i], fld.x[i + 1]
        w0, w1 = fld.omega[j], fld.omega[j + 1]
        seeds.append((x0 + hit[0] * (x1 - x0), w0 + hit[1] * (w1 - w0)))
    return seeds


# --------------------------------------------------------------------------
# eigenvalues


def _newton_root(coeffs, lam, tol, maxstep, maxiter=60):
    for _ in range(maxiter):
        v = chi(coeffs, lam)
        if abs(v) < tol:
            return lam, abs(v)
        dv = chi_prime(coeffs, lam)
        if dv == 0 or not np.isfinite(dv):
            break
        step = -v / dv
        if abs(step) > maxstep:
            step *= maxstep / abs(step)
        lam = lam + step
    v = chi(coeffs, lam)
    return lam, abs(v)


def _real_roots(coeffs, s0, s1, n):
    s = np.linspace(s0, s1, n)
    v = chi(coeffs, s + 0j).real
    roots = []
    for k in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0]:
        if v[k] == 0:
            roots.append(s[k])
        elif v[k + 1] != 0:
            roots.append(brentq(lambda x: chi(coeffs, complex(x)).real, s[k], s[k + 1], xtol=1e-15))
    return roots


def _active_delay(coeffs: CharCoefficients) -> float:
    """Largest transit time that enters ``chi`` with a nonzero coefficient."""
    taus = []
    if coeffs.a:
        taus.append(coeffs.tau_a)
    if coeffs.b or coeffs.d:
        taus.append(coeffs.tau_b)
    if coeffs.c or coeffs.d:
        taus.append(coeffs.tau_c)
    taus = [t for t in taus if math.isfinite(t)]
    return max(taus, default=0.0)


def find_eigenvalues(coeffs: CharCoefficients, window=DEFAULT_WINDOW, grid=400, tol: float = 1e-10,
                     dedup: float = 1e-6, full_output: bool = False):
    """Roots of ``chi`` in ``window = (sigma0, sigma1, omega0, omega1)``.

    Complex roots come from contour intersections refined by Newton; real
    roots (on the ``omega = 0`` axis, where ``Im chi`` vanishes identically)
    from a sign scan along the real axis.  Only ``omega >= 0`` is reported;
    conjugates are implied.  Sorted by decreasing ``sigma``.  With
    ``full_output`` also returns the seeds that failed to converge.
    """
    s0, s1, w0, w1 = map(float, window)
    if not (s1 > s0 and w1 > w0):
        raise ValueError(f"empty eigenvalue window {window}")
    roots, failed = [], []
    if coeffs.is_trivial:
        return (roots, failed) if full_output else roots
    ns, nw = (grid, grid) if np.isscalar(grid) else grid
    # resolve the fastest delay: at most half a radian of phase per row
    nw = max(int(nw), min(MAX_ROWS, math.ceil((w1 - w0) * _active_delay(coeffs) / 0.5) + 1))
    fld = eigen_contours(coeffs, (s0, s1), (w0, w1), (ns, nw))
    h = math.hypot(fld.x[1] - fld.x[0], fld.omega[1] - fld.omega[0])
    found = []
    for sx, wx in contour_intersections(fld, include_near=True):
        lam, res = _newton_root(coeffs, complex(sx, wx), tol, maxstep=4 * h)
        if res >= tol or not np.isfinite(lam):
            failed.append(Eigenvalue(sx, wx, float(res)))
            continue
        if lam.imag < 0:
            lam = lam.conjugate()
        if lam.imag < 1e-9:
            continue  # real roots come from the axis scan
        found.append(lam)
    if w0 <= 0.0:
        for r in _real_roots(coeffs, s0, s1, 4 * int(ns)):
            found.append(complex(r, 0.0))
    pad = 1e-9
    for lam in found:
        if not (s0 - pad <= lam.real <= s1 + pad and w0 - pad <= lam.imag <= w1 + pad):
            continue
        if any(abs(lam - r.value) < dedup for r in roots):
            continue
        roots.append(Eigenvalue(float(lam.real), float(lam.imag), float(abs(chi(coeffs, lam)))))
    roots.sort(key=lambda e: (-e.sigma, e.omega))
    return (roots, failed) if full_output else roots


def dominant_eigenvalue(coeffs: CharCoefficients, window=DEFAULT_WINDOW, grid=400):
    """Root with the largest growth rate in the window, or None."""
    roots = find_eigenvalues(coeffs, window, grid)
    return roots[0] if roots else None


def count_unstable(coeffs: CharCoefficients) -> int:
    """Number of roots with positive real part (argument principle).

    On ``Re lambda >= 0`` every kernel is bounded by one and decays like
    ``2 / |lambda tau|``, so no root lies beyond the radius ``B`` used here
    and ``chi`` stays inside the unit disc about ``-1`` on the arc.  Only the
    imaginary-axis leg needs sampling; conjugate symmetry halves it.
    """
    a, b, c, d = np.abs(coeffs.coefficients)
    if a + b + c + d < 1.0:
        return 0
    terms = [(a, coeffs.tau_a), (b + d, coeffs.tau_b), (c, coeffs.tau_c), (d, coeffs.tau_c)]
    rate = sum(w / t for w, t in terms if w > 0)
    B = 2.1 * rate + 1e-9
    tmax = max(t for w, t in terms if w > 0)
    # arc from B to iB: both ends lie in the right half-plane of -chi
    end_b = chi(coeffs, complex(B, 0.0))
    end_ib = chi(coeffs, complex(0.0, B))
    turn = np.angle(-end_ib) - np.angle(-end_b)
    # imaginary axis from iB down to 0, refined until phase steps are small
    n = int(min(max(64, 8 * B * tmax), 400000))
    w = np.linspace(B, 0.0, n)
    v = chi(coeffs, 1j * w)
    for _ in range(40):
        jump = np.abs(np.angle(v[1:] / v[:-1]))
        bad = np.nonzero(jump > np.pi / 3)[0]
        if bad.size == 0:
            break
        mid = 0.5 * (w[bad] + w[bad + 1])
        w = np.insert(w, bad + 1, mid)
        v = np.insert(v, bad + 1, chi(coeffs, 1j * mid))
    turn += np.sum(np.angle(v[1:] / v[:-1]))
    return int(round(turn / np.pi))


def stability_label(coeffs: CharCoefficients) -> tuple[str, int]:
    """``(label, n_unstable)``.

    ``saddle`` when a real root has crossed (``chi(0) > 0``), otherwise
    ``oscillatory`` for any unstable spectrum and ``stable`` for none.
    """
    n = count_unstable(coeffs)
    if n == 0:
        return STABLE, 0
    if coeffs.chi0 > 0:
        return SADDLE, n
    return OSCILLATORY, n


def classify_state(config: NetworkConfig, state: EquilibriumState) -> tuple[str, int]:
    return stability_label(char_coefficients(state, config.with_q1(state.q1)))


# --------------------------------------------------------------------------
# Hopf points


def hopf_system(config: NetworkConfig, q1: float, q_c: float, omega: float) -> np.ndarray:
    """``[psi - q_c, Re chi(i omega), Im chi(i omega)]``."""
    cfg = config.with_q1(q1)
    side = 1 if q_c >= 0 else -1
    v = chi(coefficients_at(config, q1, q_c), 1j * omega)
    return np.array([float(psi_residual(cfg, q_c, side)), v.real, v.imag])


def refine_hopf(config: NetworkConfig, q1: float, q_c: float, omega: float, tol: float = 1e-11):
    """Newton on the Hopf system at fixed contrast; returns a HopfPoint."""

    def F(u):
        return hopf_system(config, *u)

    def valid(u):
        return 0.0 <= u[0] <= 1.0 and -(1.0 - u[0]) < u[1] < u[0] and u[2] > 0

    u = newton(F, [q1, q_c, omega], tol=tol, maxiter=40, valid=valid)
    res = float(np.max(np.abs(F(u))))
    return HopfPoint(float(u[0]), float(u[1]), config.contrast, float(u[2]), res)


def _curve_field(curve: EquilibriumCurve, omega):
    R = np.full((len(omega), len(curve)), np.nan)
    I = np.full_like(R, np.nan)
    gaps = []
    for i in range(len(curve)):
        try:
            cf = char_coefficients(curve.states[i], curve.config_at(i))
        except (SingularityError, DomainError):
            gaps.append(i)
            continue
        v = chi(cf, 1j * omega)
        R[:, i], I[:, i] = v.real, v.imag
    return R, I, gaps


def hopf_scan(curve: EquilibriumCurve, omega_range=(OMEGA_MIN, 40.0), grid=None, tol: float = 1e-11,
              full_output: bool = False):
    """Hopf points along an equilibrium curve.

    ``Re chi(i omega)`` and ``Im chi(i omega)`` are sampled over
    (arclength, omega); contour crossings seed Newton on the Hopf system at
    the curve's contrast.  ``grid`` is the number of omega samples (default
    one per 0.02).  With ``full_output`` returns ``(points, field, gaps)``.
    """
    w0, w1 = omega_range
    nw = int(grid) if grid else max(64, int(math.ceil((w1 - w0) / 0.02)) + 1)
    omega = np.linspace(w0, w1, nw)
    R, I, gaps = _curve_field(curve, omega)
    fld = ContourField(curve.s.copy(), omega, R, I, "s")
    if gaps:
        log.info("hopf_scan: %d curve points skipped (singular coefficients)", len(gaps))
    cfg = curve.config
    points = []
    for s, w in contour_intersections(fld):
        q1 = float(np.interp(s, curve.s, curve.q1))
        qc = float(np.interp(s, curve.s, curve.q_c))
        try:
            hp = refine_hopf(cfg, q1, qc, w, tol)
        except (ConvergenceError, NetworkError) as exc:
            log.debug("hopf seed (%.4f, %.4f) failed: %s", q1, w, exc)
            continue
        if hp.omega < 0.5 * w0:
            continue
        if any(abs(hp.q1 - p.q1) < 1e-7 and abs(hp.q_c - p.q_c) < 1e-7 and abs(hp.omega - p.omega) < 1e-6
               for p in points):
            continue
        points.append(hp)
    points.sort(key=lambda p: (p.q1, p.omega))
    return (points, fld, gaps) if full_output else points


# --------------------------------------------------------------------------
# curve classification


@dataclass(frozen=True)
class StabilitySegment:
    label: str
    start: int
    stop: int
    q1_start: float
    q1_stop: float


@dataclass
class CurveStability:
    """Per-point labels of an equilibrium curve and their runs."""

    curve: EquilibriumCurve
    labels: list
    n_unstable: np.ndarray
    segments: list = field(default_factory=list)

    @property
    def stable(self) -> np.ndarray:
        return np.array([lab == STABLE for lab in self.labels])

    def bands(self, label: str):
        """``(q1_start, q1_stop)`` of every segment with ``label``."""
        return [(s.q1_start, s.q1_stop) for s in self.segments if s.label == label]


def _edge(curve, i, lab_left, lab_right, tol=1e-7):
    """Bisect in arclength for the label change between points i and i+1."""
    lo, hi = curve.s[i], curve.s[i + 1]
    cfg = curve.config

    def label_at(s):
        q1 = float(np.interp(s, curve.s, curve.q1))
        qc = float(np.interp(s, curve.s, curve.q_c))
        # project back onto the curve at fixed q1
        st = nearest_equilibrium(cfg.with_q1(q1), qc, max_distance=0.05)
        if st is None:
            return None, q1
        return classify_state(cfg, st)[0], st.q1

    q_mid = 0.5 * (curve.q1[i] + curve.q1[i + 1])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lab, q_mid = label_at(mid)
        if lab is None:
            break
        if lab == lab_left:
            lo = mid
        else:
            hi = mid
    return q_mid


def classify_stability(curve: EquilibriumCurve, refine: bool = True) -> CurveStability:
    """Label every point of ``curve`` and group the labels into segments.

    Segment boundaries are located by bisection along the curve when
    ``refine`` is set, otherwise at the midpoint between samples.
    """
    labels, counts = [], []
    for i in range(len(curve)):
        try:
            lab, n = classify_state(curve.config, curve.states[i])
        except (SingularityError, DomainError):
            lab, n = "unknown", -1
        labels.append(lab)
        counts.append(n)
    segments = []
    start = 0
    q_start = float(curve.q1[0])
    for i in range(len(curve) - 1):
        if labels[i + 1] != labels[i]:
            if refine and "unknown" not in (labels[i], labels[i + 1]):
                q_edge = _edge(curve, i, labels[i], labels[i + 1])
            else:
                q_edge = 0.5 * (curve.q1[i] + curve.q1[i + 1])
            segments.append(StabilitySegment(labels[i], start, i, q_start, float(q_edge)))
            start, q_start = i + 1, float(q_edge)
    segments.append(StabilitySegment(labels[-1], start, len(curve) - 1, q_start, float(curve.q1[-1])))
    return CurveStability(curve, labels, np.array(counts), segments)
