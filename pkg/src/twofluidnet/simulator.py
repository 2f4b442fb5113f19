"""Direct simulation of the transport equations with flow feedback.

Inside each vessel the volume fraction is carried at the vessel's uniform
speed ``|Q_i| / V_i`` (dimensionless length, volume fraction ``V_i`` of the
total).  Node rules fix the inflow values, and the loop flow ``Q_C`` follows
algebraically from the length-averaged viscosities,

    Q_C = (Q_1 R_A - Q_2 R_B) / (R_A + R_B + R_C),   R_i = r_i <mu(phi_i)>.

Profiles are stored as material samples that ride the characteristics: a
vessel's samples sit at ``x_k = (k - 1 + theta) dx`` and only the offset
``theta`` changes during a step.  When a sample crosses an end the buffer
shifts by one slot and a new sample takes the boundary value.  No value is
ever interpolated, so transport is free of numerical diffusion and profiles
stay within the range of the injected values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .equilibrium import EquilibriumState, solve_equilibria
from .model import NetworkConfig, NetworkError

__all__ = [
    "SimConfig",
    "SimState",
    "SimResult",
    "CycleStats",
    "StarvedVesselError",
    "CFLViolation",
    "init",
    "step",
    "stable_dt",
    "run",
    "node_residuals",
    "analyze_cycle",
    "harmonic_distortion",
    "bistability_probe",
    "seed_equilibrium",
    "OUTCOMES",
]

log = logging.getLogger(__name__)

OUTCOMES = ("settled_positive", "settled_negative", "cycle_positive", "cycle_negative", "cycle_spanning")
VESSELS = ("a", "b", "c")


class StarvedVesselError(NetworkError):
    """Flow in vessel A or B reached zero; reverse flow there is undefined."""

    def __init__(self, message, t):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


class CFLViolation(NetworkError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Numerical settings of a run.

    ``transient_skip`` defaults to half of ``t_end``.  ``perturbation`` scales
    the initial profile of ``perturb_vessel`` by ``1 + perturbation``.
    """

    cells_per_vessel: int = 512
    cfl: float = 0.9
    t_end: float = 100.0
    transient_skip: float | None = None
    perturbation: float = 1e-4
    perturb_vessel: str = "c"
    seed_state: EquilibriumState | None = None

    def __post_init__(self):
        problems = []
        if int(self.cells_per_vessel) < 16:
            problems.append(f"cells_per_vessel must be >= 16, got {self.cells_per_vessel}")
        if not (0 < self.cfl <= 1):
            problems.append(f"cfl must lie in (0, 1], got {self.cfl}")
        skip = self.skip
        if not (self.t_end > skip >= 0):
            problems.append(f"need t_end > transient_skip >= 0, got {self.t_end}, {skip}")
        if self.perturb_vessel not in VESSELS:
            problems.append(f"perturb_vessel must be one of {VESSELS}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def skip(self) -> float:
        return 0.5 * self.t_end if self.transient_skip is None else float(self.transient_skip)


class _Tube:
    """Material samples of one vessel.

    ``vals[1:n+1]`` are interior samples at ``(k - 1 + theta) dx``; ``vals[0]``
    and ``vals[n+1]`` are ghosts just beyond each end.  ``mu`` caches the
    relative viscosity of every slot.
    """

    __slots__ = ("n", "dx", "theta", "vals", "mu", "_visc")

    def __init__(self, n, value, visc):
        self.n = n
        self.dx = 1.0 / n
        self.theta = 0.0
        self._visc = visc
        self.vals = np.full(n + 2, float(value))
        self.mu = np.array(visc(self.vals), dtype=float)

    def copy(self):
        t = _Tube.__new__(_Tube)
        t.n, t.dx, t.theta, t._visc = self.n, self.dx, self.theta, self._visc
        t.vals, t.mu = self.vals.copy(), self.mu.copy()
        return t

    def scale(self, factor):
        self.vals = np.clip(self.vals * factor, 0.0, 1.0)
        self.mu = np.array(self._visc(self.vals), dtype=float)

    def positions(self):
        return (np.arange(self.n + 2) - 1 + self.theta) * self.dx

    def end_value(self, right_end: bool) -> float:
        """Value at ``x = 1`` (or ``x = 0``) interpolated with the ghost."""
        v, th, n = self.vals, self.theta, self.n
        if right_end:
            return v[n] + (v[n + 1] - v[n]) * (1.0 - th)
        return v[0] + (v[1] - v[0]) * (1.0 - th)

    def mean_mu(self, forward: bool, b: float) -> float:
        """Trapezoid average of ``mu`` over [0, 1] with inflow value ``b``."""
        m, th, n, dx = self.mu, self.theta, self.n, self.dx
        mb = self._visc(b)
        if forward:
            m0, m1 = mb, m[n] + (m[n + 1] - m[n]) * (1.0 - th)
        else:
            m0, m1 = m[0] + (m[1] - m[0]) * (1.0 - th), mb
        inner = dx * (m[1:n + 1].sum() - 0.5 * (m[1] + m[n]))
        return inner + th * dx * 0.5 * (m0 + m[1]) + (1.0 - th) * dx * 0.5 * (m[n] + m1)

    def move(self, shift: float, forward: bool, b: float):
        """Advance samples by ``shift`` cells; ``b`` enters at the inflow end."""
        mb = self._visc(b)
        if forward:
            self.theta += shift
            if self.theta >= 1.0:
                self.theta -= 1.0
                self.vals[1:] = self.vals[:-1]
                self.mu[1:] = self.mu[:-1]
                self.vals[1], self.mu[1] = b, mb
            self.vals[0], self.mu[0] = b, mb
        else:
            self.theta -= shift
            if self.theta < 0.0:
                self.theta += 1.0
                self.vals[:-1] = self.vals[1:]
                self.mu[:-1] = self.mu[1:]
                self.vals[-2], self.mu[-2] = b, mb
            self.vals[-1], self.mu[-1] = b, mb


class _Constants:
    """Scalars of a configuration, unpacked once per run."""

    __slots__ = ("config", "q1", "q2", "phi1", "phi2", "f", "r", "v")

    def __init__(self, config: NetworkConfig):
        inl = config.inlets
        self.config = config
        self.q1, self.q2 = float(inl.q1), float(inl.q2)
        self.phi1, self.phi2 = float(inl.phi1), float(inl.phi2)
        self.f = config.separation.f
        self.r = tuple(float(x) for x in config.geometry.resistances)
        self.v = tuple(float(x) for x in config.geometry.volume_fractions)


@dataclass
class SimState:
    """Profiles, loop flow and time of a running simulation."""

    tubes: list
    q_c: float
    t: float = 0.0
    steps: int = 0
    _const: _Constants | None = field(default=None, repr=False, compare=False)

    def copy(self) -> "SimState":
        return SimState([t.copy() for t in self.tubes], self.q_c, self.t, self.steps, self._const)

    def constants(self, config: NetworkConfig) -> _Constants:
        if self._const is None or self._const.config is not config:
            self._const = _Constants(config)
        return self._const

    @property
    def phi_a(self) -> np.ndarray:
        return self.tubes[0].vals[1:-1].copy()

    @property
    def phi_b(self) -> np.ndarray:
        return self.tubes[1].vals[1:-1].copy()

    @property
    def phi_c(self) -> np.ndarray:
        return self.tubes[2].vals[1:-1].copy()

    def profile(self, vessel: str):
        """``(x, phi)`` of the interior samples of ``vessel``."""
        t = self.tubes[VESSELS.index(vessel)]
        return t.positions()[1:-1], t.vals[1:-1].copy()

    def snapshot(self, n: int | None = None):
        """Profiles resampled on the common grid ``x = (k + 1/2)/n``."""
        n = n or self.tubes[0].n
        x = (np.arange(n) + 0.5) / n
        cols = [x]
        for t in self.tubes:
            cols.append(np.interp(x, t.positions(), t.vals))
        return np.column_stack(cols)

    def mean_fractions(self) -> np.ndarray:
        return np.array([t.vals[1:-1].mean() for t in self.tubes])


def _boundary_values(config: NetworkConfig, state: SimState):
    """Inflow values ``(phi_A(0), phi_B(0), phi_C(inflow end))``.

    Mixing at each node conserves both constituents exactly.
    """
    k = state.constants(config)
    q1, q2, qc = k.q1, k.q2, state.q_c
    c = state.tubes[2]
    if qc >= 0:
        c_in = k.phi1 * float(k.f(qc / q1)) if q1 > 0 else 0.0
        c0, c1 = c_in, c.end_value(True)
    else:
        c_in = k.phi2 * float(k.f(-qc / q2)) if q2 > 0 else 0.0
        c0, c1 = c.end_value(False), c_in
    pa = (k.phi1 * q1 - c0 * qc) / (q1 - qc)
    pb = (k.phi2 * q2 + c1 * qc) / (q2 + qc)
    return min(max(pa, 0.0), 1.0), min(max(pb, 0.0), 1.0), c_in


def node_residuals(config: NetworkConfig, state: SimState) -> np.ndarray:
    """Constituent balance at nodes 1 and 2 for the current boundary values."""
    inl = config.inlets
    qc = state.q_c
    pa, pb, c_in = _boundary_values(config, state)
    c = state.tubes[2]
    c0 = c_in if qc >= 0 else c.end_value(False)
    c1 = c.end_value(True) if qc >= 0 else c_in
    r1 = inl.phi1 * inl.q1 - (pa * (inl.q1 - qc) + c0 * qc)
    r2 = inl.phi2 * inl.q2 + c1 * qc - pb * (inl.q2 + qc)
    return np.array([r1, r2])


def _flow(config: NetworkConfig, state: SimState, bvals) -> float:
    k = state.constants(config)
    t = state.tubes
    ra = k.r[0] * t[0].mean_mu(True, bvals[0])
    rb = k.r[1] * t[1].mean_mu(True, bvals[1])
    rc = k.r[2] * t[2].mean_mu(state.q_c >= 0, bvals[2])
    return (k.q1 * ra - k.q2 * rb) / (ra + rb + rc)


def _flows(k: _Constants, q_c):
    return k.q1 - q_c, k.q2 + q_c, q_c


def stable_dt(config: NetworkConfig, state: SimState, cfl: float) -> float:
    """Largest step allowed by ``cfl`` for the current speeds."""
    k = state.constants(config)
    speed = max(abs(q) / vi for q, vi in zip(_flows(k, state.q_c), k.v))
    return cfl * state.tubes[0].dx / speed


def init(config: NetworkConfig, sim: SimConfig) -> SimState:
    """Uniform equilibrium profiles, one of them perturbed."""
    st = sim.seed_state
    if st is None:
        raise ValueError("SimConfig.seed_state is required")
    n = int(sim.cells_per_vessel)
    visc = config.viscosity.relative
    tubes = [_Tube(n, phi, visc) for phi in (st.phi_a, st.phi_b, st.phi_c)]
    if sim.perturbation:
        tubes[VESSELS.index(sim.perturb_vessel)].scale(1.0 + sim.perturbation)
    state = SimState(tubes, float(st.q_c), 0.0, 0)
    state.q_c = _flow(config, state, _boundary_values(config, state))
    return state


def step(state: SimState, config: NetworkConfig, dt: float, cfl: float = 1.0) -> SimState:
    """Advance ``state`` in place by ``dt`` and return it."""
    k = state.constants(config)
    qa, qb, qc = _flows(k, state.q_c)
    if qa <= 0 or qb <= 0:
        raise StarvedVesselError("vessel " + ("A" if qa <= 0 else "B") + " starved", state.t)
    limit = stable_dt(config, state, cfl)
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3g} exceeds the CFL limit {limit:.3g}")
    b = _boundary_values(config, state)
    dx = state.tubes[0].dx
    for tube, q, vi, bi in zip(state.tubes, (qa, qb, qc), k.v, b):
        tube.move(abs(q) / vi * dt / dx, q >= 0, bi)
    state.t += dt
    state.steps += 1
    state.q_c = _flow(config, state, _boundary_values(config, state))
    return state


@dataclass
class SimResult:
    t: np.ndarray
    q_c: np.ndarray
    state: SimState
    mean_phi: np.ndarray | None = None

    def rows(self):
        if self.mean_phi is None:
            return np.column_stack([self.t, self.q_c])
        return np.column_stack([self.t, self.q_c, self.mean_phi])


def run(config: NetworkConfig, sim: SimConfig, record_phi: bool = False, state: SimState | None = None) -> SimResult:
    """Integrate to ``sim.t_end`` with the CFL step recomputed every step.

    The first sample is the initial state.  ``record_phi`` also stores the
    mean volume fraction of each vessel at every step.
    """
    state = init(config, sim) if state is None else state
    t_end = float(sim.t_end)
    est = int(t_end / stable_dt(config, state, sim.cfl) * 1.2) + 16
    ts = np.empty(est)
    qs = np.empty(est)
    phis = np.empty((est, 3)) if record_phi else None
    k = 0
    ts[0], qs[0] = state.t, state.q_c
    if record_phi:
        phis[0] = state.mean_fractions()
    while state.t < t_end:
        dt = min(stable_dt(config, state, sim.cfl), t_end - state.t)
        if dt <= 0:
            break
        step(state, config, dt)
        k += 1
        if k >= len(ts):
            ts = np.concatenate([ts, np.empty(len(ts))])
            qs = np.concatenate([qs, np.empty(len(qs))])
            if record_phi:
                phis = np.vstack([phis, np.empty_like(phis)])
        ts[k], qs[k] = state.t, state.q_c
        if record_phi:
            phis[k] = state.mean_fractions()
    return SimResult(ts[:k + 1].copy(), qs[:k + 1].copy(), state,
                     phis[:k + 1].copy() if record_phi else None)


# --------------------------------------------------------------------------
# analysis


@dataclass
class CycleStats:
    """Summary of a ``q_c(t)`` series after the transient.

    ``period`` and ``omega`` are NaN for fixed points; ``growth_rate`` and
    ``linear_omega`` come from the small-amplitude start of the series.
    """

    period: float
    omega: float
    amplitude_min: float
    amplitude_max: float
    growth_rate: float
    converged: bool
    mean: float = float("nan")
    linear_omega: float = float("nan")
    distortion: float = float("nan")
    fixed_point: bool = False
    crosses_zero: bool = False
    periods: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in asdict(self).items()}


def _upward_crossings(t, y):
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
    return t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])


def harmonic_distortion(t, y, period: float, harmonics: int = 10) -> float:
    """``sqrt(sum_{n>=2} A_n^2) / A_1`` from a least-squares harmonic fit."""
    if not (period > 0) or len(t) < 4 * harmonics:
        return float("nan")
    n_per = math.floor((t[-1] - t[0]) / period)
    if n_per < 1:
        return float("nan")
    m = t >= t[-1] - n_per * period
    tt, yy = t[m], y[m] - y[m].mean()
    w = 2 * math.pi / period
    cols = []
    for k in range(1, harmonics + 1):
        cols += [np.cos(k * w * tt), np.sin(k * w * tt)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), yy, rcond=None)
    amp = np.hypot(coef[0::2], coef[1::2])
    return float(np.sqrt(np.sum(amp[1:] ** 2)) / amp[0]) if amp[0] > 0 else float("nan")


def _linear_regime(t, q, baseline, saturation):
    """Growth rate and frequency while the deviation is below 10% of saturation."""
    dev = q - baseline
    absd = np.abs(dev)
    pk = np.nonzero((absd[1:-1] >= absd[:-2]) & (absd[1:-1] > absd[2:]))[0] + 1
    if saturation <= 0 or pk.size < 6:
        return float("nan"), float("nan")
    small = pk[absd[pk] < 0.1 * saturation]
    # contiguous run of small peaks from the start, minus the initial adjustment
    cut = np.nonzero(absd[pk] >= 0.1 * saturation)[0]
    if cut.size:
        small = pk[: cut[0]]
    if small.size < 8:
        return float("nan"), float("nan")
    small = small[small.size // 4:]
    tp, ap = t[small], absd[small]
    growth = float(np.polyfit(tp, np.log(ap), 1)[0])
    lo, hi = tp[0], tp[-1]
    m = (t >= lo) & (t <= hi)
    zc = _upward_crossings(t[m], dev[m])
    omega = 2 * math.pi / float(np.mean(np.diff(zc))) if zc.size > 2 else float("nan")
    return growth, omega


def analyze_cycle(t, q, transient_skip: float, baseline: float | None = None,
                  fixed_tol: float = 1e-9) -> CycleStats:
    """Period, amplitude and linear growth of a ``q_c`` series.

    The period is the mean spacing of upward crossings of the post-skip mean;
    the cycle counts as converged when the last three periods agree within
    1%.  ``baseline`` (default: the first sample, i.e. the seed equilibrium)
    is the reference for the small-amplitude growth fit.
    """
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    m = t >= transient_skip
    tt, qq = t[m], q[m]
    if tt.size < 8:
        raise ValueError("series too short after transient_skip")
    mean = float(qq.mean())
    qmin, qmax = float(qq.min()), float(qq.max())
    base = float(q[0]) if baseline is None else float(baseline)
    if qmax - qmin < fixed_tol:
        return CycleStats(float("nan"), float("nan"), qmin, qmax, float("nan"), True, mean,
                          fixed_point=True, crosses_zero=qmin < 0 < qmax)
    zc = _upward_crossings(tt, qq - mean)
    if zc.size < 3:
        return CycleStats(float("nan"), float("nan"), qmin, qmax, float("nan"), False, mean,
                          crosses_zero=qmin < 0 < qmax)
    periods = np.diff(zc)
    period = float(periods.mean())
    last = periods[-3:]
    converged = bool(last.size == 3 and last.max() / last.min() - 1 < 0.01)
    growth, lin_w = _linear_regime(t, q, base, 0.5 * (qmax - qmin))
    return CycleStats(
        period=period,
        omega=2 * math.pi / period,
        amplitude_min=qmin,
        amplitude_max=qmax,
        growth_rate=growth,
        converged=converged,
        mean=mean,
        linear_omega=lin_w,
        distortion=harmonic_distortion(tt, qq, period),
        crosses_zero=qmin < 0 < qmax,
        periods=int(periods.size),
    )


def seed_equilibrium(config: NetworkConfig, side: str = "auto") -> EquilibriumState:
    """Equilibrium to start from: ``pos`` (largest q_c), ``neg`` (smallest) or ``auto``.

    ``auto`` takes the unique equilibrium, or the negative one when several
    coexist.
    """
    eqs = solve_equilibria(config)
    if not eqs:
        raise NetworkError(f"no equilibrium at q1={config.q1}")
    if side == "pos":
        return eqs[-1]
    if side in ("neg", "auto"):
        return eqs[0]
    raise ValueError(f"unknown seed branch {side!r}")


def bistability_probe(config: NetworkConfig, sim: SimConfig, initial_side: str, settle_tol: float = 1e-6) -> str:
    """Run from the ``initial_side`` equilibrium and name the attractor.

    Returns one of ``OUTCOMES`` or ``unclassified`` when neither a fixed point
    nor a converged cycle is reached by ``t_end``.
    """
    st = seed_equilibrium(config, initial_side)
    res = run(config, SimConfig(**{**_fields(sim), "seed_state": st}))
    stats = analyze_cycle(res.t, res.q_c, sim.skip, fixed_tol=settle_tol)
    if stats.fixed_point:
        return "settled_positive" if stats.mean > 0 else "settled_negative"
    if stats.converged:
        if stats.crosses_zero:
            return "cycle_spanning"
        return "cycle_positive" if stats.mean > 0 else "cycle_negative"
    return "unclassified"


def _fields(sim: SimConfig) -> dict:
    return {f: getattr(sim, f) for f in sim.__dataclass_fields__}
