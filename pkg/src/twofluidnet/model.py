"""Dimensionless description of the three-node two-fluid network.

The network has two flow-controlled inlets feeding a diverging node each.
Vessel A leaves inlet 1, vessel B leaves inlet 2 and vessel C connects the
two nodes; A and B merge at the outlet.  Positive ``q_c`` runs from the
inlet-1 node to the inlet-2 node.

Only ratios of the nominal resistances ``r_i ~ l_i / d_i**4`` and of the
vessel volumes ``V_i ~ d_i**2 l_i`` matter in dimensionless form, so the
geometry is stored as those ratios.  The common factor ``128 mu_alpha / pi``
of the dimensional resistance is carried symbolically and never needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

__all__ = [
    "NetworkError",
    "DomainError",
    "SingularityError",
    "ConfigError",
    "VesselGeometry",
    "NetworkGeometry",
    "InletConditions",
    "Arrhenius",
    "Microvascular",
    "Stratified",
    "NoSeparation",
    "NetworkConfig",
    "rel_viscosity",
    "dln_mu_dphi",
    "separation_f",
    "separation_fprime",
    "phi_A_fraction",
    "symmetry_swap",
    "check_fraction",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "example_config",
]

FRACTION_TOL = 1e-12


class NetworkError(Exception):
    """Base class for errors raised by this package."""


class DomainError(NetworkError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class SingularityError(NetworkError, ArithmeticError):
    """A model quantity diverges at the requested point."""


class ConfigError(NetworkError, ValueError):
    """A configuration document is malformed or violates invariants.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def check_fraction(phi, name="phi", lo=0.0, hi=1.0):
    """Validate ``phi`` against ``[lo, hi]``, clamping round-off excursions.

    Values within ``FRACTION_TOL`` of the interval are clipped onto it, anything
    further out raises :class:`DomainError`.  Scalars stay scalars.
    """
    if isinstance(phi, (float, int)):
        # scalar fast path; the simulator calls this every step
        if not (lo - FRACTION_TOL <= phi <= hi + FRACTION_TOL):
            raise DomainError(f"{name} outside [{lo}, {hi}]: {phi!r}")
        return float(min(max(phi, lo), hi))
    arr = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - FRACTION_TOL) or np.any(arr > hi + FRACTION_TOL):
        raise DomainError(f"{name} outside [{lo}, {hi}]: {phi!r}")
    out = np.clip(arr, lo, hi)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# geometry and inlets


@dataclass(frozen=True)
class VesselGeometry:
    """Diameter and length of one vessel (any consistent unit)."""

    diameter: float
    length: float

    def __post_init__(self):
        if not (self.diameter > 0 and math.isfinite(self.diameter)):
            raise DomainError(f"diameter must be positive, got {self.diameter}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise DomainError(f"length must be positive, got {self.length}")

    @property
    def nominal_resistance(self) -> float:
        # Poiseuille resistance without the 128 mu_alpha / pi prefactor
        return self.length / self.diameter**4

    @property
    def volume(self) -> float:
        return 0.25 * math.pi * self.diameter**2 * self.length


@dataclass(frozen=True)
class NetworkGeometry:
    """The four geometric ratios ``r_A/r_C``, ``r_B/r_C``, ``V_A/V_C``, ``V_B/V_C``."""

    ra_rc: float
    rb_rc: float
    va_vc: float
    vb_vc: float

    def __post_init__(self):
        for name in ("ra_rc", "rb_rc", "va_vc", "vb_vc"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and positive, got {v}")

    @classmethod
    def from_vessels(cls, a: VesselGeometry, b: VesselGeometry, c: VesselGeometry) -> "NetworkGeometry":
        rc, vc = c.nominal_resistance, c.volume
        return cls(
            ra_rc=a.nominal_resistance / rc,
            rb_rc=b.nominal_resistance / rc,
            va_vc=a.volume / vc,
            vb_vc=b.volume / vc,
        )

    @classmethod
    def from_dimensions(cls, diameters, lengths) -> "NetworkGeometry":
        """Build from ``(d_A, d_B, d_C)`` and ``(l_A, l_B, l_C)``."""
        vessels = [VesselGeometry(float(d), float(l)) for d, l in zip(diameters, lengths)]
        if len(vessels) != 3:
            raise DomainError("need exactly three diameters and three lengths")
        return cls.from_vessels(*vessels)

    @property
    def resistances(self) -> np.ndarray:
        """Nominal resistances ``(r_A, r_B, r_C)`` scaled so that ``r_C = 1``."""
        return np.array([self.ra_rc, self.rb_rc, 1.0])

    @property
    def volume_fractions(self) -> np.ndarray:
        """``V_i / V`` with ``V = V_A + V_B + V_C``."""
        v = np.array([self.va_vc, self.vb_vc, 1.0])
        return v / v.sum()

    @property
    def ra_rb(self) -> float:
        return self.ra_rc / self.rb_rc

    @property
    def va_vb(self) -> float:
        return self.va_vc / self.vb_vc

    def swapped(self) -> "NetworkGeometry":
        return NetworkGeometry(self.rb_rc, self.ra_rc, self.vb_vc, self.va_vc)


@dataclass(frozen=True)
class InletConditions:
    """Inlet-1 flow fraction ``q1`` (``q2 = 1 - q1``) and inlet volume fractions."""

    q1: float
    phi1: float
    phi2: float
    # exact q2 carried through a swap so that swapping twice is bit-exact
    q2_exact: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        check_fraction(self.q1, "q1")
        check_fraction(self.phi1, "phi1")
        check_fraction(self.phi2, "phi2")

    @property
    def q2(self) -> float:
        return 1.0 - self.q1 if self.q2_exact is None else self.q2_exact

    def swapped(self) -> "InletConditions":
        return InletConditions(self.q2, self.phi2, self.phi1, q2_exact=self.q1)


# --------------------------------------------------------------------------
# constitutive laws


@dataclass(frozen=True)
class Arrhenius:
    """Well-mixed Arrhenius viscosity ``mu_rel = contrast**phi``."""

    contrast: float

    def __post_init__(self):
        if not (self.contrast > 0 and math.isfinite(self.contrast)):
            raise DomainError(f"viscosity contrast must be positive, got {self.contrast}")

    @property
    def log_contrast(self) -> float:
        return math.log(self.contrast)

    def relative(self, phi):
        phi = check_fraction(phi)
        if isinstance(phi, float):
            return math.exp(self.log_contrast * phi)
        return np.exp(self.log_contrast * phi)

    def dlog(self, phi):
        """d ln(mu_rel) / d phi, constant for this law."""
        phi = check_fraction(phi)
        if np.ndim(phi):
            return np.full(np.shape(phi), self.log_contrast)
        return self.log_contrast

    def to_dict(self) -> dict:
        return {"type": "arrhenius", "contrast": self.contrast}


@dataclass(frozen=True)
class Microvascular:
    """Plasma-skimming fit ``f(x) = x**(p-1) / (x**p + (1-x)**p)``."""

    p: float = 2.0

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise DomainError(f"microvascular exponent must exceed 1, got {self.p}")

    def f(self, x):
        x = check_fraction(x, "x")
        p = self.p
        if isinstance(x, float):
            return x ** (p - 1) / (x**p + (1 - x) ** p)
        return np.power(x, p - 1) / (np.power(x, p) + np.power(1 - x, p))

    def fprime(self, x):
        x = check_fraction(x, "x")
        p = self.p
        xa = np.asarray(x, dtype=float)
        if p < 2 and np.any(xa == 0):
            raise SingularityError(f"f'(0) diverges for p={p} < 2")
        den = np.power(xa, p) + np.power(1 - xa, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            lead = (p - 1) * np.power(xa, p - 2) if p != 2 else np.ones_like(xa)
        num = lead * den - np.power(xa, p - 1) * p * (np.power(xa, p - 1) - np.power(1 - xa, p - 1))
        out = num / den**2
        return float(out) if out.ndim == 0 else out

    def x_fprime(self, x):
        """``x f'(x)``, finite on all of [0, 1] for every ``p > 1``."""
        x = check_fraction(x, "x")
        p = self.p
        xa = np.asarray(x, dtype=float)
        den = np.power(xa, p) + np.power(1 - xa, p)
        num = (p - 1) * np.power(xa, p - 1) * den - np.power(xa, p) * p * (
            np.power(xa, p - 1) - np.power(1 - xa, p - 1)
        )
        out = num / den**2
        return float(out) if out.ndim == 0 else out

    def through(self, x):
        """``(1 - x f(x)) / (1 - x)``, which for this law is ``f(1 - x)``."""
        return self.f(1.0 - check_fraction(x, "x"))

    def to_dict(self) -> dict:
        return {"type": "microvascular", "p": self.p}


@dataclass(frozen=True)
class Stratified:
    """Stratified laminar flow fit ``f(x) = 1 - gamma (1-x)**2``."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise DomainError(f"stratified gamma must lie in (0, 1], got {self.gamma}")

    def f(self, x):
        x = check_fraction(x, "x")
        return 1.0 - self.gamma * (1.0 - x) ** 2

    def fprime(self, x):
        x = check_fraction(x, "x")
        return 2.0 * self.gamma * (1.0 - x)

    def x_fprime(self, x):
        x = check_fraction(x, "x")
        return 2.0 * self.gamma * x * (1.0 - x)

    def through(self, x):
        """``(1 - x f(x)) / (1 - x)`` without the cancellation near ``x = 1``."""
        x = check_fraction(x, "x")
        return 1.0 + self.gamma * x * (1.0 - x)

    def to_dict(self) -> dict:
        return {"type": "stratified", "gamma": self.gamma}


@dataclass(frozen=True)
class NoSeparation:
    """Both daughter branches receive the parent volume fraction."""

    def f(self, x):
        x = check_fraction(x, "x")
        return np.ones(np.shape(x)) if np.ndim(x) else 1.0

    def fprime(self, x):
        x = check_fraction(x, "x")
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0

    def x_fprime(self, x):
        return self.fprime(x)

    def through(self, x):
        return self.f(x)

    def to_dict(self) -> dict:
        return {"type": "none"}


ViscosityLaw = Arrhenius
SeparationLaw = Union[Microvascular, Stratified, NoSeparation]


def rel_viscosity(law: Arrhenius, phi):
    return law.relative(phi)


def dln_mu_dphi(law: Arrhenius, phi):
    return law.dlog(phi)


def separation_f(law: SeparationLaw, x):
    return law.f(x)


def separation_fprime(law: SeparationLaw, x):
    return law.fprime(x)


def phi_A_fraction(law: SeparationLaw, x):
    """Normalised volume fraction ``Phi_A / Phi_1`` left in the through branch.

    Follows from constituent conservation at the diverging node.  Undefined at
    ``x = 1`` where vessel A receives no flow.
    """
    x = check_fraction(x, "x")
    if np.any(np.asarray(x) >= 1.0):
        raise SingularityError("vessel A is starved at x = 1")
    return law.through(x)


# --------------------------------------------------------------------------
# full configuration


@dataclass(frozen=True)
class NetworkConfig:
    geometry: NetworkGeometry
    inlets: InletConditions
    viscosity: Arrhenius
    separation: SeparationLaw = field(default_factory=NoSeparation)

    @property
    def q1(self) -> float:
        return self.inlets.q1

    @property
    def contrast(self) -> float:
        return self.viscosity.contrast

    def with_q1(self, q1: float) -> "NetworkConfig":
        return replace(self, inlets=replace(self.inlets, q1=float(q1), q2_exact=None))

    def with_contrast(self, contrast: float) -> "NetworkConfig":
        return replace(self, viscosity=Arrhenius(float(contrast)))

    def swapped(self) -> "NetworkConfig":
        return symmetry_swap(self)


def symmetry_swap(config: NetworkConfig) -> NetworkConfig:
    """Exchange inlets 1/2 and vessels A/B.

    The model is invariant under ``q_c -> -q_c``, ``q1 -> q2``,
    ``phi1 -> phi2``, ``A <-> B``: a state with flow ``q_c`` in ``config``
    is a state with flow ``-q_c`` in the returned configuration.  Applying
    the swap twice reproduces the original configuration exactly.
    """
    return replace(config, geometry=config.geometry.swapped(), inlets=config.inlets.swapped())


# --------------------------------------------------------------------------
# JSON documents

_GEOM_RAW = ("dA", "dB", "dC", "lA", "lB", "lC")
_GEOM_RATIO = ("rA_rC", "rB_rC", "VA_VC", "VB_VC")


def _number(doc, key, where, problems):
    if key not in doc:
        problems.append(f"{where}.{key}: missing")
        return None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}.{key}: expected a number, got {v!r}")
        return None
    if not math.isfinite(v):
        problems.append(f"{where}.{key}: not finite")
        return None
    return float(v)


def _section(doc, key, problems):
    sec = doc.get(key)
    if not isinstance(sec, Mapping):
        problems.append(f"{key}: missing or not an object")
        return None
    return sec


def config_from_dict(doc: Mapping[str, Any]) -> NetworkConfig:
    """Validate a config document and build a :class:`NetworkConfig`.

    Every violation is collected before raising :class:`ConfigError`.
    """
    problems: list[str] = []
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be an object")

    geometry = inlets = viscosity = separation = None

    g = _section(doc, "geometry", problems)
    if g is not None:
        if all(k in g for k in _GEOM_RATIO):
            vals = [_number(g, k, "geometry", problems) for k in _GEOM_RATIO]
            for k, v in zip(_GEOM_RATIO, vals):
                if v is not None and v <= 0:
                    problems.append(f"geometry.{k}: must be positive")
            if not problems:
                geometry = NetworkGeometry(*vals)
        else:
            vals = [_number(g, k, "geometry", problems) for k in _GEOM_RAW]
            for k, v in zip(_GEOM_RAW, vals):
                if v is not None and v <= 0:
                    problems.append(f"geometry.{k}: must be positive")
            if all(v is not None and v > 0 for v in vals):
                geometry = NetworkGeometry.from_dimensions(vals[:3], vals[3:])

    i = _section(doc, "inlets", problems)
    if i is not None:
        q1 = _number(i, "q1", "inlets", problems)
        phi1 = _number(i, "phi1", "inlets", problems)
        phi2 = _number(i, "phi2", "inlets", problems)
        ok = True
        for name, v in (("q1", q1), ("phi1", phi1), ("phi2", phi2)):
            if v is not None and not (-FRACTION_TOL <= v <= 1 + FRACTION_TOL):
                problems.append(f"inlets.{name}: must lie in [0, 1], got {v}")
                ok = False
        if ok and None not in (q1, phi1, phi2):
            inlets = InletConditions(q1, phi1, phi2)

    v = _section(doc, "viscosity", problems)
    if v is not None:
        kind = str(v.get("type", "arrhenius")).lower()
        if kind != "arrhenius":
            problems.append(f"viscosity.type: unsupported {kind!r}")
        contrast = _number(v, "contrast", "viscosity", problems)
        if contrast is not None:
            if contrast <= 0:
                problems.append("viscosity.contrast: must be positive")
            else:
                viscosity = Arrhenius(contrast)

    s = doc.get("separation", {"type": "none"})
    if not isinstance(s, Mapping):
        problems.append("separation: not an object")
    else:
        kind = str(s.get("type", "none")).lower()
        if kind == "microvascular":
            p = _number(s, "p", "separation", problems)
            if p is not None:
                if p <= 1:
                    problems.append("separation.p: must exceed 1")
                else:
                    separation = Microvascular(p)
        elif kind == "stratified":
            gamma = _number(s, "gamma", "separation", problems)
            if gamma is not None:
                if not 0 < gamma <= 1:
                    problems.append("separation.gamma: must lie in (0, 1]")
                else:
                    separation = Stratified(gamma)
        elif kind == "none":
            separation = NoSeparation()
        else:
            problems.append(f"separation.type: unsupported {kind!r}")

    if problems:
        raise ConfigError(problems)
    return NetworkConfig(geometry, inlets, viscosity, separation)


def config_to_dict(config: NetworkConfig) -> dict:
    g = config.geometry
    return {
        "geometry": {"rA_rC": g.ra_rc, "rB_rC": g.rb_rc, "VA_VC": g.va_vc, "VB_VC": g.vb_vc},
        "inlets": {"q1": config.q1, "phi1": config.inlets.phi1, "phi2": config.inlets.phi2},
        "viscosity": config.viscosity.to_dict(),
        "separation": config.separation.to_dict(),
    }


def load_config(path: Union[str, Path]) -> NetworkConfig:
    """Read a JSON config file.  Parse failures carry line/column information."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def example_config(which: int = 1, contrast: float = 50.0, q1: float = 0.5) -> NetworkConfig:
    """The two reference networks.

    1: microvascular separation (p = 2), symmetric A/B, phi1 = phi2 = 0.82.
    2: stratified separation (gamma = 1), d_B = 0.5, phi1 = phi2 = 0.8.
    """
    if which == 1:
        geom = NetworkGeometry.from_dimensions((1.0, 1.0, 2.5), (1.0, 1.0, 0.75))
        return NetworkConfig(geom, InletConditions(q1, 0.82, 0.82), Arrhenius(contrast), Microvascular(2.0))
    if which == 2:
        geom = NetworkGeometry.from_dimensions((1.0, 0.5, 2.5), (1.0, 1.0, 0.75))
        return NetworkConfig(geom, InletConditions(q1, 0.8, 0.8), Arrhenius(contrast), Stratified(1.0))
    raise ValueError(f"unknown example {which}")
