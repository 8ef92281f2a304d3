"""Problem data for the linear advection-diffusion equation

    omega dc/dt + div(u c - D grad c) = f   in Omega x (0, T),
    c = 0 on the boundary,  c(., 0) = c0,

posed on a rectangle split into two subdomains by a vertical line.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

Field = Callable[..., np.ndarray]


class ProblemError(ValueError):
    pass


def _as_diag(d) -> tuple[float, float]:
    if np.ndim(d) == 0:
        return float(d), float(d)
    dxx, dyy = d
    return float(dxx), float(dyy)


@dataclass(frozen=True)
class Subdomain:
    """Constant coefficients of one subdomain.

    ``diffusion`` is either a scalar ``d`` (isotropic) or ``(dxx, dyy)``.
    ``velocity`` is a constant vector or a callable ``u(x, y) -> (ux, uy)``.
    """

    omega: float = 1.0
    diffusion: float | tuple[float, float] = 1.0
    velocity: tuple[float, float] | Callable = (0.0, 0.0)

    def __post_init__(self):
        if not self.omega > 0:
            raise ProblemError(f"porosity must be positive, got {self.omega}")
        if min(_as_diag(self.diffusion)) <= 0:
            raise ProblemError(f"diffusion entries must be positive, got {self.diffusion}")

    @property
    def d_diag(self) -> tuple[float, float]:
        return _as_diag(self.diffusion)

    @property
    def isotropic(self) -> bool:
        dxx, dyy = self.d_diag
        return dxx == dyy

    @property
    def constant_velocity(self) -> bool:
        return not callable(self.velocity)

    def velocity_at(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if callable(self.velocity):
            ux, uy = self.velocity(x, y)
            return np.broadcast_to(ux, x.shape), np.broadcast_to(uy, x.shape)
        ux, uy = self.velocity
        return np.full(x.shape, float(ux)), np.full(x.shape, float(uy))


@dataclass(frozen=True)
class ExactSolution:
    """Analytic concentration and its gradient; the flux is derived from them."""

    c: Field
    grad: Field

    def phi(self, sub: Subdomain, x, y, t) -> tuple[np.ndarray, np.ndarray]:
        """Total flux ``-D grad c + u c`` with the coefficients of ``sub``."""
        gx, gy = self.grad(x, y, t)
        cv = self.c(x, y, t)
        dxx, dyy = sub.d_diag
        ux, uy = sub.velocity_at(x, y)
        return -dxx * gx + ux * cv, -dyy * gy + uy * cv


def _zero_source(x, y, t):
    return np.zeros(np.broadcast(x, y).shape)


def _zero_initial(x, y):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class ProblemSpec:
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    T: float = 1.0
    interface_x: float = 0.5
    sub1: Subdomain = field(default_factory=Subdomain)
    sub2: Subdomain = field(default_factory=Subdomain)
    source: Field = _zero_source
    initial: Field = _zero_initial
    exact: ExactSolution | None = None
    name: str = "custom"
    regime: str | None = None
    homogeneous: bool = False

    def __post_init__(self):
        xa, xb, yc, yd = self.domain
        if not (xa < xb and yc < yd):
            raise ProblemError(f"degenerate domain {self.domain}")
        if not xa < self.interface_x < xb:
            raise ProblemError(f"interface x={self.interface_x} outside ({xa}, {xb})")
        if not self.T > 0:
            raise ProblemError(f"final time must be positive, got {self.T}")

    def subdomain(self, index: int) -> Subdomain:
        if index not in (1, 2):
            raise ProblemError(f"subdomain index must be 1 or 2, got {index}")
        return self.sub1 if index == 1 else self.sub2

    @property
    def size(self) -> float:
        xa, xb, yc, yd = self.domain
        return max(xb - xa, yd - yc)

    def error_equation(self) -> "ProblemSpec":
        """Same coefficients with ``f = 0`` and ``c0 = 0``."""
        return replace(self, source=_zero_source, initial=_zero_initial, exact=None,
                       homogeneous=True)


def peclet_number(spec: ProblemSpec, subdomain_index: int) -> float:
    """Global Peclet number ``H |u_i| / d_i`` of a subdomain."""
    sub = spec.subdomain(subdomain_index)
    if not sub.isotropic:
        raise ProblemError("Peclet number needs an isotropic diffusion tensor")
    if not sub.constant_velocity:
        raise ProblemError("Peclet number needs a constant velocity")
    d = sub.d_diag[0]
    return spec.size * float(np.hypot(*sub.velocity)) / d


def testcase1_spec(T: float = 0.1) -> ProblemSpec:
    """Constant coefficients with ``c = exp(-4t) sin(pi x) sin(pi y)``."""
    omega, d, (ux, uy) = 1.0, 1.0, (1.0, 1.0)
    pi = np.pi

    def c(x, y, t):
        return np.exp(-4.0 * t) * np.sin(pi * x) * np.sin(pi * y)

    def grad(x, y, t):
        e = np.exp(-4.0 * t) * pi
        return e * np.cos(pi * x) * np.sin(pi * y), e * np.sin(pi * x) * np.cos(pi * y)

    def source(x, y, t):
        # omega c_t + u . grad c - d lap c, with c_t = -4c and lap c = -2 pi^2 c
        gx, gy = grad(x, y, t)
        return (2.0 * pi**2 * d - 4.0 * omega) * c(x, y, t) + ux * gx + uy * gy

    def initial(x, y):
        return c(x, y, 0.0)

    sub = Subdomain(omega=omega, diffusion=d, velocity=(ux, uy))
    return ProblemSpec(
        domain=(0.0, 1.0, 0.0, 1.0), T=T, interface_x=0.5, sub1=sub, sub2=sub,
        source=source, initial=initial, exact=ExactSolution(c, grad), name="testcase1",
    )


TESTCASE2_REGIMES = {
    "a": ((1.0, (-0.02, -0.5)), (0.1, (-0.02, -0.05))),
    "b": ((0.01, (-0.02, -0.5)), (0.1, (-0.02, -0.05))),
    "c": ((0.02, (0.5, 1.0)), (0.002, (0.5, 0.1))),
}
REGIME_ALIASES = {"diffusion": "a", "mixed": "b", "advection": "c"}


def _bump(x, y):
    return np.exp(-100.0 * ((x - 0.2) ** 2 + (y - 0.2) ** 2))


def testcase2_spec(regime: str = "c", T: float = 1.0, homogeneous: bool = False) -> ProblemSpec:
    """Discontinuous coefficients; ``regime`` is a/b/c (diffusion/mixed/advection).

    With ``homogeneous=True`` the source and initial data vanish (error equation).
    """
    key = REGIME_ALIASES.get(regime, regime)
    if key not in TESTCASE2_REGIMES:
        raise ProblemError(f"unknown regime {regime!r}")
    (d1, u1), (d2, u2) = TESTCASE2_REGIMES[key]

    def source(x, y, t):
        return _bump(x, y) + 0.0 * t

    def initial(x, y):
        return x * y * (1.0 - x) * (1.0 - y) * _bump(x, y)

    spec = ProblemSpec(
        domain=(0.0, 1.0, 0.0, 1.0), T=T, interface_x=0.5,
        sub1=Subdomain(1.0, d1, u1), sub2=Subdomain(1.0, d2, u2),
        source=source, initial=initial, name="testcase2", regime=key,
    )
    return spec.error_equation() if homogeneous else spec


# -- configuration files -----------------------------------------------------

def _sub_to_dict(sub: Subdomain) -> dict:
    if not sub.constant_velocity:
        raise ProblemError("only constant velocities can be serialized")
    d = sub.diffusion if np.ndim(sub.diffusion) == 0 else list(sub.diffusion)
    return {"omega": float(sub.omega), "d": d, "u": [float(v) for v in sub.velocity]}


def spec_to_config(spec: ProblemSpec) -> dict:
    out = {
        "testcase": spec.name,
        "domain": [float(v) for v in spec.domain],
        "T": float(spec.T),
        "interface_x": float(spec.interface_x),
        "subdomain1": _sub_to_dict(spec.sub1),
        "subdomain2": _sub_to_dict(spec.sub2),
        "homogeneous": bool(spec.homogeneous),
    }
    if spec.regime is not None:
        out["regime"] = spec.regime
    return out


def spec_from_config(cfg: dict) -> ProblemSpec:
    """Build a spec from the ``problem`` section of a configuration.

    The ``testcase`` selector supplies source, initial data and exact
    solution; explicit keys override the coefficients and geometry.
    """
    name = cfg.get("testcase", "testcase1")
    T = float(cfg.get("T", 0.1 if name == "testcase1" else 1.0))
    if name == "testcase1":
        spec = testcase1_spec(T=T)
    elif name == "testcase2":
        spec = testcase2_spec(cfg.get("regime", "c"), T=T)
    elif name == "custom":
        spec = ProblemSpec(T=T, name="custom")
    else:
        raise ProblemError(f"unknown testcase {name!r}")

    changes = {}
    if "domain" in cfg:
        changes["domain"] = tuple(float(v) for v in cfg["domain"])
    if "interface_x" in cfg:
        changes["interface_x"] = float(cfg["interface_x"])
    for key, attr in (("subdomain1", "sub1"), ("subdomain2", "sub2")):
        if key in cfg:
            s = cfg[key]
            old = getattr(spec, attr)
            d = s.get("d", old.diffusion)
            changes[attr] = Subdomain(
                omega=float(s.get("omega", old.omega)),
                diffusion=float(d) if np.ndim(d) == 0 else tuple(float(v) for v in d),
                velocity=tuple(float(v) for v in s.get("u", old.velocity)),
            )
    if changes:
        if spec.exact is not None and any(k in changes for k in ("sub1", "sub2")):
            changes["exact"] = None  # manufactured solution no longer matches
        spec = replace(spec, **changes)
    if cfg.get("homogeneous", False):
        spec = spec.error_equation()
    return spec


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ProblemError(f"{path}: configuration must be a mapping")
    return cfg


def save_config(cfg: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=False))
