"""Compactification of the planar field to the sphere.

The planar field is multiplied by a rapidly decaying positive factor (which
keeps orbits as point sets, only reparametrizing time) and pushed through
inverse stereographic projection; the north pole becomes an added zero.
Computation survives as the time-delta map: below the threshold
delta0 = eps/(32 lam) the discrete orbit cannot skip a height band, so box
visits — and with them the verdicts — match the continuous flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .field import FieldSpec, field_eval_plane
from .machine import Configuration
from .simulate import HaltingSetSpec, IntegratorConfig, SimulationVerdict

NORTH = (0.0, 0.0, 1.0)
_POLE_TOL = 1e-12


def stereographic(x, y):
    """Plane to unit sphere; the north pole is the point at infinity."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    d = 1.0 + r2
    return np.stack([2.0 * x / d, 2.0 * y / d, (r2 - 1.0) / d], axis=-1)


def inverse_stereographic(p):
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z >= 1.0 - _POLE_TOL):
        raise ValueError("the north pole has no planar pre-image")
    return p[..., 0] / (1.0 - z), p[..., 1] / (1.0 - z)


def stereographic_push(x: float, y: float, vx: float, vy: float):
    """Differential of the plane-to-sphere map applied to (vx, vy)."""
    r2 = x * x + y * y
    d = 1.0 + r2
    dd_dx, dd_dy = 2.0 * x, 2.0 * y
    # d/dx of (2x/d, 2y/d, (r2-1)/d) etc.
    j = np.array([
        [2.0 / d - 2.0 * x * dd_dx / d**2, -2.0 * x * dd_dy / d**2],
        [-2.0 * y * dd_dx / d**2, 2.0 / d - 2.0 * y * dd_dy / d**2],
        [dd_dx / d - (r2 - 1.0) * dd_dx / d**2, dd_dy / d - (r2 - 1.0) * dd_dy / d**2],
    ])
    return j @ np.array([vx, vy])


@dataclass(frozen=True)
class DampingProfile:
    """Radial factor exp(1 - exp(sqrt(1 + r^2)/scale)) in (0, 1).

    Double-exponential decay in r makes every derivative of the damped
    field vanish at infinity; the scale keeps the factor of order one on
    the working window so the time reparametrization stays benign.
    """

    scale: float = 64.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.exp(1.0 - np.exp(np.sqrt(1.0 + x * x + y * y) / self.scale))


def damp_and_push(fs: FieldSpec, profile: DampingProfile | None = None):
    """Evaluator for the sphere field: 3-vector at a unit 3-vector point."""
    if profile is None:
        profile = DampingProfile()

    def sphere_field(p):
        p = np.asarray(p, dtype=float)
        if p[2] >= 1.0 - _POLE_TOL:
            return np.zeros(3)
        x, y = float(p[0] / (1.0 - p[2])), float(p[1] / (1.0 - p[2]))
        vx, vy = field_eval_plane(fs, x, y)
        if vx == 0.0 and vy == 0.0:
            return np.zeros(3)
        g = float(profile(x, y))
        return stereographic_push(x, y, g * vx, g * vy)

    return sphere_field


def delta_threshold(eps: float, lam: float) -> float:
    """Largest admissible sampling step of the time-delta map."""
    if eps <= 0 or lam <= 0:
        raise ValueError("eps and lam must be positive")
    return eps / (32.0 * lam)


@dataclass
class DiscreteOrbit:
    delta: float
    times: np.ndarray
    s_values: np.ndarray
    visited_heights: list
    band_gaps: list  # heights the orbit crossed without an iterate inside


def discrete_orbit_verdict(fs: FieldSpec, input_index: int,
                           constraint: HaltingSetSpec | None, delta: float,
                           cfg: IntegratorConfig | None = None,
                           profile: DampingProfile | None = None):
    """(verdict, hit, orbit) for the time-delta map of the damped field.

    The orbit through an on-curve start stays on the curve (damping is a
    positive scalar and the normal dynamics is contracting), so the iterates
    are computed by warping time: t(s) = integral ds/(lam * G) along the
    curve, inverted on a precomputed grid.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    if profile is None:
        profile = DampingProfile()
    d0 = delta_threshold(fs.eps, fs.lam)
    if delta >= d0:
        raise ValueError(f"delta = {delta} not below the threshold {d0}")
    curve = fs.curve(input_index)
    l_max = min(cfg.l_max, fs.l_max)
    s_end = float(curve.arc_heights[l_max]) + fs.eps
    grid = np.linspace(0.0, s_end, max(int(s_end * 400), 100) + 1)
    u = curve.param_of_arclength(grid)
    gx, gy = curve.point(u)
    damp = profile(gx, gy)
    t_of_s = cumulative_trapezoid(1.0 / (fs.lam * damp), grid, initial=0.0)
    n_total = int(t_of_s[-1] / delta) + 1
    times = np.arange(n_total, dtype=float) * delta
    s_vals = np.interp(times, t_of_s, grid)

    heights = curve.arc_heights
    q_halt = fs.machine.q_halt
    hit = False
    verdict = None
    visited = []
    gaps = []
    for l in range(1, l_max + 1):
        s_l = float(heights[l])
        inside = np.abs(s_vals - s_l) < fs.eps / 2.0
        if not np.any(inside):
            gaps.append(l)
            continue
        visited.append(l)
        c = curve.configs[l]
        if constraint is not None and constraint.matches(c):
            hit = True
        if verdict is None and c.q == q_halt:
            verdict = SimulationVerdict("HALTED", Configuration(c.q, c.r, c.s), l)
            break
    if verdict is None:
        verdict = SimulationVerdict("UNRESOLVED", budget=l_max)
    orbit = DiscreteOrbit(delta, times, s_vals, visited, gaps)
    return verdict, hit, orbit


# ---------------------------------------------------------------------------
# export


def orbit_rows(curve, orbit: DiscreteOrbit, stride: int = 1):
    """Rows (n, t, x3, y3, z3) of the iterates on the sphere."""
    rows = []
    for n in range(0, len(orbit.times), stride):
        u = float(curve.param_of_arclength(float(orbit.s_values[n])))
        x, y = curve.point(u)
        p = stereographic(float(x), float(y))
        rows.append((n, float(orbit.times[n]), float(p[0]), float(p[1]), float(p[2])))
    return rows


def shadow_rows(curve, orbit: DiscreteOrbit, stride: int = 1):
    """Rows (n, x, y) of the planar pre-images of the iterates."""
    rows = []
    for n in range(0, len(orbit.times), stride):
        u = float(curve.param_of_arclength(float(orbit.s_values[n])))
        x, y = curve.point(u)
        rows.append((n, float(x), float(y)))
    return rows
