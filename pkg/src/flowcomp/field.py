"""Planar gradient field on the bands, its potential, and the error schedule.

In chart coordinates the field on band i is (Lambda/(1 - kappa(s) rho), -rho)
with potential Lambda*s - rho**2/2.  In the plane the field is the Cartesian
gradient of the same potential, multiplied by a smooth cutoff in |rho| so it
extends by zero outside the tubular neighborhoods.  The error schedule turns
the per-box interval bounds into admissible perturbation sup-norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import (
    CHART_HALF_WIDTH,
    BandChart,
    BumpProfile,
    ChartError,
    CurveFamily,
    bump_profile,
    interval_bound_log,
)
from .logmag import LogMagnitude, lm_min
from .machine import MachineSpec

LAMBDA0 = 1.0 / (320.0 * math.log(15.0) + 32.0 * math.log(2.0))
GAMMA0 = 4.0 * LAMBDA0 / 31.0

LN8 = 3.0 * math.log(2.0)


def _cutoff_piece(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff(t):
    """Smooth transition: 1 for t <= 1/2, 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = _cutoff_piece(1.0 - t)
    b = _cutoff_piece(2.0 * (t - 0.5))
    return a / (a + b + 1e-300)


class FieldSpec:
    """Per-machine planar field: lazy band charts plus the flow constants."""

    def __init__(self, machine: MachineSpec, n_bands: int, l_max: int,
                 lambda_frac: float = 0.5, eps: float = 0.01,
                 rho0: float = 1.0 / 32.0, profile: BumpProfile | None = None):
        if not 0.0 < lambda_frac < 1.0:
            raise ValueError("lambda_frac must be in (0, 1): the flow speed "
                             "must stay below the contraction ceiling")
        if n_bands < 1 or l_max < 1:
            raise ValueError("need at least one band and one height")
        self.machine = machine
        self.n_bands = n_bands
        self.l_max = l_max
        self.lam = lambda_frac * LAMBDA0
        self.eps = eps
        self.rho0 = rho0
        # the width on which the field is uniformly transverse to horizontal
        # lines scales with the flow speed: the normal part -rho*N can beat
        # the Lambda-sized tangential part on ramps once |rho| ~ Lambda
        self.transversality_width = min(rho0, self.lam / 4.0)
        self.profile = profile if profile is not None else bump_profile(eps)
        self._charts: dict[int, BandChart] = {}
        self.c0_measured: float | None = None

    def curve(self, band: int) -> CurveFamily:
        return self.chart(band).curve

    def chart(self, band: int) -> BandChart:
        if not 0 <= band < self.n_bands:
            raise ValueError(f"band {band} outside 0..{self.n_bands - 1}")
        if band not in self._charts:
            cf = CurveFamily(self.machine, band, self.l_max, self.profile)
            self._charts[band] = BandChart(cf, self.rho0)
        return self._charts[band]


def field_eval_chart(fs: FieldSpec, band: int, s: float, rho: float):
    if abs(rho) >= CHART_HALF_WIDTH:
        raise ChartError(f"|rho| = {abs(rho)} outside the chart")
    kappa = float(fs.curve(band).kappa_at_arclength(s))
    return fs.lam / (1.0 - kappa * rho), -rho


def potential_eval(fs: FieldSpec, band: int, s: float, rho: float) -> float:
    if abs(rho) >= CHART_HALF_WIDTH:
        raise ChartError(f"|rho| = {abs(rho)} outside the chart")
    return fs.lam * s - rho * rho / 2.0


def _locate(fs: FieldSpec, x: float, y: float):
    """(band, chart, s, rho) for an in-chart plane point, else None."""
    cands = {int(math.floor((x - CHART_HALF_WIDTH) / 2.0)),
             int(math.floor((x + CHART_HALF_WIDTH) / 2.0))}
    for i in sorted(cands):
        if not 0 <= i < fs.n_bands:
            continue
        ch = fs.chart(i)
        try:
            s, rho = ch.plane_to_chart(x, y)
        except ChartError:
            continue
        return i, ch, s, rho
    return None


def field_eval_plane(fs: FieldSpec, x: float, y: float) -> tuple[float, float]:
    hit = _locate(fs, x, y)
    if hit is None:
        return 0.0, 0.0
    i, ch, s, rho = hit
    chi = float(cutoff(abs(rho) / fs.rho0))
    if chi == 0.0:
        return 0.0, 0.0
    u = float(ch.curve.param_of_arclength(s))
    tangent, normal, kappa, _ = ch.curve.frame(u)
    a = fs.lam / (1.0 - kappa * rho)
    return (chi * (a * tangent[0] - rho * normal[0]),
            chi * (a * tangent[1] - rho * normal[1]))


def potential_plane(fs: FieldSpec, x: float, y: float) -> float:
    hit = _locate(fs, x, y)
    if hit is None:
        raise ChartError(f"({x}, {y}) outside every band chart")
    _, _, s, rho = hit
    return fs.lam * s - rho * rho / 2.0


def verify_gradient(fs: FieldSpec, samples: int, seed: int = 0, h: float = 1e-6):
    """Compare the plane field with finite differences of the potential.

    Samples points with |rho| <= rho0/2 where the cutoff is identically 1;
    reports the max relative gradient error and the max curl residual.
    """
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    max_curl = 0.0
    n = 0
    while n < samples:
        i = int(rng.integers(0, fs.n_bands))
        s = float(rng.uniform(0.0, fs.curve(i).arc_heights[-1]))
        rho = float(rng.uniform(-fs.rho0 / 2, fs.rho0 / 2))
        x, y = fs.chart(i).chart_to_plane(s, rho)
        fx = field_eval_plane(fs, x, y)
        gx = (potential_plane(fs, x + h, y) - potential_plane(fs, x - h, y)) / (2 * h)
        gy = (potential_plane(fs, x, y + h) - potential_plane(fs, x, y - h)) / (2 * h)
        scale = math.hypot(*fx)
        rel = math.hypot(fx[0] - gx, fx[1] - gy) / scale
        max_rel = max(max_rel, rel)
        cx = (field_eval_plane(fs, x + h, y)[1] - field_eval_plane(fs, x - h, y)[1]) / (2 * h)
        cy = (field_eval_plane(fs, x, y + h)[0] - field_eval_plane(fs, x, y - h)[0]) / (2 * h)
        max_curl = max(max_curl, abs(cx - cy))
        n += 1
    return {"samples": samples, "max_rel_error": max_rel, "max_curl": max_curl}


def measure_c0(fs: FieldSpec, samples: int = 1000, seed: int = 0) -> float:
    """Measured lower bound for X . e_y on the transversality band."""
    rng = np.random.default_rng(seed)
    w = fs.transversality_width
    c0 = math.inf
    for _ in range(samples):
        i = int(rng.integers(0, fs.n_bands))
        s = float(rng.uniform(0.0, fs.curve(i).arc_heights[-1]))
        rho = float(rng.uniform(-w, w))
        x, y = fs.chart(i).chart_to_plane(s, rho)
        c0 = min(c0, field_eval_plane(fs, x, y)[1])
    fs.c0_measured = c0
    return c0


def measure_box_derivative_bound(fs: FieldSpec, band: int = 0, height: int = 0,
                                 n: int = 25, h: float = 1e-5) -> float:
    """Max finite-difference Jacobian norm of the plane field over one box.

    Boxes K cover [2i, 2i+1] x [l - 1/4, l + 5/4]; the bound is uniform over
    boxes because every band/height window is the same picture up to the
    anchor values, so one representative box suffices.
    """
    xs = np.linspace(2 * band, 2 * band + 1, n)
    ys = np.linspace(height - 0.25, height + 1.25, n)
    best = 0.0
    for x in xs:
        for y in ys:
            fxp = field_eval_plane(fs, x + h, y)
            fxm = field_eval_plane(fs, x - h, y)
            fyp = field_eval_plane(fs, x, y + h)
            fym = field_eval_plane(fs, x, y - h)
            j = np.array([[(fxp[0] - fxm[0]), (fyp[0] - fym[0])],
                          [(fxp[1] - fxm[1]), (fyp[1] - fym[1])]]) / (2 * h)
            best = max(best, float(np.linalg.norm(j, 2)))
    return best


@dataclass(frozen=True)
class ErrorSchedule:
    """Admissible per-box perturbation thresholds, in log magnitude form."""

    eps: float
    eps0: float
    M: float  # uniform derivative bound over the boxes
    tau: float  # uniform crossing-time bound
    l_max: int
    thresholds: dict = field(repr=False)  # (band, height) -> LogMagnitude

    def threshold(self, band: int, height: int) -> LogMagnitude:
        return self.thresholds[(band, height)]

    def cap(self, band: int, height: int) -> LogMagnitude:
        """Amplitude cap eps0 * threshold for perturbation sampling."""
        return self.thresholds[(band, height)] + math.log(self.eps0)

    def envelope_check(self, C: float = 1.0) -> bool:
        """ln eps(r) <= ln C - e^{C r} with r the box's farthest corner radius."""
        for (i, l), th in self.thresholds.items():
            r = math.hypot(2 * i + 1, l + 1.25)
            bound = LogMagnitude.from_ln(math.log(C) - math.exp(C * r))
            if not th <= bound:
                return False
        return True

    def fit_envelope_constant(self) -> float:
        """Largest C on a coarse grid for which the envelope shape holds."""
        best = 0.0
        for c in np.linspace(0.05, 3.0, 60):
            if self.envelope_check(float(c)):
                best = float(c)
        return best


def error_schedule(fs: FieldSpec, l_max: int | None = None,
                   eps0: float = 0.1, M: float | None = None) -> ErrorSchedule:
    """Thresholds eps^i_l = (M/(e^{M tau} - 1)) * min(eps/2, A_{i,l+1}/8).

    M is the measured derivative bound (uniform across boxes) and tau the
    uniform crossing-time budget (max anchor gap + 1) / Gamma0.  M*tau is far
    above 1 here, so ln(e^{M tau} - 1) is M*tau to double precision.
    """
    if l_max is None:
        l_max = fs.l_max
    if l_max < 1:
        raise ValueError("height budget must be >= 1")
    if M is None:
        M = measure_box_derivative_bound(fs)
    max_gap = max(
        float(np.max(np.diff(fs.curve(i).arc_heights))) for i in range(fs.n_bands)
    )
    tau = (max_gap + 1.0) / GAMMA0
    mt = M * tau
    ln_prefactor = math.log(M) - (mt if mt > 50.0 else math.log(math.expm1(mt)))
    ln_eps_half = math.log(fs.eps / 2.0)
    m = fs.machine.m
    thresholds = {}
    for i in range(fs.n_bands):
        for l in range(l_max + 1):
            if i + l > l_max:
                continue
            branch = lm_min(LogMagnitude.from_ln(ln_eps_half),
                            interval_bound_log(m, i, l + 1) - LN8)
            thresholds[(i, l)] = branch + ln_prefactor
    return ErrorSchedule(fs.eps, eps0, M, tau, l_max, thresholds)
