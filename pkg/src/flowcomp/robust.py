"""Scheduled perturbations, contraction/Gronwall certificates, and the
nested-exponential resource estimator.

Perturbations are finite sums of compactly supported smooth bumps, one per
box, with amplitudes drawn below the error-schedule caps.  The amplitudes
live far below double precision, so they are carried as signed log
magnitudes; only the bump shape is evaluated in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, getcontext

import numpy as np
from scipy.integrate import solve_ivp

from .curves import CurveFamily, interval_bound_log
from .field import ErrorSchedule
from .logmag import FIX, LN2_FIX, LogMagnitude
from .machine import MachineSpec

LN2 = math.log(2.0)


def _bump01(t):
    """Smooth bump on (0, 1), peak value 1 at t = 1/2."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(1.0 - 0.25 / (ti * (1.0 - ti)))
    return out


@dataclass(frozen=True)
class _BoxBump:
    band: int
    height: int
    sign: int
    amplitude: LogMagnitude  # ln of the bump's peak magnitude
    direction: tuple  # unit vector


class PerturbationSpec:
    """Seeded sum of per-box bumps bounded by the schedule caps.

    Each box (i, l) contributes one bump supported on
    [2i + 1/4, 2i + 3/4] x [l + 1/4, l + 3/4], so the supports are pairwise
    disjoint and the sup over any box equals that box's own amplitude.
    """

    def __init__(self, schedule: ErrorSchedule, seed: int, zero: bool = False):
        self.schedule = schedule
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.bumps = {}
        for (i, l), _th in sorted(schedule.thresholds.items()):
            cap = schedule.cap(i, l)
            u = float(rng.uniform(1e-3, 1.0))
            sign = 1 if rng.uniform() < 0.5 else -1
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            if zero:
                sign = 0
            self.bumps[(i, l)] = _BoxBump(
                i, l, sign, cap + math.log(u), (math.cos(theta), math.sin(theta))
            )

    def _locate(self, x: float, y: float):
        i = int(math.floor(x / 2.0))
        fx = x - 2 * i
        fy = y - math.floor(y)
        if not (0.25 < fx < 0.75 and 0.25 < fy < 0.75):
            return None
        l = int(math.floor(y))
        bump = self.bumps.get((i, l))
        if bump is None or bump.sign == 0:
            return None
        shape = float(_bump01(2.0 * (fx - 0.25)) * _bump01(2.0 * (fy - 0.25)))
        if shape <= 0.0:
            return None
        return bump, shape

    def magnitude(self, x: float, y: float) -> LogMagnitude:
        """ln |P(x, y)|; zero magnitude outside every bump support."""
        hit = self._locate(x, y)
        if hit is None:
            return LogMagnitude.zero()
        bump, shape = hit
        return bump.amplitude + math.log(shape)

    def normal_component(self, x: float, y: float, nx: float, ny: float):
        """(sign, ln|P . n|) of the forcing along a unit normal."""
        hit = self._locate(x, y)
        if hit is None:
            return 0, LogMagnitude.zero()
        bump, shape = hit
        dot = bump.direction[0] * nx + bump.direction[1] * ny
        if dot == 0.0:
            return 0, LogMagnitude.zero()
        sign = bump.sign * (1 if dot > 0 else -1)
        return sign, bump.amplitude + math.log(shape * abs(dot))


def sample_perturbation(schedule: ErrorSchedule, seed: int) -> PerturbationSpec:
    return PerturbationSpec(schedule, seed)


def zero_perturbation(schedule: ErrorSchedule) -> PerturbationSpec:
    return PerturbationSpec(schedule, 0, zero=True)


# ---------------------------------------------------------------------------
# contraction certificate


def contraction_check(machine: MachineSpec, lam: float, band: int, height: int,
                      j: int, n_probes: int = 11, eps: float = 0.01,
                      profile=None) -> dict:
    """Certify one step of the interval contraction under the chart flow.

    Starts at arc length s^i_l with ln|rho(0)| = ln A_{i,l} - j ln2 and
    integrates ds/dt = lam/(1 - kappa(s) rho(t)) with the exact decay
    rho(t) = rho(0) e^{-t}.  At every probe time with |s - s^i_{l+1}| < eps
    the claim ln|rho(t)| < ln A_{i,l+1} - (j+1) ln2 is checked in exact log
    arithmetic.  Returns a report with the worst margin (positive = pass).
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    curve = CurveFamily(machine, band, height + 1, profile)
    m = machine.m
    w0 = interval_bound_log(m, band, height) - LogMagnitude(j * LN2_FIX, 0.0)
    bound = interval_bound_log(m, band, height + 1) - LogMagnitude((j + 1) * LN2_FIX, 0.0)
    s_lo = float(curve.arc_heights[height])
    s_hi = float(curve.arc_heights[height + 1])
    targets = s_hi + np.linspace(-0.9 * eps, 0.9 * eps, n_probes)
    ln_rho0 = w0.ln()  # astronomically negative; numerically rho = 0

    def rhs(t, y):
        kappa = float(curve.kappa_at_arclength(y[0]))
        ln_r = ln_rho0 - t
        r = math.exp(ln_r) if ln_r > -200.0 else 0.0
        return [lam / (1.0 - kappa * r)]

    probes = []
    worst = math.inf
    t, s = 0.0, s_lo
    for s_target in targets:
        ev = lambda tt, y: y[0] - s_target
        ev.terminal, ev.direction = True, 1.0
        sol = solve_ivp(rhs, (t, t + (s_target - s) * 2.5 / lam + 10.0), [s],
                        events=ev, rtol=1e-10, atol=1e-12, max_step=0.05 / lam)
        if not sol.t_events[0].size:
            raise RuntimeError("probe target not reached")
        t = float(sol.t_events[0][0])
        s = float(s_target)
        margin = bound.diff_ln(w0 - t)  # positive iff strictly inside
        worst = min(worst, margin)
        probes.append((s, t, margin))
    return {
        "ok": worst > 0.0,
        "worst_margin": worst,
        "probes": probes,
        "lam": lam,
        "band": band,
        "height": height,
        "j": j,
    }


def contraction_speed_limit(m: int, band: int, height: int, eps: float = 0.01) -> float:
    """Largest flow speed for which the one-step contraction can certify.

    The slowest admissible crossing takes time (gap - eps)/(16 lam) >=
    (1 - eps)/(16 lam); the required log drop is the interval-bound gap plus
    one halving.  Level gaps grow like 9*10^(i+l+1) ln15, so the admissible
    speed shrinks double-exponentially with i + l.
    """
    drop = 9 * 10 ** (band + height + 1) * math.log(15.0) + LN2
    return (1.0 - eps) / (16.0 * drop)


# ---------------------------------------------------------------------------
# Gronwall bound


def gronwall_radius(M: float, tau: float, eps_k) -> LogMagnitude:
    """Divergence bound (eps_K / M)(e^{M tau} - 1) in log form."""
    if M <= 0 or tau <= 0:
        raise ValueError("M and tau must be positive")
    if not isinstance(eps_k, LogMagnitude):
        if eps_k == 0.0:
            return LogMagnitude.zero()
        eps_k = LogMagnitude.from_ln(math.log(eps_k))
    if eps_k.is_zero:
        return LogMagnitude.zero()
    mt = M * tau
    ln_factor = (mt if mt > 50.0 else math.log(math.expm1(mt))) - math.log(M)
    return eps_k + ln_factor


# ---------------------------------------------------------------------------
# resource estimator


_MAX_NESTED = 13.0  # e^{C s_b} beyond this needs >10^5-digit fixed points


def _exp_fix(x: float) -> int:
    """e^x * 10^30 as an exact-enough integer, x possibly in the millions."""
    getcontext().prec = int(x / math.log(10.0)) + 50
    return int(Decimal(x).exp() * FIX)


@dataclass(frozen=True)
class ResourceEstimate:
    s_b: float
    C: float
    ln_eps: LogMagnitude  # ln of the robustness threshold C e^{-e^{e^{C s_b}}}
    ln_h1: LogMagnitude  # ln of the Sobolev-norm bound C e^{e^{e^{C s_b}}}
    inner: float  # e^{C s_b}

    def lnln_h1(self) -> float:
        """ln ln of the norm bound; exactly e^{C s_b} when C = 1."""
        return math.log(math.log(self.C) + math.exp(self.inner)) if self.inner < 700 \
            else self.inner  # ln(lnC + e^y) -> y for huge y


def resource_estimate(s_b: float, C: float = 1.0) -> ResourceEstimate:
    """Nested-exponential cost of simulating a space bound s_b.

    ln eps = ln C - e^{e^{C s_b}} and ln H1 = ln C + e^{e^{C s_b}}, kept in
    the fixed-point log representation so the doubly huge part is exact.
    """
    if s_b < 1 or C <= 0:
        raise ValueError("need s_b >= 1 and C > 0")
    x = C * s_b
    if x > _MAX_NESTED:
        raise OverflowError(
            f"C*s_b = {x} too large for the fixed-point representation"
        )
    inner = math.exp(x)
    fix = _exp_fix(inner)
    off = math.log(C)
    return ResourceEstimate(s_b, C, LogMagnitude(-fix, off), LogMagnitude(fix, off), inner)


def _ln_big(n: int) -> float:
    """ln of a positive integer too large for float conversion."""
    bl = n.bit_length()
    if bl <= 1000:
        return math.log(n)
    top = n >> (bl - 53)
    return math.log(top) + (bl - 53) * math.log(2.0)


def space_bound_of_norm(ln_h1: LogMagnitude, C: float = 1.0) -> float:
    """Inverse reading: the space bound a given norm budget affords.

    Solves ln H1 = ln C + e^{e^{C s_b}} for s_b, i.e. s_b is (doubly) the
    log-log of the norm budget.  For budgets whose log overflows a float,
    the ln C offset is negligible and the fixed-point part is used directly.
    """
    if ln_h1.fix > 10**15 * FIX:
        ln_y = _ln_big(ln_h1.fix) - math.log(FIX)
        return math.log(ln_y) / C
    y = ln_h1.ln() - math.log(C)
    if y <= 1.0:
        raise ValueError("norm budget too small")
    return math.log(math.log(y)) / C
