"""Trajectory integration, crossing classification, and computation verdicts.

Integration happens in chart coordinates.  The normal coordinate rho decays
exactly like rho(0)e^{-t} plus a perturbation-forced part, and both live at
scales that underflow doubles, so rho is carried as a sign plus LogMagnitude
while only the tangential coordinate s is integrated numerically.  At each
arc-length anchor the crossing is classified against the encoded interval of
the corresponding machine configuration, entirely in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .curves import CHART_HALF_WIDTH
from .field import FieldSpec
from .logmag import LogMagnitude, signed_log_add
from .machine import Configuration, TapeBoundedSpec, encode

LN_CHART_LIMIT = math.log(CHART_HALF_WIDTH)
CLASSIFY_GUARD = 1e-9

# below this log-magnitude, rho has no effect on the s-equation at double
# precision (|kappa*rho| < 1e-85)
_RHO_FLOAT_FLOOR = -200.0


class ConfinementError(RuntimeError):
    """|rho| reached the chart boundary: the schedule was violated."""


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float | None = None  # default keeps each step under 0.05 in s
    crossing_tol: float = 1e-10
    l_max: int = 20
    window: float | None = None

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0 or self.crossing_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.l_max < 1:
            raise ValueError("height budget must be >= 1")


@dataclass(frozen=True)
class InsideBox:
    q: int
    r: int
    s: int


MISS = "Miss"


@dataclass(frozen=True)
class EventRecord:
    band: int
    height: int
    t: float
    s: float
    rho_sign: int
    rho_ln: LogMagnitude
    classification: object  # InsideBox or MISS


@dataclass
class ChartTrajectory:
    band: int
    events: list = field(default_factory=list)
    samples: list = field(default_factory=list)  # (t, s, rho_sign, ln|rho|)


@dataclass(frozen=True)
class SimulationVerdict:
    kind: str  # HALTED | LOOP | OOM | LEFT_WINDOW | UNRESOLVED
    config: Configuration | None = None
    height: int | None = None
    budget: int | None = None

    @property
    def halted(self) -> bool:
        return self.kind == "HALTED"


def format_verdict(v: SimulationVerdict) -> str:
    if v.kind == "HALTED":
        return f"HALTED {v.config.q} {v.config.r} {v.config.s} {v.height}"
    if v.kind == "UNRESOLVED":
        return f"UNRESOLVED {v.budget}"
    return v.kind


@dataclass(frozen=True)
class HaltingSetSpec:
    """Output constraint: halting state plus tape digits at positions -k..k."""

    q_halt: int
    digits: tuple  # ((pos, symbol), ...) covering positions -k..k
    k: int

    @classmethod
    def from_digits(cls, q_halt: int, digit_map: dict) -> "HaltingSetSpec":
        k = max((abs(p) for p in digit_map), default=0)
        digits = tuple(sorted((p, digit_map.get(p, 0)) for p in range(-k, k + 1)))
        return cls(q_halt, digits, k)

    def matches(self, c: Configuration) -> bool:
        if c.q != self.q_halt:
            return False
        return all(c.digit(p) == sym for p, sym in self.digits)


# ---------------------------------------------------------------------------
# chart integration


class _RhoState:
    """Signed log-magnitude normal coordinate."""

    __slots__ = ("sign", "w")

    def __init__(self, sign: int, w: LogMagnitude):
        self.sign = sign
        self.w = w

    @classmethod
    def from_float(cls, rho: float) -> "_RhoState":
        if rho == 0.0:
            return cls(0, LogMagnitude.zero())
        return cls(1 if rho > 0 else -1, LogMagnitude.from_ln(math.log(abs(rho))))

    def as_float(self, extra_decay: float = 0.0) -> float:
        if self.sign == 0:
            return 0.0
        ln = self.w.ln() - extra_decay
        if ln < _RHO_FLOAT_FLOOR:
            return 0.0
        return self.sign * math.exp(min(ln, 0.0))


def integrate_segment(fs: FieldSpec, band: int, s0: float, s_target: float,
                      t0: float, rho: _RhoState, perturbation, cfg: IntegratorConfig):
    """Advance from s0 to s_target; returns (t1, rho at t1, sample rows).

    The s-equation sees rho through the closed-form decay of its value at
    t0; the forced part of rho is far below double resolution and is
    accumulated separately in log space along the solver's own time grid.
    """
    curve = fs.curve(band)
    lam = fs.lam

    def rhs(t, y):
        kappa = float(curve.kappa_at_arclength(y[0]))
        r = rho.as_float(t - t0)
        return [lam / (1.0 - kappa * r)]

    def crossing(t, y):
        return y[0] - s_target

    crossing.terminal = True
    crossing.direction = 1.0

    max_step = cfg.max_step if cfg.max_step is not None else 0.05 / lam
    t_hi = t0 + (s_target - s0) * 2.5 / lam + 10.0
    sol = solve_ivp(rhs, (t0, t_hi), [s0], events=crossing, rtol=cfg.rtol,
                    atol=cfg.atol, max_step=max_step, dense_output=False)
    if not sol.t_events[0].size:
        raise RuntimeError(f"no crossing of s = {s_target} found (band {band})")
    t1 = float(sol.t_events[0][0])

    # exact decay of the carried magnitude
    new_sign, new_w = rho.sign, rho.w - (t1 - t0)

    if perturbation is not None:
        f_sign, f_w = 0, LogMagnitude.zero()
        ts = np.append(sol.t, t1)
        ss = np.append(sol.y[0], s_target)
        for a, b, sa, sb in zip(ts[:-1], ts[1:], ss[:-1], ss[1:]):
            tm, sm = 0.5 * (a + b), 0.5 * (sa + sb)
            u = float(curve.param_of_arclength(sm))
            x, y = curve.point(u)
            _, normal, _, _ = curve.frame(u)
            p_sign, p_w = perturbation.normal_component(
                float(x), float(y), normal[0], normal[1]
            )
            if p_sign == 0:
                continue
            # contribution to rho(t1): P_rho(tm) * e^{-(t1 - tm)} * dt
            contrib = p_w + (math.log(b - a) - (t1 - tm))
            f_sign, f_w = signed_log_add(f_sign, f_w, p_sign, contrib)
        new_sign, new_w = signed_log_add(new_sign, new_w, f_sign, f_w)

    out = _RhoState(new_sign, new_w)
    if out.sign != 0 and out.w >= LN_CHART_LIMIT:
        raise ConfinementError(
            f"|rho| reached the chart boundary on band {band} near s = {s_target}"
        )
    rows = [(float(t), float(s), rho.sign, rho.w.ln() - (float(t) - t0))
            for t, s in zip(sol.t, sol.y[0])]
    return t1, out, rows


def classify_crossing(fs: FieldSpec, band: int, height: int, rho: _RhoState):
    """InsideBox iff ln|rho| is below the encoded-interval half-width."""
    c = fs.curve(band).configs[height]
    if rho.sign == 0:
        return InsideBox(c.q, c.r, c.s)
    half = encode(c).ln_half_width()
    if rho.w.diff_ln(half) < -CLASSIFY_GUARD:
        return InsideBox(c.q, c.r, c.s)
    return MISS


def integrate_chart(fs: FieldSpec, band: int, start=(0.0, 0.0), perturbation=None,
                    cfg: IntegratorConfig | None = None, *,
                    stop=None) -> ChartTrajectory:
    """Run the chart flow from `start`, recording one event per height.

    `start` is (s0, rho0) with rho0 a float or a (sign, LogMagnitude) pair.
    `stop` is an optional callback(event) -> bool ending the run early.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    s0, rho0 = start
    rho = rho0 if isinstance(rho0, _RhoState) else _RhoState.from_float(rho0)
    if rho.sign != 0 and rho.w >= LN_CHART_LIMIT:
        raise ConfinementError("start outside the chart")
    curve = fs.curve(band)
    heights = curve.arc_heights
    l_max = min(cfg.l_max, fs.l_max)
    traj = ChartTrajectory(band)
    t = 0.0
    s = s0
    for l in range(1, l_max + 1):
        s_target = float(heights[l])
        if s_target <= s:
            continue
        t, rho, rows = integrate_segment(fs, band, s, s_target, t, rho,
                                         perturbation, cfg)
        s = s_target
        traj.samples.extend(rows)
        ev = EventRecord(band, l, t, s, rho.sign, rho.w,
                         classify_crossing(fs, band, l, rho))
        traj.events.append(ev)
        if stop is not None and stop(ev):
            break
    return traj


# ---------------------------------------------------------------------------
# verdict-level simulation


def simulate_input(fs: FieldSpec, input_index: int, constraint: HaltingSetSpec | None,
                   cfg: IntegratorConfig | None = None, perturbation=None,
                   start=(0.0, 0.0)):
    """Flow the trajectory of one enumerated input; returns (verdict, hit).

    The verdict is HALTED at the first crossing classified inside a halting
    box, else UNRESOLVED at the height budget.  The hit flag reports whether
    any visited box (heights >= 1) lies in the constrained halting family.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    q_halt = fs.machine.q_halt
    hit = False
    halt_ev = None

    def stop(ev):
        nonlocal hit, halt_ev
        if not isinstance(ev.classification, InsideBox):
            return False
        c = Configuration(ev.classification.q, ev.classification.r,
                          ev.classification.s)
        if constraint is not None and constraint.matches(c):
            hit = True
        if c.q == q_halt and halt_ev is None:
            halt_ev = (ev.height, c)
            # one extra crossing after halting never changes the outcome:
            # halting configurations are fixed by the transition
            return True
        return False

    traj = integrate_chart(fs, input_index, start, perturbation, cfg, stop=stop)
    if halt_ev is not None:
        height, c = halt_ev
        verdict = SimulationVerdict("HALTED", c, height)
    else:
        verdict = SimulationVerdict("UNRESOLVED", budget=cfg.l_max)
    return verdict, hit, traj


def simulate_bounded(fs: FieldSpec, bounded: TapeBoundedSpec, input_index: int,
                     cfg: IntegratorConfig, perturbation=None):
    """Three-case verdict for a tape-bounded machine read off the flow.

    Order of precedence at each crossing: a box whose configuration needs
    more tape than the bound gives OOM; a halting box gives HALTED; leaving
    the window before either gives LOOP (the trajectory escapes to infinity
    without ever reaching a distinguished box).
    """
    if cfg.window is None:
        raise ValueError("bounded simulation needs a window radius")
    if bounded.base is not fs.machine and bounded.base != fs.machine:
        raise ValueError("field and bounded machine disagree")
    q_halt = fs.machine.q_halt
    size_cap = bounded.tape_size
    outcome = None

    def stop(ev):
        nonlocal outcome
        if isinstance(ev.classification, InsideBox):
            c = Configuration(ev.classification.q, ev.classification.r,
                              ev.classification.s)
            if c.tape_size() > size_cap:
                outcome = SimulationVerdict("OOM", height=ev.height)
                return True
            if c.q == q_halt:
                outcome = SimulationVerdict("HALTED", c, ev.height)
                return True
        x_center = float(fs.curve(ev.band).x[ev.height])
        if math.hypot(x_center, ev.height) > cfg.window:
            outcome = SimulationVerdict("LOOP", height=ev.height)
            return True
        return False

    integrate_chart(fs, input_index, (0.0, 0.0), perturbation, cfg, stop=stop)
    if outcome is None:
        outcome = SimulationVerdict("UNRESOLVED", budget=cfg.l_max)
    return outcome


def ns_time_budget(lam: float, nu: float, t_max: float):
    """Smallest integer speed factor covering [0, t_max] after the time warp.

    Returns (M, warp) with warp(t) = M(1 - e^{-nu lam^2 t})/(nu lam^2), an
    increasing bijection of [0, inf) onto [0, M/(nu lam^2)) with the image
    interval strictly containing [0, t_max].
    """
    if lam <= 0 or nu <= 0 or t_max <= 0:
        raise ValueError("all arguments must be positive")
    denom = nu * lam * lam
    m = math.floor(denom * t_max) + 1
    if m / denom <= t_max:  # guard exact-equality edge
        m += 1

    def warp(t):
        return m * -np.expm1(-denom * np.asarray(t, dtype=float)) / denom

    return m, warp


# ---------------------------------------------------------------------------
# export row formats


def trajectory_rows(traj: ChartTrajectory, l_next_of=None):
    """Rows t,s,rho_sign,ln_abs_rho,band,l_next for the trajectory dump."""
    rows = []
    ev_heights = [(e.s, e.height) for e in traj.events]
    for t, s, sign, ln_rho in traj.samples:
        l_next = next((h for es, h in ev_heights if es >= s), -1)
        rows.append((t, s, sign, ln_rho, traj.band, l_next))
    return rows


def event_rows(traj: ChartTrajectory):
    """Rows band,l,classification,q,r,s,t for the event log."""
    rows = []
    for e in traj.events:
        if isinstance(e.classification, InsideBox):
            c = e.classification
            rows.append((e.band, e.height, "InsideBox", c.q, c.r, c.s, e.t))
        else:
            rows.append((e.band, e.height, "Miss", "", "", "", e.t))
    return rows
