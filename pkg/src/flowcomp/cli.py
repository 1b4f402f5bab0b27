"""Command-line driver: compile a machine into a planar field, run and
verify flow trajectories, sweep perturbations, lift to 3D, compactify to
the sphere, and print resource estimates.

Every run writes a flat `key = value` manifest that fully determines the
artifacts; identical manifests produce byte-identical text output.  Exit
codes: 0 on success, 1 when a verification fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import __version__
from .beltrami import beltrami_from_potential, fit_window_polynomial, residuals, series_rows
from .field import FieldSpec, error_schedule
from .machine import (
    UNRESOLVED,
    Halted,
    MachineError,
    enumerate_inputs,
    load_machine,
    run,
)
from .robust import resource_estimate, sample_perturbation
from .simulate import (
    HaltingSetSpec,
    IntegratorConfig,
    event_rows,
    format_verdict,
    simulate_input,
    trajectory_rows,
)
from .sphere import delta_threshold, discrete_orbit_verdict

ENV_PREFIX = "FLOWCOMP_"

DEFAULTS = {
    "inputs": 3,
    "lmax": 8,
    "window": None,
    "seed": 0,
    "eps0": 0.1,
    "lambda_frac": 0.5,
    "out": "out",
    "trials": 5,
    "degree": 3,
    "sb": 2.0,
    "C": 1.0,
}


# ---------------------------------------------------------------------------
# configuration resolution: flag > environment > config file > default


def read_config(path: str) -> dict:
    """Flat `key = value` file; blank lines and `#` comments ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, value):
    if value is None or key not in DEFAULTS:
        return value
    template = DEFAULTS[key]
    if key == "window" and str(value).lower() in ("", "none"):
        return None
    if isinstance(template, int) and not isinstance(template, bool):
        return int(value)
    if isinstance(template, float) or key == "window":
        return float(value)
    return str(value)


def resolve(args: argparse.Namespace) -> dict:
    """Merge flag/env/config/default values into one settings dict."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    settings = {}
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = os.environ.get(ENV_PREFIX + key.upper())
        if value is None:
            value = config.get(key)
        if value is None:
            value = default
        settings[key] = _coerce(key, value)
    settings["machine"] = (
        getattr(args, "machine", None)
        or os.environ.get(ENV_PREFIX + "MACHINE")
        or config.get("machine")
    )
    return settings


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, written as flat key = value."""

    subcommand: str
    machine_name: str
    machine_digest: str
    constants: dict = dc_field(default_factory=dict)
    tolerances: dict = dc_field(default_factory=dict)
    seeds: dict = dc_field(default_factory=dict)
    budgets: dict = dc_field(default_factory=dict)
    artifacts: list = dc_field(default_factory=list)

    def lines(self):
        rows = [
            ("subcommand", self.subcommand),
            ("version", __version__),
            ("machine.name", self.machine_name),
            ("machine.digest", self.machine_digest),
        ]
        for group, d in (("constant", self.constants), ("tolerance", self.tolerances),
                         ("seed", self.seeds), ("budget", self.budgets)):
            rows.extend((f"{group}.{k}", v) for k, v in sorted(d.items()))
        rows.extend(("artifact", a) for a in self.artifacts)
        return [f"{k} = {_fmt(v)}" for k, v in rows]

    def write(self, outdir: Path):
        path = outdir / "manifest.txt"
        path.write_text("\n".join(self.lines()) + "\n")
        return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def base_manifest(sub: str, settings: dict) -> RunManifest:
    fs_lam = settings["lambda_frac"]
    from .field import LAMBDA0

    man = RunManifest(
        sub,
        Path(settings["machine"]).stem,
        _digest(settings["machine"]),
        constants={
            "lambda": fs_lam * LAMBDA0,
            "lambda_frac": fs_lam,
            "eps": 0.01,
            "rho0": 1.0 / 32.0,
            "eps0": settings["eps0"],
            "C": settings["C"],
        },
        tolerances={"rtol": 1e-10, "atol": 1e-12, "crossing_tol": 1e-10},
        seeds={"base": settings["seed"]},
        budgets={
            "inputs": settings["inputs"],
            "l_max": settings["lmax"],
            "window": settings["window"] if settings["window"] is not None else "none",
            "trials": settings["trials"],
            "degree": settings["degree"],
            "series_order": 20,
        },
    )
    return man


# ---------------------------------------------------------------------------
# artifact writers


def write_csv(path: Path, header, rows):
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def svg_trajectory(path: Path, curve, traj, l_max: int):
    """Self-contained vector plot: trajectory path over interval boxes.

    The encoded intervals are far below visual width, so boxes are drawn
    at a fixed minimum size centered on the exact anchors.
    """
    band = curve.band
    x0, x1 = 2 * band - 0.6, 2 * band + 1.6
    y0, y1 = -0.6, l_max + 0.6
    W, H = 440, 40 * (l_max + 2)
    sx = lambda x: (x - x0) / (x1 - x0) * W
    sy = lambda y: H - (y - y0) / (y1 - y0) * H
    f = lambda v: f"{v:.3f}"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
    ]
    for l in range(min(l_max, len(curve.x) - 1) + 1):
        cx, cy = float(curve.x[l]), float(l)
        half = max(math.exp(min(curve.points[l].ln_half_width().ln(), 0.0)), 0.02)
        parts.append(
            f'<rect x="{f(sx(cx - half))}" y="{f(sy(cy) - 4)}" '
            f'width="{f(sx(cx + half) - sx(cx - half))}" height="8" '
            'fill="none" stroke="#cc3333" stroke-width="1"/>'
        )
    pts = []
    if traj is not None and traj.samples:
        for _, s, _, _ in traj.samples:
            u = float(curve.param_of_arclength(float(s)))
            px, py = curve.point(u)
            pts.append(f"{f(sx(float(px)))},{f(sy(float(py)))}")
    if len(pts) >= 2:
        parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" '
            'stroke="#3355cc" stroke-width="1.5"/>'
        )
    spx, spy = curve.point(0.0)
    parts.append(
        f'<circle cx="{f(sx(float(spx)))}" cy="{f(sy(float(spy)))}" r="3" '
        'fill="#3355cc"/>'
    )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _build(settings: dict):
    machine = load_machine(settings["machine"])
    fs = FieldSpec(machine, n_bands=max(settings["inputs"], 1),
                   l_max=settings["lmax"] + 1,
                   lambda_frac=settings["lambda_frac"])
    cfg = IntegratorConfig(l_max=settings["lmax"], window=settings["window"])
    return machine, fs, cfg


def cmd_compile(settings, outdir, man):
    from .curves import curve_records
    from .field import field_eval_plane

    _, fs, _ = _build(settings)
    for band in range(fs.n_bands):
        curve = fs.curve(band)
        path = outdir / f"curve_{band}.csv"
        write_csv(path, ["s", "x", "y", "kappa"],
                  [tuple(f"{v:.12g}" for v in r) for r in curve_records(curve, 0.05)])
        man.artifacts.append(path.name)
        svg = outdir / f"curve_{band}.svg"
        svg_trajectory(svg, curve, None, settings["lmax"])
        man.artifacts.append(svg.name)
    grid = outdir / "field_grid.csv"
    rows = []
    step = 0.25
    ny = int((settings["lmax"] + 2) / step)
    nx = int((2 * fs.n_bands + 1) / step)
    for iy in range(ny + 1):
        y = -1.0 + iy * step
        for ix in range(nx + 1):
            x = -0.5 + ix * step
            vx, vy = field_eval_plane(fs, x, y)
            rows.append((f"{x:.4f}", f"{y:.4f}", f"{vx:.12g}", f"{vy:.12g}"))
    write_csv(grid, ["x", "y", "vx", "vy"], rows)
    man.artifacts.append(grid.name)
    return 0


def cmd_simulate(settings, outdir, man):
    _, fs, cfg = _build(settings)
    verdicts = []
    unresolved = False
    for idx in range(settings["inputs"]):
        verdict, _, traj = simulate_input(fs, idx, None, cfg)
        unresolved |= verdict.kind == "UNRESOLVED"
        verdicts.append((idx, format_verdict(verdict)))
        tpath = outdir / f"trajectory_{idx}.csv"
        write_csv(tpath, ["t", "s", "rho_sign", "ln_abs_rho", "band", "l_next"],
                  [(f"{t:.12g}", f"{s:.12g}", sign, f"{lr:.12g}", b, ln)
                   for t, s, sign, lr, b, ln in trajectory_rows(traj)])
        epath = outdir / f"events_{idx}.csv"
        write_csv(epath, ["band", "l", "class", "q", "r", "s", "t"],
                  [r[:6] + (f"{r[6]:.12g}",) for r in event_rows(traj)])
        spath = outdir / f"trajectory_{idx}.svg"
        svg_trajectory(spath, fs.curve(idx), traj, settings["lmax"])
        man.artifacts.extend([tpath.name, epath.name, spath.name])
    vpath = outdir / "verdicts.csv"
    write_csv(vpath, ["input", "verdict"], verdicts)
    man.artifacts.append(vpath.name)
    return 1 if (unresolved and settings.get("fail_on_unresolved")) else 0


def _oracle_verdict(machine, config, lmax):
    result = run(machine, config, lmax)
    if isinstance(result, Halted):
        return f"HALTED {result.config.q} {result.config.r} {result.config.s} {result.steps}"
    return f"UNRESOLVED {lmax}"


def cmd_verify(settings, outdir, man):
    machine, fs, cfg = _build(settings)
    rows = []
    ok = True
    for idx, config, _ in enumerate_inputs(machine, settings["inputs"]):
        verdict, _, _ = simulate_input(fs, idx, None, cfg)
        flow = format_verdict(verdict)
        oracle = _oracle_verdict(machine, config, settings["lmax"])
        agree = flow == oracle
        ok &= agree
        rows.append((idx, oracle, flow, "agree" if agree else "DISAGREE"))
    path = outdir / "verify.csv"
    write_csv(path, ["input", "oracle", "flow", "status"], rows)
    man.artifacts.append(path.name)
    return 0 if ok else 1


def cmd_perturb(settings, outdir, man):
    _, fs, cfg = _build(settings)
    schedule = error_schedule(fs)
    rows = []
    ok = True
    for idx in range(settings["inputs"]):
        base, _, _ = simulate_input(fs, idx, None, cfg)
        baseline = format_verdict(base)
        for trial in range(settings["trials"]):
            seed = settings["seed"] + 1000 * idx + trial
            pert = sample_perturbation(schedule, seed)
            verdict, _, _ = simulate_input(fs, idx, None, cfg, perturbation=pert)
            got = format_verdict(verdict)
            agree = got == baseline
            ok &= agree
            rows.append((idx, seed, baseline, got, "agree" if agree else "DISAGREE"))
    path = outdir / "perturb.csv"
    write_csv(path, ["input", "seed", "baseline", "perturbed", "status"], rows)
    man.artifacts.append(path.name)
    return 0 if ok else 1


def cmd_extend3d(settings, outdir, man):
    _, fs, _ = _build(settings)
    window = (0.0, 1.0, 0.0, float(min(settings["lmax"], 2)))
    report = fit_window_polynomial(fs, window, settings["degree"])
    F = report["F"]
    v, u = beltrami_from_potential(F, 1, K=20)
    res = residuals(u, v, F, 1)
    lines = [
        f"window = {window}",
        f"degree = {settings['degree']}",
        f"sup_value_error = {report['sup_value_error']:.6g}",
        f"l2_value_error = {report['l2_value_error']:.6g}",
        f"sup_gradient_error = {report['sup_gradient_error']:.6g}",
        f"ln_threshold = {report['ln_threshold']:.6g}",
        f"fit_status = {report['status']}",
        f"series_order = {u.K}",
        f"curl_residual_order = {res['curl_residual_order']}",
        f"div_residual_order = {res['div_residual_order']}",
        f"plane_restriction_ok = {res['plane_restriction_ok']}",
        f"checked_through = {res['checked_through']}",
    ]
    rpath = outdir / "extend3d.txt"
    rpath.write_text("\n".join(lines) + "\n")
    spath = outdir / "series.csv"
    write_csv(spath, ["k", "component", "i", "j", "numerator", "denominator"],
              series_rows(u))
    man.artifacts.extend([rpath.name, spath.name])
    lift_ok = (res["curl_residual_order"] is None
               and res["div_residual_order"] is None
               and res["plane_restriction_ok"])
    return 0 if lift_ok else 1


def cmd_sphere(settings, outdir, man):
    _, fs, cfg = _build(settings)
    delta = delta_threshold(fs.eps, fs.lam) / 2.0
    rows = []
    ok = True
    for idx in range(settings["inputs"]):
        cont, _, _ = simulate_input(fs, idx, None, cfg)
        disc, _, orbit = discrete_orbit_verdict(fs, idx, None, delta, cfg)
        agree = format_verdict(cont) == format_verdict(disc) and not orbit.band_gaps
        ok &= agree
        rows.append((idx, f"{delta:.12g}", format_verdict(cont), format_verdict(disc),
                     len(orbit.times), len(orbit.band_gaps),
                     "agree" if agree else "DISAGREE"))
    path = outdir / "sphere.csv"
    write_csv(path, ["input", "delta", "continuous", "discrete",
                     "iterates", "band_gaps", "status"], rows)
    man.artifacts.append(path.name)
    return 0 if ok else 1


def cmd_estimate(settings, outdir, man):
    est = resource_estimate(settings["sb"], settings["C"])
    lines = [
        f"space_bound = {est.s_b}",
        f"C = {est.C}",
        f"inner_exponent = {est.inner:.12g}",
        f"lnln_norm_bound = {est.lnln_h1():.12g}",
        f"ln_threshold_offset = {est.ln_eps.off:.12g}",
        f"ln_threshold_fixed_digits = {len(str(abs(est.ln_eps.fix)))}",
        f"ln_norm_bound_fixed_digits = {len(str(est.ln_h1.fix))}",
    ]
    text = "\n".join(lines)
    path = outdir / "estimate.txt"
    path.write_text(text + "\n")
    man.artifacts.append(path.name)
    print(text)
    return 0


COMMANDS = {
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "perturb": cmd_perturb,
    "extend3d": cmd_extend3d,
    "sphere": cmd_sphere,
    "estimate": cmd_estimate,
}

NEEDS_MACHINE = {"compile", "simulate", "verify", "perturb", "extend3d", "sphere"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcomp",
        description="Compile Turing machines into planar gradient fields and "
                    "verify computation by trajectory.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_ in [
        ("compile", "build curves and field, dump grids and plots"),
        ("simulate", "flow trajectories with verdicts, events, and plots"),
        ("verify", "compare flow verdicts against direct execution"),
        ("perturb", "robustness sweep under scheduled perturbations"),
        ("extend3d", "window fit, series lift, residual report"),
        ("sphere", "discrete time-delta orbit comparison"),
        ("estimate", "nested-exponential resource bound"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--machine", help="machine description file")
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--inputs", type=int, help="number of enumerated inputs")
        p.add_argument("--lmax", type=int, help="height budget")
        p.add_argument("--window", type=float, help="escape window radius")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--eps0", type=float, help="perturbation schedule scale")
        p.add_argument("--lambda-frac", dest="lambda_frac", type=float,
                       help="flow speed as a fraction of the ceiling")
        p.add_argument("--out", help="output directory")
        if name == "simulate":
            p.add_argument("--fail-on-unresolved", action="store_true",
                           dest="fail_on_unresolved",
                           help="exit 1 when any verdict is UNRESOLVED")
        if name == "perturb":
            p.add_argument("--trials", type=int, help="perturbations per input")
        if name == "extend3d":
            p.add_argument("--degree", type=int, help="fit polynomial degree")
        if name == "estimate":
            p.add_argument("--sb", type=float, help="space bound")
            p.add_argument("--C", type=float, help="estimator constant")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    settings["fail_on_unresolved"] = getattr(args, "fail_on_unresolved", False)
    sub = args.subcommand
    if sub in NEEDS_MACHINE and not settings["machine"]:
        print("error: --machine is required", file=sys.stderr)
        return 2
    outdir = Path(settings["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        if sub in NEEDS_MACHINE:
            man = base_manifest(sub, settings)
        else:
            man = RunManifest(sub, "none", "none",
                              budgets={"sb": settings["sb"], "C": settings["C"]})
        status = COMMANDS[sub](settings, outdir, man)
    except MachineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    man.write(outdir)
    return status


if __name__ == "__main__":
    sys.exit(main())
