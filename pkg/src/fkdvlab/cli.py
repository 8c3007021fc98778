"""fkdv: command-line front end.

Exit codes: 0 success, 1 a verdict failed (an audit was falsified),
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import runio
from .errors import (
    DivergenceError,
    FkdvError,
    InputError,
    InstabilityError,
    NumericalError,
    PrecisionError,
    ResolutionError,
    UnsupportedRegimeError,
)
from .spectral import Grid, SpectralField

CONFIG_ERRORS = (InputError, UnsupportedRegimeError, ResolutionError)
NUMERIC_ERRORS = (DivergenceError, InstabilityError, NumericalError, PrecisionError)


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def load_config(path) -> dict:
    """JSON or TOML config; unknown keys are rejected by the consumers."""
    text = Path(path).read_text()
    if str(path).endswith(".toml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def plan_from_config(cfg: dict):
    from .nsoliton import ExperimentPlan

    allowed = {f.name for f in ExperimentPlan.__dataclass_fields__.values()}
    aliases = {"Sn": "s_n", "T0": "t0", "box": "box_length", "n": "n_points"}
    out = {}
    for key, val in cfg.items():
        name = aliases.get(key, key)
        if name not in allowed:
            raise InputError(f"unknown configuration key: {key}")
        out[name] = tuple(val) if isinstance(val, list) else val
    if "speeds" in out:
        c = list(out["speeds"])
        if c != sorted(c) or len(set(c)) != len(c):
            raise InputError(
                f"speeds must satisfy c_1 < ... < c_N, got {c}"
            )
    return ExperimentPlan(**out)


# ---------------------------------------------------------------------------
# subcommands

def cmd_groundstate(args) -> int:
    from .groundstate import (
        energy_of,
        fit_decay_exponent,
        mass_of,
        solve_ground_state_cached,
    )

    t0 = time.time()
    grid = Grid(args.n, args.box)
    gs = solve_ground_state_cached(args.alpha, args.c, grid, tol=args.tol)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.write_csv(out, ["x", "Q"], zip(grid.x, gs.profile.samples))
    sidecar = {
        "alpha": args.alpha,
        "c": args.c,
        "n": args.n,
        "box": args.box,
        "residual": gs.residual_norm,
        "iterations": gs.iterations,
        "mass": mass_of(gs),
        "energy": energy_of(gs),
        "peak": gs.peak(),
    }
    if args.fit_window:
        lo, hi = _parse_floats(args.fit_window)
        sidecar["decay_exponent"] = fit_decay_exponent(gs, (lo, hi))
    else:
        try:
            sidecar["decay_exponent"] = fit_decay_exponent(
                gs, (0.075 * args.box, 0.15 * args.box)
            )
        except FkdvError as exc:
            sidecar["decay_exponent"] = None
            sidecar["decay_note"] = str(exc)
    runio.dump_json(sidecar, str(out) + ".json", indent=1)
    if args.gnuplot:
        runio.gnuplot_script(out, ["x", "Q"], "ground state")
    runio.write_manifest(out.parent, vars(args), [out, str(out) + ".json"],
                         t_wall=time.time() - t0, steps=gs.iterations)
    return 0


def _builtin_init(spec: str, alpha: float, grid: Grid) -> SpectralField:
    from .modulation import assemble_R, build_ensemble

    kind, _, rest = spec.partition(":")
    if kind != "solitons":
        raise InputError(f"unknown builtin initial state {spec!r}; "
                         "use solitons:c=1,2:x=-50,0")
    speeds, positions = (1.0,), (0.0,)
    for part in rest.split(":"):
        key, _, val = part.partition("=")
        if key == "c":
            speeds = _parse_floats(val)
        elif key == "x":
            positions = _parse_floats(val)
        else:
            raise InputError(f"unknown builtin key {key!r}")
    ens = build_ensemble(alpha, speeds, grid)
    return assemble_R(ens, positions)


def cmd_evolve(args) -> int:
    from .evolution import EvolutionConfig, energy, evolve, mass

    t0 = time.time()
    grid = Grid(args.n, args.box)
    if args.init.startswith("solitons:"):
        u0 = _builtin_init(args.init, args.alpha, grid)
    else:
        header, raw = runio.load_fields(args.init)
        if header["n"] != args.n or abs(header["box"] - args.box) > 1e-9:
            raise InputError("field file grid does not match --n/--box")
        u0 = SpectralField(grid, raw[0])
    cfg = EvolutionConfig(
        alpha=args.alpha, dt=args.dt, t_start=args.t0, t_end=args.t1,
        dealias=not args.no_dealias, record_every=args.record_every,
        frame_velocity=args.frame,
    )
    records = []
    dump_every = 0
    dump_file = None
    if args.dump_fields:
        parts = dict(p.split("=") for p in args.dump_fields.split(","))
        dump_every = int(parts.get("every", 1))
        dump_file = parts.get("file", "fields.bin")
    snaps, snap_times = [], []

    def observer(t, u):
        rec = {"t": t, "mass": mass(u), "energy": energy(u, args.alpha),
               "max_abs": u.max_abs()}
        records.append(rec)
        if dump_every and (len(records) - 1) % dump_every == 0:
            snaps.append(u)
            snap_times.append(t)

    traj = evolve(u0, cfg, observers=[observer])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.write_jsonl(out, records)
    outputs = [out]
    if dump_file:
        dump_path = out.parent / dump_file
        runio.dump_fields(dump_path, snap_times, snaps, args.box)
        outputs += [dump_path, str(dump_path) + ".json"]
    runio.write_manifest(out.parent, vars(args), outputs,
                         t_wall=time.time() - t0, steps=traj.steps_taken)
    return 0


def cmd_modulate(args) -> int:
    from .modulation import (
        build_ensemble,
        modulate,
        peaks_initial_guess,
        velocity_system,
    )
    from .spectral import sobolev_norm

    t0 = time.time()
    header, raw = runio.load_fields(args.state)
    grid = Grid(header["n"], header["box"])
    ens = build_ensemble(args.alpha, _parse_floats(args.speeds), grid)
    times = header["times"]
    rows = []
    guess = None
    prev = None
    for t, samples in zip(times, raw):
        u = SpectralField(grid, samples)
        if guess is None:
            guess = peaks_initial_guess(u, ens.n_solitons)
        st = modulate(u, ens, guess, time=t)
        guess = st.rho
        a_mat, b_vec = velocity_system(u, ens, st)
        inst = np.linalg.solve(a_mat, b_vec)
        fd = (st.rho - prev.rho) / (t - prev.time) if prev is not None else inst * np.nan
        prev = st
        eta_l2 = float(np.sqrt(grid.dx * np.sum(st.eta.samples**2)))
        rows.append(
            [t, *st.rho, *fd, *inst, eta_l2,
             sobolev_norm(st.eta, 0.5 * args.alpha), *st.ortho_residuals]
        )
    n = ens.n_solitons
    header_cols = (
        ["t"] + [f"rho_{j+1}" for j in range(n)]
        + [f"rho_fd_{j+1}" for j in range(n)]
        + [f"rho_inst_{j+1}" for j in range(n)]
        + ["eta_l2", "eta_hs"] + [f"ortho_{j+1}" for j in range(n)]
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.write_csv(out, header_cols, rows)
    if args.gnuplot:
        runio.gnuplot_script(out, header_cols, "modulation track")
    runio.write_manifest(out.parent, vars(args), [out], t_wall=time.time() - t0)
    return 0


def cmd_monotonicity(args) -> int:
    from .localization import build_kit, localized_energy, localized_mass, monotonicity_audit
    from .modulation import build_ensemble, modulate, peaks_initial_guess
    from .spectral import riesz_apply

    t0 = time.time()
    header, raw = runio.load_fields(args.fields)
    grid = Grid(header["n"], header["box"])
    speeds = _parse_floats(args.speeds)
    ens = build_ensemble(args.alpha, speeds, grid)
    times = np.asarray(header["times"])
    n = ens.n_solitons
    masses, etildes, excluded = [], [], []
    guess = None
    for t, samples in zip(times, raw):
        u = SpectralField(grid, samples)
        try:
            if guess is None:
                guess = peaks_initial_guess(u, n)
            st = modulate(u, ens, guess, time=t)
            guess = st.rho
            kit = build_kit(ens, st.rho, args.A)
            ru = riesz_apply(u, args.alpha)
            lm = [localized_mass(u, kit, j) for j in range(n)]
            le = [localized_energy(u, kit, j, ru) + kit.sigma0 * lm[j] for j in range(n)]
            masses.append(lm)
            etildes.append(le)
            excluded.append(False)
        except FkdvError:
            masses.append([np.nan] * n)
            etildes.append([np.nan] * n)
            excluded.append(True)
    report = monotonicity_audit(times, np.nan_to_num(masses), np.nan_to_num(etildes),
                                ens.beta, args.alpha, excluded=np.asarray(excluded))
    rows = []
    kept = report["times"]
    for j in range(n):
        dm = report["mass"][j]
        de = report["etilde"][j]
        for i, t in enumerate(kept):
            rows.append([t, j + 1, dm["deficit"][i], dm["rescaled"][i],
                         de["deficit"][i], de["rescaled"][i]])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.write_csv(out, ["t0", "j", "D_mass", "D_mass_rescaled",
                          "D_etilde", "D_etilde_rescaled"], rows)
    verdict = {
        "worst_mass": {j + 1: report["mass"][j]["worst"] for j in range(n)},
        "worst_etilde": {j + 1: report["etilde"][j]["worst"] for j in range(n)},
        "excluded_frames": report["excluded"],
    }
    runio.dump_json(verdict, str(out) + ".json", indent=1)
    runio.write_manifest(out.parent, vars(args), [out, str(out) + ".json"],
                         t_wall=time.time() - t0)
    return 0


def cmd_spectrum(args) -> int:
    from .groundstate import solve_ground_state_cached
    from .linearized import assemble_linearized, coercivity_constant, spectrum

    t0 = time.time()
    grid = Grid(args.n, args.box)
    gs = solve_ground_state_cached(args.alpha, args.c, grid, tol=args.tol)
    op = assemble_linearized(gs)
    rep = spectrum(op, k=args.k)
    mu = coercivity_constant(gs)
    payload = {
        "alpha": args.alpha,
        "c": args.c,
        "eigenvalues": rep.eigenvalues,
        "n_negative": rep.n_negative,
        "zero_eigenvalue": rep.zero_eigenvalue,
        "zero_alignment": rep.zero_alignment,
        "ground_even": rep.ground_even,
        "ground_sign_definite": rep.ground_sign_definite,
        "continuum_onset": rep.continuum_onset,
        "coercivity_mu": mu,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.dump_json(payload, out, indent=1)
    runio.write_manifest(out.parent, vars(args), [out], t_wall=time.time() - t0)
    ok = rep.n_negative == 1 and rep.zero_alignment > 0.99 and mu > 0
    return 0 if ok else 1


def cmd_check_estimates(args) -> int:
    from .inequalities import (
        ALL_IDS,
        NONSYMMETRIC_IDS,
        SYMMETRIC_IDS,
        boundedness_scan,
        sweep_and_fit,
    )

    t0 = time.time()
    grid = Grid(args.n, args.box)
    which = (SYMMETRIC_IDS + ("nsc1G", "nsc2G", "eqnorm1")) if args.which == "all" \
        else tuple(args.which.split(","))
    alphas = _parse_floats(args.alpha)
    a_values = _parse_floats(args.A)
    results = []
    all_ok = True

    def one(est, alpha):
        rep = sweep_and_fit(est, alpha, a_values, grid, seed=args.seed)
        bound = boundedness_scan(est, alpha, max(a_values), grid, seed=args.seed)
        return {
            "estimate": est,
            "alpha": alpha,
            "A": list(rep.A_list),
            "worst_ratios": rep.worst_ratios,
            "fitted_exponent": rep.fitted_exponent,
            "claimed_exponent": rep.claimed,
            "worst_constant": rep.worst_constant,
            "two_sided_pass": rep.passed,
            "bound_pass": bool(rep.fitted_exponent <= rep.claimed + 0.3),
            "max_ratio_fixed_A": bound["max_ratio"],
            "seed": args.seed,
        }

    jobs = [(est, alpha) for est in which for alpha in alphas]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_estimate_job,
                                    [(e, a, args, tuple(a_values)) for e, a in jobs]))
    else:
        results = [one(e, a) for e, a in jobs]
    for r in results:
        if not r["bound_pass"]:
            all_ok = False
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runio.dump_json({"results": results}, out, indent=1)
    runio.write_manifest(out.parent, vars(args), [out], t_wall=time.time() - t0)
    return 0 if all_ok else 1


def _estimate_job(packed):
    est, alpha, args, a_values = packed
    from .inequalities import boundedness_scan, sweep_and_fit

    grid = Grid(args.n, args.box)
    rep = sweep_and_fit(est, alpha, a_values, grid, seed=args.seed)
    bound = boundedness_scan(est, alpha, max(a_values), grid, seed=args.seed)
    return {
        "estimate": est,
        "alpha": alpha,
        "A": list(rep.A_list),
        "worst_ratios": rep.worst_ratios,
        "fitted_exponent": rep.fitted_exponent,
        "claimed_exponent": rep.claimed,
        "worst_constant": rep.worst_constant,
        "two_sided_pass": rep.passed,
        "bound_pass": bool(rep.fitted_exponent <= rep.claimed + 0.3),
        "max_ratio_fixed_A": bound["max_ratio"],
        "seed": args.seed,
    }


def cmd_nsoliton(args) -> int:
    from .nsoliton import ExperimentPlan, calibration_floor, run_construction

    t0 = time.time()
    cfg = {}
    if args.config:
        cfg = load_config(args.config)
    overrides = {
        "alpha": args.alpha,
        "speeds": _parse_floats(args.speeds) if args.speeds else None,
        "Sn": args.Sn, "T0": args.T0, "A": args.A,
        "n": args.n, "box": args.box, "dt": args.dt,
    }
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    if args.offsets:
        cfg["offsets"] = _parse_floats(args.offsets)
    plan = plan_from_config(cfg)
    floor = calibration_floor(plan) if args.calibrate_floor else 0.0
    result = run_construction(plan, eta_floor=floor)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    runio.write_jsonl(out_dir / "run.jsonl", [
        {"t": r.t, "rho": r.rho, "rho_prime": r.rho_prime_inst,
         "eta_l2": r.eta_l2, "eta_hs": r.eta_hs, "mass": r.total_mass,
         "energy": r.total_energy, "bootstrap": r.bootstrap_value}
        for r in result.records
    ])
    n = len(plan.speeds)
    runio.write_csv(out_dir / "rho.csv",
                    ["t"] + [f"rho_{j+1}" for j in range(n)]
                    + [f"rho_prime_{j+1}" for j in range(n)],
                    [[r.t, *r.rho, *r.rho_prime_inst] for r in result.records])
    verdicts = dict(result.verdicts)
    verdicts["eta_floor"] = floor
    runio.dump_json(verdicts, out_dir / "verdicts.json", indent=1)
    runio.write_manifest(out_dir, cfg,
                         [out_dir / "run.jsonl", out_dir / "rho.csv",
                          out_dir / "verdicts.json"],
                         t_wall=time.time() - t0)
    ok = verdicts.get("decay_ok") and verdicts.get("velocity_ok") and (
        result.exit_time is None
    )
    return 0 if ok else 1


def cmd_report(args) -> int:
    rows = []
    for path in sorted(Path(args.runs).rglob("verdicts.json")):
        data = json.loads(path.read_text())
        rows.append((str(path.parent.name), data))
    lines = ["# fkdv run report", "",
             "| run | C0_eta | eta_slope | C0_vel | vel_slope | decay_ok | velocity_ok | floor_limited |",
             "|---|---|---|---|---|---|---|---|"]
    all_ok = True
    for name, d in rows:
        lines.append(
            f"| {name} | {d.get('c0_eta', float('nan')):.4g} | "
            f"{d.get('eta_slope', float('nan')):.3f} | "
            f"{d.get('c0_vel', float('nan')):.4g} | "
            f"{d.get('vel_slope', float('nan')):.3f} | "
            f"{d.get('decay_ok')} | {d.get('velocity_ok')} | "
            f"{d.get('floor_limited')} |"
        )
        if not (d.get("decay_ok") and d.get("velocity_ok")):
            all_ok = False
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fkdv",
                                description="fractional KdV soliton laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("groundstate", help="solve the solitary-wave profile")
    g.add_argument("--alpha", type=float, required=True)
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--n", type=int, default=8192)
    g.add_argument("--box", type=float, default=400.0)
    g.add_argument("--tol", type=float, default=1e-11)
    g.add_argument("--fit-window", default=None)
    g.add_argument("--out", default="profile.csv")
    g.add_argument("--gnuplot", action="store_true")
    g.set_defaults(func=cmd_groundstate)

    e = sub.add_parser("evolve", help="time-evolve an initial state")
    e.add_argument("--init", required=True,
                   help="fields.bin path or builtin solitons:c=1,2:x=-50,0")
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--t0", type=float, default=0.0)
    e.add_argument("--t1", type=float, required=True)
    e.add_argument("--dt", type=float, required=True)
    e.add_argument("--n", type=int, default=8192)
    e.add_argument("--box", type=float, default=400.0)
    e.add_argument("--frame", type=float, default=0.0)
    e.add_argument("--record-every", type=int, default=100)
    e.add_argument("--no-dealias", action="store_true")
    e.add_argument("--dump-fields", default=None, help="every=K,file=fields.bin")
    e.add_argument("--out", default="run.jsonl")
    e.set_defaults(func=cmd_evolve)

    m = sub.add_parser("modulate", help="decompose recorded fields")
    m.add_argument("--state", required=True, help="fields.bin produced by evolve")
    m.add_argument("--speeds", required=True)
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--out", default="rho.csv")
    m.add_argument("--gnuplot", action="store_true")
    m.set_defaults(func=cmd_modulate)

    mo = sub.add_parser("monotonicity", help="localized mass/energy audit")
    mo.add_argument("--run", default=None, help="run.jsonl (optional, unused)")
    mo.add_argument("--fields", required=True)
    mo.add_argument("--speeds", required=True)
    mo.add_argument("--alpha", type=float, required=True)
    mo.add_argument("--A", type=float, default=20.0)
    mo.add_argument("--out", default="mono.csv")
    mo.set_defaults(func=cmd_monotonicity)

    s = sub.add_parser("spectrum", help="linearized-operator spectrum")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--k", type=int, default=8)
    s.add_argument("--n", type=int, default=2048)
    s.add_argument("--box", type=float, default=200.0)
    s.add_argument("--tol", type=float, default=1e-11)
    s.add_argument("--out", default="spec.json")
    s.set_defaults(func=cmd_spectrum)

    c = sub.add_parser("check-estimates", help="weighted-estimate sweeps")
    c.add_argument("--which", default="all")
    c.add_argument("--alpha", default="0.8,1.0,1.5")
    c.add_argument("--A", default="5,10,20,40")
    c.add_argument("--seed", type=int, default=7)
    c.add_argument("--n", type=int, default=8192)
    c.add_argument("--box", type=float, default=800.0)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", default="estimates.json")
    c.set_defaults(func=cmd_check_estimates)

    ns = sub.add_parser("nsoliton", help="backward N-soliton construction")
    ns.add_argument("--config", default=None, help="JSON/TOML plan")
    ns.add_argument("--alpha", type=float, default=None)
    ns.add_argument("--speeds", default=None)
    ns.add_argument("--Sn", type=float, default=None)
    ns.add_argument("--T0", type=float, default=None)
    ns.add_argument("--A", type=float, default=None)
    ns.add_argument("--n", type=int, default=None)
    ns.add_argument("--box", type=float, default=None)
    ns.add_argument("--dt", type=float, default=None)
    ns.add_argument("--offsets", default=None)
    ns.add_argument("--calibrate-floor", action="store_true")
    ns.add_argument("--out", default="exp")
    ns.set_defaults(func=cmd_nsoliton)

    r = sub.add_parser("report", help="aggregate verdicts into Markdown")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FkdvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
