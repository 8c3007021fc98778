"""The backward N-soliton construction experiment.

A pure soliton sum is seeded at a large time S_n with positions inside the
admissible window |rho_j^in - c_j S_n| <= S_n^{1-a/4}, evolved backward to
a target time T0, and the modulation residual eta(t) is measured against
the construction's decay rates:

    ||eta(t)||_{H^{a/2}} <~ t^{-a/2},   |rho_j'(t) - c_j| <~ t^{-a/2},
    |rho_j(t) - c_j t|  <= t^{1-a/4}   (the bootstrap window).

Backward evolution uses the x -> -x reflection (u(-t,-x) solves the same
equation), so the reflected field w runs forward in s = S_n - t.  A frame
moving at the mean speed keeps the receding solitons inside the box; in
box coordinates the soliton of speed c_j sits near (mean - c_j) * t-ish,
so position order is reversed relative to speed order.

For exponentially localized profiles (a = 2) the genuine interaction
residual sits below the integrator floor; verdicts then report the run as
floor-limited instead of fitting noise, with the floor calibrated by the
caller (an N = 1 run measures it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .evolution import EvolutionConfig, energy, evolve, mass
from .localization import build_kit, localized_energy, localized_mass
from .modulation import (
    ModulationState,
    PositionArrangement,
    SolitonEnsemble,
    build_ensemble,
    modulate,
    velocity_system,
)
from .spectral import Grid, SpectralField, riesz_apply, sobolev_norm, translate


@dataclass
class ExperimentPlan:
    alpha: float
    speeds: tuple
    s_n: float = 300.0
    t0: float = 50.0
    offsets: tuple | None = None  # rho_j^in; default c_j * S_n
    n_points: int = 8192
    box_length: float = 512.0
    dt: float | None = None  # default from the nonlinear CFL
    record_spacing: float = 1.0
    A: float | None = None  # default max(10, beta*T0/4)
    dealias: bool = True
    gs_tol: float = 1e-11

    def __post_init__(self):
        c = np.asarray(self.speeds, dtype=float)
        if np.any(c <= 0) or np.any(np.diff(c) <= 0):
            raise InputError(f"speeds must be positive increasing, got {self.speeds}")
        if not (0 < self.t0 < self.s_n):
            raise InputError(f"need 0 < T0={self.t0} < S_n={self.s_n}")
        if self.offsets is None:
            self.offsets = tuple(float(ci * self.s_n) for ci in c)
        off = np.asarray(self.offsets, dtype=float)
        window = self.s_n ** (1.0 - 0.25 * self.alpha)
        if np.any(np.abs(off - c * self.s_n) > window * (1 + 1e-12)):
            raise InputError(
                f"offsets {self.offsets} leave the admissible interval "
                f"c_j S_n +- S_n^(1-a/4) = +-{window:.3f}"
            )

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.speeds))

    def beta(self) -> float:
        c = np.asarray(self.speeds, dtype=float)
        gaps = np.concatenate([[c[0]], np.diff(c)])
        return 0.5 * float(np.min(gaps))

    def weight_scale(self) -> float:
        return self.A if self.A is not None else max(10.0, self.beta() * self.t0 / 4.0)


@dataclass
class ConstructionRecord:
    t: float
    rho: np.ndarray
    rho_prime_inst: np.ndarray
    eta_l2: float
    eta_hs: float
    ortho: np.ndarray
    total_mass: float
    total_energy: float
    local_mass: np.ndarray
    local_etilde: np.ndarray
    bootstrap_value: float  # max_j |rho_j - c_j t| * t^(a/4 - 1)


@dataclass
class ConstructionResult:
    plan: ExperimentPlan
    records: list = field(default_factory=list)
    exit_time: float | None = None
    verdicts: dict = field(default_factory=dict)

    def times(self):
        return np.array([r.t for r in self.records])


def _box_positions(plan: ExperimentPlan) -> np.ndarray:
    """Initial box-frame positions (increasing) and the speed permutation."""
    cbar = plan.mean_speed
    y0 = cbar * plan.s_n - np.asarray(plan.offsets)  # position of speed c_j
    return y0


def run_construction(
    plan: ExperimentPlan,
    ensemble: SolitonEnsemble | None = None,
    eta_floor: float = 0.0,
) -> ConstructionResult:
    """Seed u(S_n) = sum Q_{c_j}(. - rho_j^in), run down to T0, measure decay.

    The returned verdicts carry the fitted constants:
      c0_eta    = max_t ||eta|| t^{a/2};  eta_slope over t in [T0, S_n/2];
      c0_vel    = max_{j,t} |rho_j' - c_j| t^{a/2};  vel_slope likewise;
      bootstrap_max = max_t max_j |rho_j - c_j t| t^{a/4-1}  (<= 1 inside
      the window).  floor_limited=True marks runs whose eta never exceeded
      eta_floor (exponential-tail cases); their slopes are not meaningful.
    """
    grid = Grid(plan.n_points, plan.box_length)
    if ensemble is None:
        ensemble = build_ensemble(plan.alpha, plan.speeds, grid, tol=plan.gs_tol)
    cbar = plan.mean_speed
    n_sol = ensemble.n_solitons

    y0 = _box_positions(plan)
    order = np.argsort(y0)  # position-increasing; reverses the speed order
    arrangement = PositionArrangement(
        alpha=plan.alpha,
        speeds=tuple(float(plan.speeds[j]) for j in order),
        profiles=[ensemble.profiles[j] for j in order],
        beta=ensemble.beta,
        grid_ref=grid,
    )
    guard = 0.5 * plan.box_length - plan.box_length / 8.0
    if np.any(np.abs(y0) > guard):
        raise InputError(
            f"box positions {y0} violate the box/8 seam guard {guard:.1f}; "
            "enlarge box_length or reduce S_n - T0 drift"
        )

    # w(0, y) = u(S_n, -y) = sum Q_{c_j}(y + rho_j^in); in the frame moving
    # at cbar the soliton of speed c_j starts at cbar*S_n - rho_j^in
    w0 = np.zeros(grid.n_points)
    for j in range(n_sol):
        w0 += translate(ensemble.profiles[j].profile, float(y0[j])).samples
    w_field = SpectralField(grid, w0)

    u_max = w_field.max_abs()
    # accuracy-driven default: a quarter of the nonlinear CFL keeps the
    # integrator error well below the interaction signal in eta
    dt = plan.dt if plan.dt is not None else 0.125 * grid.dx / u_max
    span = plan.s_n - plan.t0
    record_every = max(1, int(round(plan.record_spacing / dt)))
    cfg = EvolutionConfig(
        alpha=plan.alpha,
        dt=dt,
        t_start=0.0,
        t_end=span,
        dealias=plan.dealias,
        record_every=record_every,
        frame_velocity=cbar,
    )

    a_scale = plan.weight_scale()
    result = ConstructionResult(plan=plan)
    drift = np.asarray(arrangement.speeds) - cbar  # box-frame soliton speeds
    state = {"rho_box": y0[order].copy(), "s_prev": 0.0}

    def observer(s: float, w: SpectralField):
        t = plan.s_n - s
        guess = state["rho_box"] + drift * (s - state["s_prev"])
        try:
            mod = modulate(w, arrangement, guess, tol=1e-11, time=t)
        except Exception:
            if result.exit_time is None:
                result.exit_time = t
            return None
        state["rho_box"] = mod.rho.copy()
        state["s_prev"] = s
        rho_phys = cbar * t - mod.rho  # physical positions, speed order via perm
        rho_j = np.empty(n_sol)
        rho_j[order] = rho_phys
        a_mat, b_vec = velocity_system(w, arrangement, mod)
        vel_box = np.linalg.solve(a_mat, b_vec)
        vel_j = np.empty(n_sol)
        vel_j[order] = vel_box  # = d rho_j / dt (see frame note in module doc)

        kit = build_kit(arrangement, mod.rho, a_scale)
        riesz_w = riesz_apply(w, plan.alpha)
        lm_pos = np.array([localized_mass(w, kit, i) for i in range(n_sol)])
        le_pos = np.array([
            localized_energy(w, kit, i, riesz_w) + kit.sigma0 * lm_pos[i]
            for i in range(n_sol)
        ])
        lm = np.empty(n_sol)
        le = np.empty(n_sol)
        lm[order] = lm_pos  # back to speed order
        le[order] = le_pos
        c_arr = np.asarray(plan.speeds)
        boot = np.max(np.abs(rho_j - c_arr * t) * t ** (0.25 * plan.alpha - 1.0))
        rec = ConstructionRecord(
            t=t,
            rho=rho_j,
            rho_prime_inst=vel_j,
            eta_l2=np.sqrt(max(mod.eta.samples @ mod.eta.samples * grid.dx, 0.0)),
            eta_hs=sobolev_norm(mod.eta, 0.5 * plan.alpha),
            ortho=mod.ortho_residuals,
            total_mass=mass(w),
            total_energy=energy(w, plan.alpha),
            local_mass=lm,
            local_etilde=le,
            bootstrap_value=float(boot),
        )
        result.records.append(rec)
        if boot > 1.0 and result.exit_time is None:
            result.exit_time = t
        return None

    evolve(w_field, cfg, observers=[observer])
    result.records.sort(key=lambda r: r.t)
    result.verdicts = _verdicts(plan, result, eta_floor)
    return result


def _verdicts(plan: ExperimentPlan, result: ConstructionResult, eta_floor: float) -> dict:
    recs = result.records
    if len(recs) < 5:
        return {"insufficient_records": True}
    t = np.array([r.t for r in recs])
    eta = np.array([r.eta_hs for r in recs])
    vel_dev = np.array([
        np.max(np.abs(r.rho_prime_inst - np.asarray(plan.speeds))) for r in recs
    ])
    a = plan.alpha
    c0_eta = float(np.max(eta * t ** (0.5 * a)))
    c0_vel = float(np.max(vel_dev * t ** (0.5 * a)))
    boot_max = float(np.max([r.bootstrap_value for r in recs]))
    m_tot = np.array([r.total_mass for r in recs])
    e_tot = np.array([r.total_energy for r in recs])

    floor_limited = bool(np.max(eta) <= eta_floor)
    fit_window = (t >= plan.t0) & (t <= 0.5 * plan.s_n) & (eta > max(eta_floor, 1e-300))
    if floor_limited or np.count_nonzero(fit_window) < 5:
        eta_slope = float("nan")
        vel_slope = float("nan")
    else:
        eta_slope = float(np.polyfit(np.log(t[fit_window]), np.log(eta[fit_window]), 1)[0])
        ok = fit_window & (vel_dev > 0)
        vel_slope = (
            float(np.polyfit(np.log(t[ok]), np.log(vel_dev[ok]), 1)[0])
            if np.count_nonzero(ok) >= 5
            else float("nan")
        )
    return {
        "c0_eta": c0_eta,
        "c0_vel": c0_vel,
        "eta_slope": eta_slope,
        "vel_slope": vel_slope,
        "eta_max": float(np.max(eta)),
        "bootstrap_max": boot_max,
        "exit_time": result.exit_time,
        "floor_limited": floor_limited,
        "mass_drift": float(np.max(np.abs(m_tot - m_tot[0])) / abs(m_tot[0])),
        "energy_drift": float(np.max(np.abs(e_tot - e_tot[0])) / abs(e_tot[0])),
        "decay_ok": bool(
            floor_limited or (np.isfinite(eta_slope) and eta_slope <= -0.5 * a + 0.3)
        ),
        "velocity_ok": bool(
            floor_limited or (np.isfinite(vel_slope) and vel_slope <= -0.5 * a + 0.3)
        ),
    }


def calibration_floor(plan: ExperimentPlan, margin: float = 100.0) -> float:
    """Integrator noise floor: max eta of the same run with N = 1.

    The single-soliton seed is an exact traveling wave, so everything eta
    picks up is discretization error; `margin` times that is the smallest
    trustworthy signal for the N-soliton runs.
    """
    single = ExperimentPlan(
        alpha=plan.alpha,
        speeds=(plan.speeds[-1],),
        s_n=plan.s_n,
        t0=plan.t0,
        n_points=plan.n_points,
        box_length=plan.box_length,
        dt=plan.dt,
        record_spacing=plan.record_spacing,
        A=plan.A,
        dealias=plan.dealias,
        gs_tol=plan.gs_tol,
    )
    res = run_construction(single)
    return margin * res.verdicts["eta_max"]


def offset_sensitivity(plan: ExperimentPlan, offset_grid) -> list[dict]:
    """Map from seeding offsets to bootstrap-exit behaviour.

    offset_grid: iterable of offset tuples (rho_j^in).  For each run the
    report carries the exit time (None if the window holds down to T0) and
    the sign of df/dt at near-boundary events, f being the squared scaled
    deviation max_j ((rho_j - c_j t) t^{a/4-1})^2: the transversality claim
    is f' < 0 there.
    """
    reports = []
    grid = Grid(plan.n_points, plan.box_length)
    ensemble = build_ensemble(plan.alpha, plan.speeds, grid, tol=plan.gs_tol)
    for offsets in offset_grid:
        p = ExperimentPlan(
            alpha=plan.alpha, speeds=plan.speeds, s_n=plan.s_n, t0=plan.t0,
            offsets=tuple(float(o) for o in offsets), n_points=plan.n_points,
            box_length=plan.box_length, dt=plan.dt,
            record_spacing=plan.record_spacing, A=plan.A, dealias=plan.dealias,
            gs_tol=plan.gs_tol,
        )
        res = run_construction(p, ensemble=ensemble)
        t = res.times()
        f_vals = np.array([r.bootstrap_value**2 for r in res.records])
        events = []
        for i in range(1, len(t) - 1):
            if f_vals[i] > 0.81:  # within 10% of the boundary f = 1
                fprime = (f_vals[i + 1] - f_vals[i - 1]) / (t[i + 1] - t[i - 1])
                events.append({"t": float(t[i]), "f": float(f_vals[i]),
                               "fprime": float(fprime)})
        reports.append({
            "offsets": tuple(float(o) for o in offsets),
            "exit_time": res.exit_time,
            "bootstrap_max": res.verdicts.get("bootstrap_max"),
            "boundary_events": events,
            "c0_eta": res.verdicts.get("c0_eta"),
        })
    return reports
