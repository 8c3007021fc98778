"""Time evolution of u_t - |D|^a u_x + (u^2)_x = 0 on the periodic box.

Integrating-factor RK4: the linear phase exp(i k (|k|^a + v_frame) t) is
applied exactly; the nonlinear term -(u^2)_x is evaluated pseudospectrally
with 2/3-rule dealiasing.  A positive frame_velocity v evolves the field in
a frame moving right at speed v (the symbol gains +ikv), which keeps
receding solitons inside the box on long runs.

Backward evolution is done exclusively through the x -> -x reflection:
if w(0) = reflect(u0) and w solves the equation forward for time T, then
reflect(w(T)) = u(-T).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InstabilityError, NumericalError
from .spectral import Grid, SpectralField, dealias_mask, reflect

MAX_AMPLITUDE = 1e6


@dataclass
class EvolutionConfig:
    alpha: float
    dt: float
    t_start: float
    t_end: float
    dealias: bool = True
    record_every: int = 1
    frame_velocity: float = 0.0
    cfl_safety: float = 0.5

    def __post_init__(self):
        if self.dt <= 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        if self.t_end <= self.t_start:
            raise InputError(
                f"t_end={self.t_end} must exceed t_start={self.t_start}"
            )
        if self.record_every < 1:
            raise InputError("record_every must be a positive integer")

    def cfl_dt(self, grid: Grid, u_max: float) -> float:
        """Nonlinear CFL bound 0.5 * dx / max|u| (scaled by cfl_safety/0.5)."""
        if u_max <= 0:
            return self.dt
        return self.cfl_safety * grid.dx / u_max


class _Stepper:
    """Precomputed multipliers for one (grid, alpha, frame) combination."""

    def __init__(self, grid: Grid, alpha: float, frame_velocity: float, dealias: bool):
        self.grid = grid
        k = grid.k
        self.ik = 1j * k
        self.ik[grid.n_points // 2] = 0.0  # Nyquist zeroed for odd derivative
        self.symbol = 1j * k * (np.abs(k) ** alpha + frame_velocity)
        self.mask = dealias_mask(grid) if dealias else np.ones(grid.n_points, bool)

    def nonlinear(self, v_hat: np.ndarray) -> np.ndarray:
        v = np.fft.ifft(v_hat).real
        out = -self.ik * np.fft.fft(v * v)
        out[~self.mask] = 0.0
        return out

    def step(self, u_hat: np.ndarray, h: float) -> np.ndarray:
        """One RK4 step of size h in the interaction picture."""
        e_half = np.exp(self.symbol * (0.5 * h))
        e_full = e_half * e_half
        n1 = self.nonlinear(u_hat)
        a = e_half * (u_hat + 0.5 * h * n1)
        n2 = self.nonlinear(a)
        b = e_half * u_hat + 0.5 * h * n2
        n3 = self.nonlinear(b)
        c = e_full * u_hat + h * e_half * n3
        n4 = self.nonlinear(c)
        return (
            e_full * u_hat
            + h / 6.0 * (e_full * n1 + 2.0 * e_half * (n2 + n3) + n4)
        )


def step(u: SpectralField, cfg: EvolutionConfig) -> SpectralField:
    """Advance one cfg.dt (single RK4 step); see evolve() for full runs."""
    st = _Stepper(u.grid, cfg.alpha, cfg.frame_velocity, cfg.dealias)
    u_hat = u.coefficients.copy()
    u_hat[~st.mask] = 0.0
    out = np.fft.ifft(st.step(u_hat, cfg.dt)).real
    _guard(out)
    return SpectralField(u.grid, out)


def _guard(samples: np.ndarray):
    if not np.all(np.isfinite(samples)):
        raise NumericalError("NaN/Inf encountered during time stepping")
    amp = np.max(np.abs(samples))
    if amp > MAX_AMPLITUDE:
        raise InstabilityError(f"max|u| = {amp:.3e} exceeded guard {MAX_AMPLITUDE:.0e}")


@dataclass
class Trajectory:
    """Recorded output of evolve(): fields and times at record steps."""

    config: EvolutionConfig
    times: list = field(default_factory=list)
    records: list = field(default_factory=list)  # observer return values
    final: SpectralField | None = None
    steps_taken: int = 0
    aborted: Exception | None = None

    def record_times(self) -> np.ndarray:
        return np.asarray(self.times)


def evolve(
    u0: SpectralField,
    cfg: EvolutionConfig,
    observers: list | None = None,
) -> Trajectory:
    """Evolve u0 from t_start to t_end, invoking observers at record times.

    Each observer is called as observer(t, field) at t_start, every
    record_every * dt, and at t_end; its return value (if not None) is
    appended to trajectory.records.  Record times are hit exactly: the
    interval between them is covered by uniform substeps no larger than the
    working dt, which is the requested dt capped by the nonlinear CFL
    (re-halved whenever the amplitude grows past the CFL bound).
    """
    observers = observers or []
    st = _Stepper(u0.grid, cfg.alpha, cfg.frame_velocity, cfg.dealias)
    u_hat = u0.coefficients.astype(complex).copy()
    u_hat[~st.mask] = 0.0

    traj = Trajectory(config=cfg)
    u_cur = SpectralField.from_coefficients(u0.grid, u_hat)
    dt_work = min(cfg.dt, cfg.cfl_dt(u0.grid, u_cur.max_abs()))

    t = cfg.t_start
    _notify(traj, observers, t, u_cur)

    stride = cfg.record_every * cfg.dt
    n_rec = int(np.ceil((cfg.t_end - cfg.t_start) / stride - 1e-12))
    rec_times = cfg.t_start + stride * np.arange(1, n_rec + 1)
    rec_times[-1] = cfg.t_end

    try:
        for t_next in rec_times:
            span = t_next - t
            n_sub = max(1, int(np.ceil(span / dt_work - 1e-12)))
            h = span / n_sub
            for _ in range(n_sub):
                u_hat = st.step(u_hat, h)
                traj.steps_taken += 1
            u = np.fft.ifft(u_hat).real
            _guard(u)
            u_cur = SpectralField.from_coefficients(u0.grid, u_hat)
            t = t_next
            _notify(traj, observers, t, u_cur)
            # adapt: amplitude growth tightens the CFL bound
            bound = cfg.cfl_dt(u0.grid, u_cur.max_abs())
            while dt_work > bound:
                dt_work *= 0.5
    except (InstabilityError, NumericalError) as exc:
        traj.aborted = exc
        traj.final = u_cur
        raise

    traj.final = u_cur
    return traj


def _notify(traj: Trajectory, observers, t: float, u: SpectralField):
    traj.times.append(t)
    for obs in observers:
        val = obs(t, u)
        if val is not None:
            traj.records.append(val)


def reflect_time(u: SpectralField) -> SpectralField:
    """x -> u(-x); composing evolve-reflect-evolve-reflect is the identity."""
    return reflect(u)


def mass(u: SpectralField) -> float:
    return float(u.grid.dx * np.sum(u.samples**2))


def energy(u: SpectralField, alpha: float) -> float:
    """E(u) = 1/2 int (|D|^{a/2} u)^2 - 1/3 int u^3."""
    k = u.grid.k
    half = np.zeros_like(k)
    nz = k != 0
    half[nz] = np.abs(k[nz]) ** (0.5 * alpha)
    du = np.fft.ifft(half * u.coefficients).real
    return float(
        u.grid.dx * (0.5 * np.sum(du**2) - np.sum(u.samples**3) / 3.0)
    )
