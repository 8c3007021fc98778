"""Ground states Q_c of |D|^a Q_c + c Q_c - Q_c^2 = 0.

The solver is the Petviashvili iteration with stabilizing exponent 2
(quadratic nonlinearity).  Closed forms exist at a=2 and a=1:

    a=2:  Q(x) = (3/2) cosh^{-2}(x/2)
    a=1:  Q(x) = 4 / (1 + x^2)

and the scaling map is Q_c(x) = c Q(c^{1/a} x).  Profiles decay like
(1+|x|)^{-(1+a)} for a < 2, which dictates large boxes for tail work.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContaminationError,
    DivergenceError,
    InputError,
    ResolutionError,
    UnsupportedRegimeError,
)
from .spectral import Grid, SpectralField, inner, integrate, riesz_apply

ALPHA_MIN = 0.5
ALPHA_MAX = 2.0


def kdv_profile(grid: Grid, c: float = 1.0) -> SpectralField:
    """Explicit ground state at a=2: Q_c(x) = (3c/2) cosh^{-2}(sqrt(c) x / 2)."""
    e = np.exp(-np.abs(0.5 * np.sqrt(c) * grid.x))
    return SpectralField(grid, 1.5 * c * (2.0 * e / (1.0 + e * e)) ** 2)


def bo_profile(grid: Grid, c: float = 1.0) -> SpectralField:
    """Explicit ground state at a=1: Q_c(x) = 4c / (1 + (c x)^2)."""
    x = grid.x
    return SpectralField(grid, 4.0 * c / (1.0 + (c * x) ** 2))


@dataclass
class GroundState:
    alpha: float
    c: float
    profile: SpectralField
    iterations: int
    residual_norm: float

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    def peak(self) -> float:
        return float(np.max(self.profile.samples))


def equation_residual(alpha: float, c: float, q: SpectralField) -> float:
    """L2 norm of |D|^a q + c q - q^2."""
    r = riesz_apply(q, alpha).samples + c * q.samples - q.samples**2
    return float(np.sqrt(q.grid.dx * np.sum(r**2)))


def _even_symmetrize(samples: np.ndarray) -> np.ndarray:
    # x_j -> -x_j is index j -> (n - j) mod n on a grid starting at -L/2
    return 0.5 * (samples + np.roll(samples[::-1], 1))


def solve_ground_state(
    alpha: float,
    c: float,
    grid: Grid,
    tol: float = 1e-11,
    max_iter: int = 2000,
    seed_field: SpectralField | None = None,
) -> GroundState:
    """Petviashvili iteration for Q_c on the periodic grid.

    Q_{n+1} = S_n^2 (|D|^a + c)^{-1}(Q_n^2),
    S_n = <(|D|^a + c) Q_n, Q_n> / <Q_n^2, Q_n>.

    tol is relative: iteration stops when the equation residual drops
    below tol * ||Q||_L2.
    """
    if not (ALPHA_MIN < alpha <= ALPHA_MAX):
        raise UnsupportedRegimeError(
            f"alpha must lie in ({ALPHA_MIN}, {ALPHA_MAX}], got {alpha}; "
            "the iteration is not warranted outside the mass-subcritical range"
        )
    if c <= 0:
        raise InputError(f"speed c must be positive, got {c}")
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")

    k = grid.k
    symbol = np.abs(k) ** alpha + c
    if seed_field is not None:
        q = seed_field.samples.copy()
    else:
        # sech^2 bump, exact at alpha=2; height 3c/2, width c^{-1/alpha};
        # written via exp to avoid cosh overflow in the far tail
        width = c ** (-1.0 / alpha)
        e = np.exp(-np.abs(0.5 * grid.x / width))
        q = 1.5 * c * (2.0 * e / (1.0 + e * e)) ** 2

    dx = grid.dx
    best_rel = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        q_hat = np.fft.fft(q)
        lq = np.fft.ifft(symbol * q_hat).real
        q2 = q * q
        num = np.sum(lq * q)
        den = np.sum(q2 * q)
        if den == 0 or not np.isfinite(den):
            raise DivergenceError(
                "Petviashvili iterate collapsed", residual=best_rel, iterations=it
            )
        s_factor = num / den
        q = _even_symmetrize(np.fft.ifft(np.fft.fft(q2) / symbol).real * s_factor**2)

        res = np.fft.ifft(symbol * np.fft.fft(q)).real - q * q
        rel = np.sqrt(np.sum(res**2)) / max(np.sqrt(np.sum(q**2)), 1e-300)
        if rel <= tol:
            field = SpectralField(grid, q)
            return GroundState(
                alpha=alpha,
                c=c,
                profile=field,
                iterations=it,
                residual_norm=float(rel * np.sqrt(dx * np.sum(q**2))),
            )
        # round-off floor detection: no further improvement means tol is
        # unreachable on this grid
        if rel >= 0.999 * best_rel:
            stalled += 1
            if stalled >= 25:
                break
        else:
            stalled = 0
        best_rel = min(best_rel, rel)

    raise DivergenceError(
        f"Petviashvili did not reach tol={tol} in {max_iter} iterations "
        f"(best relative residual {best_rel:.3e})",
        residual=float(best_rel),
        iterations=max_iter,
    )


def rescale(q: GroundState, c_new: float) -> GroundState:
    """Scaling map Q_{c_new}(x) = (c_new/c) Q_c((c_new/c)^{1/a} x).

    The profile is resampled by evaluating its Fourier series at the
    scaled points (trigonometric interpolation), in chunks to bound memory.
    """
    if c_new <= 0:
        raise InputError(f"c_new must be positive, got {c_new}")
    grid = q.grid
    if c_new == q.c:
        return GroundState(q.alpha, q.c, SpectralField(grid, q.profile.samples.copy()),
                           q.iterations, q.residual_norm)
    width_new = c_new ** (-1.0 / q.alpha)
    if width_new < 4 * grid.dx:
        raise ResolutionError(
            f"rescale target width {width_new:.3g} below 4*dx={4 * grid.dx:.3g}"
        )
    lam = (c_new / q.c) ** (1.0 / q.alpha)
    ratio = c_new / q.c

    out = _dilated_samples(q.profile, lam)
    if lam > 1.0:
        # points with |lam*x| beyond the box would wrap onto the soliton's
        # periodic image; replace them with the fitted tail of the source
        out = _patch_tail(q, lam, out)
    samples = ratio * out
    field = SpectralField(grid, samples)
    res = equation_residual(q.alpha, c_new, field)
    return GroundState(q.alpha, c_new, field, q.iterations, res)


def _dilated_samples(f: SpectralField, lam: float, upsample: int = 8) -> np.ndarray:
    """Evaluate f at the points lam * x_j (band-limited upsampling + spline).

    Zero-padded inverse FFT gives the exact trigonometric interpolant on a
    grid `upsample` times finer; a periodic cubic spline then reads off the
    scaled points.  Points are wrapped periodically (callers patch the tail).
    """
    from scipy.interpolate import CubicSpline

    grid = f.grid
    n = grid.n_points
    nf = upsample * n
    c = np.fft.fftshift(f.coefficients)
    padded = np.zeros(nf, dtype=complex)
    padded[(nf - n) // 2 : (nf + n) // 2] = c
    fine = np.fft.ifft(np.fft.ifftshift(padded)).real * upsample
    xf = -0.5 * grid.box_length + (grid.box_length / nf) * np.arange(nf)
    # periodic closure for the spline
    xs = np.append(xf, 0.5 * grid.box_length)
    ys = np.append(fine, fine[0])
    spl = CubicSpline(xs, ys, bc_type="periodic")
    L = grid.box_length
    pts = np.mod(lam * grid.x + 0.5 * L, L) - 0.5 * L
    return spl(pts)


def _patch_tail(q: GroundState, lam: float, out: np.ndarray) -> np.ndarray:
    grid = q.grid
    x = grid.x
    L = grid.box_length
    y_abs = np.abs(lam * x)
    if np.max(y_abs) < 0.5 * L:
        return out
    prof = q.profile.samples
    yfit = (x >= 0.30 * L / lam) & (x <= 0.45 * L / lam) & (prof > 0)
    if np.count_nonzero(yfit) < 8:
        yfit = (x >= 0.25 * L) & (x <= 0.45 * L) & (prof > 0)
    if q.alpha < 2.0:
        # algebraic tail C (1+|y|)^{-(1+alpha)}
        c_tail = np.exp(np.mean(np.log(prof[yfit]) + (1 + q.alpha) * np.log1p(x[yfit])))
        model = c_tail / (1.0 + y_abs) ** (1.0 + q.alpha)
    else:
        # exponential tail C e^{-sqrt(c)|y|}
        logc = np.mean(np.log(np.maximum(prof[yfit], 1e-300)) + np.sqrt(q.c) * x[yfit])
        model = np.exp(np.minimum(logc - np.sqrt(q.c) * y_abs, 0.0))
    # cosine crossfade on |lam x| in [0.4 L, 0.5 L] to avoid a splice kink
    t = np.clip((y_abs - 0.40 * L) / (0.10 * L), 0.0, 1.0)
    blend = 0.5 * (1.0 - np.cos(np.pi * t))
    return (1.0 - blend) * out + blend * model


def mass_of(q: GroundState) -> float:
    """M(Q) = integral of Q^2."""
    return inner(q.profile, q.profile)


def energy_of(q: GroundState) -> float:
    """E(Q) = 1/2 int (|D|^{a/2} Q)^2 - 1/3 int Q^3."""
    half = riesz_apply(q.profile, 0.5 * q.alpha)
    kinetic = 0.5 * inner(half, half)
    cubic = integrate(SpectralField(q.grid, q.profile.samples**3)) / 3.0
    return kinetic - cubic


def gagliardo_nirenberg(alpha: float, f: SpectralField) -> float:
    """Scale-invariant Weinstein quotient whose minimizers are the ground states.

    J(u) = (int (|D|^{a/2}u)^2)^{1/(2a)} (int u^2)^{(3a-1)/(2a)} / int |u|^3.
    Invariant under u -> beta*u(gamma*x); the exponents are fixed by that
    invariance.
    """
    half = riesz_apply(f, 0.5 * alpha)
    a_term = inner(half, half)
    b_term = inner(f, f)
    c_term = integrate(SpectralField(f.grid, np.abs(f.samples) ** 3))
    if c_term == 0:
        raise InputError("J is undefined for fields with zero cubic integral")
    return a_term ** (0.5 / alpha) * b_term ** ((3 * alpha - 1) / (2 * alpha)) / c_term


def fit_decay_exponent(
    q: GroundState, window: tuple[float, float]
) -> float:
    """Least-squares slope of log Q vs log(1+x) over x in [x_lo, x_hi].

    Expected close to -(1+alpha) for algebraically decaying profiles.
    Guards: the window must stay clear of the periodic seam and of the core
    (profile below 1e-2 of the peak, above 10x the seam contamination).
    """
    x_lo, x_hi = window
    grid = q.grid
    if not (0 < x_lo < x_hi):
        raise InputError(f"window must satisfy 0 < x_lo < x_hi, got {window}")
    if x_hi >= 0.5 * grid.box_length:
        raise ContaminationError(
            f"window end {x_hi} touches the box boundary {0.5 * grid.box_length}"
        )
    x = grid.x
    prof = q.profile.samples
    peak = float(np.max(prof))
    mask = (x >= x_lo) & (x <= x_hi)
    xv = x[mask]
    vals = prof[mask]
    if np.any(vals <= 0):
        raise ContaminationError("profile non-positive inside the fit window")
    if np.max(vals) > 1e-2 * peak:
        raise InputError(
            "window starts inside the core (profile above 1e-2 * peak); move x_lo out"
        )
    # nearest periodic image sits at distance L - x; estimate its level from
    # the expected tail law and require a 10x margin over it
    mid = vals[len(vals) // 2]
    c_tail = mid * (1.0 + xv[len(xv) // 2]) ** (1.0 + q.alpha)
    image = c_tail / (1.0 + (grid.box_length - xv)) ** (1.0 + q.alpha)
    if np.any(vals < 10 * image):
        raise ContaminationError(
            "profile within 10x of the estimated periodic-image level in the window"
        )
    t = np.log1p(xv)
    y = np.log(vals)
    slope = np.polyfit(t, y, 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# ground-state cache (used by the CLI and ensemble builders)

def _cache_path(alpha: float, c: float, grid: Grid, tol: float) -> str | None:
    root = os.environ.get("FKDV_CACHE_DIR")
    if not root:
        return None
    os.makedirs(root, exist_ok=True)
    name = f"gs_a{alpha:.6g}_c{c:.6g}_n{grid.n_points}_L{grid.box_length:.6g}_t{tol:.1e}.npz"
    return os.path.join(root, name)


def solve_ground_state_cached(alpha, c, grid, tol=1e-11, **kw) -> GroundState:
    path = _cache_path(alpha, c, grid, tol)
    if path and os.path.exists(path):
        data = np.load(path)
        field = SpectralField(grid, data["samples"])
        return GroundState(alpha, c, field, int(data["iterations"]),
                           float(data["residual"]))
    gs = solve_ground_state(alpha, c, grid, tol=tol, **kw)
    if path:
        np.savez(path, samples=gs.profile.samples, iterations=gs.iterations,
                 residual=gs.residual_norm)
    return gs
