"""Moving weight partition and the localized mass/energy functionals.

The base weight is

    phi(x) = 1 - C_phi * int_{-inf}^x <y>^{-(1+a)} dy,
    C_phi  = (int_R <y>^{-(1+a)} dy)^{-1},

a smooth non-increasing switch from 1 to 0 with phi(0) = 1/2.  Scaled and
recentred copies phi_{j,A}(x) = phi((x - m_j)/A) at the midpoints
m_j = (rho_j + rho_{j+1})/2 split the line between consecutive solitons;
psi_{j,A} = phi_{j,A} - phi_{j-1,A} (with phi_{0,A} = 0, phi_{N,A} = 1)
is a partition of unity localised around the j-th soliton.

Localized functionals:
    M_j = int u^2 psi_j,
    E_j = int (1/2 u |D|^a u - 1/3 u^3) psi_j,
    Etilde_j = E_j + sigma0 M_j,
    H_j(v,v) = int (v |D|^a v + c_j v^2 - 2 R_j v^2) psi_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import InputError, GridMismatchError, PrecisionError
from .groundstate import energy_of, mass_of
from .modulation import ModulationState, SolitonEnsemble
from .spectral import Grid, SpectralField, inner, riesz_apply, translate


def phi_normalization(alpha: float) -> float:
    """C_phi = 1 / int <y>^{-(1+a)} dy by adaptive quadrature."""
    if alpha <= 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    val, err = quad(lambda y: (1.0 + y * y) ** (-0.5 * (1.0 + alpha)),
                    -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    if err > 1e-10 * val:
        raise PrecisionError(f"normalizing quadrature error {err:.2e} too large")
    return 1.0 / val


@lru_cache(maxsize=16)
def _phi_interpolant(alpha: float):
    """Monotone interpolant of phi on a fixed master grid (cached per alpha).

    Knots are geometrically refined near 0 and reach |x| = 1e6; beyond the
    last knot the analytic tail integral int_x^inf <y>^{-(1+a)} is used.
    """
    c_phi = phi_normalization(alpha)
    pos = np.geomspace(1e-4, 1e6, 4000)
    knots = np.concatenate([[0.0], pos])
    integrand = (1.0 + knots * knots) ** (-0.5 * (1.0 + alpha))
    half = np.empty_like(knots)  # half[i] = int_0^{x_i} <y>^{-(1+a)} dy
    acc = 0.0
    half[0] = 0.0
    # per-segment Gauss-Legendre (5 pt), exact to ~1e-13 on these knots
    gl_x, gl_w = np.polynomial.legendre.leggauss(5)
    for i in range(1, len(knots)):
        a, b = knots[i - 1], knots[i]
        y = 0.5 * (b - a) * gl_x + 0.5 * (b + a)
        acc += 0.5 * (b - a) * np.sum(gl_w * (1.0 + y * y) ** (-0.5 * (1.0 + alpha)))
        half[i] = acc
    interp = PchipInterpolator(knots, half, extrapolate=False)
    tail_total = 0.5 / c_phi  # int_0^inf by evenness
    return c_phi, interp, tail_total, knots[-1]


def phi_values(alpha: float, x) -> np.ndarray:
    """phi(x) with phi(-inf)=1, phi(0)=1/2, phi(+inf)=0."""
    c_phi, interp, tail_total, x_max = _phi_interpolant(alpha)
    x = np.asarray(x, dtype=float)
    ax = np.minimum(np.abs(x), x_max)
    half_int = interp(ax)
    # int_{-inf}^x = 1/(2 C) + sign(x) * int_0^{|x|}
    cdf = tail_total + np.sign(x) * half_int
    out = 1.0 - c_phi * cdf
    # analytic tail beyond the knot range: int_x^inf <y>^{-(1+a)} ~ x^{-a}/a
    beyond = np.abs(x) > x_max
    if np.any(beyond):
        tail = (np.abs(x[beyond]) ** (-alpha)) / alpha
        out[beyond] = np.where(x[beyond] > 0, c_phi * tail, 1.0 - c_phi * tail)
    return np.clip(out, 0.0, 1.0)


def phi_prime_abs(alpha: float, x) -> np.ndarray:
    """|phi'(x)| = C_phi <x>^{-(1+a)}, exact."""
    c_phi = phi_normalization(alpha)
    x = np.asarray(x, dtype=float)
    return c_phi * (1.0 + x * x) ** (-0.5 * (1.0 + alpha))


def sigma0(speeds) -> float:
    """sigma0 = min_j ( c_j/4, c_N/4, c_j c_{j+1} / (4 (c_j + c_{j+1})) ).

    Speeds are sorted internally so position-ordered views give the same
    constant as the canonical ensemble.
    """
    c = np.sort(np.asarray(speeds, dtype=float))
    if len(c) == 1:
        return float(c[0] / 4.0)
    vals = [c[-1] / 4.0]
    for j in range(len(c) - 1):
        vals.append(c[j] / 4.0)
        vals.append(c[j] * c[j + 1] / (4.0 * (c[j] + c[j + 1])))
    return float(min(vals))


def resummation_coefficients(speeds) -> dict:
    """Coefficients of the partial-sum resummation; all must be positive.

    etilde[j]: 1/c_j^2 - 1/c_{j+1}^2 (and 1/c_N^2 for the full sum);
    mass[j]:   1/2 (1/c_j - 1/c_{j+1}) (1 - 2 sigma0 (1/c_j + 1/c_{j+1}))
               (and 1/(2 c_N)(1 - 2 sigma0/c_N) for the full sum).
    """
    c = np.asarray(speeds, dtype=float)
    s0 = sigma0(speeds)
    et = [1.0 / c[j] ** 2 - 1.0 / c[j + 1] ** 2 for j in range(len(c) - 1)]
    et.append(1.0 / c[-1] ** 2)
    ms = [
        0.5 * (1.0 / c[j] - 1.0 / c[j + 1])
        * (1.0 - 2.0 * s0 * (1.0 / c[j] + 1.0 / c[j + 1]))
        for j in range(len(c) - 1)
    ]
    ms.append(0.5 / c[-1] * (1.0 - 2.0 * s0 / c[-1]))
    return {"sigma0": s0, "etilde": np.array(et), "mass": np.array(ms)}


@dataclass
class LocalizationKit:
    """Weights sampled on the grid for one set of soliton positions."""

    alpha: float
    A: float
    speeds: tuple
    positions: np.ndarray
    midpoints: np.ndarray
    c_phi: float
    phi: np.ndarray          # (N-1, n) values of phi_{j,A}
    psi: np.ndarray          # (N, n) partition of unity
    absdphi: np.ndarray      # (N-1, n) |phi'_{j,A}| = C_phi/A <(x-m_j)/A>^{-(1+a)}
    grid: Grid

    @property
    def n_solitons(self) -> int:
        return len(self.positions)

    @property
    def sigma0(self) -> float:
        return sigma0(self.speeds)


def build_kit(
    ensemble: SolitonEnsemble,
    positions,
    A: float,
    seam_guard: bool = True,
) -> LocalizationKit:
    """Sample phi_{j,A}, psi_{j,A}, |phi'_{j,A}| at the given positions.

    The weight argument is the unwrapped coordinate x - m_j on the box;
    runs must keep solitons at least box/8 from the seam (asserted when
    seam_guard is on).
    """
    if A <= 1:
        raise InputError(f"A must exceed 1, got {A}")
    rho = np.asarray(positions, dtype=float)
    grid = ensemble.grid
    n = ensemble.n_solitons
    if rho.shape != (n,):
        raise InputError(f"expected {n} positions")
    if seam_guard and np.any(np.abs(rho) > 0.5 * grid.box_length - grid.box_length / 8):
        raise InputError(
            f"positions {rho} within box/8 of the periodic seam; "
            "weights would wrap"
        )
    x = grid.x
    mids = 0.5 * (rho[:-1] + rho[1:])
    phi = np.empty((n - 1, grid.n_points))
    dphi = np.empty((n - 1, grid.n_points))
    for j, m in enumerate(mids):
        phi[j] = phi_values(ensemble.alpha, (x - m) / A)
        dphi[j] = phi_prime_abs(ensemble.alpha, (x - m) / A) / A
    psi = np.empty((n, grid.n_points))
    if n == 1:
        psi[0] = 1.0
    else:
        psi[0] = phi[0]
        for j in range(1, n - 1):
            psi[j] = phi[j] - phi[j - 1]
        psi[n - 1] = 1.0 - phi[n - 2]
    return LocalizationKit(
        alpha=ensemble.alpha,
        A=float(A),
        speeds=ensemble.speeds,
        positions=rho,
        midpoints=mids,
        c_phi=phi_normalization(ensemble.alpha),
        phi=phi,
        psi=psi,
        absdphi=dphi,
        grid=grid,
    )


def _check_kit_field(u: SpectralField, kit: LocalizationKit):
    if u.grid != kit.grid:
        raise GridMismatchError("field and kit live on different grids")


def localized_mass(u: SpectralField, kit: LocalizationKit, j: int) -> float:
    """M_j = int u^2 psi_{j,A}."""
    _check_kit_field(u, kit)
    return float(u.grid.dx * np.sum(u.samples**2 * kit.psi[j]))


def localized_energy(u: SpectralField, kit: LocalizationKit, j: int,
                     riesz_u: SpectralField | None = None) -> float:
    """E_j = int (1/2 u |D|^a u - 1/3 u^3) psi_{j,A}."""
    _check_kit_field(u, kit)
    du = riesz_u if riesz_u is not None else riesz_apply(u, kit.alpha)
    dens = 0.5 * u.samples * du.samples - u.samples**3 / 3.0
    return float(u.grid.dx * np.sum(dens * kit.psi[j]))


def e_tilde(u: SpectralField, kit: LocalizationKit, j: int,
            riesz_u: SpectralField | None = None) -> float:
    """Etilde_j = E_j + sigma0 M_j."""
    return localized_energy(u, kit, j, riesz_u) + kit.sigma0 * localized_mass(u, kit, j)


def hj_quadratic(
    v: SpectralField,
    ensemble: SolitonEnsemble,
    kit: LocalizationKit,
    j: int,
) -> float:
    """H_j(v, v) = int (v |D|^a v + c_j v^2 - 2 R_j v^2) psi_{j,A}."""
    _check_kit_field(v, kit)
    rj = translate(ensemble.profiles[j].profile, float(kit.positions[j]))
    dv = riesz_apply(v, kit.alpha)
    dens = (v.samples * dv.samples + kit.speeds[j] * v.samples**2
            - 2.0 * rj.samples * v.samples**2)
    return float(v.grid.dx * np.sum(dens * kit.psi[j]))


# ---------------------------------------------------------------------------
# audits

def monotonicity_audit(
    times,
    localized_masses,
    localized_etildes,
    beta: float,
    alpha: float,
    excluded: np.ndarray | None = None,
) -> dict:
    """Audit of the almost-monotonicity of the partial sums.

    Input arrays have shape (n_times, N): localized M_k(t) and Etilde_k(t)
    per soliton.  For each j, D_j(t0) = sum_{k<=j} (M_k(t_end) - M_k(t0))
    must stay above -C/(beta t0)^a; the report returns the worst rescaled
    deficit  min_t0 D_j(t0) * (beta t0)^a  and the fitted constant
    C_fit = max(0, -min).  Flagged times (collisions) are excluded.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(localized_masses, dtype=float)
    e = np.asarray(localized_etildes, dtype=float)
    if m.shape != e.shape or m.shape[0] != len(t):
        raise InputError("times and functional arrays are inconsistent")
    keep = np.ones(len(t), dtype=bool)
    if excluded is not None:
        keep &= ~np.asarray(excluded, dtype=bool)
    n_sol = m.shape[1]
    scale = (beta * t[keep]) ** alpha
    report = {"times": t[keep], "mass": {}, "etilde": {}, "excluded": int(np.sum(~keep))}
    for label, arr in (("mass", m), ("etilde", e)):
        partial = np.cumsum(arr, axis=1)
        for j in range(n_sol):
            d = partial[-1, j] - partial[keep, j]
            rescaled = d * scale
            report[label][j] = {
                "deficit": d,
                "rescaled": rescaled,
                "worst": float(np.min(rescaled)),
                "c_fit": float(max(0.0, -np.min(rescaled))),
            }
    return report


def expansion_audit(
    u: SpectralField,
    state: ModulationState,
    ensemble: SolitonEnsemble,
    kit: LocalizationKit,
) -> dict:
    """Gaps of the localized mass/energy expansions around the soliton sum.

    mass_gap[j] = | M_j - [ int Q_{c_j}^2 + 2 int eta R_j + int eta^2 psi_j ] |
    etilde_gap[j] = | (E_j + c_j/2 M_j) - (E(Q_{c_j}) + c_j/2 M(Q_{c_j}))
                      - 1/2 H_j(eta, eta) |
    Both are reported raw and rescaled by (beta t)^a.
    """
    eta = state.eta
    riesz_u = riesz_apply(u, kit.alpha)
    t = max(state.time, 1e-300)
    scale = (ensemble.beta * t) ** ensemble.alpha
    out = {"time": state.time, "mass_gap": [], "etilde_gap": [], "hj": [],
           "mass_gap_rescaled": [], "etilde_gap_rescaled": []}
    for j in range(ensemble.n_solitons):
        gs = ensemble.profiles[j]
        rj = translate(gs.profile, float(state.rho[j]))
        mj = localized_mass(u, kit, j)
        expand = (
            mass_of(gs)
            + 2.0 * inner(eta, rj)
            + float(u.grid.dx * np.sum(eta.samples**2 * kit.psi[j]))
        )
        gap_m = abs(mj - expand)
        hj = hj_quadratic(eta, ensemble, kit, j)
        ej = localized_energy(u, kit, j, riesz_u)
        cj = ensemble.speeds[j]
        lhs = ej + 0.5 * cj * mj
        rhs = energy_of(gs) + 0.5 * cj * mass_of(gs) + 0.5 * hj
        gap_e = abs(lhs - rhs)
        out["mass_gap"].append(gap_m)
        out["etilde_gap"].append(gap_e)
        out["hj"].append(hj)
        out["mass_gap_rescaled"].append(gap_m * scale)
        out["etilde_gap_rescaled"].append(gap_e * scale)
    return out
