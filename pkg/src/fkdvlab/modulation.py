"""Decomposition u = sum_j Q_{c_j}(. - rho_j) + eta with eta orthogonal to
each translated profile derivative.

The positions rho solve Phi_j(Y) = <u - R_Y, dx R_{Y,j}> = 0 by Newton
iteration with the analytic Jacobian: diagonal entries int (dx R_j)^2
- int (dxx R_j) eta plus cross terms int (dx R_j)(dx R_k), which is exactly
the invertibility structure that makes the decomposition well posed for
separated solitons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConditioningError,
    DegenerateConfigurationError,
    DivergenceError,
    InputError,
)
from .groundstate import GroundState, solve_ground_state_cached
from .spectral import Grid, SpectralField, deriv_x, inner, riesz_apply, translate


@dataclass
class SolitonEnsemble:
    """Profiles for speeds c_1 < ... < c_N on a common grid."""

    alpha: float
    speeds: tuple
    profiles: list  # GroundState per speed, same order

    def __post_init__(self):
        c = np.asarray(self.speeds, dtype=float)
        if len(c) == 0:
            raise InputError("ensemble needs at least one speed")
        if np.any(c <= 0) or np.any(np.diff(c) <= 0):
            raise InputError(
                f"speeds must be strictly increasing and positive: c_1 < ... < c_N, got {self.speeds}"
            )
        if len(self.profiles) != len(c):
            raise InputError("one profile per speed required")

    @property
    def n_solitons(self) -> int:
        return len(self.speeds)

    @property
    def grid(self) -> Grid:
        return self.profiles[0].profile.grid

    @property
    def beta(self) -> float:
        c = np.asarray(self.speeds, dtype=float)
        gaps = np.concatenate([[c[0]], np.diff(c)])
        return 0.5 * float(np.min(gaps))


def build_ensemble(alpha: float, speeds, grid: Grid, tol: float = 1e-11) -> SolitonEnsemble:
    profiles = [solve_ground_state_cached(alpha, c, grid, tol=tol) for c in speeds]
    return SolitonEnsemble(alpha=alpha, speeds=tuple(float(c) for c in speeds),
                           profiles=profiles)


@dataclass
class PositionArrangement:
    """Profiles listed in position order, independent of speed ordering.

    Backward runs in a co-moving frame reverse the speed/position pairing,
    which the SolitonEnsemble invariant forbids; this view keeps the
    modulation machinery usable there.  `beta` is inherited from the
    canonical ensemble.
    """

    alpha: float
    speeds: tuple
    profiles: list
    beta: float
    grid_ref: Grid | None = None

    @property
    def n_solitons(self) -> int:
        return len(self.speeds)

    @property
    def grid(self) -> Grid:
        return self.profiles[0].profile.grid


@dataclass
class ModulationState:
    rho: np.ndarray
    eta: SpectralField
    ortho_residuals: np.ndarray
    time: float = 0.0
    iterations: int = 0

    @property
    def n_solitons(self) -> int:
        return len(self.rho)


def assemble_R(ensemble: SolitonEnsemble, positions) -> SpectralField:
    """R(x) = sum_j Q_{c_j}(x - rho_j), translations done spectrally."""
    rho = np.asarray(positions, dtype=float)
    _check_positions(ensemble, rho)
    out = np.zeros(ensemble.grid.n_points)
    for gs, r in zip(ensemble.profiles, rho):
        out += translate(gs.profile, float(r)).samples
    return SpectralField(ensemble.grid, out)


def _check_positions(ensemble: SolitonEnsemble, rho: np.ndarray):
    if rho.shape != (ensemble.n_solitons,):
        raise InputError(
            f"expected {ensemble.n_solitons} positions, got shape {rho.shape}"
        )
    if not np.all(np.isfinite(rho)):
        raise InputError("positions must be finite")
    if ensemble.n_solitons > 1:
        gaps = np.diff(rho)
        if np.any(gaps <= 0):
            raise InputError(f"positions must be increasing, got {rho}")
        if np.any(gaps < 10 * ensemble.grid.dx):
            raise InputError(
                f"position gaps {gaps} below 10*dx={10 * ensemble.grid.dx:.3g}"
            )
    half = 0.5 * ensemble.grid.box_length
    if np.any(np.abs(rho) > half):
        raise InputError(f"positions {rho} outside the box [-{half}, {half}]")


class _ProfileBank:
    """Derivatives of each profile, translated on demand."""

    def __init__(self, ensemble: SolitonEnsemble):
        self.ensemble = ensemble
        self.d1 = [deriv_x(gs.profile) for gs in ensemble.profiles]
        self.d2 = [deriv_x(d) for d in self.d1]
        self.d1_norm2 = [inner(d, d) for d in self.d1]

    def translated(self, which: str, j: int, r: float) -> SpectralField:
        src = {"q": self.ensemble.profiles[j].profile,
               "d1": self.d1[j], "d2": self.d2[j]}[which]
        return translate(src, float(r))


def modulate(
    u: SpectralField,
    ensemble: SolitonEnsemble,
    rho_guess,
    tol: float = 1e-12,
    max_iter: int = 50,
    time: float = 0.0,
) -> ModulationState:
    """Solve the orthogonality system int (dx R_j) eta = 0 for the positions.

    Newton iteration on Y -> Phi(u, Y); raises DegenerateConfigurationError
    when the soliton overlap makes the Jacobian unreliable and
    DivergenceError when 50 iterations do not reach tol.

    tol bounds the scaled residual |int (dx R_j) eta| / ||dx R_j|| ||eta||
    (absolute fallback ||dx R_j|| * 1e-16 * ||u|| when eta is tiny).
    """
    rho = np.asarray(rho_guess, dtype=float).copy()
    n = ensemble.n_solitons
    bank = _ProfileBank(ensemble)
    u_l2 = np.sqrt(inner(u, u))

    for it in range(1, max_iter + 1):
        d1 = [bank.translated("d1", j, rho[j]) for j in range(n)]
        r_field = _sum_fields(ensemble.grid,
                              [bank.translated("q", j, rho[j]) for j in range(n)])
        eta = u - r_field
        phi = np.array([inner(eta, d1[j]) for j in range(n)])

        eta_l2 = np.sqrt(inner(eta, eta))
        scales = np.array([np.sqrt(bank.d1_norm2[j]) for j in range(n)])
        # relative to ||dx R_j|| ||eta||, with a floor at FFT round-off on u
        bound = scales * (tol * eta_l2 + 64 * np.finfo(float).eps * max(u_l2, 1.0))
        if np.all(np.abs(phi) <= bound):
            return ModulationState(
                rho=rho, eta=eta, ortho_residuals=phi, time=time, iterations=it - 1
            )

        jac = np.empty((n, n))
        for j in range(n):
            d2j = bank.translated("d2", j, rho[j])
            for k in range(n):
                jac[j, k] = inner(d1[k], d1[j]) if k != j else (
                    bank.d1_norm2[j] - inner(d2j, eta)
                )
        diag_min = np.min(np.abs(np.diag(jac)))
        off_max = np.max(np.abs(jac - np.diag(np.diag(jac)))) if n > 1 else 0.0
        if off_max > 0.5 * diag_min:
            raise DegenerateConfigurationError(
                f"overlap terms {off_max:.3e} comparable to diagonal {diag_min:.3e}; "
                "solitons too close for a reliable decomposition"
            )
        try:
            delta = np.linalg.solve(jac, -phi)
        except np.linalg.LinAlgError as exc:
            raise DegenerateConfigurationError(f"singular Jacobian: {exc}") from exc
        # backtracking keeps iterates from jumping out of the Newton basin
        # when the guess lags a narrow soliton by more than its width
        phi_norm = np.linalg.norm(phi / scales)
        lam = 1.0
        for _ in range(6):
            trial = rho + lam * delta
            r_trial = _sum_fields(
                ensemble.grid,
                [bank.translated("q", j, trial[j]) for j in range(n)],
            )
            eta_trial = u - r_trial
            phi_trial = np.array([
                inner(eta_trial, bank.translated("d1", j, trial[j]))
                for j in range(n)
            ])
            if np.linalg.norm(phi_trial / scales) <= (1 - 0.25 * lam) * phi_norm:
                break
            lam *= 0.5
        delta = lam * delta
        rho = rho + delta
        if np.max(np.abs(delta)) < 1e-14 * (1.0 + np.max(np.abs(rho))):
            # positions converged to machine precision; recompute eta and accept
            d1 = [bank.translated("d1", j, rho[j]) for j in range(n)]
            r_field = _sum_fields(
                ensemble.grid,
                [bank.translated("q", j, rho[j]) for j in range(n)],
            )
            eta = u - r_field
            phi = np.array([inner(eta, d1[j]) for j in range(n)])
            return ModulationState(
                rho=rho, eta=eta, ortho_residuals=phi, time=time, iterations=it
            )

    raise DivergenceError(
        f"modulation Newton did not converge in {max_iter} iterations",
        residual=float(np.max(np.abs(phi))),
        iterations=max_iter,
    )


def _sum_fields(grid: Grid, fields) -> SpectralField:
    out = np.zeros(grid.n_points)
    for f in fields:
        out += f.samples
    return SpectralField(grid, out)


def peaks_initial_guess(u: SpectralField, n_solitons: int) -> np.ndarray:
    """Cold-start positions from the n highest separated sample peaks."""
    from scipy.signal import find_peaks

    s = u.samples
    idx, props = find_peaks(s, height=0.1 * np.max(s),
                            distance=max(1, u.grid.n_points // 64))
    if len(idx) < n_solitons:
        raise DegenerateConfigurationError(
            f"found {len(idx)} peaks, need {n_solitons}"
        )
    order = np.argsort(props["peak_heights"])[::-1][:n_solitons]
    return np.sort(u.grid.x[idx[order]])


# ---------------------------------------------------------------------------
# instantaneous modulation velocities

def velocity_system(
    u: SpectralField,
    ensemble: SolitonEnsemble,
    state: ModulationState,
) -> tuple[np.ndarray, np.ndarray]:
    """Matrix A and vector B of the instantaneous system A rho' = B.

    Row j:  sum_k rho'_k int (dx R_k)(dx R_j) - rho'_j int (dxx R_j) eta
            = int (dxx R_j) (G(eta) - sum_k c_k R_k - 2 sum_{l<m} R_l R_m),
    with G(eta) = |D|^a eta - 2 R eta - eta^2.
    """
    n = ensemble.n_solitons
    bank = _ProfileBank(ensemble)
    rho = state.rho
    eta = state.eta
    d1 = [bank.translated("d1", j, rho[j]) for j in range(n)]
    d2 = [bank.translated("d2", j, rho[j]) for j in range(n)]
    r_parts = [bank.translated("q", j, rho[j]) for j in range(n)]
    r_field = _sum_fields(ensemble.grid, r_parts)

    a_mat = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            a_mat[j, k] = inner(d1[k], d1[j])
        a_mat[j, j] -= inner(d2[j], eta)

    g_eta = SpectralField(
        ensemble.grid,
        riesz_apply(eta, ensemble.alpha).samples
        - 2.0 * r_field.samples * eta.samples
        - eta.samples**2,
    )
    lin = np.zeros(ensemble.grid.n_points)
    for c, rp in zip(ensemble.speeds, r_parts):
        lin += c * rp.samples
    cross = np.zeros(ensemble.grid.n_points)
    for l in range(n):
        for m in range(l + 1, n):
            cross += r_parts[l].samples * r_parts[m].samples
    rhs_field = SpectralField(ensemble.grid, g_eta.samples - lin - 2.0 * cross)
    b_vec = np.array([inner(d2[j], rhs_field) for j in range(n)])

    a0_min = min(bank.d1_norm2)
    if np.max(np.abs(a_mat - np.diag(np.diag(a_mat)))) > 0.5 * a0_min or (
        np.min(np.diag(a_mat)) < 0.5 * a0_min
    ):
        raise ConditioningError(
            "A_eta comparable to the diagonal int (dx Q_c)^2; velocities unreliable"
        )
    return a_mat, b_vec


def velocity_estimate(
    history: list,
    ensemble: SolitonEnsemble,
    u_fields: list | None = None,
) -> dict:
    """Two independent velocity estimates from a modulation history.

    (i) centered finite differences of rho_j(t) on a uniform time grid;
    (ii) the instantaneous solve A rho' = B at each interior state
        (requires u_fields, the fields at the same times).

    Returns {"times", "fd", "instantaneous"}; entries of (ii) are None when
    fields are not supplied.
    """
    if len(history) < 5:
        raise InputError("velocity_estimate needs at least 5 consecutive states")
    times = np.array([st.time for st in history])
    dt = np.diff(times)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-30):
        raise InputError("states must be uniformly spaced in time")
    rho = np.stack([st.rho for st in history])
    fd = (rho[2:] - rho[:-2]) / (times[2:] - times[:-2])[:, None]

    inst = None
    if u_fields is not None:
        inst = []
        for st, u in zip(history[1:-1], u_fields[1:-1]):
            a_mat, b_vec = velocity_system(u, ensemble, st)
            inst.append(np.linalg.solve(a_mat, b_vec))
        inst = np.stack(inst)
    return {"times": times[1:-1], "fd": fd, "instantaneous": inst}


# ---------------------------------------------------------------------------
# overlap integrals (separation decay of the cross terms)

def overlap_integrals(ensemble: SolitonEnsemble, positions) -> dict:
    """Matrices int (dx R_j)(dx R_k) and int R_j (dxx R_k) at the positions."""
    rho = np.asarray(positions, dtype=float)
    _check_positions(ensemble, rho)
    n = ensemble.n_solitons
    bank = _ProfileBank(ensemble)
    d1 = [bank.translated("d1", j, rho[j]) for j in range(n)]
    d2 = [bank.translated("d2", j, rho[j]) for j in range(n)]
    q = [bank.translated("q", j, rho[j]) for j in range(n)]
    grad = np.empty((n, n))
    mixed = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            grad[j, k] = inner(d1[j], d1[k])
            mixed[j, k] = inner(q[j], d2[k])
    return {"grad": grad, "mixed": mixed}


def overlap_decay_fit(
    ensemble: SolitonEnsemble,
    separations,
    which: str = "grad",
) -> dict:
    """Fit the power-law decay of the off-diagonal overlap vs separation.

    Only meaningful for a 2-soliton ensemble placed at (-L/2, +L/2).  Flags
    contamination when the separation exceeds 40% of the box (periodic
    images start to dominate the integral through the seam).
    """
    if ensemble.n_solitons != 2:
        raise InputError("overlap_decay_fit expects a 2-soliton ensemble")
    seps = np.asarray(separations, dtype=float)
    box = ensemble.grid.box_length
    contaminated = seps > 0.4 * box
    vals = []
    for sep in seps:
        mats = overlap_integrals(ensemble, (-0.5 * sep, 0.5 * sep))
        vals.append(abs(mats[which][0, 1]))
    vals = np.asarray(vals)
    ok = (~contaminated) & (vals > 0)
    if np.count_nonzero(ok) < 2:
        raise InputError("not enough clean separations for a fit")
    slope = np.polyfit(np.log(seps[ok]), np.log(vals[ok]), 1)[0]
    return {
        "separations": seps,
        "values": vals,
        "fitted_exponent": float(slope),
        "contaminated": contaminated,
    }
