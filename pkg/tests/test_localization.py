"""Weight partition, localized functionals, monotonicity and expansions."""

import numpy as np
import pytest
from scipy.integrate import quad

from fkdvlab.errors import GridMismatchError, InputError
from fkdvlab.evolution import EvolutionConfig, energy, evolve, mass
from fkdvlab.groundstate import energy_of, mass_of
from fkdvlab.localization import (
    build_kit,
    e_tilde,
    expansion_audit,
    hj_quadratic,
    localized_energy,
    localized_mass,
    monotonicity_audit,
    phi_normalization,
    phi_prime_abs,
    phi_values,
    resummation_coefficients,
    sigma0,
)
from fkdvlab.modulation import assemble_R, build_ensemble, modulate
from fkdvlab.spectral import Grid, SpectralField, riesz_apply


def test_phi_normalization_closed_form():
    # int <y>^{-2} dy = pi, so C_phi(alpha=1) = 1/pi
    assert abs(phi_normalization(1.0) - 1.0 / np.pi) < 1e-12
    # general closed form sqrt(pi) Gamma(a/2) / Gamma((1+a)/2)
    from math import gamma, sqrt, pi
    for a in (0.8, 1.5, 2.0):
        expect = 1.0 / (sqrt(pi) * gamma(a / 2) / gamma((1 + a) / 2))
        assert abs(phi_normalization(a) - expect) < 1e-10


def test_phi_midpoint_and_limits():
    for a in (0.8, 1.0, 1.5, 2.0):
        assert abs(phi_values(a, np.array([0.0]))[0] - 0.5) < 1e-10
        v = phi_values(a, np.array([-1e5, 1e5]))
        assert v[0] > 1 - 1e-3 and v[1] < 1e-3
    # alpha=1 closed form phi = 1/2 - arctan(x)/pi
    x = np.linspace(-200, 200, 4001)
    assert np.max(np.abs(phi_values(1.0, x) - (0.5 - np.arctan(x) / np.pi))) < 1e-8


def test_phi_monotone_and_prime():
    x = np.linspace(-80, 80, 16001)
    v = phi_values(1.3, x)
    assert np.all(np.diff(v) <= 1e-14)
    # phi'(0) = -C_phi
    assert abs(phi_prime_abs(1.3, np.array([0.0]))[0] - phi_normalization(1.3)) < 1e-12
    # |phi'| = C_phi <x>^{-(1+a)} spot check against the finite difference
    h = 1e-6
    for xx in (0.5, 4.0, 20.0):
        fd = (phi_values(1.3, np.array([xx + h]))[0]
              - phi_values(1.3, np.array([xx - h]))[0]) / (2 * h)
        assert abs(-fd - phi_prime_abs(1.3, np.array([xx]))[0]) < 1e-5 * abs(fd)


def test_sigma0_values():
    assert abs(sigma0((1.0, 2.0)) - 1.0 / 6.0) < 1e-14
    assert sigma0((1.0,)) == 0.25
    rc = resummation_coefficients((1.0, 2.0))
    assert np.all(rc["etilde"] > 0) and np.all(rc["mass"] > 0)
    # random admissible speed vectors: coefficients positive by construction
    rng = np.random.default_rng(2)
    for _ in range(25):
        c = np.sort(rng.uniform(0.2, 5.0, size=rng.integers(2, 6)))
        c += 0.05 * np.arange(len(c))  # enforce strict gaps
        rc = resummation_coefficients(tuple(c))
        assert rc["sigma0"] > 0
        assert np.all(rc["etilde"] > 0) and np.all(rc["mass"] > 0)


@pytest.fixture(scope="module")
def kit_setup(grid_std):
    ens = build_ensemble(2.0, (1.0, 2.0), grid_std)
    positions = (-60.0, 40.0)
    kit = build_kit(ens, positions, 20.0)
    u = assemble_R(ens, positions)
    return ens, kit, u


def test_partition_of_unity(kit_setup):
    _, kit, _ = kit_setup
    assert np.max(np.abs(kit.psi.sum(axis=0) - 1.0)) < 1e-10
    assert kit.psi.min() >= -1e-12
    assert np.all((kit.phi >= 0) & (kit.phi <= 1))


def test_weight_chain_rule(kit_setup):
    ens, kit, _ = kit_setup
    kit2 = build_kit(ens, kit.positions, 40.0)
    ratio = np.max(kit2.absdphi[0]) / np.max(kit.absdphi[0])
    assert abs(ratio - 0.5) < 0.005


def test_seam_guard(kit_setup):
    ens, _, _ = kit_setup
    with pytest.raises(InputError):
        build_kit(ens, (-190.0, 40.0), 20.0)
    with pytest.raises(InputError):
        build_kit(ens, (-60.0, 40.0), 0.5)  # A must exceed 1


def test_localized_sums_to_total(kit_setup):
    ens, kit, u = kit_setup
    m = [localized_mass(u, kit, j) for j in range(2)]
    e = [localized_energy(u, kit, j) for j in range(2)]
    assert abs(sum(m) - mass(u)) < 1e-10 * mass(u)
    assert abs(sum(e) - energy(u, 2.0)) < 1e-10 * abs(energy(u, 2.0))


def test_single_soliton_partition(grid_std, gs_kdv):
    ens = build_ensemble(2.0, (1.0,), grid_std)
    kit = build_kit(ens, (0.0,), 15.0)
    u = gs_kdv.profile
    assert abs(localized_mass(u, kit, 0) - mass(u)) < 1e-14
    assert abs(e_tilde(u, kit, 0)
               - (energy(u, 2.0) + kit.sigma0 * mass(u))) < 1e-12


def test_localized_mass_overlap_bound(kit_setup):
    # |M_1 - M(Q_1)| is the numerically evaluated tail overlap: the psi_1
    # weight has algebraic tails <z>^{-a}, so the neighbor contributes
    # int Q_2^2 psi_1 (evaluated by quadrature on the explicit profiles)
    ens, kit, u = kit_setup
    from fkdvlab.spectral import translate

    m1 = localized_mass(u, kit, 0)
    gap = m1 - mass_of(ens.profiles[0])
    q1 = translate(ens.profiles[0].profile, -60.0).samples
    q2 = translate(ens.profiles[1].profile, 40.0).samples
    gain = kit.grid.dx * np.sum(q2**2 * kit.psi[0])
    loss = kit.grid.dx * np.sum(q1**2 * (1.0 - kit.psi[0]))
    # exact decomposition up to the e^{-100} profile cross term
    assert abs(gap - (gain - loss)) < 1e-8
    assert abs(gap) <= gain + loss
    assert abs(gap) < 0.1 * mass_of(ens.profiles[0])


def test_grid_mismatch(kit_setup):
    _, kit, _ = kit_setup
    other = SpectralField(Grid(64, 10.0), np.zeros(64))
    with pytest.raises(GridMismatchError):
        localized_mass(other, kit, 0)


def test_hj_zero_and_quadratic_scaling(kit_setup):
    ens, kit, u = kit_setup
    zero = SpectralField.zero(kit.grid)
    assert hj_quadratic(zero, ens, kit, 0) == 0.0
    bump = SpectralField.from_function(
        kit.grid, lambda x: 1e-2 * np.exp(-0.25 * (x + 60.0) ** 2) * np.cos(x)
    )
    h1 = hj_quadratic(bump, ens, kit, 0)
    h2 = hj_quadratic(2.0 * bump, ens, kit, 0)
    assert abs(h2 - 4.0 * h1) < 1e-10 * abs(h1)


def test_expansion_audit_zero_eta(kit_setup):
    ens, kit, u = kit_setup
    st = modulate(u, ens, kit.positions)
    report = expansion_audit(u, st, ens, kit)
    # eta = 0: the mass gap equals the pure overlap term |int R^2 psi_j - int Q_j^2|
    for j in range(2):
        r2psi = kit.grid.dx * np.sum(u.samples**2 * kit.psi[j])
        pure = abs(r2psi - mass_of(ens.profiles[j]))
        assert abs(report["mass_gap"][j] - pure) < 1e-10
    assert np.max(np.abs(st.eta.samples)) < 1e-11


def test_expansion_audit_quadratic_in_eta(kit_setup):
    ens, kit, u = kit_setup

    def gap_for(amp):
        bump = SpectralField.from_function(
            kit.grid, lambda x: amp * np.exp(-0.25 * (x + 60.0) ** 2) * np.sin(x)
        )
        up = u + bump
        st = modulate(up, ens, kit.positions)
        kit_p = build_kit(ens, st.rho, kit.A)
        rep = expansion_audit(up, st, ens, kit_p)
        return rep["hj"][0]

    h1 = gap_for(1e-2)
    h2 = gap_for(2e-2)
    assert abs(h2 / h1 - 4.0) < 0.04  # quadratic to 1%


def test_monotonicity_single_soliton(grid_std, gs_kdv):
    # N=1: D_1(t0) = M(t_end) - M(t0) = conservation-level zero
    ens = build_ensemble(2.0, (1.0,), grid_std)
    u = gs_kdv.profile
    cfg = EvolutionConfig(alpha=2.0, dt=2e-3, t_start=0.0, t_end=4.0,
                          record_every=500)
    times, ms, es = [], [], []

    def obs(t, w):
        kit = build_kit(ens, (min(t - 0.0, 40.0),), 15.0)
        times.append(t + 50.0)  # audit scaling wants t0 > 0
        ms.append([localized_mass(w, kit, 0)])
        es.append([e_tilde(w, kit, 0)])

    evolve(u, cfg, observers=[obs])
    report = monotonicity_audit(times, ms, es, beta=0.5, alpha=2.0)
    assert abs(report["mass"][0]["worst"]) < 1e-6  # rescaled by (beta t)^a ~ 625
    assert report["mass"][0]["c_fit"] < 1e-6


def test_monotonicity_audit_shapes():
    times = np.linspace(50, 100, 6)
    ms = np.tile([[2.0, 3.0]], (6, 1))
    es = np.tile([[1.0, 1.5]], (6, 1))
    rep = monotonicity_audit(times, ms, es, beta=0.5, alpha=1.0,
                             excluded=np.array([0, 0, 1, 0, 0, 0], bool))
    assert rep["excluded"] == 1
    assert rep["mass"][0]["worst"] == 0.0
    with pytest.raises(InputError):
        monotonicity_audit(times[:4], ms, es, 0.5, 1.0)
