"""Spectral backbone: transforms, |D|^s, norms, inner products."""

import numpy as np
import pytest

from fkdvlab.errors import GridMismatchError, InputError
from fkdvlab.spectral import (
    Grid,
    SpectralField,
    dealias_mask,
    deriv_x,
    hermitian_defect,
    inner,
    integrate,
    reflect,
    riesz_apply,
    roundtrip_error,
    sobolev_norm,
    spectral_inner,
    translate,
)

import oracles


def test_grid_invariants():
    g = Grid(64, 10.0)
    assert g.dx * g.n_points == g.box_length
    assert g.x[0] == -5.0
    with pytest.raises(InputError):
        Grid(60, 10.0)  # not a power of two
    with pytest.raises(InputError):
        Grid(8, 10.0)  # below 16


def test_roundtrip_and_hermitian():
    g = Grid(256, 50.0)
    rng = np.random.default_rng(3)
    f = SpectralField(g, rng.normal(size=g.n_points))
    assert roundtrip_error(f) < 1e-12
    assert hermitian_defect(f) < 1e-12


def test_riesz_on_fourier_mode():
    g = Grid(512, 40.0)
    k = 2 * np.pi * 7 / 40.0
    f = SpectralField.from_function(g, lambda x: np.cos(k * x))
    for s in (0.5, 1.0, 1.7):
        out = riesz_apply(f, s)
        expect = abs(k) ** s * f.samples
        assert np.max(np.abs(out.samples - expect)) < 1e-10 * abs(k) ** s


def test_riesz_constant_annihilated():
    g = Grid(128, 20.0)
    one = SpectralField(g, np.ones(g.n_points))
    out = riesz_apply(one, 1.3)
    assert np.max(np.abs(out.samples)) < 1e-13


def test_riesz_rejects_bad_input():
    g = Grid(64, 10.0)
    with pytest.raises(InputError):
        SpectralField(g, np.full(g.n_points, np.nan))
    f = SpectralField(g, np.ones(g.n_points))
    with pytest.raises(InputError):
        riesz_apply(f, -0.5)


def test_riesz_gaussian_vs_singular_integral():
    # |D|^1 of e^{-x^2} against dense quadrature of the PV definition;
    # the oracle periodizes (the grid represents the box-periodized field,
    # whose algebraic |D|-tails wrap at the 1e-4 level on box 80)
    g = Grid(2048, 80.0)
    f = SpectralField.from_function(g, lambda x: np.exp(-(x**2)))
    out = riesz_apply(f, 1.0)

    u = lambda y: np.exp(-(y**2))
    d2u = lambda y: (4 * y * y - 2) * np.exp(-(y**2))
    pts = [-2.1, -1.0, -0.3, 0.0, 0.45, 1.2, 2.6]
    idx = [int(np.argmin(np.abs(g.x - p))) for p in pts]
    ref = np.array([
        oracles.riesz_periodized(u, d2u, g.x[i], g.box_length, alpha=1.0)
        for i in idx
    ])
    got = np.array([out.samples[i] for i in idx])
    scale = np.max(np.abs(ref))
    assert scale > 0.1  # oracle itself is nontrivial
    assert np.max(np.abs(got - ref)) / scale < 1e-6


def test_riesz_semigroup_and_selfadjoint():
    g = Grid(1024, 100.0)
    rng = np.random.default_rng(11)
    mask = dealias_mask(g)
    coeffs = rng.normal(size=g.n_points) + 1j * rng.normal(size=g.n_points)
    coeffs[~mask] = 0.0
    coeffs[g.n_points // 2] = 0.0
    f = SpectralField.from_coefficients(g, coeffs + np.conj(np.roll(coeffs[::-1], 1)))
    h = SpectralField.from_function(g, lambda x: np.exp(-0.1 * x**2) * np.sin(x))
    ab = riesz_apply(riesz_apply(f, 0.7), 0.6)
    direct = riesz_apply(f, 1.3)
    assert np.max(np.abs(ab.samples - direct.samples)) < 1e-10 * max(
        1.0, np.max(np.abs(direct.samples))
    )
    lhs = inner(riesz_apply(f, 0.9), h)
    rhs = inner(f, riesz_apply(h, 0.9))
    scale = np.sqrt(inner(f, f) * inner(h, h))
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_integrate_and_inner_basics():
    g = Grid(512, 30.0)
    k = 2 * np.pi * 3 / 30.0
    s = SpectralField.from_function(g, lambda x: np.sin(k * x))
    c = SpectralField.from_function(g, lambda x: np.cos(k * x))
    assert abs(integrate(s)) < 1e-13
    assert abs(inner(c, c) - 15.0) < 1e-10  # L/2
    assert abs(inner(s, c)) < 1e-12


def test_parseval():
    g = Grid(1024, 60.0)
    rng = np.random.default_rng(5)
    f = SpectralField(g, rng.normal(size=g.n_points))
    h = SpectralField(g, rng.normal(size=g.n_points))
    norm = np.sqrt(inner(f, f) * inner(h, h))
    assert abs(inner(f, h) - spectral_inner(f, h)) <= 1e-10 * norm


def test_sobolev_norm_gaussian():
    g = Grid(2048, 80.0)
    f = SpectralField.from_function(g, lambda x: np.exp(-(x**2)))
    assert abs(sobolev_norm(f, 0.0) - oracles.gaussian_l2_norm()) < 1e-8
    # half-weight convention knob: s=0 unchanged, s>0 smaller
    assert sobolev_norm(f, 1.0, half_weight=True) < sobolev_norm(f, 1.0)


def test_deriv_x_mode():
    g = Grid(256, 16.0)
    k = 2 * np.pi * 5 / 16.0
    f = SpectralField.from_function(g, lambda x: np.sin(k * x))
    out = deriv_x(f)
    assert np.max(np.abs(out.samples - k * np.cos(k * g.x))) < 1e-10


def test_translate_and_reflect():
    g = Grid(512, 64.0)
    f = SpectralField.from_function(g, lambda x: np.exp(-((x - 3) ** 2)))
    t = translate(f, 8.0)
    expect = np.exp(-((g.x - 11.0) ** 2))
    assert np.max(np.abs(t.samples - expect)) < 1e-12
    r = reflect(f)
    expect_r = np.exp(-((g.x + 3.0) ** 2))
    assert np.max(np.abs(r.samples - expect_r)) < 1e-12
    rr = reflect(reflect(f))
    assert np.array_equal(rr.samples, f.samples)


def test_grid_mismatch_raises():
    f = SpectralField(Grid(64, 10.0), np.zeros(64))
    h = SpectralField(Grid(128, 10.0), np.zeros(128))
    with pytest.raises(GridMismatchError):
        inner(f, h)
