import math

import numpy as np
import pytest
from scipy import integrate

from loopsoup import planar
from loopsoup.errors import DomainError, RegimeError, RegimeWarning
from loopsoup.planar import Disc, Point2
from loopsoup.rng import RngStream

E = math.e


# -- disc Poisson kernel ------------------------------------------------------

def test_poisson_kernel_examples():
    assert planar.disc_poisson_kernel((0, 0), (0.6, 0.8)) == pytest.approx(1 / (2 * math.pi))
    assert planar.disc_poisson_kernel((1, 0), (-1, 0), boundary=True) == pytest.approx(1 / (4 * math.pi))
    with pytest.raises(DomainError):
        planar.disc_poisson_kernel((1.2, 0), (1, 0))
    with pytest.raises(DomainError):
        planar.disc_poisson_kernel((0, 0), (0.5, 0))


@pytest.mark.parametrize("x", [(0.0, 0.0), (0.7, 0.0), (-0.3, 0.5)])
def test_poisson_kernel_normalized(x):
    f = lambda t: planar.disc_poisson_kernel(x, (math.cos(t), math.sin(t)))  # noqa: E731
    val, _ = integrate.quad(f, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(val - 1) <= 1e-10


# -- annulus hitting ----------------------------------------------------------

def test_bm_annulus_examples():
    assert planar.bm_annulus_hit_inner(math.sqrt(0.01 * 1.0), 0.01, 1.0) == pytest.approx(0.5)
    assert planar.bm_annulus_hit_inner(1 / E, E ** -2, 1.0) == pytest.approx(0.5)
    assert planar.bm_annulus_hit_inner(1.0, 0.1, 1.0) == 0.0
    with pytest.raises(DomainError):
        planar.bm_annulus_hit_inner(2.0, 0.1, 1.0)


# -- annulus theta series ----------------------------------------------------

def fourier_kernel(q, phi, n_terms=60):
    """Normal derivative at |z|=q of the annulus Poisson kernel for the outer circle."""
    L = -math.log(q)
    n = np.arange(1, n_terms + 1)
    s = np.sum(n * q ** (n - 1) / (1 - q ** (2 * n)) * np.cos(n * phi))
    return (1 / (q * L) + 4 * s) / (2 * math.pi)


@pytest.mark.parametrize("q", [0.3, 0.1, 1e-2, 1e-4])
@pytest.mark.parametrize("phi", [0.0, 0.7, math.pi / 2, 2.5, math.pi])
def test_annulus_series_matches_fourier(q, phi):
    assert planar.annulus_inner_kernel_series(q, phi) == pytest.approx(fourier_kernel(q, phi), rel=1e-12)


def test_annulus_series_symmetry_and_flatness():
    q = 1e-4
    for a in (0.3, 1.1, 2.9):
        f = planar.annulus_inner_kernel_series(q, a)
        assert planar.annulus_inner_kernel_series(q, -a) == pytest.approx(f, rel=1e-12)
        assert planar.annulus_inner_kernel_series(q, 2 * math.pi - a) == pytest.approx(f, rel=1e-12)
    ang = np.linspace(0, 2 * math.pi, 101)
    v = planar.annulus_inner_kernel_series(q, ang)
    assert np.max(np.abs(v / v[0] - 1)) <= 0.05


def test_annulus_series_total_mass():
    for q in (0.2, 1e-3):
        val, _ = integrate.quad(lambda a: planar.annulus_inner_kernel_series(q, a), 0, 2 * math.pi,
                                epsrel=1e-12, limit=200)
        assert val == pytest.approx(planar.annulus_kernel_total(q), rel=1e-10)


def test_annulus_series_derivatives():
    q, h = 1e-3, 1e-4
    for a in (0.0, 0.4, 2.0):
        k = planar.annulus_inner_kernel_series(q, a, derivatives=True)
        fp_ = planar.annulus_inner_kernel_series(q, a + h)
        fm = planar.annulus_inner_kernel_series(q, a - h)
        assert k.d1 == pytest.approx((fp_ - fm) / (2 * h), abs=1e-6 * k.value)
        assert k.d2 == pytest.approx((fp_ - 2 * k.value + fm) / h ** 2, abs=1e-4 * k.value)
    for q in (1e-2, 1e-3, 1e-4):
        k = planar.annulus_inner_kernel_series(q, 0.0, derivatives=True)
        assert abs(k.d2) * math.log(q) ** 2 / k.value <= 10


def test_annulus_series_domain():
    with pytest.raises(DomainError):
        planar.annulus_inner_kernel_series(1.0, 0.0)
    with pytest.raises(DomainError):
        planar.annulus_inner_kernel_series(0.5, 0.0, n_terms=0)


# -- loop-measure formulas ----------------------------------------------------

def test_crossing_measure_examples():
    assert planar.annulus_crossing_measure(E ** -4, E ** -1) == pytest.approx(math.log(4 / 3), abs=1e-12)
    assert planar.annulus_crossing_measure(E ** -8, E ** -2) == pytest.approx(math.log(8 / 6), abs=1e-12)
    assert planar.annulus_crossing_measure(0.1, 1.0) == 0.0
    with pytest.raises(DomainError):
        planar.annulus_crossing_measure(0.5, 0.2)


@pytest.mark.parametrize("r1, r2", [(E ** -4, E ** -1), (1e-3, 0.2), (0.05, 0.5)])
def test_crossing_measure_derivative(r1, r2):
    h = r1 * 1e-5
    fd = (planar.annulus_crossing_measure(r1 + h, r2) - planar.annulus_crossing_measure(r1 - h, r2)) / (2 * h)
    assert planar.annulus_crossing_measure_dr1(r1, r2) == pytest.approx(fd, rel=1e-6)


def test_crossing_measure_monotone():
    r2 = np.linspace(0.02, 0.99, 50)
    mu = [planar.annulus_crossing_measure(0.01, x) for x in r2]
    assert np.all(np.diff(mu) < 0)
    assert planar.annulus_crossing_measure(0.01, 0.0100001) > 5


def test_single_loop_prob():
    assert planar.single_loop_crossing_prob(0.5, E ** -4, E ** -1) == pytest.approx(1 - math.sqrt(0.75), abs=1e-12)
    mu = planar.annulus_crossing_measure(E ** -4, E ** -1)
    assert planar.single_loop_crossing_prob(0.01, E ** -4, E ** -1) == pytest.approx(0.01 * mu, rel=0.01)
    p = [planar.single_loop_crossing_prob(t, 0.01, 0.3) for t in (0.1, 0.5, 1, 2)]
    assert np.all(np.diff(p) > 0)
    p = [planar.single_loop_crossing_prob(0.5, 0.01, r) for r in (0.1, 0.3, 0.9)]
    # reaching a larger outer radius is harder, so the probability decreases in r2
    assert np.all(np.diff(p) < 0)


# -- two annuli and three crossings ------------------------------------------

X, Y = (0.0, 0.0), (E ** -3, 0.0)


def test_two_annuli_examples():
    assert planar.two_annuli_measure(X, Y, E ** -30, E ** -30) == pytest.approx(0.01, abs=1e-12)
    # A = 10 would need R >= 10 e^-3 > e^-1; the example holds in the A = 7 regime
    v = planar.two_annuli_measure_with_outer(X, Y, E ** -30, E ** -30, E ** -1, A=7)
    assert v == pytest.approx(5 / 900, abs=1e-12)
    a = planar.two_annuli_measure(X, Y, E ** -31, E ** -35)
    b = planar.two_annuli_measure(X, Y, E ** -35, E ** -31)
    assert a == b


def test_regime_guard():
    with pytest.raises(RegimeError):
        planar.two_annuli_measure_with_outer(X, Y, E ** -30, E ** -30, E ** -1)
    with pytest.raises(RegimeError):
        planar.two_annuli_measure(X, Y, E ** -20, E ** -30)
    with pytest.warns(RegimeWarning):
        planar.two_annuli_measure(X, Y, E ** -20, E ** -30, on_violation="warn")
    with pytest.raises(RegimeError):
        planar.two_annuli_measure_with_outer(X, Y, E ** -30, E ** -30, 1.5, A=7)


def test_three_crossings():
    args = (X, Y, E ** -30, E ** -30, E ** -1)
    b = planar.three_crossings_bound(*args, theta=0.5, A=7)
    assert b.total >= b.terms["single"]
    assert set(b.terms) == {"single", "pair_xy_outer", "pair_x_outer", "pair_y_outer", "triple"}
    d = E ** -3
    mu00 = planar.two_annuli_measure(X, Y, E ** -30, E ** -30, A=7)
    far = planar.annulus_crossing_measure(1.5 * d, E ** -1)
    assert b.terms["pair_xy_outer"] == pytest.approx(0.25 * mu00 * far, rel=1e-14)
    xo = planar.annulus_crossing_measure(E ** -30, E ** -1)
    yh = planar.annulus_crossing_measure(E ** -30, d / 2)
    assert b.terms["pair_x_outer"] == pytest.approx(0.25 * xo * yh, rel=1e-14)
    b2 = planar.three_crossings_bound(*args, theta=1.0, A=7)
    assert b2.terms["single"] == pytest.approx(2 * b.terms["single"])
    for k in ("pair_xy_outer", "pair_x_outer", "pair_y_outer"):
        assert b2.terms[k] == pytest.approx(4 * b.terms[k])
    assert b2.terms["triple"] == pytest.approx(8 * b.terms["triple"])
    assert [r["scenario"] for r in b.rows()][0] == "single"


# -- walk on spheres -----------------------------------------------------------

ANNULI = [(math.sqrt(0.1), 0.1, 1.0), (0.5, 0.1, 1.0), (0.2, 0.01, 1.0), (0.9, 0.5, 1.0), (0.05, 1e-4, 0.5)]


@pytest.mark.parametrize("z, r, R", ANNULI)
def test_wos_annulus(z, r, R):
    res = planar.annulus_hit_inner_wos(z, r, R, 40000, RngStream(71))
    exact = planar.bm_annulus_hit_inner(z, r, R)
    assert abs(res.estimate - exact) <= 3 * res.stderr + 1e-12
    assert res.unresolved == 0


def test_wos_target_outside_domain_is_zero():
    dom = planar.AbsorbingDomain(Disc(Point2(0, 0), 1.0))
    res = planar.wos_hitting_prob((0.0, 0.0), [Disc(Point2(3.0, 0.0), 0.5)], dom, 2000, RngStream(1))
    assert res.estimate == 0.0


def test_wos_deterministic_and_thread_invariant():
    a = planar.annulus_hit_inner_wos(0.5, 0.1, 1.0, 70000, RngStream(5), threads=1)
    b = planar.annulus_hit_inner_wos(0.5, 0.1, 1.0, 70000, RngStream(5), threads=2)
    assert a.hits == b.hits and a.mean_steps == b.mean_steps


def test_wos_validation():
    dom = planar.AbsorbingDomain(None, ())
    with pytest.raises(DomainError):
        planar.wos_hitting_prob((0, 0), [Disc(Point2(1, 0), 0.1)], dom, 10, RngStream(1))
    with pytest.raises(DomainError):
        planar.wos_hitting_prob((0, 0), [], planar.AbsorbingDomain(), 10, RngStream(1))


def test_polar3_leading_value():
    start, sr, targets, dom, lead = planar.polar3_configuration()
    assert lead == pytest.approx(3 / 891, rel=1e-12)
    assert sr == pytest.approx(E * E ** -30)
    assert targets[0].center.x == pytest.approx(E ** -3)


def test_polar3_wos_rough():
    start, sr, targets, dom, lead = planar.polar3_configuration()
    res = planar.wos_hitting_prob(start, targets, dom, 200000, RngStream(81), start_radius=sr)
    assert abs(res.estimate - lead) <= 4 * res.stderr + 0.1 * lead
