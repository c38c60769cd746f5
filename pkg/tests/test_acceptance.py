"""Acceptance criteria 1-15, one reported PASS/FAIL line each.

Each test records its verdict before asserting, so the summary printed at the
end of the session lists every criterion even when one fails.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import ACCEPTANCE_LINES
from loopsoup import capacity as cap
from loopsoup import fixed_point as fp
from loopsoup import planar, soup1d
from loopsoup import special_fn as sf
from loopsoup.cli import rows_to_csv
from loopsoup.planar import soup2d
from loopsoup.rng import RngStream
from test_capacity import grid_min_3

E = math.e
SEED = 20261016
FP_CASES = [(0.25, 0.5), (0.5, 0.25), (0.75, 0.1)]

# MC criteria register a zero-argument producer of data rows; criterion 15 reruns them
MC_RUNS = {}


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def record_mc(name, produce):
    rows = produce()
    MC_RUNS[name] = (produce, rows_to_csv(rows))
    return rows


@pytest.fixture(scope="module")
def fp_runs():
    knots = fp.make_grid(1e4)
    out = {}
    for theta, alpha in FP_CASES:
        t0 = time.perf_counter()
        f, diag = fp.iterate_to_fixed_point(theta, alpha, fp.GridFunction.constant(knots, 0.0, theta - 1.0),
                                            tol=1e-10)
        out[(theta, alpha)] = (f, diag, time.perf_counter() - t0)
    return out


def test_criterion_01_closed_form():
    t0 = time.perf_counter()
    errs = [abs(sf.f_infty(2, 0.5) - 0.5), abs(sf.f_infty(4, 0.5) - 1 / 3)]
    oracle = [abs(sf.f_infty(s, 0.5) - 2 / math.pi * math.atan(1 / math.sqrt(s - 1))) for s in (2, 4, 7.5)]
    ones = [abs(sf.f_infty(1, th) - 1) for th in (0.1, 0.25, 0.5, 0.75, 0.9)]
    dt = time.perf_counter() - t0
    ok = max(errs + oracle) <= 1e-10 and max(ones) <= 1e-12 and dt < 1
    report(1, ok, f"max err at s=2,4: {max(errs):.1e}, arctan oracle {max(oracle):.1e}, "
                  f"f(1) err {max(ones):.1e}, {dt * 1e3:.1f} ms")


def test_criterion_02_fixed_point(fp_runs):
    parts, ok = [], True
    for (theta, alpha), (f, diag, dt) in fp_runs.items():
        sel = f.knots <= 100
        err = float(np.max(np.abs(f.values[sel] - sf.f_infty(f.knots[sel], theta))))
        ok &= diag.converged and err <= 1e-3 and dt < 60
        parts.append(f"({theta},{alpha}) err {err:.1e} in {dt:.1f}s")
    report(2, ok, "; ".join(parts))


def test_criterion_03_contraction(fp_runs):
    parts, ok = [], True
    for (theta, alpha), (f, diag, dt) in fp_runs.items():
        ratio = fp.contraction_ratio(diag)
        c = sf.lipschitz_constant(alpha, theta)
        ok &= ratio <= 1.05 * c
        parts.append(f"({theta},{alpha}) ratio {ratio:.3f} <= 1.05*c={1.05 * c:.3f}")
    res = [fp.verify_bessel_fixed_point(th).residual for th in (0.25, 0.5)]
    ok &= max(res) <= 1e-6
    parts.append(f"Bessel residuals {res[0]:.1e}, {res[1]:.1e}")
    report(3, ok, "; ".join(parts))


def test_criterion_04_dichotomy(fp_runs):
    knots = fp.make_grid(1e4)
    f, diag = fp.iterate_to_fixed_point(1.2, -0.1, fp.GridFunction.constant(knots, 0.5, 0.0), tol=1e-10)
    err_12 = float(np.max(np.abs(f.values - 1)))
    one = fp.apply_T(fp.GridFunction.constant(knots, 1.0, 0.0), 0.5)
    stat = float(np.max(np.abs(one.values - 1)))
    f_half = fp_runs[(0.5, 0.25)][0]
    f2 = float(f_half(2.0))
    ok = diag.converged and err_12 <= 1e-3 and stat <= 1e-10 and abs(f2 - 0.5) <= 1e-3
    report(4, ok, f"theta=1.2 sup|f-1|={err_12:.1e}; theta=0.5: |T1-1|={stat:.1e}, other fixed point f(2)={f2:.6f}")


def test_criterion_05_asymptotics():
    parts, ok = [], True
    for th in (0.25, 0.5, 0.75):
        C = sf.f_infty_asymptotic_constant(th)
        assert C == pytest.approx(math.sin(math.pi * th) / (math.pi * (1 - th)), rel=1e-14)
        r1 = sf.f_infty(1e4, th) * 1e4 ** (1 - th) / C - 1
        scan = fp.tail_divergence_scan(th, [1e2, 1e4])
        r2 = (scan.integrals[1] - scan.integrals[0]) / (C * math.log(100)) - 1
        ok &= abs(r1) <= 0.02 and abs(r2) <= 0.05
        parts.append(f"theta={th}: prefactor {r1:+.2%}, divergence {r2:+.2%}")
    report(5, ok, "; ".join(parts))


def test_criterion_06_covering():
    def produce():
        return [e.row() for e in soup1d.covering_sweep(0.5, 2.0, [1e-2, 1e-3, 1e-4], 100_000, RngStream(SEED, 6))]

    t0 = time.perf_counter()
    rows = record_mc(6, produce)
    dt = time.perf_counter() - t0
    rows.sort(key=lambda r: -r["epsilon"])
    est = [r["estimate"] for r in rows]
    se = [r["stderr"] for r in rows]
    mono = all(est[i + 1] >= est[i] - 2 * math.hypot(se[i], se[i + 1]) for i in range(2))
    ok = abs(est[-1] - 0.5) <= 0.03 and mono and dt < 300
    report(6, ok, f"estimates (eps 1e-2,1e-3,1e-4) = {', '.join(f'{e:.4f}' for e in est)}, "
                  f"|est-0.5|={abs(est[-1] - 0.5):.4f}, monotone={mono}, {dt:.1f}s")


def test_criterion_07_arcsine():
    def produce():
        g = soup1d.last_uncovered_statistic(0.5, 2.0, 1e-4, 100_000, RngStream(SEED, 7))
        return [{"replica": i, "g_over_s": float(v)} for i, v in enumerate(g)]

    rows = record_mc(7, produce)
    g = np.array([r["g_over_s"] for r in rows])
    ks = stats.kstest(g, stats.beta(0.5, 0.5).cdf).statistic
    report(7, ks <= 0.02, f"KS vs Beta(1/2,1/2) = {ks:.4f} (n={g.size})")


def test_criterion_08_death_time_and_besq():
    t_grid = [0.5, 1.0, 2.0]

    def produce():
        rows = []
        for k, th in enumerate((0.25, 0.5)):
            tau = soup1d.excursion_death_time_samples(th, 100_000, RngStream(SEED, 80 + k))
            rows.append({"theta": th, "what": "death_ks",
                         "value": stats.kstest(tau, lambda u: sf.death_time_cdf(u, th)).statistic})
            X = soup1d.besq_marginals(th, 1.0, t_grid, 100_000, RngStream(SEED, 90 + k))
            for j, t in enumerate(t_grid, start=1):
                x = X[:, j]
                m, v = float(x.mean()), float(x.var(ddof=1))
                se_v = math.sqrt(float(np.mean((x - m) ** 4)) - v * v) / math.sqrt(x.size)
                em, ev = soup1d.besq_moments(th, 1.0, t)
                rows.append({"theta": th, "what": f"t={t}", "mean": m, "mean_z": (m - em) / (math.sqrt(v / x.size)),
                             "var": v, "var_z": (v - ev) / se_v})
        return rows

    rows = record_mc(8, produce)
    ks = [r["value"] for r in rows if r["what"] == "death_ks"]
    zs = [abs(r[k]) for r in rows if r["what"] != "death_ks" for k in ("mean_z", "var_z")]
    ok = max(ks) <= 0.01 and max(zs) <= 3
    report(8, ok, f"death-time KS {ks[0]:.4f}, {ks[1]:.4f}; BESQ moments max |z| = {max(zs):.2f}")


ANNULI = [(math.sqrt(0.1), 0.1, 1.0), (0.5, 0.1, 1.0), (0.2, 0.01, 1.0), (0.9, 0.5, 1.0), (0.05, 1e-4, 0.5)]


def test_criterion_09_planar_kernels():
    norm = 0.0
    for x in [(0.0, 0.0), (0.7, 0.0), (-0.3, 0.5), (0.0, -0.95)]:
        val, _ = integrate.quad(lambda t: planar.disc_poisson_kernel(x, (math.cos(t), math.sin(t))),
                                0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13, limit=400)
        norm = max(norm, abs(val - 1))
    ang = np.linspace(0, 2 * math.pi, 721)
    v = planar.annulus_inner_kernel_series(1e-4, ang)
    flat = float(np.max(np.abs(v / v[0] - 1)))

    start, sr, targets, dom, lead = planar.polar3_configuration()

    def produce():
        rows = []
        for k, (z, r, R) in enumerate(ANNULI):
            res = planar.annulus_hit_inner_wos(z, r, R, 100_000, RngStream(SEED, 900 + k))
            rows.append({"geometry": f"annulus z={z:.6g} r={r} R={R}", "estimate": res.estimate,
                         "stderr": res.stderr, "n": res.n, "exact": planar.bm_annulus_hit_inner(z, r, R)})
        res = planar.wos_hitting_prob(start, targets, dom, 10_000_000, RngStream(SEED, 999), start_radius=sr)
        rows.append({"geometry": "polar3", "estimate": res.estimate, "stderr": res.stderr, "n": res.n,
                     "exact": lead})
        return rows

    t0 = time.perf_counter()
    rows = record_mc(9, produce)
    dt = time.perf_counter() - t0
    zs = [abs(r["estimate"] - r["exact"]) / r["stderr"] for r in rows[:-1]]
    p3 = rows[-1]
    rel = abs(p3["estimate"] - lead) / lead
    ok = norm <= 1e-10 and flat <= 0.05 and max(zs) <= 3 and rel <= 0.10
    report(9, ok, f"Poisson normalization err {norm:.1e}; flatness {flat:.4f}; WoS annuli max |z| {max(zs):.2f}; "
                  f"polar3 {p3['estimate']:.6f} vs 3/891={lead:.6f} ({rel:.1%}, n=1e7, {dt:.0f}s)")


def test_criterion_10_loop_measure():
    mu = abs(planar.annulus_crossing_measure(E ** -4, E ** -1) - math.log(4 / 3))
    worst = 0.0
    for r1, r2 in [(E ** -4, E ** -1), (1e-3, 0.2), (0.05, 0.5)]:
        h = r1 * 1e-5
        fd = (planar.annulus_crossing_measure(r1 + h, r2) - planar.annulus_crossing_measure(r1 - h, r2)) / (2 * h)
        worst = max(worst, abs(planar.annulus_crossing_measure_dr1(r1, r2) / fd - 1))
    x, y = (0.0, 0.0), (E ** -3, 0.0)
    a = abs(planar.two_annuli_measure(x, y, E ** -30, E ** -30) - 0.01)
    # the default guard A = 10 rejects R = e^-1 (log(R/|x-y|^2) = 5 < A); A = 7 admits it
    b = abs(planar.two_annuli_measure_with_outer(x, y, E ** -30, E ** -30, E ** -1, A=7) - 5 / 900)
    ok = mu <= 1e-12 and worst <= 1e-6 and a <= 1e-12 and b <= 1e-12
    report(10, ok, f"|mu-ln(4/3)|={mu:.1e}; derivative rel err {worst:.1e}; two_annuli errs {a:.1e}, {b:.1e}")


def test_criterion_11_tau_theta():
    tau = sf.tau_theta(0.8)
    root = abs(sf.circle_heat_trace(tau) - 1.25)
    lo, hi = 1.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if sf.circle_heat_trace(mid) > 1.25 else (lo, mid)
    bis = 0.5 * (lo + hi)
    value_ok = root <= 1e-10 and abs(tau - bis) <= 1e-3 and abs(tau - 4.163) <= 1e-3
    f = [sf.f_infty(2, th) for th in (0.9, 0.95, 0.99)]
    sweep_ok = f[0] < f[1] < f[2] < 1
    thetas = (0.6, 0.7, 0.8, 0.9)
    taus = [sf.tau_theta(th) for th in thetas]
    decreasing = all(a > b for a, b in zip(taus, taus[1:]))
    # The criterion states "strictly decreasing", but the circle heat trace
    # decreases in tau, so inf{tau : trace <= 1/theta} increases with theta; the
    # criterion's own pinned value tau(0.8) = 4.163 is consistent only with that.
    # The literal statement is checked and reported as is.
    report(11, value_ok and sweep_ok and decreasing,
           f"tau(0.8)={tau:.6f} (trace residual {root:.1e}, bisection {bis:.6f}): {value_ok}; "
           f"f_infty(2, 0.9/0.95/0.99) = {', '.join(f'{v:.5f}' for v in f)} increasing: {sweep_ok}; "
           f"literal 'strictly decreasing' on {thetas}: {decreasing}, taus = "
           f"{', '.join(f'{t:.4f}' for t in taus)} are strictly increasing, which the pinned "
           "tau(0.8)=4.163 forces (see decisions ledger)")


def test_criterion_12_supermultiplicativity():
    grid = np.linspace(1, 50, 20)
    pairs = [(s, t) for s in grid for t in grid]
    worst = []
    for th in (0.25, 0.5):
        rep = fp.check_supermultiplicative(lambda s: sf.f_infty(s, th), pairs, tol=1e-10)
        worst.append(rep.worst)
    report(12, max(worst) <= 1e-10, f"max violation f(s)f(t)-f(st) = {max(worst):.1e} over 400 pairs x 2 thetas")


def test_criterion_13_capacity():
    g = np.random.default_rng(SEED)
    grid_err = 0.0
    for _ in range(20):
        cloud = cap.PointCloud(g.uniform(0, 0.5, (3, 2)), 1e-3)
        alpha = float(g.uniform(0.25, 1.5))
        m = cap.minimize_energy(cloud, alpha)
        grid_err = max(grid_err, abs(m.energy - grid_min_3(cap.kernel_matrix(cloud, alpha))))
    single = max(abs(cap.capacity(cap.point_cloud(h), a) * abs(math.log(h)) ** a - 1)
                 for h in (1e-2, E ** -4, 1e-6) for a in (0.25, 0.5, 1.0, 2.0))
    set_ok = h_ok = True
    for _ in range(15):
        pts = g.uniform(0, 0.6, (int(g.integers(4, 16)), 2))
        alpha = float(g.uniform(0.25, 1.5))
        caps = [cap.capacity(cap.PointCloud(pts[:k], 1e-4), alpha) for k in range(1, len(pts) + 1)]
        set_ok &= all(b >= a * (1 - 1e-9) for a, b in zip(caps, caps[1:]))
        ch = [cap.capacity(cap.PointCloud(pts, 1e-5), alpha, h=h) for h in (1e-5, 1e-4, 1e-3)]
        h_ok &= all(b >= a * (1 - 1e-9) for a, b in zip(ch, ch[1:]))
    ok = grid_err <= 1e-6 and single <= 1e-12 and set_ok and h_ok
    report(13, ok, f"FW vs grid max err {grid_err:.1e} (20 clouds); single-point rel err {single:.1e}; "
                   f"set-monotone={set_ok}, h-monotone={h_ok}")


N_SOUPS = 1000


def test_criterion_14_soup2d():
    def produce():
        rows = soup2d.crossing_scan([0.3, 0.5], [(0.1, 0.5), (0.05, 0.5)], N_SOUPS, RngStream(SEED, 14))
        sc = soup2d.surround_probability_scan(0.5, [1e-3, 3e-3, 1e-2, 3e-2, 0.09], N_SOUPS, RngStream(SEED, 140))
        rows += [dict(r, kind="surround") for r in sc.rows]
        rows.append({"kind": "surround_slope", "estimate": sc.slope, "stderr": sc.slope_stderr, "n": N_SOUPS})
        fk = soup2d.fkg_spot_check(0.5, (soup2d.EventSpec.crossing(0.1, 0.5), soup2d.EventSpec.crossing(0.05, 0.3)),
                                   N_SOUPS, RngStream(SEED, 141))
        rows.append({"kind": "fkg", "estimate": fk.covariance, "stderr": fk.stderr, "n": N_SOUPS})
        return rows

    t0 = time.perf_counter()
    rows = record_mc(14, produce)
    dt = time.perf_counter() - t0
    cross = {(r["theta"], r["r_in"]): (r["estimate"], r["stderr"]) for r in rows if "r_in" in r}
    tol = lambda a, b: 2 * math.hypot(a[1], b[1])  # noqa: E731
    mono_theta = all(cross[(0.5, ri)][0] >= cross[(0.3, ri)][0] - tol(cross[(0.5, ri)], cross[(0.3, ri)])
                     for ri in (0.1, 0.05))
    mono_mod = all(cross[(th, 0.05)][0] <= cross[(th, 0.1)][0] + tol(cross[(th, 0.05)], cross[(th, 0.1)])
                   for th in (0.3, 0.5))
    slope = next(r for r in rows if r.get("kind") == "surround_slope")
    fk = next(r for r in rows if r.get("kind") == "fkg")
    z = fk["estimate"] / fk["stderr"] if fk["stderr"] > 0 else 0.0
    ok = mono_theta and mono_mod and slope["estimate"] > 0 and z >= -3 and dt < 600
    report(14, ok, f"crossing monotone in theta={mono_theta}, in modulus={mono_mod}; surround slope "
                   f"{slope['estimate']:.4f} +- {slope['stderr']:.4f}; FKG cov {fk['estimate']:.4f} (z={z:.2f}); "
                   f"{dt:.0f}s at n={N_SOUPS}")


def test_criterion_15_reproducibility():
    names = sorted(MC_RUNS)
    if set(names) != {6, 7, 8, 9, 14}:
        pytest.skip("criterion 15 reruns the MC criteria; run the whole module")
    same = {n: rows_to_csv(MC_RUNS[n][0]()) == MC_RUNS[n][1] for n in names}
    report(15, all(same.values()), "byte-identical reruns: " + ", ".join(f"c{n}={v}" for n, v in same.items()))
