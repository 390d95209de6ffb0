"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed in the pytest terminal summary.  Every stochastic
check uses a fixed seed chosen before the check was first run.
"""

import io
import math
from contextlib import redirect_stdout

import mpmath as mp
import numpy as np
from scipy import integrate, interpolate, special, stats

from fracyule.cli import main
from fracyule.distributions import (
    FypParams,
    fractional_moment,
    log_moments,
    population_mean,
    population_variance,
    sojourn_distribution,
    state_pmf,
    waiting_distribution,
)
from fracyule.estimation import solve_fractional_moments, solve_log_moments
from fracyule.sampling import (
    RandomStream,
    sample_exponential,
    sample_positive_stable,
    simulate_marginals_alg1,
    simulate_populations_alg2,
)
from fracyule.specfun import mittag_leffler, wright_m_density
from fracyule.study import DEFAULT_NU_GRID, StudyConfig, run_study

ACCEPTANCE_SEED = 20240611


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


# ---------------------------------------------------------------------------
# 1. special functions


def test_acceptance_1_special_function_oracles(acceptance_report):
    exp_err = max(abs(mittag_leffler(z, 1.0, 1.0) / math.exp(z) - 1.0) for z in np.linspace(-20, 20, 401))

    half_err = 0.0
    with mp.workdps(50):
        for z in np.linspace(-20, 5, 251):
            e1 = float(mp.exp(mp.mpf(z) ** 2) * mp.erfc(-mp.mpf(z)))
            e2 = float(1 / mp.sqrt(mp.pi) + mp.mpf(z) * mp.exp(mp.mpf(z) ** 2) * mp.erfc(-mp.mpf(z)))
            half_err = max(
                half_err,
                abs(mittag_leffler(z, 0.5) - e1) / max(1.0, abs(e1)),
                abs(mittag_leffler(z, 0.5, 0.5) - e2) / max(1.0, abs(e2)),
            )

    xs = np.linspace(0, 10, 501)
    wright_err = max(abs(wright_m_density(0.5, x) - math.exp(-x * x / 4) / math.sqrt(math.pi)) for x in xs)

    ok = exp_err <= 1e-10 and half_err <= 1e-9 and wright_err <= 1e-8
    acceptance_report(
        1, ok, f"exp rel err {exp_err:.1e} (<=1e-10), erfc family {half_err:.1e} (<=1e-9), "
        f"half-normal Wright {wright_err:.1e} (<=1e-8)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 2. classical reduction


def test_acceptance_2_classical_reduction(acceptance_report):
    worst = 0.0
    for lam in (0.2, 1.0, 3.0):
        p = FypParams(1.0, lam)
        for t in (0.1, 0.5, 1.0, 2.0):
            q = math.exp(-lam * t)
            pmf = state_pmf(p, t, 20)
            for k, pk in zip(pmf.k, pmf.probs):
                worst = max(worst, abs(pk - q * (1 - q) ** (k - 1)))
            worst = max(worst, abs(pmf.tail_mass - (1 - q) ** 20))
            for j in (1, 2, 5, 10, 20):
                pdf, cdf = sojourn_distribution(p, j, t)
                r = math.exp(-j * lam * t)
                worst = max(worst, abs(pdf - j * lam * r) / max(1.0, j * lam * r), abs(cdf - (1 - r)))
                pdf, cdf = waiting_distribution(p, j, t)
                want = j * lam * q * (1 - q) ** (j - 1)
                worst = max(worst, abs(pdf - want) / max(1.0, want), abs(cdf - (1 - q) ** j))
            mean, var = population_mean(p, t), population_variance(p, t)
            worst = max(worst, abs(mean / math.exp(lam * t) - 1), abs(var / (math.exp(2 * lam * t) - math.exp(lam * t)) - 1))
    ok = worst <= 1e-10
    acceptance_report(2, ok, f"worst deviation {worst:.1e} over lambda x t x k grid (<=1e-10)")
    assert ok


# ---------------------------------------------------------------------------
# 3. identities


def test_acceptance_3_identity_suite(acceptance_report):
    ident_err, norm_err = 0.0, 0.0
    for nu in (0.3, 0.5, 0.8):
        for lam in (0.5, 1.0):
            p = FypParams(nu, lam)
            for t in (0.5, 1.0, 2.0):
                pmf = state_pmf(p, t, 20)
                cdfs = [1.0] + [waiting_distribution(p, j, t)[1] for j in range(1, 21)]
                for j in range(1, 21):
                    # waiting cdf = 1 - sum_{k <= j} p_k, and p_j = cdf_{j-1} - cdf_j
                    ident_err = max(
                        ident_err,
                        abs(cdfs[j] - (1.0 - math.fsum(pmf.probs[:j]))),
                        abs(pmf.probs[j - 1] - (cdfs[j - 1] - cdfs[j])),
                    )
                norm_err = max(norm_err, abs(pmf.total - 1.0))
                norm_err = max(norm_err, abs(state_pmf(p, t, 60).total - 1.0))

    lt_err = 0.0
    for nu in (0.3, 0.6, 0.9):
        for i in (1, 3):
            p = FypParams(nu, 0.8)
            for z in (0.5, 2.0):
                f = lambda t: math.exp(-z * t) * sojourn_distribution(p, i, t)[0]  # noqa: E731
                val = integrate.quad(f, 0, 1, limit=200)[0] + integrate.quad(f, 1, np.inf, limit=200)[0]
                mu = i * p.lam
                lt_err = max(lt_err, abs(val - mu / (mu + z**nu)))

    ok = ident_err <= 1e-9 and norm_err <= 1e-8 and lt_err <= 1e-6
    acceptance_report(
        3, ok, f"waiting/state identities {ident_err:.1e} (<=1e-9), normalization {norm_err:.1e} (<=1e-8), "
        f"Laplace transform {lt_err:.1e} (<=1e-6)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. samplers


def _sojourn_cdf_in_log_u(nu):
    """cdf of u = lam T_1**nu as a function of ln u: 1 - E_nu(-u), tabulated and PCHIP-interpolated."""
    lo, hi = -30.0, 14.0
    grid = np.linspace(lo, hi, 2201)
    table = np.array([1.0 - mittag_leffler(-math.exp(x), nu) for x in grid])
    spline = interpolate.PchipInterpolator(grid, table)
    mids = 0.5 * (grid[:-1] + grid[1:])[::11]
    interp_err = max(abs(spline(x) - (1.0 - mittag_leffler(-math.exp(x), nu))) for x in mids)

    def cdf(log_u):
        log_u = np.asarray(log_u)
        out = spline(np.clip(log_u, lo, hi))
        u = np.exp(log_u)
        # outside the table the leading terms of the small- and large-u expansions are exact to < 1e-12
        out = np.where(log_u < lo, u / math.gamma(1 + nu), out)
        return np.where(log_u > hi, 1.0 - 1.0 / (u * math.gamma(1 - nu)), out)

    return cdf, interp_err


def test_acceptance_4_sampler_correctness(acceptance_report):
    n = 10**6
    worst_z, failures = 0.0, []
    for m, nu in enumerate(round(0.1 * m, 1) for m in range(1, 10)):
        s = sample_positive_stable(RandomStream(ACCEPTANCE_SEED, 4, (0, m)), nu, n)
        for z in (0.5, 1.0, 2.0):
            x = np.exp(-z * s)
            score = abs(x.mean() - math.exp(-(z**nu))) / (x.std() / math.sqrt(n))
            worst_z = max(worst_z, score)
            if score > 3:
                failures.append(f"laplace nu={nu} z={z}: {score:.2f} SE")

    crit = stats.kstwo.ppf(0.99, n)
    worst_d, worst_interp = 0.0, 0.0
    for a, nu in enumerate((0.3, 0.5, 0.8)):
        cdf, interp_err = _sojourn_cdf_in_log_u(nu)
        worst_interp = max(worst_interp, interp_err)
        for b, lam in enumerate((0.2, 1.0)):
            stream = RandomStream(ACCEPTANCE_SEED, 4, (1, a, b))
            v = sample_exponential(stream, lam, n)
            log_t = np.log(v) / nu + np.log(sample_positive_stable(stream, nu, n))
            d = stats.kstest(math.log(lam) + nu * log_t, cdf).statistic
            worst_d = max(worst_d, d)
            if d >= crit:
                failures.append(f"KS nu={nu} lam={lam}: D={d:.5f}")

    ok = not failures and worst_interp < 1e-6
    acceptance_report(
        4, ok, f"worst Laplace z-score {worst_z:.2f} (<=3), worst KS D {worst_d:.5f} (<{crit:.5f}), "
        f"cdf table err {worst_interp:.1e}" + (f"; failed: {failures}" if failures else ""),
    )
    assert ok


# ---------------------------------------------------------------------------
# 5. cross-algorithm agreement


def _binned(pops, k_last):
    """Counts for k = 1..k_last-1 and the pooled tail k >= k_last."""
    return np.bincount(np.minimum(pops, k_last), minlength=k_last + 1)[1:]


def test_acceptance_5_cross_algorithm_agreement(acceptance_report):
    n = 10**5
    lam = 1.0
    results = []
    for a, nu in enumerate((0.3, 0.5, 0.8)):
        for b, t in enumerate((0.5, 1.0)):
            p = FypParams(nu, lam)
            alg1 = simulate_marginals_alg1(RandomStream(ACCEPTANCE_SEED, 5, (a, b, 1)), p, t, n)
            alg2 = simulate_populations_alg2(RandomStream(ACCEPTANCE_SEED, 5, (a, b, 2)), p, t, n)
            # pool from the first k whose expected count drops below 5
            probe = state_pmf(p, t, 200)
            k_last = int(np.argmax(n * probe.probs < 5)) + 1
            pmf = state_pmf(p, t, k_last - 1)
            expected = n * np.append(pmf.probs, pmf.tail_mass)
            c1, c2 = _binned(alg1, k_last), _binned(alg2, k_last)
            p1 = stats.chisquare(c1, expected * c1.sum() / expected.sum()).pvalue
            p2 = stats.chisquare(c2, expected * c2.sum() / expected.sum()).pvalue
            p12 = stats.chi2_contingency(np.vstack([c1, c2])).pvalue
            results.append((nu, t, k_last, p1, p2, p12))
    worst = min(min(r[3:]) for r in results)
    ok = worst > 0.01
    detail = ", ".join(f"nu={r[0]} t={r[1]} (bins {r[2]}): {min(r[3:]):.3f}" for r in results)
    acceptance_report(5, ok, f"min chi-square p {worst:.3f} (>0.01); per case min p: {detail}")
    assert ok


# ---------------------------------------------------------------------------
# 6. mean and variance


def _population_central_moments(p, t):
    """Mean, variance and fourth central moment of N(t) from its factorial moments.

    Given the M-Wright mixing variable, N - 1 is geometric with
    E[(N-1)_r | xi] = r! (e^{a xi} - 1)**r, and E e^{j a xi} = E_nu(j a).
    """
    a = p.lam * t**p.nu
    e = [mittag_leffler(j * a, p.nu) for j in range(5)]
    fact = [
        math.factorial(r) * math.fsum(math.comb(r, j) * (-1) ** (r - j) * e[j] for j in range(r + 1))
        for r in range(5)
    ]
    # raw moments of X = N - 1 through Stirling numbers of the second kind
    m1 = fact[1]
    m2 = fact[2] + fact[1]
    m3 = fact[3] + 3 * fact[2] + fact[1]
    m4 = fact[4] + 6 * fact[3] + 7 * fact[2] + fact[1]
    var = m2 - m1**2
    mu4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
    return m1 + 1.0, var, mu4


def test_acceptance_6_mean_variance(acceptance_report):
    n = 10**5
    p, t = FypParams(0.5, 1.0), 1.0
    pops = simulate_populations_alg2(RandomStream(ACCEPTANCE_SEED, 6), p, t, n).astype(float)
    mean, var = population_mean(p, t), population_variance(p, t)
    oracle_mean, oracle_var, mu4 = _population_central_moments(p, t)
    oracle_mean_closed = math.e * special.erfc(-1.0)
    se_mean = math.sqrt(var / n)
    se_var = math.sqrt((mu4 - var**2) / n)
    z_mean = (pops.mean() - mean) / se_mean
    z_var = (pops.var(ddof=1) - var) / se_var
    formulas_ok = close(mean, oracle_mean_closed, 1e-12) and close(mean, oracle_mean, 1e-10) and close(var, oracle_var, 1e-10)
    ok = formulas_ok and abs(z_mean) <= 3 and abs(z_var) <= 3
    acceptance_report(
        6, ok, f"mean {pops.mean():.4f} vs {mean:.6f} (e*erfc(-1)) z={z_mean:+.2f}; "
        f"variance {pops.var(ddof=1):.2f} vs {var:.4f} z={z_var:+.2f} (SE {se_var:.2f})",
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. estimation study at matched scale


def test_acceptance_7_study_matched_scale(acceptance_report):
    config = StudyConfig(
        nu_grid=DEFAULT_NU_GRID, lambda_grid=(0.2, 10.0), n_list=(10000,), replicates=10, seed=ACCEPTANCE_SEED
    )
    rows = run_study(config)
    worst_nu, worst_lam, bad = 0.0, 0.0, []
    for nu in config.nu_grid:
        for lam in config.lambda_grid:
            cell = [r for r in rows if r.nu_true == nu and r.lambda_true == lam]
            assert len(cell) == 10
            e_nu = float(np.median([abs(r.nu_hat - nu) for r in cell]))
            e_lam = float(np.median([abs(r.lambda_hat - lam) / lam for r in cell]))
            worst_nu, worst_lam = max(worst_nu, e_nu), max(worst_lam, e_lam)
            if not (e_nu <= 0.05 and e_lam <= 0.15 and all(r.converged for r in cell)):
                bad.append((nu, lam, e_nu, e_lam))
    ok = not bad
    acceptance_report(
        7, ok, f"worst cell median |nu_hat-nu| {worst_nu:.4f} (<=0.05), median rel lambda err {worst_lam:.4f} "
        f"(<=0.15) over {len(config.nu_grid) * 2} cells x 10 replicates" + (f"; failed {bad}" if bad else ""),
    )
    assert ok


# ---------------------------------------------------------------------------
# 8. solve-back


def test_acceptance_8_solve_back(acceptance_report):
    n = 1000
    worst = 0.0
    for nu in DEFAULT_NU_GRID:
        for lam in (0.2, 1.0, 10.0):
            p = FypParams(nu, lam)
            lm = [log_moments(p, i) for i in range(1, n + 1)]
            res = solve_log_moments(math.fsum(a for a, _ in lm) / n, math.fsum(b for _, b in lm) / n, n)
            worst = max(worst, abs(res.nu_hat - nu), abs(res.lambda_hat / lam - 1))
            kappas = (0.025, 0.05) if nu <= 0.1 else (0.05, 0.1)
            m = [math.fsum(fractional_moment(p, k, i) for i in range(1, n + 1)) / n for k in kappas]
            res = solve_fractional_moments(m[0], m[1], n, *kappas)
            worst = max(worst, abs(res.nu_hat - nu), abs(res.lambda_hat / lam - 1))
    ok = worst <= 1e-8
    acceptance_report(8, ok, f"worst recovery error {worst:.1e} over 30 grid points x 2 methods (<=1e-8)")
    assert ok


# ---------------------------------------------------------------------------
# 9. determinism


def _cli_bytes(tmp_path, name, argv):
    out = tmp_path / name
    stdout = io.StringIO()
    with redirect_stdout(stdout):
        code = main([*argv, "-o", str(out)] if argv[0] != "estimate" else argv)
    assert code == 0
    if argv[0] == "estimate":
        return stdout.getvalue().encode()
    return out.read_bytes() + (tmp_path / (name + ".manifest.json")).read_bytes()


def test_acceptance_9_determinism(tmp_path, acceptance_report):
    commands = {
        "simulate": ["simulate", "--nu", "0.5", "--lambda", "1", "--births", "1000", "--seed", "42"],
        "classical": ["simulate", "--nu", "1", "--lambda", "2", "--births", "200", "--classical", "--seed", "3"],
        "pmf": ["pmf", "--nu", "0.4", "--lambda", "1", "--t", "1", "--kmax", "50", "--seed", "1"],
        "study": ["study", "--nu-grid", "0.2,0.9", "--lambda-grid", "1", "--n-list", "100,1000",
                  "--replicates", "3", "--seed", "5"],
    }
    outcomes = {}
    for name, argv in commands.items():
        outcomes[name] = _cli_bytes(tmp_path, name, argv) == _cli_bytes(tmp_path, name, argv)
    data = tmp_path / "simulate"
    est = ["estimate", "-i", str(data), "--method", "frac-moment"]
    outcomes["estimate"] = _cli_bytes(tmp_path, "e", est) == _cli_bytes(tmp_path, "e", est)
    workers = commands["study"] + ["--workers", "2"]
    outcomes["study workers"] = _cli_bytes(tmp_path, "study", workers) == _cli_bytes(tmp_path, "study", commands["study"])
    ok = all(outcomes.values())
    acceptance_report(9, ok, "byte-identical repeats: " + ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in outcomes.items()))
    assert ok
