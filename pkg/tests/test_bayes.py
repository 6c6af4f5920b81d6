import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from hangerlab import bayes
from hangerlab.bayes import PosteriorParams as B
from hangerlab.core import FAILURE_MODES, InvalidArgument
from hangerlab.harness import EvalRecord

from reference_counts import FAILURE_ROWS, PRINTED_BETAS, SUPERIORITY


def record(tag, N, counts):
    return EvalRecord(tag, N, N - sum(counts), {m.value: c for m, c in zip(FAILURE_MODES, counts)})


class TestPosterior:
    @pytest.mark.parametrize("counts,params", sorted(PRINTED_BETAS.items()))
    def test_printed_parameters(self, counts, params):
        p = bayes.posterior(*counts)
        assert (p.alpha, p.beta) == params

    def test_single_failure(self):
        assert tuple(bayes.posterior(0, 1)) == (1, 2)

    @pytest.mark.parametrize("s,N", [(3, 2), (-1, 4), (0, 0), (1.5, 3)])
    def test_rejects_bad_counts(self, s, N):
        with pytest.raises(InvalidArgument):
            bayes.posterior(s, N)

    @given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.integers(1, n - 1) if n > 1 else st.just(0),
                                                           st.just(n))))
    def test_shrinkage(self, sn):
        s, N = sn
        if not 0 < s < N:
            return
        m, rate = bayes.posterior(s, N).mean, s / N
        assert min(rate, 0.5) <= m <= max(rate, 0.5)
        if rate != 0.5:
            assert min(rate, 0.5) < m < max(rate, 0.5)


class TestDensity:
    def test_uniform(self):
        for p in (0.0, 0.1, 0.5, 0.99, 1.0):
            assert bayes.beta_log_pdf(p, B(1, 1)) == 0.0

    def test_linear(self):
        assert bayes.beta_pdf(0.5, B(2, 1)) == pytest.approx(1.0, abs=1e-15)
        for p in (0.1, 0.3, 0.9):
            assert bayes.beta_pdf(p, B(2, 1)) == pytest.approx(2 * p, rel=1e-14)

    def test_endpoints(self):
        assert bayes.beta_log_pdf(0.0, B(8, 14)) == -math.inf
        assert bayes.beta_log_pdf(1.0, B(8, 14)) == -math.inf
        assert bayes.beta_log_pdf(1.5, B(2, 2)) == -math.inf
        assert bayes.beta_pdf(0.0, B(1, 3)) == pytest.approx(3.0)

    def test_normalized(self):
        val, _ = integrate.quad(lambda p: bayes.beta_pdf(p, B(8, 14)), 0, 1, epsabs=1e-12)
        assert abs(val - 1) <= 1e-8

    @given(st.floats(1, 60), st.floats(1, 60), st.floats(0.001, 0.999))
    @settings(max_examples=200)
    def test_log_pdf_matches_scipy(self, a, b, p):
        ref = special.xlogy(a - 1, p) + special.xlog1py(b - 1, -p) - special.betaln(a, b)
        assert bayes.beta_log_pdf(p, B(a, b)) == pytest.approx(ref, rel=1e-10, abs=1e-10)


class TestIncompleteBeta:
    @given(st.floats(0.5, 200), st.floats(0.5, 200), st.floats(0, 1))
    @settings(max_examples=300)
    def test_matches_scipy(self, a, b, x):
        assert abs(bayes.betainc(a, b, x) - special.betainc(a, b, x)) <= 1e-11

    def test_symmetry(self):
        for x in (0.1, 0.37, 0.8):
            assert bayes.betainc(8, 14, x) + bayes.betainc(14, 8, 1 - x) == pytest.approx(1.0, abs=1e-14)


class TestMarginalLikelihood:
    @pytest.mark.parametrize("N", [1, 5, 20, 30, 40])
    def test_identity(self, N):
        assert bayes.marginal_likelihood_check(N) <= 1e-8

    def test_rejects_zero(self):
        with pytest.raises(InvalidArgument):
            bayes.marginal_likelihood_check(0)


class TestSuperiority:
    @pytest.mark.parametrize("sa,na,sb,nb,printed", SUPERIORITY)
    def test_quadrature_reproduces_printed(self, sa, na, sb, nb, printed):
        q = bayes.prob_greater_quadrature(bayes.posterior(sa, na), bayes.posterior(sb, nb))
        assert abs(q - printed) <= 0.003

    @pytest.mark.parametrize("sa,na,sb,nb,printed", SUPERIORITY)
    def test_mc_agrees_with_quadrature(self, sa, na, sb, nb, printed):
        a, b = bayes.posterior(sa, na), bayes.posterior(sb, nb)
        q = bayes.prob_greater_quadrature(a, b)
        n = 1_000_000
        assert abs(bayes.prob_greater_mc(a, b, n, seed=0) - q) <= 3 * math.sqrt(q * (1 - q) / n) + 1e-6

    def test_quadrature_vs_scipy_oracle(self):
        # independent route: integrate pdf_b * (1 - CDF_a) with scipy's beta functions
        a, b = B(31, 11), B(20, 12)
        ref, _ = integrate.quad(lambda x: np.exp(special.xlogy(19, x) + special.xlog1py(11, -x)
                                                 - special.betaln(20, 12)) * special.betaincc(31, 11, x),
                                0, 1, epsabs=1e-13, epsrel=1e-13)
        assert abs(bayes.prob_greater_quadrature(a, b) - ref) <= 1e-9

    def test_symmetric(self):
        assert abs(bayes.prob_greater_quadrature(B(5, 5), B(5, 5)) - 0.5) <= 1e-6
        assert abs(bayes.prob_greater_mc(B(1, 1), B(1, 1), 200_000, 3) - 0.5) <= 3 * math.sqrt(0.25 / 200_000)

    @given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=60, deadline=None)
    def test_complement(self, a1, b1, a2, b2):
        a, b = B(a1, b1), B(a2, b2)
        assert bayes.prob_greater_quadrature(a, b) + bayes.prob_greater_quadrature(b, a) == pytest.approx(1.0, abs=2e-6)

    def test_mc_deterministic(self):
        a, b = B(8, 14), B(3, 19)
        assert bayes.prob_greater_mc(a, b, 10_000, 7) == bayes.prob_greater_mc(a, b, 10_000, 7)

    def test_mc_rejects_empty(self):
        with pytest.raises(InvalidArgument):
            bayes.prob_greater_mc(B(1, 1), B(1, 1), 0)

    def test_sampler_moments(self):
        x = bayes.sample_beta(B(24, 8), 400_000, np.random.default_rng(1))
        assert abs(x.mean() - 0.75) < 3e-4
        assert abs(x.var() / (24 * 8 / (32**2 * 33)) - 1) < 0.01


class TestCredibleInterval:
    def test_uniform(self):
        lo, hi = bayes.credible_interval(B(1, 1), 0.95)
        assert lo == pytest.approx(0.025, abs=1e-12) and hi == pytest.approx(0.975, abs=1e-12)

    def test_mass(self):
        p = B(24, 8)
        lo, hi = bayes.credible_interval(p, 0.9)
        assert abs(bayes.beta_cdf(hi, p) - bayes.beta_cdf(lo, p) - 0.9) <= 1e-6
        assert lo == pytest.approx(special.betaincinv(24, 8, 0.05), abs=1e-10)

    def test_concentrated(self):
        lo, hi = bayes.credible_interval(B(1000, 1000))
        assert lo < 0.5 < hi and hi - lo < 0.05

    def test_bad_mass(self):
        with pytest.raises(InvalidArgument):
            bayes.credible_interval(B(2, 2), 1.0)


class TestFailureTable:
    def test_single_mode_row(self):
        row = bayes.failure_table([record("Pi180_vis", *FAILURE_ROWS["Pi180_vis"])])[0]
        assert row["fractions"]["StuckFirst"] == 1.0
        assert all(v == 0.0 for k, v in row["fractions"].items() if k != "StuckFirst")

    def test_zero_failures(self):
        row = bayes.failure_table([record("perfect", 10, [0] * 8)])[0]
        assert row["failures"] == 0 and all(v == 0.0 for v in row["fractions"].values())

    @pytest.mark.parametrize("tag", sorted(FAILURE_ROWS))
    def test_rows(self, tag):
        N, counts = FAILURE_ROWS[tag]
        row = bayes.failure_table([record(tag, N, counts)])[0]
        assert sum(row["counts"].values()) == row["N"] - row["s"] == sum(counts)
        for m, c in zip(FAILURE_MODES, counts):
            assert row["fractions"][m.value] == c / sum(counts)
        assert sum(row["fractions"].values()) == pytest.approx(1.0)

    def test_inconsistent_record(self):
        r = record("x", 10, [1, 0, 0, 0, 0, 0, 0, 0])
        r.failure_counts["DropFirst"] = 3
        with pytest.raises(InvalidArgument):
            bayes.failure_table([r])

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            bayes.failure_table([])

    def test_format(self):
        text = bayes.format_failure_table(bayes.failure_table([record(t, *v) for t, v in FAILURE_ROWS.items()]))
        assert len(text.splitlines()) == 1 + len(FAILURE_ROWS)
        assert "11 (100%)" in text


def test_compare_report():
    rep = bayes.compare(7, 20, 2, 20, n_samples=100_000)
    assert (rep["a"]["alpha"], rep["a"]["beta"], rep["b"]["alpha"], rep["b"]["beta"]) == (8, 14, 3, 19)
    assert rep["abs_difference"] == abs(rep["p_a_greater_mc"] - rep["p_a_greater_quadrature"])
    assert rep["a"]["interval"][0] < rep["a"]["mean"] < rep["a"]["interval"][1]
