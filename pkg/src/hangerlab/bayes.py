"""Beta-binomial analysis of policy success rates.

Under a uniform prior, ``s`` successes in ``N`` Bernoulli rollouts give the
posterior ``Beta(s + 1, N - s + 1)``.  Two policies are compared through
``P(p_a > p_b)``, computed by Monte Carlo and by one-dimensional quadrature
of ``pdf_a(x) * CDF_b(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import FAILURE_MODES, InvalidArgument

MC_CHUNK = 1 << 20


class IntegrationError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


@dataclass(frozen=True)
class PosteriorParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidArgument("Beta parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def __iter__(self):
        return iter((self.alpha, self.beta))


def posterior(s: int, N: int) -> PosteriorParams:
    if int(s) != s or int(N) != N:
        raise InvalidArgument("counts must be integers")
    if N < 1 or s < 0 or s > N:
        raise InvalidArgument(f"need 0 <= s <= N and N >= 1, got s={s}, N={N}")
    return PosteriorParams(s + 1, N - s + 1)


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_log_pdf(p: float, params: PosteriorParams) -> float:
    """Log density of ``Beta(alpha, beta)`` at ``p``.

    Outside ``[0, 1]`` the result is ``-inf``.  At an endpoint the density
    is its one-sided limit: ``-inf`` when the matching shape parameter
    exceeds 1, ``-log B`` when it equals 1, and ``+inf`` below 1.
    """
    a, b = params.alpha, params.beta
    if not 0.0 <= p <= 1.0:
        return -math.inf
    lb = log_beta(a, b)
    if p == 0.0 or p == 1.0:
        shape = a if p == 0.0 else b
        if shape > 1.0:
            return -math.inf
        return -lb if shape == 1.0 else math.inf
    return (a - 1.0) * math.log(p) + (b - 1.0) * math.log1p(-p) - lb


def beta_pdf(p: float, params: PosteriorParams) -> float:
    return math.exp(beta_log_pdf(p, params))


def _betacf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise IntegrationError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``, i.e. the Beta CDF."""
    if a <= 0 or b <= 0:
        raise InvalidArgument("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))
    # the fraction converges fast on the side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_cdf(x: float, params: PosteriorParams) -> float:
    return betainc(params.alpha, params.beta, x)


def marginal_likelihood_check(N: int) -> float:
    """Largest ``|int_0^1 C(N,s) p^s (1-p)^(N-s) dp - 1/(N+1)|`` over ``s``."""
    if int(N) != N or N < 1:
        raise InvalidArgument("N must be a positive integer")
    worst = 0.0
    for s in range(N + 1):
        c = math.comb(N, s)
        val, _ = integrate.quad(lambda p: c * p**s * (1.0 - p) ** (N - s), 0.0, 1.0,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        worst = max(worst, abs(val - 1.0 / (N + 1)))
    return worst


def sample_beta(params: PosteriorParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Beta draws by the gamma ratio ``X / (X + Y)``, ``X ~ G(alpha)``, ``Y ~ G(beta)``."""
    x = rng.standard_gamma(params.alpha, size=n)
    y = rng.standard_gamma(params.beta, size=n)
    return x / (x + y)


def prob_greater_mc(a: PosteriorParams, b: PosteriorParams, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Fraction of paired draws with ``p_a > p_b``.

    One PCG64 stream seeded with ``seed``; draws come in blocks of
    ``MC_CHUNK``, each block drawing all of ``p_a`` before ``p_b``.
    """
    if n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    wins = 0
    left = int(n_samples)
    while left:
        n = min(left, MC_CHUNK)
        wins += int(np.count_nonzero(sample_beta(a, n, rng) > sample_beta(b, n, rng)))
        left -= n
    return wins / n_samples


def prob_greater_quadrature(a: PosteriorParams, b: PosteriorParams, tol: float = 1e-10) -> float:
    """``P(p_a > p_b) = int_0^1 pdf_a(x) CDF_b(x) dx`` by adaptive quadrature."""
    if min(a.alpha, a.beta, b.alpha, b.beta) < 1:
        raise InvalidArgument("quadrature route needs all shape parameters >= 1")
    f = lambda x: beta_pdf(x, a) * betainc(b.alpha, b.beta, x)  # noqa: E731
    # split at the mode of a so the peak is never straddled by a coarse panel
    mode = (a.alpha - 1.0) / (a.alpha + a.beta - 2.0) if a.alpha + a.beta > 2 else 0.5
    total, err = 0.0, 0.0
    for lo, hi in ((0.0, mode), (mode, 1.0)):
        if hi <= lo:
            continue
        val, e, info, *msg = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=200, full_output=1)
        if msg and e > 1e-6:
            raise IntegrationError(f"quadrature on [{lo}, {hi}] stopped with error {e:.2e} "
                                   f"after {info['neval']} evaluations: {msg[0]}")
        total += val
        err += e
    if err > 1e-6:
        raise IntegrationError(f"quadrature error estimate {err:.2e} exceeds 1e-6")
    return min(max(total, 0.0), 1.0)


def credible_interval(params: PosteriorParams, mass: float = 0.95, tol: float = 1e-13) -> tuple[float, float]:
    """Equal-tailed interval by bisection on the CDF."""
    if not 0.0 < mass < 1.0:
        raise InvalidArgument("mass must lie in (0, 1)")
    tail = (1.0 - mass) / 2.0
    return beta_ppf(tail, params, tol), beta_ppf(1.0 - tail, params, tol)


def beta_ppf(q: float, params: PosteriorParams, tol: float = 1e-13) -> float:
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if beta_cdf(mid, params) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------------ reports


def failure_table(records) -> list[dict]:
    """One row per record with raw counts and per-row normalized fractions.

    Fractions are ``count / failures``; a row without failures has all
    fractions 0.  ``intensity`` is the same fraction as a rounded percent.
    """
    records = list(records)
    if not records:
        raise InvalidArgument("failure table needs at least one record")
    rows = []
    for r in records:
        counts = {m.value: int(r.failure_counts.get(m.value, 0)) for m in FAILURE_MODES}
        failures = sum(counts.values())
        if failures != r.N - r.s:
            raise InvalidArgument(f"record {r.tag!r}: failure counts sum to {failures}, expected {r.N - r.s}")
        frac = {k: (v / failures if failures else 0.0) for k, v in counts.items()}
        rows.append({
            "policy": r.tag,
            "N": r.N,
            "s": r.s,
            "failures": failures,
            "counts": counts,
            "fractions": frac,
            "intensity": {k: int(math.floor(100.0 * f + 0.5)) for k, f in frac.items()},
        })
    return rows


def format_failure_table(rows: list[dict]) -> str:
    labels = [m.label for m in FAILURE_MODES]
    head = ["policy", "N", "fail"] + labels
    body = [[r["policy"], str(r["N"]), str(r["failures"])] +
            [f"{r['counts'][m.value]} ({r['intensity'][m.value]}%)" for m in FAILURE_MODES] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))  # noqa: E731
    return "\n".join([fmt(head)] + [fmt(b) for b in body])


def compare(s_a: int, n_a: int, s_b: int, n_b: int, n_samples: int = 1_000_000, seed: int = 0,
            mass: float = 0.95) -> dict:
    """Full two-policy comparison as a plain dict."""
    a, b = posterior(s_a, n_a), posterior(s_b, n_b)
    q = prob_greater_quadrature(a, b)
    mc = prob_greater_mc(a, b, n_samples, seed)
    se = math.sqrt(max(q * (1.0 - q), 0.0) / n_samples)
    return {
        "a": {"s": s_a, "N": n_a, "alpha": a.alpha, "beta": a.beta, "mean": a.mean,
              "interval": list(credible_interval(a, mass))},
        "b": {"s": s_b, "N": n_b, "alpha": b.alpha, "beta": b.beta, "mean": b.mean,
              "interval": list(credible_interval(b, mass))},
        "mass": mass,
        "p_a_greater_quadrature": q,
        "p_a_greater_mc": mc,
        "abs_difference": abs(mc - q),
        "mc_standard_error": se,
        "n_samples": n_samples,
        "seed": seed,
    }
