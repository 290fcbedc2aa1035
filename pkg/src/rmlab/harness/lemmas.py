"""Fixed battery of distributional and algebraic checks, one verdict per item."""
from __future__ import annotations

import math
import time

import numpy as np

from ..bounds import BoundConstants, fit_exponent_constant, moment_to_tail_threshold, tail_counts
from ..coupling import comparison_estimate, fit_domination_constant, quantile_couple, smallest_working_K
from ..decomposition import (
    pad_to_square,
    reconstruct_check,
    split_columns,
    symmetrize,
    truncate_entries,
    truncated_second_factor,
    truncation_level,
    xi_squared_envelope,
    xi_statistic,
)
from ..distributions import (
    Exponential,
    Gaussian,
    GaussianProduct,
    Laplace,
    Rademacher,
    exp_half_cdf,
    harmonic_expectation,
    ks_statistic,
    renyi_transform,
    sample,
)
from ..linalg import gram_trace, jacobi_singular_values, spectral_norm, spectral_norm_batch
from ..nets import build_net, cardinality_bound, covering_check, net_norm_bounds
from ..seeding import SeedStream
from .config import ExperimentConfig, ShaperSpec
from .report import INCONCLUSIVE, RunReport, Verdict, check
from .shapers import build_shaper

CONDITIONAL_MEAN_AT_1 = (1.0 - 2.0 / math.e) / (1.0 - 1.0 / math.e)


def _se(x) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _binomial_se(s, n):
    return np.sqrt(s * (1.0 - s) / n)


def renyi_item(stream: SeedStream, n=50, count=10**5):
    x = sample(Exponential(1.0), stream, n * count).reshape(count, n)
    x.sort(axis=1)
    T = renyi_transform(x)
    ks = [ks_statistic(T[:, i], exp_half_cdf) for i in range(n)]
    means = T.mean(axis=0)
    worst = max(range(n), key=lambda i: ks[i].statistic)
    failing = [i for i in range(n) if not ks[i].passed]
    return [
        check("renyi:ks", "spacings T_i are i.i.d. Exp(1/2): KS below the 1% critical value per coordinate",
              not failing, max_statistic=ks[worst].statistic, critical_value=ks[worst].critical_value_at_01,
              worst_coordinate=worst + 1, failing_coordinates=[i + 1 for i in failing], samples=count),
        check("renyi:mean", "per-coordinate mean of T_i in [1.95, 2.05]",
              bool(np.all((means >= 1.95) & (means <= 2.05))),
              min_mean=float(means.min()), max_mean=float(means.max())),
    ]


def harmonic_item(stream: SeedStream, n=100, count=10**6, chunk=10**5):
    gen = stream.generator()
    maxima = np.concatenate([(-np.log1p(-gen.random((min(chunk, count - s), n)))).max(axis=1)
                             for s in range(0, count, chunk)])
    h = harmonic_expectation(n)
    mean, se = float(maxima.mean()), _se(maxima)
    rel = abs(mean - h) / h
    return [check("harmonic:mean", "E max of n Exp(1) = H_n; empirical mean within 2% of H_n",
                  rel <= 0.02, mean=mean, std_error=se, H_n=h, relative_error=rel, tolerance=0.02)]


def nets_item(stream: SeedStream, bracket_candidates=4 * 10**5, matrices=100):
    out = []
    for n in (2, 3):
        net = build_net(n, 0.5, stream.child("net", n), candidate_count=10**5)
        bound = cardinality_bound(n, 0.5)
        out.append(check(f"nets:cardinality:n={n}", "|net| <= 2n(1 + 2/eps)^(n-1)",
                         len(net) <= bound, size=len(net), bound=bound))
        cov = covering_check(net, 10**4, stream.child("probe", n))
        out.append(check(f"nets:covering:n={n}", "every probe within eps of the net (1e4 probes)",
                         cov.covered, worst_distance=cov.worst_distance, epsilon=0.5))
    net5 = build_net(5, 0.5, stream.child("net", 5), candidate_count=bracket_candidates)
    cov = covering_check(net5, 10**4, stream.child("probe", 5))
    Ms = stream.child("matrices").generator().standard_normal((matrices, 5, 5))
    violations = 0
    for M in Ms:
        br = net_norm_bounds(M, net5)
        exact = float(jacobi_singular_values(M)[0])
        violations += not (br.lower <= exact <= br.upper)
    if not cov.covered:
        out.append(Verdict("nets:bracketing", "net lower <= exact norm <= net upper", INCONCLUSIVE,
                           {"reason": "5-D net failed its covering check", "violations": violations,
                            "worst_distance": cov.worst_distance}))
    else:
        out.append(check("nets:bracketing", "net lower <= exact norm <= net upper on random 5x5 matrices",
                         violations == 0, violations=violations, matrices=matrices, net_size=len(net5),
                         worst_distance=cov.worst_distance))
    return out


def identities_item(stream: SeedStream, shapers):
    out = []
    gen = stream.generator()
    B = gen.standard_normal((8, 32))
    A = sample(Laplace(1.0), stream.child("A"), 32 * 8).reshape(32, 8)
    thr = float(np.median(np.linalg.norm(B, axis=0)))
    err = reconstruct_check(split_columns(B, A, thr), A)
    out.append(check("identities:reconstruct", "B_I A_I + B_Ic A_Ic = B A", err <= 1e-12,
                     max_abs_error=err, tolerance=1e-12))
    tr = truncate_entries(A * 3.0, 2.0)
    exact = bool(np.array_equal(tr.A_bounded + tr.A_tail, A * 3.0)
                 and not np.any((tr.A_bounded != 0) & (tr.A_tail != 0)))
    out.append(check("identities:truncation", "A = A 1{|A| <= a} + A 1{|A| > a} bitwise", exact))
    worst = 0.0
    traces = []
    for label, Bs in shapers:
        n = Bs.shape[0]
        norm = spectral_norm(Bs, method="exact")
        tr_val = gram_trace(Bs)
        traces.append({"shaper": label, "trace": tr_val, "n": n, "norm": norm})
        worst = max(worst, tr_val - n * norm * norm, tr_val - n)
    out.append(check("identities:trace", "Trace(B^T B) <= n |B|^2 <= n for every certified shaper",
                     worst <= 1e-9, worst_excess=worst, shapers=traces))
    pad_err = 0.0
    for m, k, n in ((2, 6, 3), (3, 6, 2), (4, 4, 4)):
        Bp = gen.standard_normal((m, k))
        Ap = gen.standard_normal((k, n))
        ref = spectral_norm(Bp @ Ap, method="exact")
        Bq, Aq = pad_to_square(Bp, Ap)
        pad_err = max(pad_err, abs(spectral_norm(Bq @ Aq, method="exact") - ref) / ref)
    out.append(check("identities:padding", "zero padding preserves |BA|", pad_err <= 1e-12,
                     max_relative_error=pad_err, tolerance=1e-12))
    rel = 0.0
    for _ in range(50):
        r, c = gen.integers(1, 17, size=2)
        M = gen.standard_normal((r, c))
        a, b = spectral_norm(M, "power"), spectral_norm(M, "exact")
        rel = max(rel, abs(a - b) / b)
    out.append(check("identities:power-vs-jacobi", "power iteration matches Jacobi SVD",
                     rel <= 1e-8, max_relative_error=rel, tolerance=1e-8))
    return out


def envelopes_item(stream: SeedStream, consts: BoundConstants, count=10**6):
    out = []
    x = sample(Laplace(1.0), stream.child("laplace"), count)
    t = np.linspace(0.0, 14.0, 57)
    s = tail_counts(x, t) / count
    bound = 2.0 * np.exp(-t / 2.0)
    excess = s - (bound + 3.0 * _binomial_se(s, count))
    out.append(check("envelopes:subexponential", "P{|X| >= t} <= 2 exp(-t / psi_1), psi_1 = 2, with 3 se",
                     bool(np.all(excess <= 0)), worst_excess=float(excess.max()), grid_points=t.size))
    # weighted sums against the Bernstein shape; the constant is fitted, not asserted
    a = 1.0 / np.arange(1, 17)
    eta = sample(Laplace(1.0), stream.child("bernstein"), 16 * 10**5).reshape(-1, 16)
    sums = eta @ a
    K = 2.0
    tb = np.linspace(0.25, float(np.abs(sums).max()), 40)
    sb = tail_counts(sums, tb) / sums.size
    expo = np.minimum(tb**2 / (K * K * float(a @ a)), tb / (K * float(a.max())))
    c_fit = fit_exponent_constant(sb / 2.0, expo)
    out.append(check("envelopes:bernstein-shape",
                     "P{|sum a_i eta_i| >= t} <= 2 exp(-c min(t^2/(K^2|a|^2), t/(K|a|_inf))) with some c > 0",
                     0.0 < c_fit, fitted_c=c_fit, reference_c=consts.c_bernstein))
    g = stream.child("gauss").generator().standard_normal((10**5, 16))
    f = np.linalg.norm(g, axis=1)
    tg = np.linspace(0.0, 4.0, 17)
    dev = f - f.mean()
    sg = np.array([np.mean(dev >= v) for v in tg])
    limit = np.exp(-consts.c0_gauss * tg**2) + 3.0 * _binomial_se(sg, f.size)
    out.append(check("envelopes:gaussian-lipschitz", "P{f - Ef >= t} <= exp(-c0 t^2) for 1-Lipschitz f",
                     bool(np.all(sg <= limit)), c0=consts.c0_gauss,
                     fitted_c0=fit_exponent_constant(sg, tg**2)))
    P = np.linalg.qr(stream.child("talagrand").generator().standard_normal((16, 4)))[0].T
    r = sample(Rademacher(), stream.child("rademacher"), 16 * 10**5).reshape(-1, 16)
    fr = np.linalg.norm(r @ P.T, axis=1)
    devr = np.abs(fr - np.median(fr))
    tt = np.linspace(0.0, 4.0, 17)
    st = np.array([np.mean(devr >= v) for v in tt])
    limit = 4.0 * np.exp(-tt**2 / 4.0) + 3.0 * _binomial_se(st, fr.size)
    out.append(check("envelopes:talagrand", "P{|f - Mf| >= t} <= 4 exp(-t^2/4) for convex 1-Lipschitz f",
                     bool(np.all(st <= limit))))
    return out


def moment_tail_item(stream: SeedStream, consts: BoundConstants, count=10**6):
    x = sample(Laplace(1.0), stream, count)
    rows, ok = [], True
    for u in (1.0, 2.0, 3.0, 5.0):
        thr = moment_to_tail_threshold(2.0, 0.0, 0.0, u, consts)
        s = float(np.mean(np.abs(x) >= thr))
        limit = math.exp(-u) + 3.0 * math.sqrt(s * (1.0 - s) / count)
        ok &= s <= limit
        rows.append({"u": u, "threshold": thr, "survival": s, "limit": limit})
    return [check("moment-to-tail", "P{|X| >= C(a1 u + a2 sqrt u + a3)} <= e^-u + 3 se", ok, rows=rows)]


def _coupling_checks(label, h, hp, grid, stream, count):
    fit = fit_domination_constant(h.abs_survival, hp.abs_survival, grid, between_points=True)
    pairs = quantile_couple(fit, h.abs_quantile, hp.abs_quantile, stream, count)
    X, Y = pairs[:, 0], pairs[:, 1]
    violations = int(np.count_nonzero(X > Y))
    zero = float(np.mean(X == 0.0))
    target = 1.0 - 1.0 / fit.c
    se = math.sqrt(max(target * (1.0 - target), 1e-300) / count)
    ks_y = ks_statistic(Y[:10**5] / fit.c, lambda v: 1.0 - hp.abs_survival(v))
    layer = X[:10**5][X[:10**5] > 0]
    ks_x = ks_statistic(layer, lambda v: 1.0 - h.abs_survival(v))
    return fit, [
        check(f"coupling:{label}:order", "X <= Y for every coupled draw", violations == 0,
              violations=violations, draws=count, c=fit.c),
        check(f"coupling:{label}:thinning", "fraction of X = 0 within 3 se of 1 - 1/c",
              abs(zero - target) <= 3.0 * se or (target == 0.0 and zero == 0.0),
              observed=zero, expected=target, std_error=se),
        check(f"coupling:{label}:marginals", "KS of Y/c vs |h'| and of X | X > 0 vs |h| at 1%",
              ks_y.passed and ks_x.passed, ks_y=ks_y.statistic, ks_y_critical=ks_y.critical_value_at_01,
              ks_x=ks_x.statistic, ks_x_critical=ks_x.critical_value_at_01),
    ]


def coupling_item(stream: SeedStream, count=10**6, trials=20000):
    out = []
    grid = np.linspace(0.0, 50.0, 2001)
    fits = {}
    for label, h, hp in (("laplace2-vs-laplace1", Laplace(2.0), Laplace(1.0)),
                         ("laplace1-vs-gaussian-product", Laplace(1.0), GaussianProduct())):
        fit, checks = _coupling_checks(label, h, hp, grid, stream.child("couple", label), count)
        fits[label] = fit
        out.extend(checks)
    triples = [("identical", Laplace(1.0), Laplace(1.0), 1.0, ("abs-sum",))]
    for label, h, hp in (("laplace2-vs-laplace1", Laplace(2.0), Laplace(1.0)),
                         ("laplace1-vs-gaussian-product", Laplace(1.0), GaussianProduct())):
        triples.append((label, h, hp, fits[label].c ** 2, ("abs-sum", "euclidean-norm", "spectral-norm")))
    triples.append(("rademacher-vs-gaussian", Rademacher(), Gaussian(), 2.0, ("euclidean-norm",)))
    rows, ok = [], True
    for label, h, hp, K, kinds in triples:
        for f in kinds:
            extra = {"shape": (4, 4), "B": np.eye(4)} if f == "spectral-norm" else {}
            res = comparison_estimate(f, h, hp, K, 16, trials, stream.child("compare", label, f), **extra)
            ok &= res.holds(3.0)
            rows.append({"triple": label, **res.summary()})
    out.append(check("coupling:comparison-direction", "E f(h) <= E f(K h') + 3 combined se on certified triples",
                     ok, rows=rows))
    Ks = [smallest_working_K("spectral-norm", Laplace(1.0), GaussianProduct(), 64, 4000,
                             stream.child("smallest-K", s), shape=(8, 8), B=np.eye(8)).K for s in (1, 2)]
    spread = abs(Ks[0] - Ks[1]) / min(Ks)
    out.append(check("coupling:smallest-K-stability", "smallest working K stable within 25% across two seeds",
                     spread <= 0.25, smallest_K=Ks, relative_spread=spread))
    return out


def conditional_mean_item(stream: SeedStream, count=10**6, K=1.0):
    x = sample(Exponential(1.0), stream, count)
    below = x[x <= K]
    cm, cse = float(below.mean()), _se(below)
    fm, fse = float(x.mean()), _se(x)
    gap_se = math.hypot(cse, fse)
    return [
        check("conditional-mean:below", "E(xi | xi <= K) <= E xi, gap at least 3 se",
              fm - cm >= 3.0 * gap_se, conditional_mean=cm, full_mean=fm, std_error=gap_se),
        check("conditional-mean:closed-form", "E(xi | xi <= 1) = (1 - 2/e)/(1 - 1/e) within 3 se",
              abs(cm - CONDITIONAL_MEAN_AT_1) <= 3.0 * cse, conditional_mean=cm,
              closed_form=CONDITIONAL_MEAN_AT_1, std_error=cse),
    ]


def symmetrization_item(stream: SeedStream, trials=10**4):
    B = build_shaper(ShaperSpec("partial_isometry", 5, 5, 20), stream.child("shaper"))
    lhs_W = np.empty((trials, 5, 5))
    rhs_W = np.empty((trials, 5, 5))
    for t in range(trials):
        s = stream.with_index(t)
        A = sample(Laplace(1.0), s.child("A"), 100).reshape(20, 5)
        At = sample(Laplace(1.0), s.child("A-copy"), 100).reshape(20, 5)
        lhs_W[t] = B @ A
        rhs_W[t] = B @ symmetrize(At, s.child("signs"))
    lhs = spectral_norm_batch(lhs_W)[0]
    rhs = 2.0 * spectral_norm_batch(rhs_W)[0]
    se = math.hypot(_se(lhs), _se(rhs))
    return [check("symmetrization", "E|BA| <= 2 E|B(eps o A~)| + 3 combined se",
                  lhs.mean() <= rhs.mean() + 3.0 * se, lhs=float(lhs.mean()), rhs=float(rhs.mean()),
                  std_error=se)]


def xi_item(stream: SeedStream, n=8, k=2504, trials=400):
    """Mean of Xi^2 for g~ = g' 1{|g'| > sqrt a} against its quadrature envelope.

    The envelope integral starts at the cutoff applied to |g'|, sqrt(a).  The
    same expression with the lower limit a is reported alongside; it sits
    orders of magnitude below the Monte Carlo mean.
    """
    B = build_shaper(ShaperSpec("replicated_average", n, n, n * k, k=k), stream)
    a = truncation_level(n)
    cutoff = math.sqrt(a)
    gen = stream.child("g-prime").generator()
    xi2 = np.array([xi_statistic(B, truncated_second_factor(gen.standard_normal((n * k, n)), cutoff)) ** 2
                    for _ in range(trials)])
    mean, se = float(xi2.mean()), _se(xi2)
    env = xi_squared_envelope(n, cutoff)
    literal = xi_squared_envelope(n, a)
    return [check("xi-envelope", "mean Xi^2 <= 2 n^2 int_{sqrt a}^inf x^2 exp(-x^2/2) dx",
                  mean <= env, mean=mean, std_error=se, envelope=env, cutoff=cutoff, a=a,
                  envelope_lower_limit_a=literal)]


def certified_shapers(seed: int):
    stream = SeedStream(seed).child("lemmas", "shapers")
    specs = [ShaperSpec("identity_embed", 8, 8, 32), ShaperSpec("partial_isometry", 16, 16, 64),
             ShaperSpec("replicated_average", 8, 8, 128, k=16), ShaperSpec("partial_isometry", 32, 32, 2048)]
    return [(f"{s.kind}:{s.m}x{s.N}", build_shaper(s, stream.child(i))) for i, s in enumerate(specs)]


ITEMS = ("renyi", "harmonic", "nets", "identities", "envelopes", "moment-to-tail", "coupling",
         "conditional-mean", "symmetrization", "xi-envelope")


def run_lemma_suite(config: ExperimentConfig, items=ITEMS) -> RunReport:
    """Run the battery; ``items`` selects a subset by name."""
    t0 = time.perf_counter()
    report = RunReport("lemmas", config={"scenario": "lemmas", "seed": config.seed, "items": list(items)},
                       seed=config.seed)
    root = SeedStream(config.seed).child("lemmas")
    runners = {
        "renyi": lambda s: renyi_item(s),
        "harmonic": lambda s: harmonic_item(s),
        "nets": lambda s: nets_item(s),
        "identities": lambda s: identities_item(s, certified_shapers(config.seed)),
        "envelopes": lambda s: envelopes_item(s, config.constants),
        "moment-to-tail": lambda s: moment_tail_item(s, config.constants),
        "coupling": lambda s: coupling_item(s),
        "conditional-mean": lambda s: conditional_mean_item(s),
        "symmetrization": lambda s: symmetrization_item(s),
        "xi-envelope": lambda s: xi_item(s),
    }
    for name in items:
        for v in runners[name](root.child(name)):
            report.verdict(v)
    report.wall_clock = time.perf_counter() - t0
    return report
