"""Acceptance battery: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary by conftest.py.
"""
import math
import time
from contextlib import contextmanager

import pytest

from rmlab.decomposition import xi_squared_envelope
from rmlab.distributions import Laplace, psi_norm
from rmlab.harness.cli import main
from rmlab.harness.config import default_config
from rmlab.harness.lemmas import run_lemma_suite
from rmlab.harness.report import PASS
from rmlab.harness.scenarios import (
    run_moment_growth,
    run_regime_almost_square,
    run_regime_small_columns,
    run_scaling_in_N,
    run_tail_decay,
)

SEED = 7
LINES = []


@contextmanager
def criterion(number, title, budget):
    """Time a criterion, enforce its runtime budget, and log one status line."""
    t0 = time.perf_counter()
    notes = {}
    status = "FAIL"
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        assert elapsed <= budget, f"took {elapsed:.1f} s, budget {budget} s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - t0
        detail = " ".join(f"{k}={v}" for k, v in notes.items())
        line = f"criterion {number:>2}: {status} {title} [{elapsed:.1f} s / {budget} s] {detail}".rstrip()
        print("\n" + line)
        LINES.append(line)


def verdicts(report):
    return {v.name: v for v in report.verdicts}


def lemma(item):
    return verdicts(run_lemma_suite(default_config("lemmas", SEED), items=(item,)))


def fmt(x):
    return f"{x:.4g}"


def test_criterion_01_n_independence():
    with criterion(1, "N-independence of E|BA|", 120) as notes:
        cfg = default_config("scaling", SEED)
        assert (cfg.m, cfg.n, cfg.N_grid, cfg.trials) == (32, 32, (32, 128, 512, 2048), 200)
        assert cfg.dist == Laplace(1.0)
        v = verdicts(run_scaling_in_N(cfg))["scaling:flatness"]
        d = v.details
        notes.update(spread=fmt(d["spread"]), limit=fmt(0.25 + d["statistical_slack"]))
        assert d["spread"] <= 0.25 + d["statistical_slack"]
        assert v.status == PASS


def test_criterion_02_linear_in_p_envelope():
    with criterion(2, "linear-in-p moment envelope", 60) as notes:
        cfg = default_config("moments", SEED)
        assert (cfg.m, cfg.n, cfg.p_grid, cfg.trials) == (16, 16, (1.0, 2.0, 4.0, 8.0), 2000)
        rep = run_moment_growth(cfg)
        rows = rep.tables["moments"]
        est = [r["estimate"] for r in rows]
        assert all(b >= a for a, b in zip(est, est[1:]))
        psi = psi_norm(cfg.dist, 1)
        assert psi == pytest.approx(2.0, rel=1e-9)
        r1, rse1 = rows[0]["ratio"], rows[0]["std_error"] / rows[0]["estimate"]
        for r in rows:
            assert r["ratio"] == pytest.approx(r["estimate"] / ((4 + 4) * r["p"] * psi), rel=1e-12)
            rse = r["std_error"] / r["estimate"]
            assert r["ratio"] <= r1 * (1 + 3 * math.hypot(rse, rse1))
        notes.update(ratios="/".join(fmt(r["ratio"]) for r in rows))
        assert all(v.status == PASS for v in rep.verdicts)


def test_criterion_03_subexponential_tail():
    with criterion(3, "subexponential tail of |W|", 120) as notes:
        cfg = default_config("tails", SEED)
        assert (cfg.m, cfg.n, cfg.trials) == (8, 8, 20000)
        rep = run_tail_decay(cfg)
        fit = rep.fits["tails"]
        notes.update(slope=fmt(fit["slope"]), r2=fmt(fit["r_squared"]))
        assert fit["slope"] < 0 and fit["r_squared"] >= 0.9
        assert verdicts(rep)["tails"].details["band"] == [1e-3, 0.5]


def test_criterion_04_renyi():
    with criterion(4, "Renyi representation of exponential spacings", 30) as notes:
        v = lemma("renyi")
        ks, mean = v["renyi:ks"].details, v["renyi:mean"].details
        notes.update(max_ks=fmt(ks["max_statistic"]), critical=fmt(ks["critical_value"]),
                     means=f"[{fmt(mean['min_mean'])},{fmt(mean['max_mean'])}]")
        assert ks["samples"] == 10**5
        assert ks["critical_value"] == pytest.approx(1.628 / math.sqrt(10**5), rel=1e-3)
        assert ks["max_statistic"] < ks["critical_value"]
        assert 1.95 <= mean["min_mean"] and mean["max_mean"] <= 2.05


def test_criterion_05_harmonic():
    with criterion(5, "harmonic expectation of the maximum", 30) as notes:
        d = lemma("harmonic")["harmonic:mean"].details
        h100 = math.fsum(1.0 / i for i in range(1, 101))
        assert h100 == pytest.approx(5.187378, abs=1e-6)
        rel = abs(d["mean"] - h100) / h100
        notes.update(mean=fmt(d["mean"]), rel_err=fmt(rel))
        assert rel <= 0.02


def test_criterion_06_nets():
    with criterion(6, "epsilon-net cardinality, covering, bracketing", 60) as notes:
        v = lemma("nets")
        for n in (2, 3):
            card = v[f"nets:cardinality:n={n}"].details
            assert card["bound"] == 2 * n * (1 + 2 / 0.5) ** (n - 1)
            assert card["size"] <= card["bound"]
            assert v[f"nets:covering:n={n}"].status == PASS
            notes[f"size_n{n}"] = card["size"]
        br = v["nets:bracketing"]
        notes.update(violations=br.details["violations"])
        assert br.status == PASS and br.details["violations"] == 0 and br.details["matrices"] == 100


def test_criterion_07_identities():
    with criterion(7, "exact algebraic identities", 30) as notes:
        v = lemma("identities")
        assert v["identities:reconstruct"].details["max_abs_error"] <= 1e-12
        assert v["identities:truncation"].status == PASS
        assert v["identities:trace"].details["worst_excess"] <= 1e-9
        assert v["identities:padding"].details["max_relative_error"] <= 1e-12
        pj = v["identities:power-vs-jacobi"].details["max_relative_error"]
        notes.update(power_vs_jacobi=fmt(pj))
        assert pj <= 1e-8
        assert all(x.status == PASS for x in v.values())


def test_criterion_08_envelopes():
    with criterion(8, "subexponential and Bernstein envelopes", 60) as notes:
        assert psi_norm(Laplace(1.0), 1) == pytest.approx(2.0, rel=1e-9)
        v = lemma("envelopes")
        sub = v["envelopes:subexponential"].details
        bern = v["envelopes:bernstein-shape"].details
        notes.update(worst_excess=fmt(sub["worst_excess"]), fitted_c=fmt(bern["fitted_c"]))
        assert sub["worst_excess"] <= 0
        assert bern["fitted_c"] > 0
        assert all(x.status == PASS for x in v.values())


def test_criterion_09_moment_to_tail():
    with criterion(9, "moment-to-tail thresholds", 30) as notes:
        rows = lemma("moment-to-tail")["moment-to-tail"].details["rows"]
        assert [r["u"] for r in rows] == [1.0, 2.0, 3.0, 5.0]
        for r in rows:
            assert r["threshold"] == pytest.approx(math.e * 2 * r["u"], rel=1e-12)
            assert r["survival"] <= r["limit"]
            assert r["limit"] >= math.exp(-r["u"])
        notes.update(survival="/".join(fmt(r["survival"]) for r in rows))


def test_criterion_10_coupling():
    with criterion(10, "tail-domination coupling", 60) as notes:
        v = lemma("coupling")
        for name, x in v.items():
            if name.endswith(":order"):
                assert x.details["violations"] == 0 and x.details["draws"] == 10**6
                notes[name.split(":")[1] + "_c"] = fmt(x.details["c"])
            if name.endswith(":thinning"):
                d = x.details
                assert abs(d["observed"] - d["expected"]) <= 3 * d["std_error"]
            if name.endswith(":marginals"):
                d = x.details
                assert d["ks_y"] < d["ks_y_critical"] and d["ks_x"] < d["ks_x_critical"]
        assert v["coupling:comparison-direction"].status == PASS
        assert all(x.status == PASS for x in v.values())


@pytest.fixture(scope="module")
def xi_details():
    return lemma("xi-envelope")["xi-envelope"].details


def test_criterion_11_regimes(xi_details):
    with criterion(11, "regime scenarios and Xi^2 envelope (cutoff sqrt a)", 180) as notes:
        sc = default_config("small-columns", SEED)
        assert (sc.n, sc.shaper.k) == (8, 2504)
        small = run_regime_small_columns(sc)
        aq = default_config("almost-square", SEED)
        assert (aq.n, aq.shaper.N) == (16, 256)
        almost = run_regime_almost_square(aq)
        bad = [v.name for v in small.verdicts + almost.verdicts if v.status != PASS]
        d = xi_details
        notes.update(regime_failures=len(bad), xi2_mean=fmt(d["mean"]), envelope=fmt(d["envelope"]))
        assert not bad
        assert d["envelope"] == pytest.approx(xi_squared_envelope(8, math.sqrt(d["a"])), rel=1e-12)
        assert d["mean"] <= d["envelope"]


@pytest.mark.xfail(strict=True, reason="envelope integrated from a rather than from the cutoff sqrt(a) "
                                       "is orders of magnitude below E Xi^2; see the decisions ledger")
def test_criterion_11_literal_xi_envelope(xi_details):
    with criterion("11b", "Xi^2 mean <= 2n^2 int_a^inf x^2 exp(-x^2/2) dx (lower limit a)", 180) as notes:
        d = xi_details
        literal = xi_squared_envelope(8, d["a"])
        notes.update(xi2_mean=fmt(d["mean"]), literal_envelope=fmt(literal))
        assert d["mean"] <= literal


def test_criterion_12_determinism(tmp_path):
    with criterion(12, "all --seed 7 is byte-identical across runs", 600) as notes:
        outs = []
        for name in ("first", "second"):
            out = tmp_path / name
            assert main(["all", "--seed", str(SEED), "--out", str(out)]) == 0
            outs.append(out)
        first = sorted(p.name for p in outs[0].iterdir() if p.name != "timing.json")
        assert first == sorted(p.name for p in outs[1].iterdir() if p.name != "timing.json")
        for f in first:
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
        notes.update(files=len(first))
