import json
import math

import numpy as np
import pytest

from rmlab.distributions import Gaussian, Laplace, PointMass, Rademacher, sample
from rmlab.errors import ConfigError, ConstructionError, PreconditionError, ShapeError
from rmlab.harness import RunReport, emit_report
from rmlab.harness.cli import main
from rmlab.harness.config import ExperimentConfig, ShaperSpec, config_from_dict, default_config, load_config
from rmlab.harness.report import FAIL, INCONCLUSIVE, MOMENT_COLUMNS, PASS, check
from rmlab.harness.scenarios import (
    estimate_norm_moments,
    required_k,
    run_moment_growth,
    run_regime_almost_square,
    run_regime_small_columns,
    run_scaling_in_N,
    run_tail_decay,
    trial_norms,
    trial_stream,
)
from rmlab.harness.shapers import build_shaper, identity_embed, replicated_average
from rmlab.linalg import column_norms, spectral_norm
from rmlab.decomposition import split_threshold
from rmlab.seeding import SeedStream


def test_identity_embed():
    B = identity_embed(3, 5)
    assert spectral_norm(B, "exact") == 1.0
    assert column_norms(B).tolist() == [1, 1, 1, 0, 0]


def test_replicated_average():
    B = replicated_average(2, 4)
    assert B.shape == (2, 8)
    assert np.allclose(column_norms(B), 0.5, rtol=0, atol=1e-15)
    assert np.allclose(B @ B.T, np.eye(2), rtol=0, atol=1e-15)


def test_partial_isometry_rows_orthonormal():
    B = build_shaper(ShaperSpec("partial_isometry", 8, 8, 64), SeedStream(1))
    assert np.max(np.abs(B @ B.T - np.eye(8))) <= 1e-10


def test_shaper_errors():
    with pytest.raises(ShapeError):
        build_shaper(ShaperSpec("replicated_average", 2, 2, 9, k=4), SeedStream(1))
    with pytest.raises(ConstructionError):
        build_shaper(ShaperSpec("explicit", 1, 1, 1, matrix=((2.0,),)), SeedStream(1))
    with pytest.raises(ConfigError):
        ShaperSpec("circulant")


def cfg(**kw):
    base = dict(scenario="moments", shaper=ShaperSpec("partial_isometry", 4, 4, 8), dist=Laplace(1.0),
                trials=200, p_grid=(1.0, 2.0), seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_point_mass_moments_are_zero():
    for mv in estimate_norm_moments(cfg(dist=PointMass())):
        assert mv.value == 0.0


def test_identity_embed_square_is_plain_mean():
    c = cfg(shaper=ShaperSpec("identity_embed", 4, 4, 4), p_grid=(1.0,))
    (mv,) = estimate_norm_moments(c, keys=("k",))
    norms = [spectral_norm(sample(c.dist, trial_stream(c, t, ("k",)), 16).reshape(4, 4), "exact")
             for t in range(c.trials)]
    assert mv.value == pytest.approx(np.mean(norms), rel=1e-8)


def test_power_vs_exact_on_same_realizations():
    c = cfg(shaper=ShaperSpec("partial_isometry", 16, 16, 16), dist=Gaussian(), trials=500, p_grid=(1.0,))
    (fast,) = estimate_norm_moments(c)
    (slow,) = estimate_norm_moments(cfg(shaper=c.shaper, dist=Gaussian(), trials=500, p_grid=(1.0,),
                                        method="exact"))
    assert abs(fast.value - slow.value) <= 0.15 * slow.value


def test_trial_norms_workers_and_chunks_agree():
    c = cfg(trials=600)
    B = build_shaper(c.shaper, SeedStream(0))
    one, _ = trial_norms(c, B)
    two, _ = trial_norms(cfg(trials=600, workers=2), B)
    assert np.array_equal(one, two)
    # a prefix of trials is reproduced exactly by a shorter run
    short, _ = trial_norms(cfg(trials=300), B)
    assert np.array_equal(one[:300], short)


def test_scaling_gaussian_single_row():
    c = ExperimentConfig("scaling", ShaperSpec("partial_isometry", 1, 1, 1), Gaussian(), trials=400,
                         N_grid=(1, 4, 16, 64), seed=5, control=False)
    rep = run_scaling_in_N(c)
    assert rep.status == PASS


def test_moment_growth_rademacher():
    c = cfg(dist=Rademacher(), trials=1000, p_grid=(1.0, 2.0, 4.0, 8.0),
            shaper=ShaperSpec("partial_isometry", 8, 8, 32))
    rep = run_moment_growth(c)
    assert {v.name: v.status for v in rep.verdicts} == {"moments:monotone": PASS,
                                                        "moments:linear-envelope": PASS}
    with pytest.raises(PreconditionError):
        run_moment_growth(cfg())


def test_tails_point_mass_is_inconclusive():
    c = cfg(scenario="tails", dist=PointMass(), trials=10**4)
    rep = run_tail_decay(c)
    assert [v.status for v in rep.verdicts] == [INCONCLUSIVE]
    assert rep.exit_code() == 0


def test_tails_gaussian_steeper_than_laplace_at_matched_variance():
    slopes = {}
    for name, dist in (("gauss", Gaussian()), ("laplace", Laplace(1 / math.sqrt(2)))):
        rep = run_tail_decay(cfg(scenario="tails", dist=dist, trials=10**4))
        slopes[name] = rep.fits["tails"]["slope"]
    assert slopes["gauss"] < slopes["laplace"] < 0


def test_small_columns_guards_and_premise():
    assert required_k(8) == math.ceil(math.log(8) ** 5 * 64)
    assert 1 / math.sqrt(required_k(8)) <= split_threshold(8)
    base = cfg(scenario="small-columns", shaper=ShaperSpec("replicated_average", 4, 4, 4 * 10, k=10))
    with pytest.raises(ConfigError):
        run_regime_small_columns(base)
    big = cfg(scenario="small-columns", shaper=ShaperSpec("replicated_average", 64, 64, 64, k=10**5))
    with pytest.raises(ConfigError):
        run_regime_small_columns(big)
    k = required_k(2)
    rep = run_regime_small_columns(cfg(scenario="small-columns", p_grid=(1.0, 2.0),
                                       shaper=ShaperSpec("replicated_average", 2, 2, 2 * k, k=k)))
    statuses = {v.name: v.status for v in rep.verdicts}
    assert statuses["small-columns:premise"] == PASS
    assert statuses["small-columns:counting"] == PASS
    assert rep.status == PASS


def test_almost_square_square_case():
    rep = run_regime_almost_square(cfg(scenario="almost-square", shaper=ShaperSpec("partial_isometry", 8, 8, 8),
                                       trials=400, p_grid=(1.0, 2.0, 4.0)))
    assert rep.status == PASS
    rows = {r["p"]: r for r in rep.tables["envelopes"]}
    assert rows[4.0]["tightening"] == pytest.approx(2.0)
    with pytest.raises(PreconditionError):
        run_regime_almost_square(cfg(scenario="almost-square", shaper=ShaperSpec("partial_isometry", 2, 2, 9)))


def test_config_round_trip(tmp_path):
    c = default_config("moments")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c.to_dict()))
    assert load_config(path) == c
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": "moments", "colour": "red"})
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": "moments", "trials": 3})
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_emit_empty_report(tmp_path):
    emit_report(RunReport("lemmas", config={}, seed=1), tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["tables"] == {} and data["verdicts"] == []
    assert (tmp_path / "timing.json").exists()


def test_emit_is_byte_identical(tmp_path):
    c = cfg(trials=100)
    outs = []
    for name in ("a", "b"):
        rep = RunReport("moments", config=c.to_dict(), seed=c.seed)
        rep.verdict(check("x", "always", True, value=0.1))
        rep.add_rows("moments", [{"scenario": "moments", "m": 4, "n": 4, "N": 8, "p": 1.0,
                                  "estimate": 1 / 3, "std_error": float("nan"), "ratio": 0.2}])
        emit_report(rep, tmp_path / name)
        outs.append(tmp_path / name)
    for f in ("report.json", "moments.csv", "verdicts.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    header = (outs[0] / "moments.csv").read_text().splitlines()[0]
    assert header == ",".join(MOMENT_COLUMNS) == "scenario,m,n,N,p,estimate,std_error,ratio"


def test_report_status_rules():
    rep = RunReport("moments", config={}, seed=1)
    rep.verdict(check("a", "x", True))
    assert rep.exit_code() == 0
    rep.verdict(check("b", "x", False))
    assert rep.status == FAIL and rep.exit_code() == 1


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["moments", "--n", "4", "--N", "8", "--trials", "1000", "--p", "1,2", "--out", str(out)]) == 0
    assert (out / "moments.csv").exists()
    conf = tmp_path / "explicit.json"
    conf.write_text(json.dumps({"scenario": "moments", "trials": 1000,
                                "shaper": {"kind": "explicit", "m": 1, "n": 1, "N": 1, "matrix": [[2.0]]}}))
    assert main(["moments", "--config", str(conf)]) == 1
    assert main(["moments", "--trials", "3"]) == 2
    assert main(["moments", "--dist", "cauchy"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_cli_figures(tmp_path):
    out = tmp_path / "fig"
    assert main(["moments", "--n", "4", "--N", "8", "--trials", "1000", "--out", str(out), "--figures"]) == 0
    assert (out / "moments.png").stat().st_size > 0
    with pytest.raises(SystemExit):
        main(["moments", "--figures"])
