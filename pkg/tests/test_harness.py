from __future__ import annotations

import json
import math

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from dras.cli import main
from dras.duration import WassersteinBall, solve_saa, solve_wdras
from dras.errors import InvalidParams, TooFewSamples
from dras.harness import (
    ExperimentConfig,
    cross_validate_epsilon,
    default_grid,
    evaluation_set,
    load_schedule,
    parse_grid,
    run_convergence,
    run_experiment,
    run_misspecified,
    run_reliability,
    stress_test,
)
from dras.schedule import CostParams, Instance, SampleSet, Schedule, duration_costs, infer_support
from dras.stochastics import (
    DiscreteDistribution,
    GeneratorSpec,
    make_rng,
    out_of_sample_cost,
    sample_durations,
    sample_noshow,
    wasserstein_1,
)

N_APPT = 6
INST = Instance(9.0, CostParams.uniform(N_APPT, 2.0, 1.0, 20.0))


def _data(N, seed=0, noshow=False):
    spec = GeneratorSpec.draw("LN", N_APPT, seed, noshow_prob=0.4 if noshow else None)
    return (sample_noshow if noshow else sample_durations)(spec, N, make_rng(seed, "data"))


def _small_cfg(**kw):
    base = dict(n=4, T=6.0, sizes=(5, 8), replications=2, partitions=3, grid=(0.0, 0.05, 0.5, 2.0),
                eval_size=2000, reference_size=300, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------- grids


def test_default_grid():
    g = default_grid()
    assert g.size == 28
    assert np.all(np.diff(g) > 0)
    assert g[0] == 0.01 and g[9] == 0.1 and g[10] == 0.2 and g[18] == 1.0 and g[-1] == 10.0
    assert np.allclose(np.diff(g[:10]), 0.01) and np.allclose(np.diff(g[19:]), 1.0)


def test_parse_grid():
    assert parse_grid("default").tolist() == default_grid().tolist()
    assert parse_grid("0.5, 0.1,0.1").tolist() == [0.1, 0.5]
    assert parse_grid("0:0.1:0.05,1").tolist() == [0.0, 0.05, 0.1, 1.0]
    assert parse_grid("0.01:0.1:0.01,0.1:1:0.1,1:10:1").tolist() == default_grid().tolist()
    for bad in ["", "1:0:0.1", "0:1:0", "-1", "0:1"]:
        with pytest.raises(InvalidParams):
            parse_grid(bad)


# ---------------------------------------------------------------- cross-validation


def test_cv_too_few_samples():
    with pytest.raises(TooFewSamples):
        cross_validate_epsilon(_data(4), INST, [0.1])


def test_cv_singleton_grid():
    assert cross_validate_epsilon(_data(6), INST, [0.3], partitions=4) == 0.3


def test_cv_identical_samples_pick_smallest():
    S = SampleSet(np.tile(np.linspace(0.8, 1.2, N_APPT), (8, 1)))
    res = cross_validate_epsilon(S, INST, [0.02, 0.1, 1.0], partitions=5, details=True)
    assert res.epsilon == 0.02
    assert np.all(res.chosen == 0.02)


def test_cv_solves_match_cold_solves():
    # every warm-started training solve is optimal: same objective as an independent direct LP
    S = _data(10, seed=4)
    grid = np.array([0.0, 0.05, 0.3, 1.5])
    res = cross_validate_epsilon(S, INST, grid, partitions=3, seed=9, details=True)
    assert res.n_train == 8
    perm = make_rng(9, "cv").permutation(10)
    assert res.train_ids[0].tolist() == np.sort(perm[:8]).tolist()
    sup = infer_support(S)
    for k in range(3):
        train = res.train_ids[k]
        tr = S.subset(train)
        te = S.subset(np.setdiff1d(np.arange(10), train))
        for g, e in enumerate(grid):
            cold = solve_wdras(tr, INST, WassersteinBall(1, e), "direct-lp", support=sup)
            assert res.objectives[k, g] == pytest.approx(cold.objective, rel=1e-7)
            # the score is the held-out cost of the schedule that was actually returned
            assert res.scores[k, g] == out_of_sample_cost(res.schedules[k, g], te, INST.costs)
    for k in range(3):
        best = res.scores[k].min()
        first = np.flatnonzero(res.scores[k] <= best + 1e-9 * (1 + abs(best)))[0]
        assert res.chosen[k] == grid[first]
    assert res.epsilon == pytest.approx(res.chosen.mean())
    assert grid.min() <= res.epsilon <= grid.max()


def test_cv_floor_split():
    res = cross_validate_epsilon(_data(7), INST, [0.1, 1.0], partitions=2, details=True)
    assert res.n_train == math.floor(0.8 * 7) == 5


def test_cv_noshow():
    S = _data(8, seed=2, noshow=True)
    res = cross_validate_epsilon(S, INST, [0.0, 0.1, 1.0], partitions=3, model="noshow", details=True)
    assert res.scores.shape == (3, 3)
    assert set(res.chosen) <= {0.0, 0.1, 1.0}


def test_cv_reproducible():
    S = _data(9, seed=1)
    a = cross_validate_epsilon(S, INST, [0.01, 0.1, 1.0], partitions=4, seed=5)
    b = cross_validate_epsilon(S, INST, [0.01, 0.1, 1.0], partitions=4, seed=5)
    assert a == b


# ---------------------------------------------------------------- configs


def test_config_round_trip(tmp_path):
    cfg = _small_cfg(model="noshow", family="NG")
    cfg.save(tmp_path / "c.json")
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg
    assert ExperimentConfig(family="NG").build_instance().T == 30.0
    assert ExperimentConfig(family="UB").build_instance().T == 15.0


@pytest.mark.parametrize("kw", [dict(replications=0), dict(kind="other"), dict(model="x"), dict(grid=(-1.0,)),
                                dict(sizes=())])
def test_config_invalid(kw):
    with pytest.raises(InvalidParams):
        ExperimentConfig(**kw)


def test_config_unknown_field():
    with pytest.raises(InvalidParams):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_instance_file(tmp_path):
    Instance(7.0, CostParams.uniform(4, 2.0, 1.0, 20.0)).save(tmp_path / "i.json")
    cfg = ExperimentConfig(n=4, instance=str(tmp_path / "i.json"))
    assert cfg.build_instance().T == 7.0
    with pytest.raises(InvalidParams):
        ExperimentConfig(n=5, instance=str(tmp_path / "i.json")).build_instance()


# ---------------------------------------------------------------- experiments


@pytest.fixture(scope="module")
def convergence():
    return run_convergence(_small_cfg(sweep=True))


def test_experiment_rows(convergence):
    r = convergence
    assert len(r.rows) == 2 * 2 * 2
    for row in r.rows:
        for k in ("seed", "N", "epsilon", "method", "replication"):
            assert k in row
        assert row["status"] == "ok"
    assert {row["method"] for row in r.rows} == {"W-DRAS", "SAA"}
    assert all(row["epsilon"] == 0.0 for row in r.rows if row["method"] == "SAA")


def test_experiment_in_sample_dominates_saa(convergence):
    for N in (5, 8):
        rob = convergence.column("W-DRAS", N, "in_sample")
        saa = convergence.column("SAA", N, "in_sample")
        assert np.all(rob >= saa - 1e-7)


def test_experiment_summary(convergence):
    summ = convergence.summary()
    assert len(summ) == 4
    for row in summ:
        assert 0.0 <= row["reliability"] <= 1.0
        assert row["out_of_sample_p20"] <= row["out_of_sample_p80"]
        assert row["completed"] == 2 and row["failed"] == 0
    assert convergence.z_star is not None and convergence.z_star > 0


def test_experiment_reliability_values(convergence):
    for row in convergence.rows:
        assert row["reliable"] == (row["in_sample"] >= row["out_of_sample"])
    eps, frac = convergence.reliability_curve(8)
    assert eps.tolist() == [0.0, 0.05, 0.5, 2.0]
    assert np.all((frac >= 0) & (frac <= 1))


def test_experiment_out_of_sample_recomputed(convergence):
    cfg = convergence.config
    ev = evaluation_set(cfg)
    assert ev.N == cfg.eval_size
    # SAA cell recomputed from scratch from the documented seed derivation
    from dras.stochastics import sample

    data = sample(cfg.build_spec(), 5, "duration", make_rng(cfg.seed, "train", 5, 1))
    saa = solve_saa(data, cfg.build_instance())
    row = [x for x in convergence.rows if x["method"] == "SAA" and x["N"] == 5 and x["replication"] == 1][0]
    assert row["in_sample"] == pytest.approx(saa.objective, rel=1e-9)
    assert row["out_of_sample"] == pytest.approx(out_of_sample_cost(saa.s, ev, cfg.build_instance().costs), rel=1e-9)


def test_experiment_byte_reproducible(tmp_path, convergence):
    p1 = convergence.write(tmp_path / "a")
    again = run_convergence(_small_cfg(sweep=True))
    p2 = again.write(tmp_path / "b")
    for key in ("results", "summary", "convergence", "sweep", "meta"):
        assert p1[key].read_bytes() == p2[key].read_bytes(), key
    header = p1["results"].read_text().splitlines()[0]
    assert header.startswith("experiment,model,family,seed,N,replication,method,epsilon")
    assert "seconds" in p1["timings"].read_text().splitlines()[0]


def test_saa_equals_robust_at_zero():
    r = run_convergence(_small_cfg(grid=(0.0,), sizes=(6,), reference_size=0))
    for rep in range(2):
        rob = [x for x in r.rows if x["method"] == "W-DRAS" and x["replication"] == rep][0]
        saa = [x for x in r.rows if x["method"] == "SAA" and x["replication"] == rep][0]
        assert rob["epsilon"] == 0.0
        assert rob["in_sample"] == pytest.approx(saa["in_sample"], rel=1e-7, abs=1e-7)


def test_failed_cells_are_flagged():
    r = run_convergence(_small_cfg(sizes=(3, 5), replications=1, reference_size=0))
    bad = [x for x in r.rows if x["N"] == 3 and x["method"] == "W-DRAS"][0]
    assert bad["status"] == "error:TooFewSamples"
    summ = {(x["N"], x["method"]): x for x in r.summary()}
    assert summ[(3, "W-DRAS")]["failed"] == 1 and summ[(3, "W-DRAS")]["completed"] == 0
    assert summ[(3, "SAA")]["completed"] == 1


def test_misspecified_and_noshow_runs():
    r = run_misspecified(_small_cfg(sizes=(6,), replications=1, reference_size=0))
    assert r.config.kind == "misspecified" and all(x["status"] == "ok" for x in r.rows)
    r2 = run_reliability(_small_cfg(model="noshow", sizes=(6,), replications=1, reference_size=0, sweep=True))
    assert {x["method"] for x in r2.rows} == {"W-NS", "SAA"}
    assert all(x["status"] == "ok" for x in r2.rows)
    assert len(r2.sweep) == 4


def test_parallel_matches_serial():
    cfg = _small_cfg(sizes=(5,), replications=2, reference_size=0)
    serial = run_experiment(cfg)
    par = run_experiment(ExperimentConfig.from_dict({**cfg.to_dict(), "workers": 2}))
    assert serial.rows == par.rows


# ---------------------------------------------------------------- stress tests


def test_stress_equal_spacing_unit_cost_instance():
    inst = Instance(15.0, CostParams.uniform(10, 2.0, 1.0, 20.0))
    S = sample_durations(GeneratorSpec.draw("LN", 10, 0), 12, make_rng(0, "stress"))
    s = Schedule.equal_spacing(10, 15.0).s
    reports = [stress_test(s, S, inst, e) for e in (0.0, 0.1, 1.0)]
    assert all(r.certified for r in reports)
    assert reports[0].worst_case_cost == pytest.approx(duration_costs(s, S.values, inst.costs).mean(), abs=1e-7)
    assert reports[0].worst_case_cost == pytest.approx(reports[0].empirical_cost, abs=1e-7)
    vals = [r.worst_case_cost for r in reports]
    assert vals[0] <= vals[1] + 1e-9 <= vals[2] + 2e-9
    assert sum(a["weight"] for a in reports[1].atoms) == pytest.approx(1.0)


def test_stress_noshow_and_files(tmp_path):
    S = _data(6, seed=3, noshow=True)
    s = np.full(N_APPT, 1.4)
    (tmp_path / "s.json").write_text(json.dumps({"s": s.tolist(), "rho": 0.0}))
    (tmp_path / "s.csv").write_text(",".join(repr(float(x)) for x in s) + "\n")
    assert np.array_equal(load_schedule(tmp_path / "s.json"), s)
    assert np.array_equal(load_schedule(tmp_path / "s.csv"), s)
    r0 = stress_test(tmp_path / "s.json", S, INST, 0.0, "noshow")
    r1 = stress_test(tmp_path / "s.csv", S, INST, 0.2, "noshow")
    assert r0.certified and r1.certified
    assert r0.worst_case_cost == pytest.approx(r0.empirical_cost, abs=1e-7)
    assert r1.worst_case_cost >= r0.worst_case_cost - 1e-9
    with pytest.raises(ValueError):
        stress_test(np.full(N_APPT, 5.0), S, INST, 0.1, "noshow")  # exceeds the horizon


# ---------------------------------------------------------------- CLI


@pytest.fixture()
def files(tmp_path):
    INST.save(tmp_path / "inst.json")
    _data(10, seed=1).to_csv(tmp_path / "d.csv")
    _data(10, seed=1, noshow=True).to_csv(tmp_path / "ns.csv")
    return tmp_path


def _run(args):
    res = CliRunner().invoke(main, [str(a) for a in args])
    return res


def test_cli_solve_matches_library(files):
    res = _run(["solve", "--instance", files / "inst.json", "--samples", files / "d.csv", "--epsilon", "0.2",
                "--method", "lp", "--out", files / "sol.json", "--dump-lp", files / "lp.txt"])
    assert res.exit_code == 0, res.output
    out = json.loads((files / "sol.json").read_text())
    assert set(out) == {"s", "rho", "objective", "diagnostics"}
    lib = solve_wdras(SampleSet.from_csv(files / "d.csv"), INST, WassersteinBall(1, 0.2), "direct-lp")
    assert out["objective"] == pytest.approx(lib.objective, rel=1e-9)
    from dras.lp import read_lp_dump, solve_lp

    assert solve_lp(read_lp_dump(files / "lp.txt")).objective == pytest.approx(lib.objective, rel=1e-6)


def test_cli_noshow_stress_simulate_cv(files):
    res = _run(["solve", "--model", "noshow", "--instance", files / "inst.json", "--samples", files / "ns.csv",
                "--epsilon", "0.1", "--method", "cp", "--out", files / "sol.json"])
    assert res.exit_code == 0, res.output
    res = _run(["stress", "--model", "noshow", "--instance", files / "inst.json", "--samples", files / "ns.csv",
                "--schedule", files / "sol.json", "--epsilon", "0.1"])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert rep["certified"] and rep["worst_case_cost"] == pytest.approx(json.loads((files / "sol.json").read_text())["objective"], rel=1e-5)
    res = _run(["simulate", "--model", "noshow", "--instance", files / "inst.json", "--schedule", files / "sol.json",
                "--scenarios", files / "ns.csv"])
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["scenarios"] == 10
    res = _run(["cv", "--instance", files / "inst.json", "--samples", files / "d.csv", "--grid", "0.01,0.1,1",
                "--partitions", "2"])
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["epsilon"] in {0.01, 0.1, 1.0, 0.055, 0.505, 0.55}


def test_cli_sample_and_experiment(files):
    res = _run(["sample", "--family", "UB", "--n", "4", "--N", "7", "--seed", "2", "--out", files / "u.csv"])
    assert res.exit_code == 0, res.output
    assert SampleSet.from_csv(files / "u.csv").values.shape == (7, 4)
    _small_cfg(sizes=(5,), replications=1, reference_size=0).save(files / "cfg.json")
    res = _run(["experiment", "--config", files / "cfg.json", "--out-dir", files / "out"])
    assert res.exit_code == 0, res.output
    assert (files / "out" / "results.csv").exists() and (files / "out" / "convergence.csv").exists()


def test_cli_errors(files):
    res = _run(["solve", "--instance", files / "inst.json", "--samples", files / "ns.csv"])
    assert res.exit_code != 0 and "LengthMismatch" in res.output
    res = _run(["cv", "--instance", files / "inst.json", "--samples", files / "d.csv", "--grid", "1:0:1"])
    assert res.exit_code != 0 and "InvalidParams" in res.output


# ---------------------------------------------------------------- metric properties


atoms = st.lists(st.lists(st.floats(-5, 5), min_size=2, max_size=2), min_size=1, max_size=4)


def _uniform(a):
    return DiscreteDistribution(a, np.full(len(a), 1.0 / len(a)))


@settings(max_examples=30, deadline=None)
@given(atoms, atoms, atoms)
def test_wasserstein_metric_properties(a, b, c):
    A, B, C = _uniform(a), _uniform(b), _uniform(c)
    ab, ba = wasserstein_1(A, B), wasserstein_1(B, A)
    assert ab == pytest.approx(ba, abs=1e-7)
    assert wasserstein_1(A, A) == pytest.approx(0.0, abs=1e-7)
    assert ab <= wasserstein_1(A, C) + wasserstein_1(C, B) + 1e-7
    # the l1 distance of the means is a lower bound
    assert ab >= np.abs(A.mean() - B.mean()).sum() - 1e-7
