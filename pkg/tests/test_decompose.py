import numpy as np
import pytest

from stochsdp.core import ScenarioSet
from stochsdp.decompose import (
    BendersOptions,
    RunStatus,
    benders_solve,
    bnb_solve_var,
    brute_force_var,
    objective_at,
)
from stochsdp.extensive import build_for_spec, build_risk_neutral, solve_extensive
from stochsdp.instances import diag_instance, random_instance
from stochsdp.recourse import RecourseOracle
from stochsdp.risk import RiskSpec

from .conftest import diag_recourse, two_scenarios

SPECS = [
    RiskSpec.expectation(),
    RiskSpec.mean_risk(RiskSpec.cvar(0.5), 1.0),
    RiskSpec.mean_risk(RiskSpec.excess(1.0), 0.5),
]


def nondecreasing(vals, tol=1e-7):
    return all(b >= a - tol * (1 + abs(a)) for a, b in zip(vals, vals[1:]))


def test_two_scenario_risk_neutral():
    p = diag_recourse(n=1, c=np.array([[0.4]]), T=[np.eye(1)])
    sc = two_scenarios(2.5, -1.0, 0.3)
    ref = solve_extensive(build_risk_neutral(p, sc)).value
    r = benders_solve(p, sc, RiskSpec.expectation())
    assert r.status == RunStatus.CONVERGED
    assert r.value == pytest.approx(ref, abs=1e-5)


@pytest.mark.parametrize("spec", SPECS, ids=str)
@pytest.mark.parametrize("multi", [True, False])
def test_matches_extensive_on_diag(spec, multi):
    p, sc = diag_instance()
    ref = solve_extensive(build_for_spec(p, sc, spec)).value
    r = benders_solve(p, sc, spec, BendersOptions(multi_cut=multi))
    assert r.status == RunStatus.CONVERGED
    assert r.value == pytest.approx(ref, abs=1e-5)
    assert r.lower <= r.value + 1e-7
    assert nondecreasing([h[0] for h in r.history])
    assert nondecreasing([-h[1] for h in r.history], tol=0)
    oracle = RecourseOracle.verified(p)
    assert objective_at(oracle, sc, spec, r.x)[0] == pytest.approx(r.value, abs=1e-9)


def test_iteration_cap_reports_interval():
    p, sc = random_instance(np.random.default_rng(6), n=2, m=3, s=2, S=5)
    r = benders_solve(p, sc, SPECS[1], BendersOptions(max_iter=2, multi_cut=False))
    assert r.status == RunStatus.NOT_CONVERGED
    assert r.lower <= r.value


def test_threads_do_not_change_cuts():
    p, sc = random_instance(np.random.default_rng(8), n=2, m=3, s=2, S=20)
    a = benders_solve(p, sc, SPECS[1], BendersOptions(threads=1))
    b = benders_solve(p, sc, SPECS[1], BendersOptions(threads=4))
    assert a.cut_log() == b.cut_log()
    assert a.value == b.value


def test_cut_log_format(tmp_path):
    p, sc = diag_instance()
    r = benders_solve(p, sc, RiskSpec.expectation())
    lines = [l for l in r.cut_log().splitlines() if not l.startswith("#")]
    assert len(lines) == len(r.cuts)
    assert all(len(l.split()) == 3 + 3 for l in lines)
    r.write_cut_log(tmp_path / "cuts.txt")
    assert (tmp_path / "cuts.txt").read_text() == r.cut_log()


def test_bnb_single_scenario():
    p, _ = diag_instance()
    sc = ScenarioSet.from_pairs([(1.0, [1.5])])
    r = bnb_solve_var(p, sc, 0.5, 1.0)
    assert r.nodes == 1
    assert np.array_equal(r.delta, [1.0])
    det = solve_extensive(build_risk_neutral(p, sc)).value
    assert r.value == pytest.approx(2 * det, abs=1e-6)


def test_bnb_diag_reference():
    p, sc = diag_instance()
    r = bnb_solve_var(p, sc, 0.6, 1.0)
    bf = brute_force_var(p, sc, 0.6, 1.0)
    assert r.status == RunStatus.CONVERGED
    assert r.value == pytest.approx(bf.value, abs=1e-6)
    assert r.value == pytest.approx(1.8, abs=1e-6)
    assert np.array_equal(r.delta, [1.0, 1.0, 0.0])


def test_bnb_small_alpha_picks_cheap_scenario():
    # alpha below every probability: one scenario suffices, the cheapest one
    p, _ = diag_instance()
    sc = ScenarioSet.from_pairs([(0.3, [0.2]), (0.35, [4.0]), (0.35, [5.0])])
    r = bnb_solve_var(p, sc, 0.2, 1.0)
    bf = brute_force_var(p, sc, 0.2, 1.0)
    assert r.value == pytest.approx(bf.value, abs=1e-6)
    assert r.delta[0] == 1.0


def test_bnb_rho_zero_is_risk_neutral():
    p, sc = diag_instance()
    r = bnb_solve_var(p, sc, 0.5, 0.0)
    assert r.value == pytest.approx(solve_extensive(build_risk_neutral(p, sc)).value, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_bnb_matches_brute_force_random(seed):
    p, sc = random_instance(np.random.default_rng(300 + seed), n=2, m=2, s=2, S=4)
    r = bnb_solve_var(p, sc, 0.55, 0.8)
    bf = brute_force_var(p, sc, 0.55, 0.8)
    assert r.value == pytest.approx(bf.value, abs=1e-5)
    assert bf.patterns == sum(1 for k in range(16) if sc.probs @ [(k >> i) & 1 for i in range(4)] >= 0.55 - 1e-12)
