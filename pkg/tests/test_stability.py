import numpy as np
import pytest

from stochsdp.core import ScenarioSet
from stochsdp.instances import diag_instance
from stochsdp.risk import RiskSpec
from stochsdp.stability import CSV_HEADER, MODES, PerturbationPlan, perturb, risk_modulus, stability_sweep


@pytest.mark.parametrize("mode", MODES)
def test_zero_magnitude_is_identity(mode):
    _, sc = diag_instance()
    assert perturb(sc, mode, 0.0, 1) == sc


def test_weight_jitter_bounds():
    sc = ScenarioSet.from_pairs([(0.3, [1.0]), (0.7, [2.0])])
    for seed in range(50):
        out = perturb(sc, "weight-dirichlet-jitter", 0.1, seed)
        assert abs(out.probs.sum() - 1.0) < 1e-12
        assert np.all(np.abs(out.probs - sc.probs) <= 0.1 + 1e-12)
        assert np.array_equal(out.z, sc.z)


def test_support_jitter_bounds():
    _, sc = diag_instance()
    for seed in range(50):
        out = perturb(sc, "support-gaussian-jitter", 0.05, seed)
        assert np.all(np.linalg.norm(out.z - sc.z, axis=1) <= 0.05 + 1e-12)
        assert np.array_equal(out.probs, sc.probs)


def test_merge_split_keeps_mass():
    _, sc = diag_instance()
    for seed in range(20):
        out = perturb(sc, "atom-merge-split", 0.01, seed)
        assert abs(out.probs.sum() - 1.0) < 1e-12
        assert out.S in (sc.S, sc.S + 1)
        # first moment moves by at most eps
        assert abs(out.probs @ out.z[:, 0] - sc.probs @ sc.z[:, 0]) <= 0.01 + 1e-12


def test_unknown_mode():
    with pytest.raises(ValueError):
        PerturbationPlan("shuffle", (0.1,))


def test_zero_plan_distances():
    p, sc = diag_instance()
    rep = stability_sweep(p, sc, RiskSpec.expectation(), PerturbationPlan("support-gaussian-jitter", (0.0,), 2))
    assert all(r.value_dist <= 1e-6 and r.x_dist <= 1e-6 for r in rep.rows)


@pytest.mark.parametrize("spec", [RiskSpec.expectation(), RiskSpec.mean_risk(RiskSpec.cvar(0.5), 1.0)], ids=str)
def test_diag_sweep_shrinks(spec):
    p, sc = diag_instance()
    plan = PerturbationPlan("support-gaussian-jitter", (0.1, 0.01, 0.001), 4, seed=7)
    rep = stability_sweep(p, sc, spec, plan)
    d = rep.max_value_dist()
    assert d[0.001] <= d[0.01] + 1e-6 <= d[0.1] + 2e-6
    bound = risk_modulus(spec) * rep.lipschitz
    for e, v in d.items():
        assert v <= bound * e + 1e-5
    assert not rep.warnings


@pytest.mark.parametrize("mode", MODES)
def test_vanishing_perturbation(mode):
    from stochsdp.sdp import DEFAULT_OPTIONS

    p, sc = diag_instance()
    plan = PerturbationPlan(mode, (1e-3, 1e-6, 1e-9), 2, seed=3)
    d = stability_sweep(p, sc, RiskSpec.expectation(), plan).max_value_dist()
    assert d[1e-9] < 10 * DEFAULT_OPTIONS.gap_tol


def test_sweep_deterministic_across_threads():
    p, sc = diag_instance()
    plan = PerturbationPlan("weight-dirichlet-jitter", (0.05, 0.2), 3, seed=11)
    a = stability_sweep(p, sc, RiskSpec.expectation(), plan)
    b = stability_sweep(p, sc, RiskSpec.expectation(), plan, threads=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(CSV_HEADER)


def test_risk_modulus_values():
    assert risk_modulus(RiskSpec.expectation()) == 1.0
    assert risk_modulus(RiskSpec.mean_risk(RiskSpec.cvar(0.5), 0.5)) == 1.5
    assert risk_modulus(RiskSpec.semidev(1, 0.5)) == 2.0
