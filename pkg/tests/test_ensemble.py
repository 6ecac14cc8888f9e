import math

import numpy as np
import pytest
from scipy import stats

from kinkchain import ed, ensemble
from kinkchain.dynamics import NormDriftExceeded, QuenchProtocol
from kinkchain.ensemble import (
    EnsemblePlan,
    InsufficientTail,
    NonPositiveValue,
    StaticPlan,
    average_fidelity,
    default_realizations,
    disorder_seed,
    fit_correlation_coefficient,
    fit_local_slopes,
    kzm_length_estimate,
    log_average_fidelity,
    mean_stderr,
    run_ensemble,
    run_static_ensemble,
)
from kinkchain.lattice import ChainSpec, sample_disorder

from conftest import SLOW_SIGMA, SLOW_TAUS, _Const


def test_default_rule_covers_2048_sites():
    for n in (8, 64, 100, 512, 1000, 4096):
        assert default_realizations(n) >= 4
        assert default_realizations(n) * n >= 2048
    assert default_realizations(512) == 4 and default_realizations(64) == 32


def test_seed_depends_only_on_cell_and_index():
    s = disorder_seed(3, 0.8, 64, 2)
    assert s == disorder_seed(3, 0.8, 64, 2)
    assert len({disorder_seed(3, 0.8, 64, k) for k in range(50)}) == 50
    assert s != disorder_seed(4, 0.8, 64, 2) and s != disorder_seed(3, 0.4, 64, 2) and s != disorder_seed(3, 0.8, 128, 2)


def test_plan_rejects_empty_grid():
    with pytest.raises(ValueError):
        EnsemblePlan((), (16.0,), (64,))


def test_clean_cell_has_zero_spread():
    res = run_ensemble(EnsemblePlan((0.0,), (2.0,), (16,), realizations_rule=_Const(3)))
    c = res.cell(0.0, 16, tau_q=2.0)
    assert c.n_ok == 3 and c.d_err == 0.0 and c.f_err == 0.0
    assert c.delta_d == c.d
    assert len({r.d for r in res.records}) == 1


def test_worker_count_does_not_change_records():
    plan = EnsemblePlan((0.3,), (1.0, 2.0), (16,), base_seed=5, realizations_rule=_Const(3))
    a = run_ensemble(plan, workers=1)
    b = run_ensemble(plan, workers=2)
    assert [r.row() for r in a.records] == [r.row() for r in b.records]


def test_average_fidelity_examples():
    assert average_fidelity([math.log(0.2), math.log(0.4)])[0] == pytest.approx(0.3, rel=1e-14)
    f, err = average_fidelity([math.log(0.25)] * 4)
    assert f == pytest.approx(0.25, rel=1e-14) and err == 0.0
    with pytest.raises(ValueError):
        average_fidelity([0.0])


def test_average_of_tiny_fidelities_does_not_underflow():
    lf = [-2000.0, -2001.0, -2005.0]
    f, _ = average_fidelity(lf)
    assert f == 0.0
    expected = -2000.0 + math.log((1 + math.exp(-1) + math.exp(-5)) / 3)
    assert log_average_fidelity(lf) == pytest.approx(expected, abs=1e-12)


def test_static_ensemble_matches_spin_chain():
    plan = StaticPlan((0.5,), (0.7,), (10,), base_seed=1, realizations_rule=_Const(6))
    res = run_static_ensemble(plan)
    d_ed, f_ed = [], []
    for rec in res.records:
        psi = ed.exact_ground_state(sample_disorder(ChainSpec(10, 0.5, rec.seed)).gamma + 0.7)
        d_ed.append(ed.exact_kink_density(psi))
        f_ed.append(ed.exact_fidelity(psi))
    c = res.cell(0.5, 10, g=0.7)
    d_mean, d_err = mean_stderr(d_ed)
    assert abs(c.d - d_mean) < d_err
    assert abs(c.f - np.mean(f_ed)) < stats.sem(f_ed)
    assert abs(c.f - np.mean(f_ed)) < 1e-8


def test_correlation_coefficient_inverts_model():
    d = 0.04
    n = np.arange(64, 1025, 64)
    fit = fit_correlation_coefficient(n, n * math.log1p(-0.5 * d), d)
    assert abs(fit.c - 0.5) < 1e-6
    assert fit.residual < 1e-10
    assert set(fit.sensitivity) and 0 <= fit.d_exc <= 1


def test_correlation_fit_needs_a_tail():
    with pytest.raises(InsufficientTail):
        fit_correlation_coefficient([8, 16, 32, 64], [-0.1, -0.2, -0.4, -3.0], 0.05)


def test_ferromagnetic_ground_state_correlation_coefficient():
    res = run_static_ensemble(StaticPlan((0.4,), (0.5,), (64, 128, 192, 256, 384, 512)))
    fit = res.fits["c"][(0.4, 0.5)]
    assert abs(fit.c - 0.5) <= 0.05
    assert 0 <= fit.d_exc <= 1


def test_local_slopes_of_power_law():
    tau = np.array([16.0, 64.0, 256.0, 1024.0])
    ws = fit_local_slopes(tau, 0.3 * tau**-0.5, 0.01 * tau**-0.5)
    assert all(abs(w.w + 0.5) < 1e-12 for w in ws)
    assert all(w.w_err > 0 for w in ws)
    assert [(w.tau_lo, w.tau_hi) for w in ws] == [(16, 64), (64, 256), (256, 1024)]


@pytest.mark.parametrize("tau,dd", [([16, 64], [0.1, 0.0]), ([0, 64], [0.1, 0.05]), ([16, 64], [-0.1, 0.05])])
def test_local_slopes_reject_non_positive(tau, dd):
    with pytest.raises(NonPositiveValue):
        fit_local_slopes(tau, dd)


def test_weak_disorder_fast_quench_slope():
    res = run_ensemble(EnsemblePlan((0.1,), (8.0, 16.0), (256,), realizations_rule=_Const(2)))
    (w,) = res.fits["w"][(0.1, 256)]
    assert abs(w.w + 0.5) < 0.05


def test_kzm_length_examples():
    assert kzm_length_estimate(math.exp(math.e)) == pytest.approx(math.e**2, rel=1e-12)
    # 21.2 / 2.34 rounds the denominator; the unrounded value is 9.093
    assert kzm_length_estimate(100.0) == pytest.approx(math.log(100) ** 2 / math.log(math.log(100)) ** 2, rel=1e-14)
    assert kzm_length_estimate(100.0) == pytest.approx(9.06, rel=5e-3)
    with pytest.raises(ValueError):
        kzm_length_estimate(2.0)
    assert np.all(np.diff(kzm_length_estimate(np.array(SLOW_TAUS))) > 0)


def test_retry_at_half_step(monkeypatch):
    real = ensemble.run_quench
    seen = []

    def flaky(r, p, observers=None):
        seen.append(p.step_size)
        if len(seen) == 1:
            raise NormDriftExceeded("injected")
        return real(r, p, observers)

    monkeypatch.setattr(ensemble, "run_quench", flaky)
    res = run_ensemble(EnsemblePlan((0.2,), (1.0,), (8,), realizations_rule=_Const(1)))
    rec = res.records[0]
    assert rec.ok and rec.retried
    assert seen[1] == pytest.approx(seen[0] / 2)
    assert rec.dt == pytest.approx(seen[1])


def test_repeated_failure_is_excluded_and_flagged(monkeypatch):
    def broken(r, p, observers=None):
        raise NormDriftExceeded("injected")

    monkeypatch.setattr(ensemble, "run_quench", broken)
    res = run_ensemble(EnsemblePlan((0.2,), (1.0,), (8,), realizations_rule=_Const(2)))
    c = res.cells[0]
    assert c.n_ok == 0 and c.n_failed == 2 and c.flagged
    assert len(res.failures()) == 2 and "NormDriftExceeded" in res.failures()[0].error


def test_standard_error_scales_with_inverse_root_count(rng):
    x = rng.standard_normal(2**16)
    errs = [mean_stderr(x[:m])[1] for m in (256, 1024, 4096, 16384)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 2) < 0.2)


@pytest.mark.slow
def test_strong_disorder_slopes_flatten(slow_ensemble):
    ws = slow_ensemble.fits["w"][(SLOW_SIGMA, 256)]
    assert abs(ws[-1].w) < 0.1, [round(w.w, 3) for w in ws]


@pytest.mark.slow
def test_inverse_excess_density_tracks_kzm_length(slow_ensemble):
    dd = np.array([slow_ensemble.cell(SLOW_SIGMA, 256, tau_q=t).delta_d for t in SLOW_TAUS])
    rho = stats.spearmanr(1 / dd, kzm_length_estimate(np.array(SLOW_TAUS))).statistic
    assert rho > 0.9
