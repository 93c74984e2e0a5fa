import numpy as np
import pytest

from lp_reference import clime_reference_column
from tvnet.changepoint import ChangePointReport
from tvnet.clime import (
    GraphEstimate,
    InfeasibleColumnError,
    PrecisionEstimate,
    clime,
    clime_column,
    stability_select_lambda,
    support,
    tv_clime_path,
)
from tvnet.kernels import KernelSpec, smoothed_covariance
from tvnet.panel import TimeSeriesPanel
from tvnet.sim import build_sim_design, simulate_panel


def random_pd(p, seed, lo=0.5, hi=2.0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return q @ np.diag(rng.uniform(lo, hi, p)) @ q.T


def empty_report(h=0.2, n=200):
    import math
    w = math.ceil(h * n)
    return ChangePointReport(points=(), iota_hat=0, nu=np.inf, h=h,
                             peak_sequence=(), exclusion=w,
                             grid_start=w, grid_stop=n - w)


def report_with(points, h, n, exclusion=None):
    import math
    w = exclusion if exclusion is not None else math.ceil(h * n)
    pts = tuple((i, 100.0 - k) for k, i in enumerate(points))
    return ChangePointReport(points=pts, iota_hat=len(pts), nu=1.0, h=h,
                             peak_sequence=tuple(s for _, s in pts),
                             exclusion=w, grid_start=w, grid_stop=n - w)


# ---------------------------------------------------------------------------
# column solver
# ---------------------------------------------------------------------------

def test_identity_column_closed_form():
    for j in range(4):
        w = clime_column(np.eye(4), j, 0.1)
        expected = np.zeros(4)
        expected[j] = 0.9
        assert np.allclose(w, expected, atol=1e-9)


def test_lambda_zero_recovers_inverse_column():
    sigma = random_pd(8, seed=1)
    inv = np.linalg.inv(sigma)
    for j in (0, 3, 7):
        w = clime_column(sigma, j, 0.0)
        assert np.allclose(w, inv[:, j], atol=1e-8)


def test_two_by_two_matches_reference():
    sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
    w = clime_column(sigma, 0, 0.05)
    ref = clime_reference_column(sigma, 0, 0.05)
    assert abs(np.abs(w).sum() - np.abs(ref).sum()) <= 1e-6
    assert np.abs(sigma @ w - np.array([1.0, 0.0])).max() <= 0.05 + 1e-9


def test_small_random_instances_match_reference():
    rng = np.random.default_rng(99)
    for k in range(10):
        p = int(rng.integers(2, 7))
        sigma = random_pd(p, seed=1000 + k)
        lam = float(rng.choice([0.0, 0.01, 0.05, 0.2]))
        j = int(rng.integers(0, p))
        w = clime_column(sigma, j, lam)
        ref = clime_reference_column(sigma, j, lam)
        e = np.zeros(p)
        e[j] = 1.0
        assert np.abs(sigma @ w - e).max() <= lam + 1e-9
        assert abs(np.abs(w).sum() - np.abs(ref).sum()) <= 1e-6


def test_objective_nonincreasing_in_lambda():
    sigma = random_pd(6, seed=5)
    norms = [np.abs(clime_column(sigma, 2, lam)).sum() for lam in (0.0, 0.02, 0.1, 0.3)]
    assert all(a >= b - 1e-10 for a, b in zip(norms, norms[1:]))


def test_infeasible_column_reports_minimal_lambda():
    v = np.array([1.0, 2.0, 3.0])
    sigma = np.outer(v, v)  # rank one: e_0 not reachable for small lambda
    with pytest.raises(InfeasibleColumnError) as err:
        clime_column(sigma, 0, 0.01)
    min_lam = err.value.min_lambdas[0]
    assert np.isfinite(min_lam) and min_lam > 0.01
    # the reported lambda restores feasibility
    w = clime_column(sigma, 0, min_lam * 1.001 + 1e-9)
    assert np.abs(sigma @ w - np.array([1.0, 0, 0])).max() <= min_lam * 1.001 + 1e-8


def test_column_input_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        clime_column(np.eye(3), 0, -0.1)
    with pytest.raises(IndexError):
        clime_column(np.eye(3), 3, 0.1)


# ---------------------------------------------------------------------------
# full estimator and symmetrization
# ---------------------------------------------------------------------------

def test_diagonal_covariance_gives_diagonal_inverse():
    est = clime(np.diag([1.0, 2.0, 4.0]), 0.0)
    assert np.allclose(est.omega, np.diag([1.0, 0.5, 0.25]), atol=1e-9)
    assert est.feasibility_gap <= 1e-9


def test_symmetrization_keeps_smaller_magnitude():
    from tvnet.clime import _symmetrize_min_abs
    raw = np.array([[1.0, 0.3], [-0.1, 1.0]])
    sym = _symmetrize_min_abs(raw)
    assert sym[0, 1] == -0.1 and sym[1, 0] == -0.1
    tie = np.array([[1.0, 0.4], [-0.4, 1.0]])
    sym2 = _symmetrize_min_abs(tie)
    assert sym2[0, 1] == 0.4 and sym2[1, 0] == 0.4  # tie keeps the (j,k) entry


def test_clime_symmetric_feasible_and_matches_reference_columns():
    sigma = random_pd(6, seed=7)
    est = clime(sigma, 0.02)
    assert np.array_equal(est.omega, est.omega.T)
    assert est.feasibility_gap <= 1e-9
    for j in range(6):
        ref = clime_reference_column(sigma, j, 0.02)
        assert abs(np.abs(est.omega_raw[:, j]).sum() - np.abs(ref).sum()) <= 1e-6


def test_precision_estimate_invariants_enforced():
    with pytest.raises(ValueError, match="symmetric"):
        PrecisionEstimate(omega_raw=np.eye(2), omega=np.array([[1.0, 0.2], [0.1, 1.0]]),
                          t=0.5, lam=0.1, feasibility_gap=0.0)
    with pytest.raises(ValueError, match="gap"):
        PrecisionEstimate(omega_raw=np.eye(2), omega=np.eye(2),
                          t=0.5, lam=0.1, feasibility_gap=1e-6)


def test_support_thresholds_and_nesting():
    sigma = random_pd(5, seed=9)
    est = clime(sigma, 0.05)
    g0 = support(est, 0.0)
    assert g0.adjacency.all()  # every |omega| >= 0
    assert not support(est, np.abs(est.omega).max() * 1.01).adjacency.any()
    prev = g0.adjacency
    for u in (0.01, 0.05, 0.2, 1.0):
        cur = support(est, u).adjacency
        assert np.all(cur <= prev)
        prev = cur


def test_graph_exports(tmp_path):
    adj = np.array([[True, True, False], [True, True, True], [False, True, True]])
    g = GraphEstimate(adjacency=adj, t=0.5, u=0.1)
    assert g.n_edges() == 2
    weights = np.array([[1.0, -0.4, 0.0], [-0.4, 1.0, 0.2], [0.0, 0.2, 1.0]])
    g.to_edge_csv(tmp_path / "edges.csv", weights=weights)
    lines = (tmp_path / "edges.csv").read_text().splitlines()
    assert lines[0] == "j,k,weight"
    assert lines[1].startswith("0,1,-0.4")
    g.to_adjacency_csv(tmp_path / "adj.csv")
    assert np.array_equal(np.loadtxt(tmp_path / "adj.csv", delimiter=","), adj)


# ---------------------------------------------------------------------------
# time-varying path
# ---------------------------------------------------------------------------

def test_path_without_change_points_equals_plain_smoothing():
    rng = np.random.default_rng(21)
    panel = TimeSeriesPanel(rng.standard_normal((200, 4)))
    spec = KernelSpec("uniform", 0.2)
    path = tv_clime_path(panel, [0.3, 0.6], spec, 0.05, empty_report())
    assert not path.failures
    for est in path.estimates:
        direct = clime(smoothed_covariance(panel, est.t, spec), 0.05, t=est.t)
        assert np.array_equal(est.omega, direct.omega)
        assert est.reliable and est.source == "smoothed"


def test_path_reflection_and_reliability_regions():
    rng = np.random.default_rng(22)
    panel = TimeSeriesPanel(rng.standard_normal((200, 4)))
    spec = KernelSpec("uniform", 0.2)
    rep = report_with([100], h=0.2, n=200)  # break at t = 0.5, h^2 = 0.04
    path = tv_clime_path(panel, [0.52, 0.3, 0.8], spec, 0.05, rep)
    by_t = {round(e.t, 2): e for e in path.estimates}
    assert by_t[0.52].source == "reflected" and not by_t[0.52].reliable
    assert by_t[0.3].source == "reflected" and by_t[0.3].reliable  # within b + h^2
    assert by_t[0.8].source == "smoothed" and by_t[0.8].reliable


def test_path_falls_back_when_two_breaks_are_near():
    rng = np.random.default_rng(23)
    panel = TimeSeriesPanel(rng.standard_normal((200, 4)))
    spec = KernelSpec("uniform", 0.2)
    rep = report_with([99, 101], h=0.1, n=200, exclusion=1)
    path = tv_clime_path(panel, [0.5], spec, 0.05, rep)
    assert path.estimates[0].source == "smoothed"
    assert not path.estimates[0].reliable  # both breaks inside the h^2 region


def test_path_collects_failures_without_aborting():
    rng = np.random.default_rng(24)
    X = rng.standard_normal((100, 8))
    panel = TimeSeriesPanel(X)
    # b = 0.02 gives a 5-sample window: rank-deficient, infeasible at lambda 0
    spec = KernelSpec("uniform", 0.02)
    path = tv_clime_path(panel, [0.5], spec, 0.0, empty_report(h=0.2, n=100))
    assert len(path.failures) == 1 and not path.estimates
    assert "lambda" in path.failures[0][1]


def test_path_grid_validation():
    panel = TimeSeriesPanel(np.random.default_rng(0).standard_normal((100, 3)))
    with pytest.raises(ValueError, match="outside"):
        tv_clime_path(panel, [0.05], KernelSpec("uniform", 0.2), 0.1,
                      empty_report(h=0.2, n=100))


# ---------------------------------------------------------------------------
# stability selection
# ---------------------------------------------------------------------------

def test_identical_subsamples_select_smallest_lambda():
    rng = np.random.default_rng(25)
    panel = TimeSeriesPanel(rng.standard_normal((150, 4)))
    sel = stability_select_lambda(panel, 0.5, KernelSpec("uniform", 0.25),
                                  [0.05, 0.1, 0.2], n_subsamples=6,
                                  subsample_fraction=1.0, seed=1)
    assert sel.lambda_value == 0.05
    assert sel.instability == (0.0, 0.0, 0.0)
    assert not sel.warning


def test_instability_in_range_and_warning_path():
    rng = np.random.default_rng(26)
    panel = TimeSeriesPanel(rng.standard_normal((150, 4)))
    sel = stability_select_lambda(panel, 0.5, KernelSpec("uniform", 0.25),
                                  [0.001, 0.01], n_subsamples=8,
                                  subsample_fraction=0.5,
                                  instability_cap=0.0, seed=2)
    assert all(0.0 <= v <= 0.5 for v in sel.instability if np.isfinite(v))
    if all(v > 0.0 for v in sel.instability):
        assert sel.warning and sel.lambda_value == 0.01


def test_stability_grid_validation():
    panel = TimeSeriesPanel(np.zeros((50, 3)) + 1.0)
    with pytest.raises(ValueError, match="increasing"):
        stability_select_lambda(panel, 0.5, KernelSpec("uniform", 0.2), [0.1, 0.05])
    with pytest.raises(ValueError, match="subsample"):
        stability_select_lambda(panel, 0.5, KernelSpec("uniform", 0.2), [0.05], n_subsamples=1)


def test_stability_on_simulated_design_picks_interior_lambda():
    d = build_sim_design(1000, 50, 1.0, seed=30)
    panel = simulate_panel(d)
    sel = stability_select_lambda(panel, 0.5, KernelSpec("uniform", 0.2),
                                  [0.02, 0.04, 0.06, 0.08, 0.1],
                                  n_subsamples=8, seed=3)
    assert 0.02 <= sel.lambda_value <= 0.1
