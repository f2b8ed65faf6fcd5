import math

import numpy as np
import pytest

from greenrec.errors import ConfigError, DegenerateFitError
from greenrec.experiments import (
    ExperimentReport,
    GridSpec,
    assumption_heatmap,
    error_heatmap,
    fit_loglog,
    flop_comparison,
    qbx_error_table,
    slope_fit,
)

SMALL_GRID = GridSpec(resolution=16)


def header(report):
    lines = report.to_csv().splitlines()
    return {line[2:].split("=", 1)[0]: line[2:].split("=", 1)[1] for line in lines if line.startswith("# ")}


@pytest.fixture(scope="module")
def laplace_hybrid():
    return error_heatmap("laplace2d", n=9, mode="hybrid")


@pytest.fixture(scope="module")
def laplace_large():
    return error_heatmap("laplace2d", n=9, mode="large")


# ---------------------------------------------------------------------------
# grids and reports


@pytest.mark.parametrize("kwargs", [
    {"resolution": 15},
    {"spacing": "cubic"},
    {"x1_range": (1.0, 1.0)},
    {"x1_range": (0.0, 1.0)},
    {"x1_range": (0.0, 1.0), "x2_range": (0.0, 1.0), "spacing": "linear"},
])
def test_grid_validation(kwargs):
    with pytest.raises(ConfigError):
        GridSpec(**kwargs)


def test_grid_linear_may_touch_one_axis():
    grid = GridSpec(x1_range=(0.0, 1.0), x2_range=(0.5, 1.0), spacing="linear")
    assert grid.points().shape == (2, 64 * 64)


def test_grid_default_layout():
    grid = GridSpec()
    x1, x2 = grid.axes()
    assert (x1[0], x1[-1]) == pytest.approx((1e-3, 10.0))
    assert np.allclose(np.diff(np.log(x2)), np.log(1e4) / 63)
    pts = grid.points()
    assert pts.shape == (2, 64 * 64)
    assert pts[0, 0] == pts[0, 63] and pts[1, 0] != pts[1, 1]


def test_report_csv_layout():
    report = ExperimentReport("demo", {"b": 2, "a": 0.1, "flag": True}, ("x", "y"), [(1, 0.5), (2, 1e-20)],
                              {"slope": -2.0})
    lines = report.to_csv().splitlines()
    assert lines[:5] == ["# experiment=demo", "# a=0.10000000000000001", "# b=2", "# flag=1", "# summary.slope=-2"]
    assert lines[5:] == ["x,y", "1,0.5", "2,9.9999999999999995e-21"]
    np.testing.assert_array_equal(report.column("y"), [0.5, 1e-20])


def test_report_write_roundtrip(tmp_path):
    report = ExperimentReport("demo", {"k": "none"}, ("x",), [(3,)])
    path = tmp_path / "out.csv"
    report.write(path)
    assert path.read_text() == report.to_csv()


# ---------------------------------------------------------------------------
# error heat maps


def test_heatmap_hybrid_accuracy(laplace_hybrid):
    assert laplace_hybrid.summary["singular_cells"] == 0
    assert laplace_hybrid.summary["max_rel_error"] <= 1e-6


def test_heatmap_hybrid_typical_accuracy(laplace_hybrid):
    assert laplace_hybrid.summary["median_rel_error"] <= 1e-12


def test_heatmap_large_only_unstable_near_axis(laplace_hybrid, laplace_large):
    hybrid = laplace_hybrid.summary["median_rel_error_near_axis"]
    large = laplace_large.summary["median_rel_error_near_axis"]
    assert large >= 1e3 * hybrid


def test_heatmap_branch_column(laplace_hybrid):
    x1, x2 = laplace_hybrid.column("x1"), laplace_hybrid.column("x2")
    branch = laplace_hybrid.column("branch")
    assert set(branch) == {"large", "small"}
    np.testing.assert_array_equal(branch == "small", x2 > 50 * x1)


@pytest.mark.parametrize("mode", ["large", "hybrid"])
def test_heatmap_first_derivative_everywhere(mode):
    report = error_heatmap("laplace2d", n=1, mode=mode)
    assert report.summary["max_rel_error"] <= 1e-12


def test_heatmap_first_derivative_small_mode_in_region():
    report = error_heatmap("laplace2d", n=1, mode="small")
    inside = report.column("x1") / report.column("x2") < 1 / 50
    assert np.max(report.column("rel_error")[inside]) <= 1e-12


def test_heatmap_complex_kernel_columns():
    report = error_heatmap("helmholtz2d", n=4, grid=SMALL_GRID, k=1.0)
    assert np.any(report.column("reference_im") != 0)
    assert report.summary["median_rel_error"] <= 1e-10
    assert header(report)["k"] == "1"


def test_heatmap_header_lists_parameters(laplace_hybrid):
    h = header(laplace_hybrid)
    for key in ("experiment", "kernel", "k", "n", "mode", "xi", "p_small", "x1_range", "x2_range",
                "resolution", "spacing", "oracle_digits"):
        assert key in h
    assert h["experiment"] == "heatmap" and h["n"] == "9" and h["xi"] == "50"


def test_heatmap_deterministic():
    a = error_heatmap("laplace2d", n=5, grid=SMALL_GRID)
    b = error_heatmap("laplace2d", n=5, grid=SMALL_GRID)
    assert a.to_csv() == b.to_csv()


def test_heatmap_parallel_matches_serial():
    a = error_heatmap("laplace2d", n=5, grid=SMALL_GRID, jobs=1)
    b = error_heatmap("laplace2d", n=5, grid=SMALL_GRID, jobs=2)
    assert a.to_csv() == b.to_csv()


# ---------------------------------------------------------------------------
# slope fit


def test_fitter_on_exact_power_law():
    x = np.logspace(-9, 0, 10)
    slope, intercept, zeros = fit_loglog(x, 3e-17 * x ** -2.0)
    assert abs(slope + 2) <= 1e-6
    assert abs(intercept - math.log10(3e-17)) <= 1e-6
    assert zeros == 0


def test_fitter_drops_zero_errors():
    x = np.logspace(-4, 0, 5)
    y = x ** -1.0
    y[2] = 0.0
    slope, _, zeros = fit_loglog(x, y)
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert zeros == 1


@pytest.mark.parametrize("x,y", [([1.0, 2.0], [0.0, 0.0]), ([1.0, 1.0], [1e-3, 2e-3]), ([1.0], [1.0])])
def test_fitter_degenerate(x, y):
    with pytest.raises(DegenerateFitError):
        fit_loglog(x, y)


def test_slope_laplace():
    report = slope_fit("laplace2d", n=9, seed=0)
    assert report.summary["samples"] == 50
    assert abs(report.summary["slope"] + 2) <= 0.3
    assert report.summary["C"] == pytest.approx(10 ** report.summary["intercept"])


def test_slope_constant_stable_across_seeds():
    cs = [slope_fit("laplace2d", n=9, seed=s).summary["C"] for s in (0, 1, 2, 3)]
    assert max(cs) / min(cs) < 10


def test_slope_deterministic_and_seeded():
    a = slope_fit(seed=7).to_csv()
    assert a == slope_fit(seed=7).to_csv()
    assert a != slope_fit(seed=8).to_csv()


def test_slope_rows_follow_protocol():
    report = slope_fit(ratios=(1.0, 1e-3), samples_per_ratio=3, seed=1)
    ratio, x1, x2 = report.column("ratio"), report.column("x1"), report.column("x2")
    np.testing.assert_array_equal(ratio, [1.0] * 3 + [1e-3] * 3)
    np.testing.assert_allclose(x1 / x2, ratio, rtol=1e-15)
    assert np.all((x2 >= 0.5) & (x2 <= 2.0))


def test_slope_header():
    h = header(slope_fit(seed=3, samples_per_ratio=1))
    for key in ("kernel", "n", "ratios", "samples_per_ratio", "seed", "xbar_range", "oracle_digits",
                "summary.slope", "summary.C"):
        assert key in h


@pytest.mark.parametrize("kwargs", [{"samples_per_ratio": 0}, {"ratios": ()}])
def test_slope_rejects_empty_protocol(kwargs):
    with pytest.raises(ConfigError):
        slope_fit(**kwargs)


# ---------------------------------------------------------------------------
# assumption maps


@pytest.fixture(scope="module")
def laplace_assumptions():
    return assumption_heatmap("laplace2d")


def test_assumptions_laplace_odd(laplace_assumptions):
    s = laplace_assumptions.summary
    assert 1 <= s["odd_min"] and s["odd_max"] <= 100


def test_assumptions_laplace_even(laplace_assumptions):
    s = laplace_assumptions.summary
    assert 1 <= s["even_min"] and s["even_max"] <= 100


def test_assumptions_biharmonic_odd():
    s = assumption_heatmap("biharmonic2d").summary
    assert 1 <= s["odd_min"] and s["odd_max"] <= 100


def test_assumptions_sampling_converged(laplace_assumptions):
    assert laplace_assumptions.summary["sampling_change"] <= 0.01


def test_assumptions_region_column(laplace_assumptions):
    in_region = laplace_assumptions.column("in_region").astype(bool)
    ratio = laplace_assumptions.column("x1") / laplace_assumptions.column("x2")
    np.testing.assert_array_equal(in_region, ratio < 1)


def test_assumptions_laplace_even_closed_form():
    # d^6 log r / (2 pi) peaks on the axis at 5!/(2 pi) xbar^-6, so the ratio is 60/pi
    s = assumption_heatmap("laplace2d", grid=SMALL_GRID, check_doubling=False).summary
    assert s["even_max"] == pytest.approx(60 / math.pi, rel=1e-9)


@pytest.mark.parametrize("kwargs", [{"c": 4}, {"d_even": 5}])
def test_assumptions_parity_checked(kwargs):
    with pytest.raises(ConfigError):
        assumption_heatmap("laplace2d", grid=SMALL_GRID, **kwargs)


def test_assumptions_require_2d():
    with pytest.raises(ConfigError):
        assumption_heatmap("laplace3d", grid=SMALL_GRID)


def test_assumptions_header(laplace_assumptions):
    h = header(laplace_assumptions)
    for key in ("kernel", "c", "d_even", "samples", "resolution", "summary.sampling_change"):
        assert key in h


# ---------------------------------------------------------------------------
# QBX table and flop comparison


@pytest.fixture(scope="module")
def qbx_table():
    return qbx_error_table(n_list=(100, 200), p_list=(0, 5, 11))


def test_qbx_table_p5_backends_agree(qbx_table):
    for N in (100, 200):
        assert qbx_table.summary[f"agreement.N{N}.p5"] <= 1e-8


def test_qbx_table_p11_within_one_digit(qbx_table):
    for N in (100, 200):
        rec = qbx_table.summary[f"error.N{N}.p11.recurrence"]
        direct = qbx_table.summary[f"error.N{N}.p11.direct"]
        assert abs(math.log10(rec / direct)) <= 1


def test_qbx_table_zeroth_order_floor(qbx_table):
    err = qbx_table.summary["error.N100.p0.recurrence"]
    assert math.isfinite(err) and err > 1e-2


def test_qbx_table_rows_and_header(qbx_table):
    assert len(qbx_table.rows) == 2 * 3 * 2
    h = header(qbx_table)
    for key in ("a", "b", "density", "n_list", "p_list", "backends", "radius_factor", "oversample", "xi"):
        assert key in h


def test_qbx_table_rejects_unknown_backend():
    with pytest.raises(ConfigError):
        qbx_error_table(n_list=(32,), p_list=(1,), backends=("fmm",))


@pytest.fixture(scope="module")
def helmholtz_flops():
    return flop_comparison("helmholtz2d")


def test_flops_recurrence_linear(helmholtz_flops):
    assert 0.9 <= helmholtz_flops.summary["exponent.recurrence"] <= 1.1


def test_flops_direct_quadratic(helmholtz_flops):
    assert helmholtz_flops.summary["exponent.direct"] >= 1.8


def test_flops_diverge_beyond_order_two(helmholtz_flops):
    assert 0 <= helmholtz_flops.summary["recurrence_cheaper_from"] <= 3
    rec, direct = helmholtz_flops.column("recurrence"), helmholtz_flops.column("direct")
    ps = helmholtz_flops.column("p")
    gap = direct[ps > 2] / rec[ps > 2]
    assert np.all(np.diff(gap) > 0)


def test_flops_deterministic_with_header(helmholtz_flops):
    assert flop_comparison("helmholtz2d").to_csv() == helmholtz_flops.to_csv()
    h = header(helmholtz_flops)
    for key in ("kernel", "k", "p_range", "target", "source", "r", "fit_range"):
        assert key in h


def test_flops_reject_negative_orders():
    with pytest.raises(ConfigError):
        flop_comparison("laplace2d", p_range=range(-1, 3))
