import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kruskal_h_by_hand
from spikenorm.analysis import (
    chi2_sf,
    compare_conditions,
    fitness_curve,
    kruskal_wallis,
    spiking_table,
    summarize_sample,
    summarize_spiking,
    write_analysis,
)
from spikenorm.dynamics import EvalResult
from spikenorm.evolution import LogRow
from spikenorm.normalization import POLICY_NAMES


def test_silent_summary():
    s = summarize_sample(np.zeros(40))
    assert (s.median, s.sd, len(s.outliers)) == (0.0, 0.0, 0)


def test_single_outlier():
    s = summarize_sample([0] * 9 + [50])
    assert s.median == 0 and s.outliers.tolist() == [50.0]


def test_odd_count_median():
    assert summarize_sample([3, 1, 2]).median == 2


def test_empty_results_rejected():
    with pytest.raises(ValueError):
        summarize_spiking([], 0)
    with pytest.raises(ValueError):
        summarize_sample([])


def test_summarize_spiking_uses_layer_counts():
    counts = np.array([[1, 2, 3, 9, 9], [4, 5, 6, 0, 1]])
    res = EvalResult(counts, (3, 2), 50)
    assert summarize_spiking(res, 1).median == 5.0
    assert summarize_spiking([res, res], 0).n == 12


@given(st.lists(st.integers(0, 50), min_size=1, max_size=60), st.randoms())
def test_summary_invariants(values, random):
    s = summarize_sample(values)
    shuffled = list(values)
    random.shuffle(shuffled)
    assert summarize_sample(shuffled).median == s.median
    assert s.q1 <= s.median <= s.q3
    lo, hi = s.q1 - 1.5 * s.iqr, s.q3 + 1.5 * s.iqr
    assert all(v < lo or v > hi for v in s.outliers)


def test_hand_ranked_example():
    kw = kruskal_wallis([[1, 2, 3], [4, 5, 6]])
    assert kw.h_statistic == pytest.approx(kruskal_h_by_hand([[1, 2, 3], [4, 5, 6]]), abs=1e-9)
    assert kw.h_statistic == pytest.approx(27 / 7, abs=1e-9)
    assert kw.degrees_of_freedom == 1 and kw.p_value < 0.1 and not kw.tie_corrected


def test_identical_groups():
    kw = kruskal_wallis([[2, 2, 2], [2, 2, 2]])
    assert (kw.h_statistic, kw.p_value) == (0.0, 1.0)
    assert kruskal_wallis([[1, 2, 3], [1, 2, 3]]).p_value == 1.0


def test_matches_scipy_reference():
    from scipy.stats import kruskal

    rng = np.random.default_rng(0)
    groups = [rng.integers(0, 6, 10) for _ in range(3)]
    ref = kruskal(*groups)
    kw = kruskal_wallis(groups)
    assert kw.h_statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert kw.p_value == pytest.approx(ref.pvalue, rel=1e-10)


def test_chi2_sf_known_value():
    assert chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, abs=1e-12)
    assert chi2_sf(0.0, 2) == 1.0


def test_errors():
    with pytest.raises(ValueError):
        kruskal_wallis([[1, 2]])
    with pytest.raises(ValueError):
        kruskal_wallis([[1, 2], []])
    with pytest.raises(ValueError):
        kruskal_wallis([[1], [2]], method="exact")


def test_null_calibration():
    rng = np.random.default_rng(2024)
    rejected = sum(kruskal_wallis([rng.normal(size=10) for _ in range(3)]).p_value < 0.05 for _ in range(1000))
    assert abs(rejected / 1000 - 0.05) <= 0.02


def test_permutation_method_agrees_roughly():
    groups = [[0.30, 0.31, 0.28, 0.35, 0.33], [0.40, 0.42, 0.38, 0.45, 0.41]]
    p_chi = kruskal_wallis(groups).p_value
    p_perm = kruskal_wallis(groups, method="permutation", n_permutations=1999, rng=1).p_value
    assert p_perm < 0.05 and p_chi < 0.05


groups_strategy = st.lists(st.lists(st.integers(-100, 100), min_size=1, max_size=8),
                           min_size=2, max_size=4)


@given(groups_strategy)
@settings(max_examples=100)
def test_h_properties(groups):
    kw = kruskal_wallis(groups)
    assert kw.h_statistic >= 0 and 0 <= kw.p_value <= 1 and kw.degrees_of_freedom == len(groups) - 1
    assert kruskal_wallis(groups[::-1]).h_statistic == pytest.approx(kw.h_statistic, rel=1e-9, abs=1e-12)
    monotone = [[v ** 3 + 2 * v + 0.5 for v in g] for g in groups]
    assert kruskal_wallis(monotone).h_statistic == pytest.approx(kw.h_statistic, rel=1e-9, abs=1e-12)
    if len({v for g in groups for v in g}) > 1:
        assert kw.h_statistic == pytest.approx(kruskal_h_by_hand(groups), rel=1e-9, abs=1e-12)


def fake_log(policies, repeats=10, generations=(0, 19), population=3, purity=lambda p, r, g, i: 0.5):
    rows = []
    for p in policies:
        for r in range(repeats):
            for g in generations:
                for i in range(population):
                    rows.append(LogRow(p, r, g, i, "init", 0.01, 0.01, 0.01, 1.0, purity(p, r, g, i), 3.0, 2.0))
    return rows


def test_identical_conditions_give_p_one():
    assert all(c.p == 1.0 for c in compare_conditions(fake_log(["control", "norm"])))


def test_disjoint_conditions():
    rows = fake_log(["control", "norm"], purity=lambda p, r, g, i: (0.3 if g == 0 else 0.8) + r / 1000)
    table = {c.comparison: c for c in compare_conditions(rows)}
    assert table["control:gen0_vs_gen19"].p < 0.001


def test_disjoint_policy_ranges():
    rows = fake_log(["control"], purity=lambda p, r, g, i: 0.25 + r / 1000)
    rows += fake_log(["norm"], purity=lambda p, r, g, i: 0.6 + r / 1000)
    table = {c.comparison: c for c in compare_conditions(rows)}
    assert table["norm_vs_control:gen19"].p < 0.001


def test_table_has_one_row_per_comparison():
    table = compare_conditions(fake_log(POLICY_NAMES))
    assert len(table) == 6 + 4
    assert [c.comparison for c in table][6:] == [
        "norm_vs_control:gen19", "norm_capped_vs_control_capped:gen19",
        "norm_ie_vs_control:gen19", "norm_capped_ie_vs_control_capped:gen19"]


def test_five_policy_table():
    names = ["control", "control_capped", "norm_capped", "norm_capped_ie", "norm_ie"]
    assert len(compare_conditions(fake_log(names))) == 5 + 3


def test_missing_generation_is_an_error():
    rows = [r for r in fake_log(["control", "norm"]) if not (r.policy == "norm" and r.repeat == 3 and r.generation == 19)]
    with pytest.raises(ValueError, match="missing"):
        compare_conditions(rows)


def test_mean_sample_and_curve():
    rows = fake_log(["norm"], repeats=2, purity=lambda p, r, g, i: 0.25 * (i + 1))
    curve = fitness_curve(rows, "mean")
    assert [c.mean for c in curve] == [0.5, 0.5]
    assert fitness_curve(rows, "best")[0].mean == 0.75


def test_write_analysis(tmp_path):
    rows = fake_log(["control", "norm_capped"], repeats=3, generations=(0, 1, 2))
    rows = [dataclasses.replace(r, spikes_output_median=float(r.individual_id)) for r in rows]
    written = write_analysis(rows, tmp_path, plots=True)
    assert (tmp_path / "significance.csv").read_text().splitlines()[0] == "comparison,H,df,p"
    assert (tmp_path / "fitness_curve.csv").read_text().splitlines()[0] == "generation,policy,mean,sd"
    assert len(spiking_table(rows)) == 2 * 3 * 2
    assert written["fitness_plot"].read_text().lstrip().startswith("<?xml")
