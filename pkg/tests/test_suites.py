import math

import numpy as np
import pytest

from conefrac.suites import SUITES, lemma21_row, lemma22_table, q_grid, run_suite


def test_q_grid_defaults():
    grid = q_grid()
    assert grid[0] == (1, 0.5) and grid[-1] == (12, 1 - 2.0**-12) and len(grid) == 12


def test_lemma22_reference_row():
    row = lemma22_table(1.0, 1.0, [1.0], [1])[0]
    # q = 0.5 here; the q = 0.9 row is checked through the suite
    assert row["value"] == pytest.approx(0.25)
    rep = run_suite("lemma22", {})
    first = rep.cases[0]
    assert first.lhs == pytest.approx(0.9**10, rel=1e-14)
    assert first.params["limit"] == pytest.approx(math.exp(-1))
    assert first.params["abs_error"] == pytest.approx(0.0192, abs=1e-4)
    assert rep.passed


def test_lemma22_ratios_approach_two():
    rows = lemma22_table(1.0, 1.0, [0.2, 0.7, 1.1])
    ratios = [r["error_ratio"] for r in rows[3:]]
    assert all(abs(r - 2) < 0.4 for r in ratios)
    assert abs(ratios[-1] - 2) < 0.01


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("kind", ["first", "second"])
def test_lemma21_stirling(p, kind):
    row = lemma21_row(p, 0.5 * p + 1, 1.0, 1.0, 1e-4, kind)
    assert row["rel_error_exact"] < 0.01 and row["rel_error_stirling"] < 0.01
    far = lemma21_row(p, 0.5 * p + 1, 1.0, 1.0, 1e-1, kind)
    assert far["rel_error_exact"] > row["rel_error_exact"]


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("thm99")


@pytest.mark.parametrize("name", sorted(SUITES))
def test_every_suite_runs_small(name):
    cfg = {"seed": 11, "n": 2000}
    rep = run_suite(name, cfg)
    assert rep.cases
    for c in rep.cases:
        assert np.isfinite(c.lhs) and np.isfinite(c.rhs)
        assert c.se >= 0
