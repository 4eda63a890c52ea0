import pytest
from hypothesis import given, strategies as st

from lsmfx import resources
from lsmfx.resources import CostModel, Design


def test_reference_points():
    assert resources.estimate(1, 2).slices == 85
    assert resources.estimate(1, 2).multipliers == 1
    e = resources.estimate(8, 16)
    assert (e.slices, e.multipliers) == (680, 8)
    assert resources.estimate(8, 16, Design.TRADITIONAL).multipliers == 24
    assert resources.estimate(3, 100).synapse_slices == 400


def test_fit_check_default_all_match():
    rows = resources.fit_check()
    assert len(rows) == 5 and all(r.ok for r in rows)


def test_perturbed_coefficient_flags_680():
    rows = {r.description: r for r in resources.fit_check(CostModel(membrane_slices=78))}
    assert not rows["8 neurons, 16 synapses: slices"].ok
    assert rows["8 neurons, 16 synapses: multipliers"].ok


@given(st.integers(1, 500))
def test_zero_synapses(n):
    assert resources.estimate(n, 0).slices == 77 * n


@given(st.integers(1, 200), st.integers(0, 2000))
def test_linear_model(n, s):
    p = resources.estimate(n, s)
    t = resources.estimate(n, s, Design.TRADITIONAL)
    assert p.slices == 77 * n + 4 * s
    assert p.multipliers == n and t.multipliers == n + s
    assert p.utilization == pytest.approx(p.slices / 23616)


def test_invalid():
    with pytest.raises(ValueError):
        resources.estimate(0, 2)
    with pytest.raises(ValueError):
        resources.estimate(1, -1)


def test_report_format():
    text = resources.format_report([((8, 16), resources.estimate(8, 16))])
    header, row = text.strip().splitlines()
    assert header.startswith("design,neurons,synapses,slices")
    assert row.startswith("proposed,8,16,680,8,23616,")
