import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import DATA
from spdevops.opex import (
    DEFAULT_CATEGORIES,
    IncidentCategory,
    IncidentModel,
    InvalidModel,
    Process,
    Scenario,
    opex_savings,
)

# 83% of incidents fall into addressable categories in the default model
ADDRESSABLE_SHARE = 0.44 + 0.19 + 0.10 + 0.10


def test_default_scenarios():
    m = IncidentModel()
    opt = opex_savings(m, Scenario.OPTIMISTIC)
    assert opt.overall_addressable == pytest.approx(0.80)
    assert opt.overall_total == pytest.approx(0.80 * ADDRESSABLE_SHARE)
    con = opex_savings(m, "conservative")
    assert con.overall_addressable == pytest.approx(0.30)
    assert con.overall_total == pytest.approx(0.30 * ADDRESSABLE_SHARE)
    zero = opex_savings(m, 0.0)
    assert zero.overall_addressable == zero.overall_total == 0.0


def test_overload_is_shortened_not_avoided():
    rows = {r.name: r for r in opex_savings(IncidentModel(), 0.5).categories}
    assert (rows["network overload"].avoided, rows["network overload"].shortened) == (0.0, 0.5)
    assert rows["software bugs"].avoided == 0.5
    assert rows["other causes"].reduction == 0.0


def test_single_category_model():
    m = IncidentModel((IncidentCategory("bugs", 1.0, 3.0, frozenset({Process.VERIFICATION})),))
    r = opex_savings(m, 0.4)
    assert r.overall_addressable == r.overall_total == pytest.approx(0.4)


@given(st.floats(0, 1), st.floats(0, 1))
def test_savings_are_linear_in_the_fraction(a, b):
    m = IncidentModel()
    ra, rb = opex_savings(m, a), opex_savings(m, b)
    if a > 0:
        assert rb.overall_total * a == pytest.approx(ra.overall_total * b, abs=1e-12)
    assert ra.overall_addressable == pytest.approx(a)


@given(st.floats(0.01, 100))
def test_uniform_duration_scale_does_not_matter(k):
    scaled = IncidentModel(
        tuple(IncidentCategory(c.name, c.share, c.mean_duration * k, c.addressable_by) for c in DEFAULT_CATEGORIES)
    )
    assert opex_savings(scaled, 0.8).overall_total == pytest.approx(opex_savings(IncidentModel(), 0.8).overall_total)


def test_invalid_models():
    with pytest.raises(InvalidModel):
        IncidentModel(())
    with pytest.raises(InvalidModel):
        IncidentModel((IncidentCategory("a", 0.7), IncidentCategory("b", 0.7)))
    with pytest.raises(InvalidModel):
        IncidentModel((IncidentCategory("a", 0.5), IncidentCategory("a", 0.1)))
    with pytest.raises(InvalidModel):
        IncidentModel((IncidentCategory("a", 0.5, 0.0),))
    with pytest.raises(InvalidModel):
        IncidentModel(scenario_fraction={"optimistic": 1.5})
    with pytest.raises(InvalidModel):
        IncidentModel.from_json({"categories": [{"name": "a", "share": 0.1, "addressable_by": ["PRAYER"]}]})
    with pytest.raises(InvalidModel):
        opex_savings(IncidentModel(), 1.2)


def test_model_file_matches_defaults():
    m = IncidentModel.load(DATA / "incident_model.json")
    assert m == IncidentModel()
    assert IncidentModel.from_json(m.to_json()) == m
