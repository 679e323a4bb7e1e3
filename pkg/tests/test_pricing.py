from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpmpc.pricing import (
    DEFAULT_TARIFF,
    HourlyEnergy,
    PriceInputs,
    TariffSchedule,
    billable_series,
    buy_price,
    corrected_benchmark_billable,
    corrected_series,
    hp_billable_energy,
    sell_price,
    tariff_at,
    to_euro,
)

BAND = {**{h: 0.027 for h in range(6)}, **{h: 0.081 for h in range(6, 17)},
        **{h: 0.26 for h in range(17, 21)}, **{h: 0.081 for h in range(21, 24)}}


@pytest.mark.parametrize("hour", range(24))
def test_tariff_bands(hour):
    assert tariff_at(hour) == BAND[hour]


def test_tariff_rejects_bad_hours_and_gaps():
    with pytest.raises(ValueError):
        tariff_at(24)
    with pytest.raises(ValueError):
        TariffSchedule(((0, 6, 0.1), (7, 24, 0.2)))


def test_buy_price_by_hand():
    # (0.10 + 0.081 + 0 + 0.02) * 1.25
    p = PriceInputs(np.array([0.10]), start_hour=10)
    assert buy_price(p)[0] == pytest.approx(0.25125, abs=1e-12)


def test_buy_price_components():
    zero = TariffSchedule(((0, 24, 0.0),))
    assert buy_price(PriceInputs(np.zeros(3), tariff=zero, c_tso=0.0))[0] == 0.0
    co2 = PriceInputs(np.zeros(1), np.array([0.2]), tariff=zero, c_tso=0.0, c_co2=0.05, vat_rate=0.0)
    assert buy_price(co2)[0] == pytest.approx(0.01, abs=1e-15)


def test_sell_price_is_spot():
    p = PriceInputs(np.array([0.10, 0.0]))
    assert np.array_equal(sell_price(p), [0.10, 0.0])


@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=48), st.integers(0, 23))
def test_buy_exceeds_sell(spot, start):
    p = PriceInputs(np.array(spot), start_hour=start)
    assert np.all(buy_price(p) - sell_price(p) > 0)


def test_negative_spot_rejected():
    with pytest.raises(ValueError):
        PriceInputs(np.array([-0.1]))


def test_billing_cases():
    assert hp_billable_energy(HourlyEnergy(2.0, 0.5, 0.0, 3.0)) == (1.5, 1.5)
    assert hp_billable_energy(HourlyEnergy(1.0, 1.5, 2.0, 3.0))[1] == 0.0
    assert hp_billable_energy(HourlyEnergy(2.0, 0.0, 0.0, 0.0))[1] == 0.0


def test_corrected_billable_cases():
    assert corrected_benchmark_billable(2.0, 1.0, 0.5) == pytest.approx(1.5)
    assert corrected_benchmark_billable(2.0, 0.0, -5.0) == 0.0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_zero_correction_reduces_to_plain_billing(E_IM, E_EX, E_PV, E_HP):
    e = HourlyEnergy(E_IM, E_EX, E_PV, E_HP)
    net, billable = hp_billable_energy(e)
    assert corrected_benchmark_billable(E_HP, E_HP, net) == pytest.approx(billable, abs=1e-12)
    assert 0.0 <= billable <= E_HP


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5), st.floats(-5, 5)), min_size=1, max_size=24))
def test_vector_forms_match_scalar(rows):
    cmp, exp, net = (np.array(c) for c in zip(*rows))
    expected = [corrected_benchmark_billable(a, b, c) for a, b, c in rows]
    assert np.allclose(corrected_series(cmp, exp, net), expected)
    assert np.allclose(billable_series(cmp, net), [0.0 if n <= 0 else min(a, n) for a, n in zip(cmp, net)])


def test_euro_rounding():
    assert to_euro(0.1234565) == Decimal("0.123456")
    assert DEFAULT_TARIFF.hourly().sum() == pytest.approx(6 * 0.027 + 14 * 0.081 + 4 * 0.26)
