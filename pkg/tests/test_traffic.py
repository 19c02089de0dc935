import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.exception import ScheduleOverlapError, TrafficDomainError
from src.ftn.component import traffic
from src.ftn.component.traffic import BufferSpec, FaultInterval


def _oracle(mu: float, n: int) -> Decimal:
    getcontext().prec = 60
    m = Decimal(mu)
    return m ** n * (-m).exp() / Decimal(math.factorial(n))


def test_zero_window_is_certain():
    assert traffic.poisson_pmf(0, 0, 0) == 1.0
    assert traffic.poisson_pmf(5, 0, 3) == 0.0


def test_small_value():
    assert traffic.poisson_pmf(2, 1, 2) == pytest.approx(0.2706705664732254, rel=1e-12)


def test_large_mean_stays_in_log_space():
    assert traffic.poisson_log10_pmf(50, 10, 100) == pytest.approx(-105.2, abs=0.1)
    assert traffic.poisson_pmf(50, 10, 100) == pytest.approx(10 ** traffic.poisson_log10_pmf(50, 10, 100), rel=1e-9)


def test_matches_arbitrary_precision_oracle():
    grid = [(mu, n) for mu in np.linspace(0.5, 30, 20) for n in range(0, 100, 10)]
    assert len(grid) == 200
    for mu, n in grid:
        expected = _oracle(float(mu), n)
        got = traffic.poisson_pmf(float(mu), 1, n)
        if expected < Decimal("1e-300"):
            continue
        assert abs(Decimal(got) - expected) / expected < Decimal("1e-9"), (mu, n)


@pytest.mark.parametrize("mu", [0.5, 5, 12.5, 20])
def test_normalization(mu):
    upper = 60 if mu <= 5 else 120
    assert sum(traffic.poisson_pmf(mu, 1, n) for n in range(upper + 1)) >= 1 - 1e-6


@pytest.mark.parametrize("mu", [0.7, 4.3, 17.9])
def test_mode_at_floor_of_mean(mu):
    values = [traffic.poisson_pmf(mu, 1, n) for n in range(int(3 * mu) + 20)]
    assert int(np.argmax(values)) == math.floor(mu)


def test_integer_mean_ties():
    assert traffic.poisson_pmf(4, 1, 4) == pytest.approx(traffic.poisson_pmf(4, 1, 3), rel=1e-12)


def test_network_distribution():
    single = traffic.poisson_pmf(0.2, 10, 3)
    assert traffic.network_distribution(0.2, 10, 3, 1) == single
    assert traffic.network_distribution(0.2, 10, 3, 8) == pytest.approx(8 * single)
    with pytest.raises(TrafficDomainError) as err:
        traffic.network_distribution(0.2, 10, 3, 0)
    assert err.value.parameter == "N"


@pytest.mark.parametrize(
    "call,parameter",
    [
        (lambda: traffic.poisson_pmf(-1, 1, 1), "lambda"),
        (lambda: traffic.poisson_pmf(1, -1, 1), "t"),
        (lambda: traffic.poisson_pmf(1, 1, -1), "n"),
        (lambda: traffic.poisson_pmf(1, 1, 1.5), "n"),
        (lambda: traffic.loss_single(-0.1, 5), "X"),
        (lambda: traffic.loss_multi(0.1, 5, -1), "K"),
        (lambda: traffic.buffer_size(-1, 1, 1), "Y"),
    ],
)
def test_domain_errors_name_parameter(call, parameter):
    with pytest.raises(TrafficDomainError) as err:
        call()
    assert err.value.parameter == parameter


def test_losses():
    assert traffic.loss_single(0.5, 20) == 10
    assert traffic.loss_single(0.5, 0) == 0
    assert traffic.loss_multi(0.5, 20, 1) == traffic.loss_single(0.5, 20)
    assert traffic.loss_multi(0.2716, 200, 4) == 4 * traffic.loss_single(0.2716, 200)
    assert traffic.loss_multi(0.5, 20, 0) == 0


@given(
    x=st.floats(min_value=0, max_value=1e3),
    t=st.floats(min_value=0, max_value=1e4),
    k1=st.integers(min_value=0, max_value=50),
    k2=st.integers(min_value=0, max_value=50),
)
def test_loss_linear_in_devices(x, t, k1, k2):
    assert traffic.loss_multi(x, t, k1) + traffic.loss_multi(x, t, k2) == pytest.approx(traffic.loss_multi(x, t, k1 + k2))


@given(
    x=st.floats(min_value=0, max_value=1e3),
    t=st.floats(min_value=0, max_value=1e4),
    dx=st.floats(min_value=0, max_value=10),
    dt=st.floats(min_value=0, max_value=10),
)
def test_loss_monotone(x, t, dx, dt):
    assert traffic.loss_single(x + dx, t + dt) >= traffic.loss_single(x, t)


def test_five_part_schedule():
    x = 0.25
    schedule = traffic.schedule_from_spans([(200, 1), (200, 4), (200, 2), (200, 3), (200, 4)])
    assert [i.start for i in schedule] == [0, 200, 400, 600, 800]
    assert traffic.loss_schedule(x, schedule) == pytest.approx(x * 200 * 14)
    assert traffic.loss_schedule(x, []) == 0
    assert traffic.loss_schedule(x, [FaultInterval(0, 200, 3)]) == traffic.loss_multi(x, 200, 3)


def test_overlapping_schedule_rejected():
    with pytest.raises(ScheduleOverlapError):
        traffic.loss_schedule(0.1, [FaultInterval(0, 200, 1), FaultInterval(100, 300, 2)])


def test_interval_must_have_positive_length():
    with pytest.raises(TrafficDomainError):
        FaultInterval(200, 200, 1)


def test_buffer_size():
    assert traffic.buffer_size(10, 20, 500) == 100_000
    assert traffic.buffer_size(10, 0, 500) == 0
    assert traffic.buffer_size(1, 7, 500) == 3500
    assert traffic.buffer_size(3, 0.1, 10) == 3
    assert traffic.buffer_size(1, 0.0011, 1000) == 2
    assert BufferSpec(10, 20, 500).bits == 100_000
