import math

import numpy as np
import pytest

from diffcast.errors import ConfigError
from diffcast.schedule import coefficients_at, make_linear_schedule


def test_single_step_schedule():
    s = make_linear_schedule(1, 0.5, 0.5)
    assert s.betas.tolist() == [0.5]
    assert s.alpha_bars.tolist() == [0.5]
    assert s.alpha_bars[0] == s.alphas[0]  # alpha_bar_1 = alpha_1 exactly


def test_two_step_products():
    s = make_linear_schedule(2, 0.1, 0.2)
    assert np.allclose(s.alphas, [0.9, 0.8])
    assert np.allclose(s.alpha_bars, [0.9, 0.72])
    assert s.alpha_bars[1] == s.alpha_bars[0] * s.alphas[1]


def test_alpha_bar_1000_against_product_oracle():
    # independent running product in double precision
    T, b0, b1 = 1000, 1e-4, 0.02
    ab = 1.0
    for t in range(1, T + 1):
        ab *= 1.0 - (b0 + (b1 - b0) * (t - 1) / (T - 1))
    s = make_linear_schedule(T, b0, b1)
    assert abs(s.alpha_bars[-1] - ab) / ab < 1e-6
    assert abs(ab - 4.04e-5) / 4.04e-5 < 1e-2  # sanity on the oracle itself


def test_alpha_bar_strictly_decreasing_and_bounded():
    s = make_linear_schedule(1000, 1e-4, 0.02)
    assert np.all(np.diff(s.alpha_bars) < 0)
    assert np.all((s.alpha_bars > 0) & (s.alpha_bars < 1))


def test_alpha_bar_matches_bruteforce_product_everywhere():
    s = make_linear_schedule(200, 1e-3, 0.05)
    prod = 1.0
    for t in range(s.T):
        prod *= s.alphas[t]
        assert abs(s.alpha_bars[t] - prod) <= 1e-12 * abs(prod)


def test_invalid_construction():
    with pytest.raises(ConfigError):
        make_linear_schedule(0, 0.1, 0.2)
    with pytest.raises(ConfigError):
        make_linear_schedule(10, 0.0, 0.2)
    with pytest.raises(ConfigError):
        make_linear_schedule(10, 0.2, 1.0)
    with pytest.raises(ConfigError):
        make_linear_schedule(10, 0.3, 0.2)


def test_coefficients_two_step():
    s = make_linear_schedule(2, 0.1, 0.2)
    c = coefficients_at(s, 2)
    assert c.sqrt_ab == pytest.approx(math.sqrt(0.72), abs=1e-12)
    assert c.sqrt_ab**2 + c.sqrt_1mab**2 == pytest.approx(1.0, abs=1e-12)
    # hand arithmetic cross-checked by oracle: sqrt(0.2 * (1 - 0.9) / (1 - 0.72))
    assert c.posterior_sigma == pytest.approx(0.26726124191242434, abs=1e-12)


def test_posterior_sigma_zero_at_first_step():
    for T in (1, 2, 50):
        s = make_linear_schedule(T, 1e-4, 0.02)
        assert coefficients_at(s, 1).posterior_sigma == 0.0


def test_coefficients_pure_and_monotone():
    s = make_linear_schedule(100, 1e-4, 0.05)
    a = [coefficients_at(s, t) for t in range(1, 101)]
    b = [coefficients_at(s, t) for t in range(1, 101)]
    assert a == b  # bit-identical on repeated calls
    sqrt_ab = [c.sqrt_ab for c in a]
    sqrt_1mab = [c.sqrt_1mab for c in a]
    assert all(x > y for x, y in zip(sqrt_ab, sqrt_ab[1:]))
    assert all(x < y for x, y in zip(sqrt_1mab, sqrt_1mab[1:]))
    assert all(c.sqrt_ab**2 + c.sqrt_1mab**2 == pytest.approx(1.0, abs=1e-12) for c in a)


def test_out_of_range_step():
    s = make_linear_schedule(10, 1e-4, 0.02)
    for t in (0, 11, -3):
        with pytest.raises(ConfigError):
            coefficients_at(s, t)


def test_schedule_immutable():
    s = make_linear_schedule(10, 1e-4, 0.02)
    with pytest.raises(ValueError):
        s.betas[0] = 0.5
