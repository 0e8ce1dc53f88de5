from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from scatterlab.oscquad import (
    fresnel_weights,
    full_line_integral,
    quad_quadratic_phase,
    truncation_tail,
)


def _quad_oracle(amp, t, b, lo, hi, pieces=40):
    """Adaptive reference for ∫ e^{−i(tk²−bk)} amp(k) dk, piecewise so the
    oscillation count per call stays small."""
    edges = np.linspace(lo, hi, pieces + 1)
    total = 0.0 + 0.0j
    for a, c in zip(edges[:-1], edges[1:]):
        re = quad(lambda k: (np.exp(-1j * (t * k * k - b * k)) * amp(k)).real,
                  a, c, epsabs=1e-13, limit=400)[0]
        im = quad(lambda k: (np.exp(-1j * (t * k * k - b * k)) * amp(k)).imag,
                  a, c, epsabs=1e-13, limit=400)[0]
        total += re + 1j * im
    return total


def test_full_line_closed_form():
    # t = 1, b = 0 is the classical Fresnel value √π e^{−iπ/4}
    v = full_line_integral(1.0, 0.0)
    assert abs(v - np.sqrt(np.pi) * np.exp(-0.25j * np.pi)) < 1e-15
    # |∫| = √(π/t) for every b
    for t, b in ((0.5, 1.3), (12.0, -4.0), (900.0, 0.2)):
        assert abs(abs(full_line_integral(t, b)) - np.sqrt(np.pi / t)) < 1e-13


@pytest.mark.parametrize("t,b", [(1.0, 0.0), (10.0, 3.0), (37.0, -2.5), (1000.0, 0.7)])
def test_unit_amplitude_matches_adaptive_quad(t, b):
    # amplitude ≡ 1: the weight sum is the panel-moment telescoping, compare
    # against scipy's adaptive rule on a window with a few hundred oscillations
    K = max(3.0, 40.0 / np.sqrt(t))
    k = np.linspace(-K, K, 41)  # deliberately coarse: weights are exact here
    got = complex(np.sum(fresnel_weights(k, t, b)))
    ref = _quad_oracle(lambda k: 1.0, t, b, -K, K, pieces=120)
    assert abs(got - ref) < 5e-13


def test_linear_amplitude_exact_on_irregular_nodes():
    rng = np.random.default_rng(7)
    k = np.sort(rng.uniform(-5.0, 5.0, 9))
    k[0], k[-1] = -5.0, 5.0
    t, b = 6.0, 1.1
    amp = 0.7 - 0.3 * k
    got = complex(quad_quadratic_phase(k, amp, t, b))
    ref = _quad_oracle(lambda k: 0.7 - 0.3 * k, t, b, -5.0, 5.0, pieces=80)
    assert abs(got - ref) < 5e-13  # exact up to roundoff despite huge panels


def test_gaussian_amplitude_closed_form():
    # ∫ e^{−i(tk²−bk)} e^{−k²} dk = √(π/(1+it)) e^{−b²/(4(1+it))}
    t, b, K = 3.0, 1.5, 60.0
    k = np.linspace(-K, K, 24001)
    got = complex(quad_quadratic_phase(k, np.exp(-k * k), t, b))
    ref = np.sqrt(np.pi / (1.0 + 1j * t)) * np.exp(-b * b / (4.0 * (1.0 + 1j * t)))
    assert abs(got - ref) < 1e-5  # h²·∫|A''|/8 scale at h = 0.005 (measured 3.3e-6)


def test_interpolation_error_order():
    # halving h divides the error by ~4 (piecewise-linear amplitude model)
    t, b, K = 3.0, 1.5, 12.0
    ref = np.sqrt(np.pi / (1.0 + 1j * t)) * np.exp(-b * b / (4.0 * (1.0 + 1j * t)))
    errs = []
    for n in (401, 801, 1601):
        k = np.linspace(-K, K, n)
        errs.append(abs(complex(quad_quadratic_phase(k, np.exp(-k * k), t, b)) - ref))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_weights_reflection_symmetry():
    # k → −k sends b → −b: flipped weights for −b equal the weights for b
    k = np.linspace(-9.0, 9.0, 301)
    wp = fresnel_weights(k, 5.0, 2.2)
    wm = fresnel_weights(k, 5.0, -2.2)
    assert np.max(np.abs(wp - wm[::-1])) < 1e-11


def test_row_stack_matches_loop():
    rng = np.random.default_rng(21)
    k = np.linspace(-4.0, 4.0, 513)
    rows = rng.normal(size=(5, k.size)) + 1j * rng.normal(size=(5, k.size))
    batch = quad_quadratic_phase(k, rows, 2.0, 0.4)
    single = np.array([quad_quadratic_phase(k, r, 2.0, 0.4) for r in rows])
    assert np.max(np.abs(batch - single)) < 1e-14


def test_truncation_tail_value_and_guard():
    assert truncation_tail(0.3, 0.1, 2.0, 1.0, 10.0) == pytest.approx(0.4 / 39.0)
    with pytest.raises(ValueError):
        truncation_tail(0.3, 0.1, 0.01, 50.0, 10.0)  # phase turns inside the cut


def test_validation():
    k = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(ValueError):
        full_line_integral(0.0, 1.0)
    with pytest.raises(ValueError):
        fresnel_weights(k, -2.0, 0.0)
    with pytest.raises(ValueError):
        fresnel_weights(np.array([0.0, 0.0, 1.0]), 1.0, 0.0)
    with pytest.raises(ValueError):
        fresnel_weights(np.array([0.5]), 1.0, 0.0)
    with pytest.raises(ValueError):
        quad_quadratic_phase(k, np.ones(7), 1.0, 0.0)
