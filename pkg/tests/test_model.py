import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakkam.errors import DiagnosticError
from weakkam.model import (AlphaProfile, ModelSpec, adaptive_simpson, dL_dv, eval_alpha, eval_H, eval_L,
                           fenchel_gap, golden_max, oracle)

from conftest import MECH, ROT

finite = st.floats(-5, 5, allow_nan=False)


def test_mechanical_values():
    assert MECH.V(0.0) == pytest.approx(1.0)
    assert eval_H(MECH, 0.25, 2.0) == pytest.approx(2.0 - 1.0)
    assert eval_L(MECH, 0.0, 1.0) == pytest.approx(0.5 - 1.0)


def test_rotation_values():
    assert ROT.eta(0.25) == pytest.approx(1.3)
    assert eval_H(ROT, 0.25, -1.3) == pytest.approx(0.0)
    assert eval_L(ROT, 0.0, 2.0) == pytest.approx(2.0 - 2.0)


def test_rotation_rejects_potential():
    with pytest.raises(ValueError):
        ModelSpec("rotation", potential=((1, 1.0, 0.0),), omega=1.0)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        ModelSpec.mechanical([(1, math.nan, 0.0)])
    with pytest.raises(ValueError):
        ModelSpec.rotation(math.inf)


def test_is_even():
    assert MECH.is_even
    assert not ModelSpec.mechanical([(1, 1.0, 0.5)]).is_even
    assert not ROT.is_even
    assert ModelSpec.rotation(0.0).is_even


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0, 1), v=finite, p=finite, rot=st.booleans())
def test_fenchel_gap_nonnegative(x, v, p, rot):
    m = ROT if rot else MECH
    assert fenchel_gap(m, x, v, p) >= -1e-12


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 1), v=finite, rot=st.booleans())
def test_fenchel_equality_at_fibre_derivative(x, v, rot):
    m = ROT if rot else MECH
    assert abs(fenchel_gap(m, x, v, dL_dv(m, x, v))) <= 1e-12 * (1 + v * v)


def test_alpha_kinds():
    x = np.linspace(0, 1, 101)
    assert np.all(eval_alpha(AlphaProfile.constant(2.0), x) == 2.0)
    ps = eval_alpha(AlphaProfile.positive_sinusoid(1.5, 1.0, 1.0), x)
    assert ps.min() >= 0.5 - 1e-12 and ps.max() <= 2.5 + 1e-12
    band = AlphaProfile.vanishing_band(0.55, 0.70, 1.0, 0.05)
    assert eval_alpha(band, 0.6) == 0.0
    assert eval_alpha(band, 0.1) == 1.0
    assert eval_alpha(band, 0.725) == pytest.approx(0.5)
    assert eval_alpha(band, 0.525) == pytest.approx(0.5)


def test_band_wraps_around_zero():
    band = AlphaProfile.vanishing_band(-0.05, 0.05)
    assert eval_alpha(band, 0.0) == 0.0
    assert eval_alpha(band, 0.98) == 0.0
    assert eval_alpha(band, 0.5) == 1.0


@settings(max_examples=100, deadline=None)
@given(base=st.floats(0.1, 5), frac=st.floats(0, 0.99), phase=st.floats(-4, 4), x=st.floats(-2, 2))
def test_positive_sinusoid_positive(base, frac, phase, x):
    a = AlphaProfile.positive_sinusoid(base, frac * base, phase)
    assert eval_alpha(a, x) > 0


@pytest.mark.parametrize("kw", [
    dict(kind="constant", level=-1.0),
    dict(kind="positive_sinusoid", base=1.0, amplitude=1.0),
    dict(kind="vanishing_band", start=0.7, end=0.55),
    dict(kind="vanishing_band", start=0.0, end=1.5),
])
def test_alpha_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        AlphaProfile(**kw)


def test_alpha_scaled():
    a = AlphaProfile.positive_sinusoid(1.5, 1.0, 1.0)
    x = np.linspace(0, 1, 17)
    assert np.allclose(eval_alpha(a.scaled(3.0), x), 3.0 * eval_alpha(a, x))
    with pytest.raises(ValueError):
        a.scaled(0.0)


def test_adaptive_simpson():
    assert adaptive_simpson(np.sin, 0.0, math.pi, 1e-10) == pytest.approx(2.0, abs=1e-9)
    assert adaptive_simpson(np.sqrt, 0.0, 1.0, 1e-8) == pytest.approx(2 / 3, abs=1e-7)


def test_adaptive_simpson_cap():
    with pytest.raises(DiagnosticError):
        adaptive_simpson(lambda x: np.sign(np.sin(1 / np.maximum(x, 1e-300))), 0.0, 1.0, 1e-14, max_intervals=50)


def test_golden_max():
    x, v = golden_max(lambda s: -(s - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8) and v == pytest.approx(0.0, abs=1e-12)


def test_oracle_mechanical():
    o = oracle(MECH)
    assert o.c_analytic == pytest.approx(1.0, abs=1e-12)
    assert o.aubry_points == pytest.approx((0.0, 0.5), abs=1e-9)
    # sqrt(2 (1 - cos 4 pi x)) = 2 |sin 2 pi x|, which integrates to 4 / pi
    assert o.loop_action == pytest.approx(4 / math.pi, abs=1e-7)
    assert o.barrier(0.0, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert o.barrier(0.0, 0.25) == pytest.approx(1 / math.pi, abs=1e-7)


def test_oracle_mechanical_table_matches_pointwise():
    o = oracle(MECH)
    xs = np.array([0.0, 0.1, 0.3, 0.5, 0.8])
    table = o.barrier_table(xs)
    point = o.barrier(xs[:, None], xs[None, :])
    assert np.allclose(table, point, atol=1e-8)


def test_oracle_triangle_inequality():
    o = oracle(MECH)
    xs = np.linspace(0, 1, 40, endpoint=False)
    h = o.barrier_table(xs)
    viol = h[:, None, :] - (h[:, :, None] + h[None, :, :])
    assert viol.max() <= 1e-9


def test_oracle_rotation():
    o = oracle(ROT)
    assert o.c_analytic == 0.5
    assert o.aubry_whole_circle
    x = np.linspace(0, 1, 9)
    assert np.allclose(o.corrector(x), 0.3 / (2 * math.pi) * np.cos(2 * math.pi * x))
    assert o.barrier(0.2, 0.2) == 0.0
    # w is a classical solution: H(x, w') = c
    h = 1e-6
    dw = (o.corrector(x + h) - o.corrector(x - h)) / (2 * h)
    assert np.allclose(eval_H(ROT, x, dw), 0.5, atol=1e-8)


def test_oracle_constant_offset():
    o = oracle(ROT)
    xs = np.arange(256) / 256
    assert o.weighted_offset(AlphaProfile.constant(1.0), xs) == pytest.approx(0.0, abs=1e-15)
    psin = AlphaProfile.positive_sinusoid(1.5, 1.0, 1.0)
    # alpha w integrates to (A / 2 pi) * sin(1) / 2 over base 1.5
    exact = 0.3 / (2 * math.pi) * math.sin(1.0) / 2 / 1.5
    assert o.weighted_offset(psin) == pytest.approx(exact, abs=1e-8)
    # node sums of trigonometric polynomials are exact on a uniform grid
    assert o.weighted_offset(psin, xs) == pytest.approx(exact, abs=1e-14)


def test_oracle_flat_potential():
    o = oracle(ModelSpec.mechanical([]))
    assert o.c_analytic == 0.0
    assert o.aubry_whole_circle
    assert np.all(o.barrier_table([0.0, 0.5]) == 0.0)
