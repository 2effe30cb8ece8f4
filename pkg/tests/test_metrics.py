import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dsovt.errors import ShapeError, ValidationError
from dsovt.metrics import evaluate_frames, mse, psnr, rrmse, ssim, value_range

from oracles import ssim_loop


def test_identities(rng):
    x = rng.normal(size=(16, 16, 3))
    assert ssim(x, x, 2.0) == 1.0
    assert psnr(x, x, 2.0) == math.inf
    assert rrmse(x, x, 2.0) == 0.0


@given(arrays(np.float64, (12, 12, 2), elements=st.floats(-10, 10)))
def test_ssim_self_is_one(x):
    r = max(float(np.ptp(x)), 1.0)
    assert ssim(x, x, r) == 1.0


def test_ssim_structural_change(rng):
    x = rng.uniform(size=(16, 16))
    y = -x + x.max() + x.min()
    assert ssim(x, y, 1.0) < 1.0


def test_ssim_matches_loop_oracle(rng):
    for _ in range(10):
        a = rng.uniform(size=(16, 16, 2))
        b = a + 0.3 * rng.normal(size=a.shape)
        assert abs(ssim(a, b, 1.5) - ssim_loop(a, b, 1.5)) < 1e-8


def test_ssim_masked_matches_loop_oracle(rng):
    mask = rng.uniform(size=(16, 12)) > 0.3
    a, b = rng.uniform(size=(2, 16, 12, 1))
    assert abs(ssim(a, b, 1.0, mask) - ssim_loop(a, b, 1.0, mask)) < 1e-8


def test_psnr_formula(rng):
    a = np.zeros((8, 8))
    assert psnr(a, a + 2.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    a, b = rng.normal(size=(2, 8, 8, 3))
    e = float(np.mean((a - b) ** 2))
    assert psnr(a, b, 3.0) == pytest.approx(10 * np.log10(9.0 / e), rel=1e-10)


def test_rrmse_examples():
    assert rrmse(np.zeros((2, 2)), np.ones((2, 2)), 2.0) == 0.5
    a = np.arange(16.0).reshape(4, 4)
    b = a + 0.5
    assert rrmse(a + 7, b + 7, 15.0) == rrmse(a, b, 15.0)


def test_masked_cells_do_not_matter(rng):
    mask = np.ones((16, 16), bool)
    mask[:4] = False
    a, b = rng.uniform(size=(2, 16, 16, 2))
    b2 = b.copy()
    b2[:4] = 99.0
    for fn in (lambda p: ssim(a, p, 1.0, mask), lambda p: psnr(a, p, 1.0, mask),
               lambda p: rrmse(a, p, 1.0, mask), lambda p: mse(a, p, mask)):
        assert fn(b) == fn(b2)


def test_errors():
    with pytest.raises(ShapeError):
        mse(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValidationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)), 0.0)
    with pytest.raises(ValidationError):
        mse(np.zeros((8, 8)), np.zeros((8, 8)), np.zeros((8, 8), bool))


def test_evaluate_frames(rng):
    t = rng.uniform(size=(3, 8, 8, 2))
    rep = evaluate_frames(t, t)
    assert rep.ssim == 1.0 and rep.rrmse == 0.0 and rep.psnr == math.inf and len(rep.per_frame) == 3
    p = t + 0.1
    rep = evaluate_frames(p, t)
    assert rep.rrmse == pytest.approx(0.1 / value_range(t))
