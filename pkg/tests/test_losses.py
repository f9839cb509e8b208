import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stitchkit import (
    EmptyEvalRegion,
    LossConfig,
    epe_report,
    fundamental_from_cameras,
    lsgan_losses,
    masked_psnr,
    recon_loss,
    sampson_epipolar_loss,
    sigmo_total_loss,
    warp_loss,
)
from stitchkit.errors import EmptyMask, EmptyRegion
from stitchkit.geometry import gt_warp_field, skew
from stitchkit.losses import assign_bucket, bucket_label

ULP = 2.0 ** -52


# -- warp loss -----------------------------------------------------------------

def test_warp_loss_zero_for_exact_field(rng):
    w = rng.normal(size=(5, 5, 2))
    assert warp_loss(w, w, rng.uniform(size=(5, 5)) > 0.5) == 0


def test_warp_loss_hand_example():
    gt = np.zeros((2, 2, 2))
    w = np.zeros((2, 2, 2))
    w[0, 0], w[1, 0] = (1, 0), (0, 1)   # OV: left column
    w[0, 1], w[1, 1] = (2, 0), (0, 2)   # NOV: right column
    ov = np.array([[True, False], [True, False]])
    assert warp_loss(w, gt, ov, alpha=0.3) == pytest.approx(1.0 + 0.3 * 2.0, abs=1e-15)
    assert warp_loss(w, gt, ov, alpha=0.0) == 1.0


def test_warp_loss_alpha_zero_is_ov_only(rng):
    w, gt = rng.normal(size=(6, 6, 2)), rng.normal(size=(6, 6, 2))
    ov = rng.uniform(size=(6, 6)) > 0.4
    ov_only = np.abs(w - gt).sum(-1)[ov].mean()
    assert abs(warp_loss(w, gt, ov, alpha=0.0) - ov_only) <= 1e-12


def test_warp_loss_empty_region_warns():
    w = np.ones((2, 2, 2))
    with pytest.warns(EmptyRegion):
        assert warp_loss(w, np.zeros_like(w), np.ones((2, 2), bool), alpha=0.5) == 2.0
    with pytest.warns(EmptyRegion):
        assert warp_loss(w, np.zeros_like(w), np.zeros((2, 2), bool), alpha=0.5) == 1.0


def test_warp_loss_valid_mask_and_shape_check():
    w = np.ones((2, 2, 2))
    w[1, 1] = 100
    valid = np.ones((2, 2), bool)
    valid[1, 1] = False
    with pytest.warns(EmptyRegion):
        assert warp_loss(w, np.zeros_like(w), np.ones((2, 2), bool), alpha=0, valid=valid) == 2.0
    with pytest.raises(ValueError):
        warp_loss(np.zeros((2, 2, 2)), np.zeros((2, 3, 2)), np.ones((2, 2), bool))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0, 5), b=st.floats(0, 5))
def test_warp_loss_monotone_in_alpha(seed, a, b):
    r = np.random.default_rng(seed)
    w, gt = r.normal(size=(4, 4, 2)), r.normal(size=(4, 4, 2))
    ov = np.zeros((4, 4), bool)
    ov[:2] = True
    lo, hi = sorted((a, b))
    assert warp_loss(w, gt, ov, lo) <= warp_loss(w, gt, ov, hi)


# -- reconstruction --------------------------------------------------------------

def test_recon_zero_when_consistent(rng):
    img = rng.uniform(size=(4, 4, 3))
    m_r = np.zeros((4, 4), bool)
    m_r[:, :3] = True
    m_wt = np.zeros((4, 4), bool)
    m_wt[:, 1:] = True
    total, l_r, l_wt = recon_loss(img, img, img, m_r, m_wt)
    assert total == l_r == l_wt == 0


def test_recon_toy_canvas():
    m_r = np.zeros(16, bool)
    m_r[:6] = True
    m_wt = np.zeros(16, bool)
    m_wt[4:] = True            # 12 pixels, 10 of them exclusive
    m_r, m_wt = m_r.reshape(4, 4), m_wt.reshape(4, 4)
    i_r = np.linspace(0, 0.5, 16).reshape(4, 4)
    i_s = i_r.copy()
    i_wt = i_r.copy()
    i_wt[m_wt & ~m_r] += 0.5
    total, l_r, l_wt = recon_loss(i_s, i_r, i_wt, m_r, m_wt)
    # direct masked means
    expected_wt = sum(abs(i_s.flat[k] - i_wt.flat[k]) for k in range(16) if m_wt.flat[k]) / m_wt.sum()
    assert l_r == 0
    assert abs(l_wt - expected_wt) <= 1e-12 and abs(l_wt - 0.5 * 10 / 12) <= 1e-12
    assert total == l_r + l_wt


def test_recon_conflict_minimised_between_inputs():
    m = np.ones((1, 1), bool)
    grid = np.linspace(0, 1, 101)
    losses = [recon_loss(np.array([[s]]), np.array([[0.2]]), np.array([[0.6]]), m, m)[0] for s in grid]
    best = grid[np.isclose(losses, min(losses))]
    assert min(losses) == pytest.approx(0.4) and best.min() == pytest.approx(0.2) and best.max() == pytest.approx(0.6)
    assert 0.4 in np.round(best, 12)


def test_recon_empty_mask_warns():
    img = np.zeros((2, 2))
    with pytest.warns(EmptyMask):
        total, l_r, _ = recon_loss(img, img + 1, img, np.zeros((2, 2), bool), np.ones((2, 2), bool))
    assert total == 0 and l_r == 0


# -- adversarial and total ---------------------------------------------------------

def test_lsgan_cases():
    assert lsgan_losses(np.ones((3, 3)), np.zeros((3, 3))) == (0.0, 1.0)
    assert lsgan_losses(np.ones(4), np.ones(4))[1] == 0.0
    assert lsgan_losses(np.full(5, 0.5), np.full(5, 0.5)) == (0.5, 0.25)
    with pytest.raises(ValueError):
        lsgan_losses(np.array([np.nan]), np.zeros(1))


def test_total_loss_arithmetic():
    assert sigmo_total_loss(0.0, 0.0) == 0.0
    assert sigmo_total_loss(1.0, 1.0) == 1.1
    value = sigmo_total_loss(0.4, 0.25, LossConfig(lambda_r=1.0, lambda_a=0.1))
    assert abs(Fraction(value) - Fraction(17, 40)) <= Fraction(0.425) * ULP
    with pytest.raises(ValueError):
        sigmo_total_loss(-1.0, 0.0)
    with pytest.raises(ValueError):
        LossConfig(alpha=-0.1)


# -- epipolar ------------------------------------------------------------------------

def symbolic_sampson(F, x, xp):
    """Sampson distance built symbolically from the constraint and its gradient."""
    u, v, up, vp = sp.symbols("u v up vp")
    Fm = sp.Matrix(F)
    e = (sp.Matrix([up, vp, 1]).T * Fm * sp.Matrix([u, v, 1]))[0]
    grad = [sp.diff(e, s) for s in (u, v, up, vp)]
    d = e ** 2 / sum(g ** 2 for g in grad)
    return float(d.subs({u: x[0], v: x[1], up: xp[0], vp: xp[1]}))


def test_sampson_single_pixel_hand_case():
    F = skew([1, 0, 0])
    W = np.zeros((2, 1, 2))
    W[1, 0] = (0, 1)                  # pixel (0, 1) displaced to (0, 2); its epipolar line is v' = 1
    region = np.array([[False], [True]])
    loss = sampson_epipolar_loss(W, F, region)
    assert loss == 0.5
    assert loss == pytest.approx(symbolic_sampson(F, (0, 1), (0, 2)), abs=1e-15)


def test_sampson_matches_symbolic_oracle_random(rng):
    F = rng.normal(size=(3, 3))
    W = rng.normal(size=(2, 3, 2))
    region = np.ones((2, 3), bool)
    expected = np.mean([symbolic_sampson(F, (x, y), (x + W[y, x, 0], y + W[y, x, 1]))
                        for y in range(2) for x in range(3)])
    assert sampson_epipolar_loss(W, F, region) == pytest.approx(expected, rel=1e-12)


def test_sampson_skips_zero_denominator():
    loss, skipped = sampson_epipolar_loss(np.zeros((2, 2, 2)), np.zeros((3, 3)), np.ones((2, 2), bool),
                                          return_skipped=True)
    assert loss == 0 and skipped == 4


def _along_across(sample):
    w, _ = gt_warp_field(sample.cam_target, sample.cam_ref, sample.depth_target)
    F = fundamental_from_cameras(sample.cam_ref, sample.cam_target)
    h, wd = sample.shape
    v, u = np.mgrid[0:h, 0:wd].astype(float)
    lines = np.stack([u, v, np.ones_like(u)], -1) @ F.T
    n = lines[..., :2] / np.linalg.norm(lines[..., :2], axis=-1, keepdims=True)
    tangent = np.stack([-n[..., 1], n[..., 0]], -1)
    return w, F, tangent, n


def test_sampson_gt_along_and_across(two_plane_sample):
    s = two_plane_sample
    w, F, tangent, normal = _along_across(s)
    assert sampson_epipolar_loss(w, F, s.overlap) < 1e-10
    assert sampson_epipolar_loss(w + tangent, F, s.overlap) < 1e-8
    assert sampson_epipolar_loss(w + normal, F, s.overlap) > 1e-4


# -- EPE ----------------------------------------------------------------------------

def test_epe_single_sample_example():
    gt = np.zeros((4, 4, 2))
    w = gt.copy()
    ov = np.zeros((4, 4), bool)
    ov[:, :2] = True
    w[ov] = (3, 4)
    rep = epe_report([(w, gt, ov, 0.5)])
    cell = rep.cells["40-60"]
    assert cell["OV"] == 5.0 and cell["NOV"] == 0.0 and cell["samples"] == 1
    assert rep.cells["20-40"]["OV"] is None
    assert rep.total["OV"] == 5.0


def test_epe_all_zero_for_exact_fields(rng):
    samples = []
    for ratio in (0.25, 0.45, 0.7):
        gt = rng.normal(size=(3, 3, 2))
        samples.append((gt, gt, rng.uniform(size=(3, 3)) > 0.5, ratio))
    rep = epe_report(samples)
    for cell in list(rep.cells.values()) + [rep.total]:
        assert cell["OV"] in (0.0, None) and cell["NOV"] in (0.0, None)


def test_epe_bucket_boundaries_and_pooling():
    assert assign_bucket(0.40) == 1 and assign_bucket(0.3999) == 0 and assign_bucket(0.8) is None
    assert bucket_label((0.2, 0.4)) == "20-40"
    gt = np.zeros((1, 4, 2))
    ov_a = np.array([[True, False, False, False]])
    ov_b = np.array([[True, True, True, False]])
    w_a = gt.copy()
    w_a[0, 0] = (1, 0)
    w_b = gt.copy()
    w_b[0, :3] = (3, 0)
    rep = epe_report([(w_a, gt, ov_a, 0.4), (w_b, gt, ov_b, 0.59), (gt, gt, ov_a, 0.9)])
    assert rep.cells["40-60"]["OV"] == (1 + 9) / 4      # pooled over the 4 OV pixels
    assert rep.cells["other"]["samples"] == 1 and "other" in rep.columns
    assert rep.total["OV"] == (1 + 9 + 0) / 5


def test_epe_rejects_overlapping_buckets():
    gt = np.zeros((1, 1, 2))
    with pytest.raises(ValueError):
        epe_report([(gt, gt, np.ones((1, 1), bool), 0.5)], buckets=((0.2, 0.5), (0.4, 0.6)))
    with pytest.raises(ValueError):
        epe_report([])


# -- PSNR ----------------------------------------------------------------------------

def test_psnr_cases(rng):
    img = rng.uniform(size=(6, 6, 3))
    ov = np.ones((6, 6), bool)
    no_hole = np.zeros((6, 6), bool)
    assert masked_psnr(img, img, ov, no_hole) == 99.0
    shifted = np.clip(img, 0, 0.85) + 0.1
    assert masked_psnr(np.clip(img, 0, 0.85), shifted, ov, no_hole) == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(EmptyEvalRegion):
        masked_psnr(img, img, ov, np.ones((6, 6), bool))


def test_psnr_ignores_holes_and_non_overlap(rng):
    a = rng.uniform(size=(4, 4))
    b = a.copy()
    b[0] += 0.5
    ov = np.ones((4, 4), bool)
    hole = np.zeros((4, 4), bool)
    hole[0] = True
    assert masked_psnr(a, b, ov, hole) == 99.0
    ov[0] = False
    assert masked_psnr(a, b, ov, np.zeros((4, 4), bool)) == 99.0


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(1e-3, 0.5), d2=st.floats(1e-3, 0.5))
def test_psnr_decreases_with_error(d1, d2):
    a = np.zeros((3, 3))
    m = np.ones((3, 3), bool)
    h = np.zeros((3, 3), bool)
    p1, p2 = masked_psnr(a, a + d1, m, h), masked_psnr(a, a + d2, m, h)
    assert (p1 - p2) * (d2 - d1) >= -1e-9
    assert p1 == pytest.approx(min(99.0, -20 * math.log10(d1)), abs=1e-9)
