import math

import numpy as np
import pytest

from vidshield.codec import Frame
from vidshield.embedder import ImageEmbedder
from vidshield.metrics import (PSNR_CAP_DB, MetricReport, evaluate, psnr, ssim,
                               surrogate_edit)
from vidshield.surrogate import DiffusionSchedule, SurrogateLDM, output_to_pixels, pixels_to_input
from vidshield.synthetic import gen_video

from oracles import scalar_psnr, scalar_ssim


def rand_frame(seed, size=32):
    rng = np.random.default_rng(seed)
    return Frame(rng.integers(0, 256, size=(size, size, 3)))


def test_psnr_identical_is_infinite():
    f = rand_frame(0)
    assert psnr(f, f) == math.inf


def test_psnr_maximal_error_is_zero_db():
    a = Frame(np.zeros((16, 16, 3), dtype=np.uint8))
    b = Frame(np.full((16, 16, 3), 255, dtype=np.uint8))
    assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)


def test_psnr_matches_scalar_reference():
    for seed in range(5):
        a, b = rand_frame(2 * seed), rand_frame(2 * seed + 1)
        assert psnr(a, b) == pytest.approx(scalar_psnr(a.pixels, b.pixels), abs=1e-9)


def test_psnr_dimension_mismatch():
    with pytest.raises(ValueError, match="differ"):
        psnr(rand_frame(0, 16), rand_frame(1, 32))


def test_psnr_decreases_with_noise_magnitude():
    base = gen_video(1, 1, 32, 32).frames[0]
    rng = np.random.default_rng(2)
    values = []
    for mag in (1, 4, 16):
        noise = rng.integers(-mag, mag + 1, size=base.pixels.shape)
        noisy = Frame(np.clip(base.pixels.astype(int) + noise, 0, 255).astype(np.uint8))
        values.append(psnr(base, noisy))
    assert values[0] > values[1] > values[2]


def test_ssim_self_is_exactly_one():
    f = rand_frame(3)
    assert ssim(f, f) == 1.0


def test_ssim_symmetric():
    for seed in range(5):
        a, b = rand_frame(10 + seed), rand_frame(20 + seed)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_matches_scalar_reference():
    a, b = rand_frame(30), rand_frame(31)
    assert ssim(a, b) == pytest.approx(scalar_ssim(a.pixels, b.pixels), abs=1e-9)


def test_ssim_less_than_one_for_different_frames():
    base = gen_video(4, 1, 32, 32).frames[0]
    rng = np.random.default_rng(5)
    noisy = Frame(np.clip(base.pixels.astype(int)
                          + rng.integers(-4, 5, size=base.pixels.shape),
                          0, 255).astype(np.uint8))
    s = ssim(base, noisy)
    assert 0.0 < s < 1.0


def test_ssim_rejects_tiny_frames():
    with pytest.raises(ValueError, match="at least"):
        ssim(rand_frame(0, 8), rand_frame(1, 8))


# -- surrogate editing ----------------------------------------------------

@pytest.fixture(scope="module")
def model32():
    return SurrogateLDM(seed=0, image_size=(32, 32))


def test_edit_zero_strength_is_autoencode(model32):
    v = gen_video(6, 2, 32, 32)
    sch = DiffusionSchedule.linear_beta(2)
    out = surrogate_edit(v, model32, sch, 0)
    for frame, edited in zip(v.frames, out.frames):
        z = model32.encode(pixels_to_input(frame.pixels))
        expect = output_to_pixels(model32.decode(z))
        assert np.array_equal(edited.pixels, expect)


def test_edit_deterministic_under_seed(model32):
    v = gen_video(7, 2, 32, 32)
    sch = DiffusionSchedule.linear_beta(2)
    a = surrogate_edit(v, model32, sch, 2, seed=5)
    b = surrogate_edit(v, model32, sch, 2, seed=5)
    assert a == b
    c = surrogate_edit(v, model32, sch, 2, seed=6)
    assert a != c


def test_edit_strength_bounds(model32):
    v = gen_video(8, 1, 32, 32)
    sch = DiffusionSchedule.linear_beta(2)
    with pytest.raises(ValueError, match="strength"):
        surrogate_edit(v, model32, sch, 3)


# -- evaluate -------------------------------------------------------------

@pytest.fixture(scope="module")
def embedder():
    return ImageEmbedder(seed=2)


def test_evaluate_identical_videos(embedder):
    v = gen_video(9, 3, 32, 32)
    report = evaluate(v, v, embedder)
    assert report.mean_ssim == 1.0
    assert report.mean_psnr == PSNR_CAP_DB
    assert all(p == PSNR_CAP_DB for p in report.psnr_per_frame)
    assert report.embed_sim == pytest.approx(1.0, abs=1e-12)


def test_evaluate_matches_hand_assembled_report(embedder):
    a = gen_video(10, 4, 32, 32)
    b = gen_video(11, 4, 32, 32)
    report = evaluate(a, b, embedder)
    assert len(report.psnr_per_frame) == 4
    for i in range(4):
        assert report.psnr_per_frame[i] == min(psnr(a.frames[i], b.frames[i]), PSNR_CAP_DB)
        assert report.ssim_per_frame[i] == ssim(a.frames[i], b.frames[i])
    assert report.mean_psnr == pytest.approx(np.mean(report.psnr_per_frame), abs=1e-12)
    assert report.mean_ssim == pytest.approx(np.mean(report.ssim_per_frame), abs=1e-12)


def test_evaluate_length_mismatch(embedder):
    with pytest.raises(ValueError, match="counts"):
        evaluate(gen_video(12, 2, 32, 32), gen_video(13, 3, 32, 32), embedder)


def test_report_serialization():
    report = MetricReport(psnr_per_frame=[30.0, 40.0], ssim_per_frame=[0.9, 0.8],
                          mean_psnr=35.0, mean_ssim=0.85, embed_sim=0.5)
    text = report.to_text()
    assert "mean_psnr_db=35.000000" in text
    assert "embed_sim=0.500000" in text
    csv = report.to_csv()
    assert csv.splitlines()[0] == "frame,psnr_db,ssim"
    assert len(csv.splitlines()) == 3
