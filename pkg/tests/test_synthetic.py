import numpy as np
import pytest

from vidshield.synthetic import gen_target_queue, gen_video


def test_gen_video_shapes_and_motion():
    v = gen_video(0, 4, 48, 32)
    assert len(v) == 4
    assert (v.width, v.height) == (48, 32)
    # shapes move, so consecutive frames differ
    assert any(not np.array_equal(a.pixels, b.pixels)
               for a, b in zip(v.frames, v.frames[1:]))


def test_gen_video_deterministic():
    a = gen_video(3, 3, 32, 32)
    b = gen_video(3, 3, 32, 32)
    assert a == b
    assert a != gen_video(4, 3, 32, 32)


def test_gen_video_validation():
    with pytest.raises(ValueError, match="multiples"):
        gen_video(0, 1, 60, 64)
    with pytest.raises(ValueError, match="n_frames"):
        gen_video(0, 0, 64, 64)


def test_gen_target_queue_variety():
    frames = gen_target_queue(1, 8, 32, 32)
    assert len(frames) == 8
    uniques = {f.pixels.tobytes() for f in frames}
    assert len(uniques) == 8
    again = gen_target_queue(1, 8, 32, 32)
    assert all(a == b for a, b in zip(frames, again))
