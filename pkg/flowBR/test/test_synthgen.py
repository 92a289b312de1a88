#!/usr/bin/env python3

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from flowBR.exceptions import SpecError
from flowBR.roi_points import PointConfigKind, parse_keypoints, select_points
from flowBR.synthgen import (
    BACKGROUND,
    SceneSpec,
    TextureSpec,
    head_jitter,
    load_truth,
    render_breathing_video,
    render_shift_pair,
    scene_keypoints,
    write_scene,
)
from flowBR.video_io import load_frame_dir, load_y4m


def short_scene(**kwargs):
    options = dict(duration=2.0)
    options.update(kwargs)
    return SceneSpec(**options)


def test_static_01():
    seq, truth, _ = render_breathing_video(short_scene(breathing_amp=0.0))
    stack = seq.stack()
    assert np.all(stack == stack[0])
    assert np.all(truth.chest_dy == 0)


def test_truth_02():
    seq, truth, _ = render_breathing_video(short_scene(breathing_freq=0.3))
    assert truth.bpm == pytest.approx(18.0)
    assert truth.chest_dy[25] == pytest.approx(2.0)
    assert truth.chest_dy[0] == 0.0
    assert seq.n_frames == 60
    assert seq.fps == 30.0
    assert np.all(truth.face_offset[:, 0] == 0.0)
    assert np.allclose(truth.face_offset[:, 1], truth.chest_dy)


def test_determinism_03():
    spec = short_scene(head_noise_amp=3.0, seed=7)
    first, truth_a, keys_a = render_breathing_video(spec)
    second, truth_b, keys_b = render_breathing_video(spec)
    assert np.array_equal(first.stack(), second.stack())
    assert np.array_equal(truth_a.face_offset, truth_b.face_offset)
    assert keys_a == keys_b
    assert not np.array_equal(head_jitter(short_scene(head_noise_amp=3.0, seed=8)), head_jitter(spec))


def test_jitter_04():
    jitter = head_jitter(SceneSpec(head_noise_amp=4.0, seed=2))
    assert jitter.shape == (900, 2)
    assert np.max(np.abs(jitter)) == pytest.approx(4.0)
    assert np.allclose(jitter.mean(axis=0), 0.0, atol=1e-9)


def test_motion_05():
    texture = TextureSpec("noise", 16, 0.8, seed=5)
    spec = short_scene(chest_texture=texture, breathing_freq=0.5, breathing_amp=3.0)
    seq, truth, _ = render_breathing_video(spec)
    x0, y0, x1, y1 = spec.chest_region
    t = int(np.argmax(truth.chest_dy))
    rise = int(round(truth.chest_dy[t]))
    assert rise == 3
    # an integer rise moves the chest rows up by exactly that many pixels
    inner = (slice(y0 + 8, y1 - 8), slice(x0 + 8, x1 - 8))
    moved = seq[t].intensity[y0 + 8 - rise : y1 - 8 - rise, x0 + 8 : x1 - 8]
    assert np.mean(np.abs(moved - seq[0].intensity[inner])) < 0.02


def test_keypoints_06():
    spec = SceneSpec()
    keypoints = scene_keypoints(spec)
    assert set(keypoints.present()) == {
        "eye_left",
        "eye_right",
        "nose",
        "chin",
        "shoulder_left",
        "shoulder_right",
        "neck",
    }
    for half_width in (10, 20):
        for kind in PointConfigKind:
            points = select_points(kind, keypoints, bounds=(spec.width, spec.height), half_width=half_width)
            assert len(points) == (15 if kind is PointConfigKind.chest_grid else 3)
    chest_only = scene_keypoints(SceneSpec(face_region=None))
    assert chest_only.nose is None and chest_only.neck is not None


def test_spec_07():
    with pytest.raises(SpecError):
        SceneSpec(chest_region=(16, 60, 144, 196))
    with pytest.raises(SpecError):
        SceneSpec(breathing_freq=15.0)
    with pytest.raises(SpecError):
        SceneSpec(breathing_amp=-1.0)
    with pytest.raises(SpecError):
        SceneSpec(chest_region=(16, 84, 200, 196))
    with pytest.raises(SpecError):
        SceneSpec(duration=0.0)
    with pytest.raises(SpecError):
        TextureSpec("stripes")
    with pytest.raises(SpecError):
        TextureSpec("checker", contrast=1.5)


def test_textures_08():
    for kind in ("checker", "sinusoid2d", "noise"):
        image = TextureSpec(kind, 16, 0.8).render(48, 32)
        assert image.shape == (32, 48)
        assert image.min() >= 0.1 - 1e-12 and image.max() <= 0.9 + 1e-12
        assert image.std() > 0.05
    assert np.all(TextureSpec("flat").render(8, 8) == 0.5)
    checker = TextureSpec("checker", 8, 1.0).render(8, 8)
    assert checker[0, 0] == 0.0 and checker[0, 4] == 1.0 and checker[4, 4] == 0.0


def test_shift_pair_09():
    first, second = render_shift_pair(TextureSpec("noise", 16, 0.8), (0.0, 0.0))
    assert np.array_equal(first.intensity, second.intensity)
    first, second = render_shift_pair(TextureSpec("checker", 8, 1.0), (0.0, 2.0))
    assert np.array_equal(second.intensity[2:], first.intensity[:-2])


def test_write_scene_10(tmp_path):
    seq, truth, keypoints = render_breathing_video(short_scene())
    written = write_scene(tmp_path, seq, truth, keypoints, formats=("pgm", "png", "y4m"))
    assert set(written) == {"frames", "video", "keypoints", "truth"}
    assert len(list((tmp_path / "frames").glob("*.pgm"))) == 60
    assert (tmp_path / "frames" / "0001.png").exists()

    from_dir = load_frame_dir(tmp_path / "frames", "*.pgm", 30.0)
    from_y4m = load_y4m(tmp_path / "video.y4m")
    assert np.array_equal(from_dir.stack(), from_y4m.stack())

    loaded = load_truth(tmp_path / "truth.csv")
    assert loaded.bpm == truth.bpm
    assert loaded.fps == 30.0
    assert np.allclose(loaded.chest_dy, truth.chest_dy, atol=1e-9)
    assert parse_keypoints(tmp_path / "keypoints.json") == keypoints
    assert sorted(json.loads((tmp_path / "keypoints.json").read_text())) == sorted(keypoints.present())

    with pytest.raises(SpecError):
        write_scene(tmp_path / "bad", seq, truth, keypoints, formats=("avi",))


def test_composite_11():
    spec = short_scene(face_region=None, chest_region=(16, 84, 144, 224), breathing_freq=0.4)
    seq, truth, _ = render_breathing_video(spec)
    x0, y0, x1, y1 = spec.chest_region
    content = np.zeros((spec.height, spec.width))
    mask = np.zeros((spec.height, spec.width))
    content[y0:y1, x0:x1] = spec.chest_texture.render(x1 - x0, y1 - y0)
    mask[y0:y1, x0:x1] = 1.0
    for t in (7, 23, 40):
        shift = (-truth.chest_dy[t], 0.0)
        moved = ndimage.shift(content, shift, order=1, mode="constant", cval=0.0)
        cover = ndimage.shift(mask, shift, order=1, mode="constant", cval=0.0)
        expected = np.clip(BACKGROUND * (1.0 - cover) + moved, 0.0, 1.0)
        assert np.allclose(seq[t].intensity, expected, atol=1e-12)


if __name__ == "__main__":
    test_static_01()
    test_truth_02()
    test_determinism_03()
    test_jitter_04()
    test_motion_05()
    test_keypoints_06()
    test_spec_07()
    test_textures_08()
    test_shift_pair_09()
    test_write_scene_10(Path(tempfile.mkdtemp()))
    test_composite_11()
