#!/usr/bin/env python3

import numpy as np

from flowBR.optical_flow import TRACKED, FlowConfig, build_pyramid, track_point
from flowBR.synthgen import TextureSpec, render_shift_pair

shifts = [(0.0, 0.25), (0.0, 0.5), (0.5, -0.25), (0.0, 1.0), (0.0, 3.0)]
textures = [TextureSpec("checker", 32, 0.8), TextureSpec("noise", 16, 0.8, seed=3)]


def recover(texture, shift, cfg=None):
    cfg = cfg or FlowConfig()
    first, second = render_shift_pair(texture, shift, size=(128, 128))
    pyr_first = build_pyramid(first, cfg.pyramid_levels, cfg.window_half_width)
    pyr_second = build_pyramid(second, cfg.pyramid_levels, cfg.window_half_width)
    assert pyr_first.n_levels == cfg.pyramid_levels
    (x, y), status = track_point(pyr_first, pyr_second, (64, 64), cfg)
    return (x - 64.0, y - 64.0), status


def test_subpixel_01():
    for texture in textures:
        for shift in shifts:
            (dx, dy), status = recover(texture, shift)
            error = np.hypot(dx - shift[0], dy - shift[1])
            tolerance = 0.05 if np.hypot(*shift) <= 0.5 else 0.1
            print(f"{texture.kind} {shift}: recovered ({dx:.4f}, {dy:.4f}), error {error:.4f}")
            assert status == TRACKED
            assert error <= tolerance


def test_subpixel_02():
    for texture in textures:
        (dx, dy), status = recover(texture, (0.0, 0.0))
        assert status == TRACKED
        assert (dx, dy) == (0.0, 0.0)


def test_subpixel_03():
    texture = TextureSpec("noise", 16, 0.8, seed=3)
    wide = FlowConfig(window_half_width=20, pyramid_levels=2)
    for shift in [(0.0, 0.5), (0.25, 1.0)]:
        (dx, dy), status = recover(texture, shift, wide)
        assert status == TRACKED
        assert np.hypot(dx - shift[0], dy - shift[1]) <= 0.1


if __name__ == "__main__":
    test_subpixel_01()
    test_subpixel_02()
    test_subpixel_03()
