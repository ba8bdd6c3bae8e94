"""Smoke test for the motionfuse extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/motionfuse-*.whl
"""

import math
from pathlib import Path

import motionfuse as mf

ROOT = Path(__file__).resolve().parent.parent


def moving_square(k, w=32, h=24, side=6, value=20, background=150):
    px = bytearray([background] * (w * h))
    x0 = 3 + 2 * k
    for y in range(9, 9 + side):
        for x in range(x0, x0 + side):
            px[y * w + x] = value
    return mf.Frame(w, h, bytes(px), index=k)


def check_frames():
    f = moving_square(0)
    assert (f.width, f.height) == (32, 24)
    assert mf.Frame.from_pgm(f.to_pgm()).pixels == f.pixels
    hist = f.histogram()
    assert len(hist) == 256 and hist[20] == 36 and sum(hist) == 32 * 24


def check_detector():
    window = mf.DiffWindow(threshold=25)
    masks = [window.push(moving_square(k)) for k in range(5)]
    assert masks[0] is None and masks[1] is None
    for m in masks[2:]:
        assert m.count() == 24
        blobs = m.blobs(connectivity=8, min_area=1)
        assert [b.area for b in blobs] == [12, 12]
    direct = mf.motion_mask(moving_square(0), moving_square(1), moving_square(2), 25)
    assert direct.bits == masks[2].bits


def check_threshold():
    hist = [0] * 256
    for v in range(256):
        hist[v] = round(4000 * (math.exp(-((v - 60) ** 2) / 200) + math.exp(-((v - 190) ** 2) / 200)))
    t, info = mf.fuzzy_threshold(hist)
    assert info["x_j"] < t < info["x_r"], (t, info["x_j"], info["x_r"])
    assert abs(info["alpha"] - 1.0) < 1e-9
    try:
        mf.fuzzy_threshold([0] * 100 + [5] + [0] * 155)
    except mf.NoContrastError:
        pass
    else:
        raise AssertionError("flat histogram accepted")
    assert mf.mu_b(0.0, 0.0, 5.0, 10.0) == 0.0
    assert mf.mu_b(10.0, 0.0, 5.0, 10.0) == 1.0
    assert mf.mu_b(5.0, 0.0, 5.0, 10.0) == 0.5
    assert mf.fuzziness_index([0.0, 1.0, 0.5], 1) > 0.0


def check_fusion():
    assert mf.decide(False, False, False, 0.0) == ("TurnToZero", 7)
    action, rule = mf.decide(True, False, False, 0.0, centroid=(160.0, 120.0))
    assert action == "CameraTracking" and rule == 1
    pan, tilt = mf.tracking_command((300.0, 120.0))
    assert pan > 0.0 and tilt == 0.0
    state = mf.PanTilt(pan_deg=10.0).apply("TurnToZero", 1.0)
    assert state.pan_deg == 0.0
    assert mf.zone_of(2.0, 1.7) is not None
    assert mf.zone_of(50.0, 1.7) is None
    assert mf.sample_array(50.0, 0.0, 1.7, 1.0) == (False, False, False)


def check_simulation():
    text = (ROOT / "scenarios" / "front_walker.toml").read_text()
    result = mf.run_scenario(text, ticks=80)
    assert result["ticks"] == 80
    assert result["log_csv"].startswith("tick,")
    again = mf.run_scenario(text, ticks=80)
    assert again["log_csv"] == result["log_csv"]


def main():
    check_frames()
    check_detector()
    check_threshold()
    check_fusion()
    check_simulation()
    print("motionfuse smoke test: ok")


if __name__ == "__main__":
    main()
