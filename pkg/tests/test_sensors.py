import colorsys
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catchsim.sensors import (DEPTH_QUANTUM, CameraModel, Detection, DetectionBuffer, Frame, HsvRange,
                              RadarReturn, Source, color_filter_localize, detections_to_csv, merge_streams,
                              radar_filter, radar_scan, read_detections_csv, render_frame, rgb_to_hsv,
                              write_detections_csv)

CAM = CameraModel()
HSV = HsvRange()


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_hsv_matches_colorsys(r, g, b):
    h, s, v = rgb_to_hsv(r, g, b)
    eh, es, ev = colorsys.rgb_to_hsv(r, g, b)
    assert s == pytest.approx(es, abs=1e-12)
    assert v == pytest.approx(ev, abs=1e-12)
    if es > 1e-9:
        d = abs(h - eh * 360.0) % 360.0
        assert min(d, 360.0 - d) < 1e-7


def test_hsv_range_wraps():
    r = HsvRange(350.0, 10.0)
    assert r.contains(355.0, 0.5, 0.5) and r.contains(5.0, 0.5, 0.5)
    assert not r.contains(180.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        HsvRange(s_min=0.9, s_max=0.1)


@given(st.floats(-1.0, 1.0), st.floats(0.0, 2.0), st.floats(0.5, 8.0))
def test_project_back_project_round_trip(x, y, z):
    p = np.array([x, y, z])
    if CAM.to_camera(p)[2] <= 0.05:
        return
    u, v, d = CAM.project(p)
    assert np.allclose(CAM.back_project(u, v, d), p, atol=1e-9)


def test_project_behind_camera():
    with pytest.raises(ValueError):
        CAM.project((0.0, 0.6, -3.0))


@given(st.floats(-0.4, 0.4), st.floats(0.4, 1.6), st.floats(1.0, 3.5), st.integers(0, 2**32))
def test_noiseless_render_localize_error_bound(x, y, z, seed):
    p = np.array([x, y, z])
    u, v, depth = CAM.project(p)
    if not (8 <= u <= CAM.width - 9 and 8 <= v <= CAM.height - 9):
        return
    f = render_frame(p, 0.12, CAM, seed)
    d = color_filter_localize(f, HSV, CAM)
    assert d is not None
    # the blob centre is p's projection; the median lands within one pixel of it
    assert np.linalg.norm(d.position - p) <= depth * (1.0 / CAM.fx) + DEPTH_QUANTUM + 1e-9


@given(st.integers(0, 2**32), st.integers(1, 200))
def test_color_filter_ignores_out_of_range_pixels(seed, n_extra):
    p = np.array([0.05, 1.0, 3.0])
    f = render_frame(p, 0.12, CAM, seed)
    base = color_filter_localize(f, HSV, CAM)
    h, s, v = rgb_to_hsv(*f.data[:3])
    outside = np.argwhere(~HSV.contains(h, s, v))
    rng = np.random.default_rng(seed)
    pick = outside[rng.choice(len(outside), size=min(n_extra, len(outside)), replace=False)]
    data = f.data.copy()
    for r, c in pick:
        # cyan is far from the filter's hue window
        data[:3, r, c] = (0.1, 0.8, 0.8)
        data[3, r, c] = rng.uniform(0.5, 9.0)
    out = color_filter_localize(Frame(data, f.timestamp), HSV, CAM)
    assert np.array_equal(out.position, base.position)


def test_color_filter_none_when_absent():
    f = render_frame((0.0, 1.0, 3.0), 0.12, CAM, 1)
    f.data[:3] = 0.5
    assert color_filter_localize(f, HSV, CAM) is None


def test_render_is_deterministic_and_blur_smears():
    a = render_frame((0.0, 1.0, 2.0), 0.12, CAM, 7, blur_len=4)
    b = render_frame((0.0, 1.0, 2.0), 0.12, CAM, 7, blur_len=4)
    c = render_frame((0.0, 1.0, 2.0), 0.12, CAM, 7, blur_len=0)
    assert np.array_equal(a.data, b.data)
    assert a.data.dtype == np.float32 and a.data.shape == (4, 60, 80)
    pink = lambda fr: HSV.contains(*rgb_to_hsv(*fr.data[:3]))
    rows = lambda m: np.nonzero(m.any(axis=1))[0]
    # the trail reaches above the sharp blob and dilutes it
    assert rows(pink(a)).min() < rows(pink(c)).min()
    assert pink(a).sum() < pink(c).sum()


@given(st.lists(st.floats(-8, 8), max_size=12), st.floats(0.0, 1.0))
def test_radar_filter_never_keeps_non_approaching(vels, v_static):
    returns = [RadarReturn(np.array([float(i), 0.0, 0.0]), v) for i, v in enumerate(vels)]
    d = radar_filter(returns, 0.1, v_static)
    if d is None:
        assert all(v >= 0 or abs(v) < v_static for v in vels)
        return
    src = returns[int(d.position[0])]
    assert src.radial_velocity < 0 and abs(src.radial_velocity) >= v_static
    assert d.source == Source.RADAR


def test_radar_scan_mti_recovers_object():
    pos, vel = np.array([0.1, 1.2, 3.0]), np.array([0.0, -1.0, -5.0])
    for seed in range(20):
        d = radar_filter(radar_scan(pos, vel, seed, 0.0), 0.2)
        assert d is not None and np.allclose(d.position, pos)


_det = st.builds(lambda t, x, s: Detection([x, 0.0, 0.0], t, s), st.floats(0, 2), st.floats(-1, 1),
                 st.sampled_from(list(Source)))


@given(st.lists(_det, max_size=15), st.lists(_det, max_size=15))
def test_merge_preserves_multiset_and_order(cam, rad):
    cam = sorted(cam, key=lambda d: d.t)
    rad = sorted(rad, key=lambda d: d.t)
    out = merge_streams(cam, rad)
    assert len(out) == len(cam) + len(rad)
    key = lambda d: (d.t, float(d.position[0]), int(d.source))
    assert sorted(map(key, out)) == sorted(map(key, itertools.chain(cam, rad)))
    ts = [d.t for d in out]
    assert ts == sorted(ts)


def test_merge_rejects_unordered():
    with pytest.raises(ValueError):
        merge_streams([Detection([0, 0, 0], 1.0), Detection([0, 0, 0], 0.5)], [])


def test_buffer_rejects_out_of_order_and_negative_time():
    buf = DetectionBuffer([Detection([0, 0, 0], 0.2)])
    with pytest.raises(ValueError):
        buf.append(Detection([0, 0, 0], 0.1))
    with pytest.raises(ValueError):
        Detection([0, 0, 0], -1.0)


def test_detection_csv_format(tmp_path):
    dets = [Detection([0.1, 1.0 / 3.0, 2.0], 0.033, Source.CAMERA), Detection([1e-10, -2.5, 3.0], 0.05, Source.RADAR)]
    text = detections_to_csv(dets)
    lines = text.split("\n")
    assert lines[0] == "t,x,y,z,source"
    assert lines[1] == "0.033,0.1,0.333333333,2,0"
    assert "\r" not in text and text.endswith("\n")
    path = tmp_path / "d.csv"
    write_detections_csv(path, dets)
    assert path.read_bytes() == text.encode()
    back = read_detections_csv(path)
    assert [d.source for d in back] == [Source.CAMERA, Source.RADAR]
    assert np.allclose(back.to_array(), DetectionBuffer(dets).to_array(), rtol=1e-8)
