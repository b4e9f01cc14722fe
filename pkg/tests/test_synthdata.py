import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panocalib.calibrator import batch_loss
from panocalib.errors import InvalidArgument
from panocalib.geometry import ExtrinsicPose, transform
from panocalib.synthdata import (
    REFERENCE_POSE,
    ChordSegment,
    NoiseSpec,
    ScanLayout,
    TargetRig,
    chord_from_plane,
    chord_pixel_endpoints,
    exact_pixel_endpoints,
    generate_correspondences,
    scan_plane_normal,
    scan_target,
    simulate_circle_detection,
    standard_dataset,
    standard_rigs,
)

R = 0.3
FRONT = TargetRig((5.0, 0.0, 0.0), (-1.0, 0.0, 0.0), R)


def _rim_checks(rig, seg):
    for p in seg.endpoints:
        d = np.asarray(p) - rig.center
        assert abs(np.linalg.norm(d) - rig.disc_radius) < 1e-9
        assert abs(d @ rig.normal) < 1e-9
    assert abs(seg.offset ** 2 + seg.half_length ** 2 - rig.disc_radius ** 2) < 1e-9


def test_rig_validation():
    with pytest.raises(InvalidArgument):
        TargetRig((5, 0, 0), (-1, 0, 0), 0.0)
    with pytest.raises(InvalidArgument):
        TargetRig((5, 0, 0), (-1, 0, 0), R, up=(1, 0, 0))
    with pytest.raises(InvalidArgument):
        TargetRig((5, 0, 0), (-2, 0, 0), R)


def test_layout_validation():
    assert ScanLayout().number_of_channels == 16
    with pytest.raises(InvalidArgument):
        ScanLayout((0.1, 0.0))
    with pytest.raises(InvalidArgument):
        ScanLayout((0.0, 0.1), azimuth_step=0.0)


def test_chord_through_center_is_diameter():
    seg = chord_from_plane(FRONT, scan_plane_normal(0.0, 0.0))
    assert seg.length == pytest.approx(2 * R, abs=1e-9)
    assert seg.quadrant == 0
    _rim_checks(FRONT, seg)


def test_chord_at_half_radius():
    elev = math.atan((R / 2) / 5.0)
    seg = chord_from_plane(FRONT, scan_plane_normal(elev, 0.0))
    assert seg.offset == pytest.approx(R / 2, abs=1e-12)
    assert seg.length == pytest.approx(R * math.sqrt(3), abs=1e-9)
    assert seg.quadrant in (1, 2)  # above the centre
    _rim_checks(FRONT, seg)


def test_chord_miss():
    elev = math.atan(1.01 * R / 5.0)
    assert chord_from_plane(FRONT, scan_plane_normal(elev, 0.0)) is None
    assert chord_from_plane(FRONT, scan_plane_normal(-elev, 0.0)) is None


def test_scan_rejects_disc_around_origin():
    with pytest.raises(InvalidArgument):
        scan_target(TargetRig((0.1, 0, 0), (-1, 0, 0), R), ScanLayout())


@given(st.floats(-1.5, 1.5), st.floats(-0.25, 0.25), st.floats(3.0, 15.0))
def test_scan_endpoints_on_rim(azimuth, elevation, distance):
    c = distance * np.array([math.cos(elevation) * math.cos(azimuth),
                             math.cos(elevation) * math.sin(azimuth), math.sin(elevation)])
    rig = TargetRig.facing_origin(c, R)
    for seg in scan_target(rig, ScanLayout()):
        _rim_checks(rig, seg)


def test_standard_rigs_give_three_chords_each():
    for rig in standard_rigs():
        assert len(scan_target(rig, ScanLayout())) == 3


def test_standard_dataset_count_and_consistency(clean_data, truth):
    assert len(clean_data) == 48
    loss, n = batch_loss(clean_data, truth)
    assert n == 48 and loss < 1e-18
    # everything lands in the x_c > 0 half-space used by the regression
    pc = transform(np.array([c.lidar_point for c in clean_data]), truth)
    assert pc[:, 0].min() > 1.0


def test_generation_deterministic():
    noise = NoiseSpec(point_sigma=0.01, pixel_sigma=(1 / 4096, 1 / 2048), rng_seed=3)
    assert standard_dataset(noise) == standard_dataset(noise)
    assert standard_dataset(noise) != standard_dataset(NoiseSpec(0.01, (1 / 4096, 1 / 2048), 4))


def test_noise_statistics():
    sigma = 1e-3
    cs = generate_correspondences(standard_rigs() * 20, ScanLayout(), REFERENCE_POSE,
                                  NoiseSpec(pixel_sigma=sigma, rng_seed=1))
    clean = generate_correspondences(standard_rigs() * 20, ScanLayout(), REFERENCE_POSE)
    du = np.array([a.target.u - b.target.u for a, b in zip(cs, clean)])
    assert abs(du.std() / sigma - 1) < 0.1
    assert all(a.lidar_point == b.lidar_point for a, b in zip(cs, clean))


def test_noise_spec_pixels():
    n = NoiseSpec.pixels(1.0, 4096, 2048)
    assert n.pixel_sigmas == (1 / 4096, 1 / 2048)
    with pytest.raises(InvalidArgument):
        NoiseSpec(point_sigma=-1)


def test_pole_endpoints_skipped_with_warning():
    # put the camera directly below one chord endpoint
    rig = TargetRig((5.0, 0.0, 0.0), (-1.0, 0.0, 0.0), R)
    end = scan_target(rig, ScanLayout())[0].endpoints[0]
    pose = ExtrinsicPose.from_vector([0, 0, 0, -end[0], -end[1], 0.0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cs = generate_correspondences(rig, ScanLayout(), pose)
    assert any("pole" in str(w.message) for w in caught)
    ends = [p for seg in scan_target(rig, ScanLayout()) for p in seg.endpoints]
    on_axis = sum(1 for p in ends if abs(p[0] - end[0]) < 1e-12 and abs(p[1] - end[1]) < 1e-12)
    assert on_axis >= 1
    assert len(cs) == len(ends) - on_axis


def test_chord_returns_span_endpoints():
    seg = scan_target(standard_rigs()[0], ScanLayout())[0]
    pts = seg.returns(math.radians(0.2))
    np.testing.assert_allclose(pts[0], seg.endpoints[0])
    np.testing.assert_allclose(pts[-1], seg.endpoints[1])
    assert len(pts) >= 3


def _diameter_segment(orientation):
    return ChordSegment(((0, 0, 0), (0, 0, 0)), 0.0, R, orientation, 0)


def test_pixel_endpoints_horizontal_diameter():
    a, b = chord_pixel_endpoints(_diameter_segment(math.pi / 2), (0.5, 0.4), (0.01, 0.02), FRONT)
    assert sorted([a.u, b.u]) == pytest.approx([0.49, 0.51], abs=1e-15)
    assert a.v == pytest.approx(0.4, abs=1e-15) and b.v == pytest.approx(0.4, abs=1e-15)


def test_pixel_endpoints_tangent_chord():
    seg = ChordSegment(((0, 0, 0), (0, 0, 0)), R, 0.0, math.pi / 2, 1)
    a, b = chord_pixel_endpoints(seg, (0.5, 0.4), (0.01, 0.02), FRONT)
    assert a == b
    assert a.u == pytest.approx(0.5, abs=1e-15) and a.v == pytest.approx(0.38, abs=1e-15)


def test_pixel_endpoints_rejects_bad_radius():
    with pytest.raises(InvalidArgument):
        chord_pixel_endpoints(_diameter_segment(0.0), (0.5, 0.5), (0.0, 0.01), FRONT)


def _approx_error_px(distance, azimuth_deg=-30.0, elevation_deg=1.0, width=4096, height=2048):
    a, e = math.radians(azimuth_deg), math.radians(elevation_deg)
    c = distance * np.array([math.cos(e) * math.cos(a), math.cos(e) * math.sin(a), math.sin(e)])
    rig = TargetRig.facing_camera(c, R, REFERENCE_POSE)
    det = simulate_circle_detection(rig, REFERENCE_POSE)
    cam_range = np.linalg.norm(transform(c, REFERENCE_POSE))
    subtense = 2 * math.degrees(math.asin(R / cam_range))
    worst = 0.0
    segs = scan_target(rig, ScanLayout())
    assert segs
    for seg in segs:
        approx = chord_pixel_endpoints(seg, det.center, det.radius, rig)
        exact = exact_pixel_endpoints(seg, REFERENCE_POSE)
        for p, q in zip(approx, exact):
            worst = max(worst, abs(math.remainder(p.u - q.u, 1.0)) * width, abs(p.v - q.v) * height)
    return subtense, worst


def test_circle_geometry_close_to_exact_projection():
    results = [_approx_error_px(d) for d in (8.0, 12.0, 16.0)]
    for subtense, err in results:
        assert subtense < 5.0
        assert err < 0.5
    errs = [e for _, e in results]
    assert errs[0] > errs[1] > errs[2]


def test_facing_camera_axes_align_with_image():
    rig = TargetRig.facing_camera((8.0, -3.0, 0.2), R, REFERENCE_POSE)
    det = simulate_circle_detection(rig, REFERENCE_POSE)
    assert det.radius[0] > 0 and det.radius[1] > 0
