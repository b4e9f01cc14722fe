import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panocalib.errors import BranchDomain, InvalidArgument, PoleSingularity
from panocalib.geometry import (
    EulerZXZ,
    ExtrinsicPose,
    HForm,
    Variant,
    h_form,
    inverse_transform,
    project,
    project_many,
    reconstruct_uv,
    rotation_matrix,
    transform,
    unproject,
    unproject_many,
)

REFERENCE_ANGLES = (4.7112, 0.8932, 1.8420)
# Rz(a) Rx(b) Rz(g) at the reference angles, cross-checked against
# scipy.spatial.transform.Rotation.from_euler("ZXZ", ...) to 1.2e-16.
REFERENCE_MATRIX = np.array([
    [6.0432572485275127e-01, -1.6680136212189106e-01, -7.7908133328650520e-01],
    [2.6717296597264534e-01, 9.6364814543372901e-01, 9.2631285985742614e-04],
    [7.5060577171680243e-01, -2.0870926523855235e-01, 6.2692217863863064e-01],
])

angles = st.floats(-10.0, 10.0, allow_nan=False)
coords = st.floats(-50.0, 50.0, allow_nan=False)


def test_identity_rotation():
    np.testing.assert_array_equal(rotation_matrix(EulerZXZ(0, 0, 0)), np.eye(3))


def test_single_axis_rotations():
    np.testing.assert_allclose(rotation_matrix((math.pi / 2, 0, 0)) @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(rotation_matrix((0, math.pi / 2, 0)) @ [0, 1, 0], [0, 0, 1], atol=1e-15)


def test_reference_rotation_matrix():
    r = rotation_matrix(REFERENCE_ANGLES)
    np.testing.assert_allclose(r, REFERENCE_MATRIX, rtol=0, atol=1e-15)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_rotation_against_scipy():
    scipy_rot = pytest.importorskip("scipy.spatial.transform").Rotation
    rng = np.random.default_rng(3)
    for a in rng.uniform(-7, 7, size=(50, 3)):
        np.testing.assert_allclose(rotation_matrix(a), scipy_rot.from_euler("ZXZ", a).as_matrix(), atol=1e-14)


def test_rotation_orthonormal_bulk():
    rng = np.random.default_rng(0)
    for a in rng.uniform(-4 * math.pi, 4 * math.pi, size=(10_000, 3)):
        r = rotation_matrix(a)
        assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-10
        assert abs(np.linalg.det(r) - 1.0) < 1e-10


def test_rotation_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        rotation_matrix((math.nan, 0, 0))
    with pytest.raises(InvalidArgument):
        EulerZXZ(0, math.inf, 0)


@given(angles, angles, angles)
def test_normalized_angles_same_rotation(a, b, g):
    e = EulerZXZ(a, b, g)
    n = e.normalized()
    assert 0 <= n.alpha < 2 * math.pi and 0 <= n.beta <= math.pi and 0 <= n.gamma < 2 * math.pi
    np.testing.assert_allclose(rotation_matrix(n), rotation_matrix(e), atol=1e-12)


def test_transform_examples():
    ident = ExtrinsicPose.identity()
    np.testing.assert_array_equal(transform([1, 2, 3], ident), [1, 2, 3])
    shifted = ExtrinsicPose(EulerZXZ(0, 0, 0), (1, 2, 3))
    np.testing.assert_array_equal(transform([0, 0, 0], shifted), [1, 2, 3])
    ref = ExtrinsicPose(EulerZXZ(*REFERENCE_ANGLES), (2.8673, 0.6389, -1.7732))
    np.testing.assert_array_equal(transform([0, 0, 0], ref), [2.8673, 0.6389, -1.7732])


@given(st.tuples(angles, angles, angles, coords, coords, coords), st.tuples(coords, coords, coords))
def test_transform_invertible(params, p):
    pose = ExtrinsicPose.from_vector(params)
    back = inverse_transform(transform(p, pose), pose)
    np.testing.assert_allclose(back, p, atol=1e-10)


@pytest.mark.parametrize("p, uv", [
    ((1, 0, 0), (0.5, 0.5)),
    ((0, 1, 0), (0.25, 0.5)),
    ((1, 0, 1), (0.5, 0.25)),
])
def test_project_examples(p, uv):
    assert project(p) == pytest.approx(uv, abs=1e-15)


def test_project_pole():
    with pytest.raises(PoleSingularity):
        project((0, 0, 1))
    with pytest.raises(PoleSingularity):
        project((1e-7, 0, -3))


def test_project_seam_stays_below_one():
    # atan2(-0.0, -1) = -pi would give u = 1
    u, _ = project((-1.0, -0.0, 0.0))
    assert 0.0 <= u < 1.0


@pytest.mark.parametrize("uv, d", [((0.5, 0.5), (1, 0, 0)), ((0.25, 0.5), (0, 1, 0))])
def test_unproject_examples(uv, d):
    np.testing.assert_allclose(unproject(uv), d, atol=1e-15)


def test_unproject_rejects_out_of_range():
    with pytest.raises(InvalidArgument):
        unproject((1.0, 0.5))


def test_round_trip_bulk():
    rng = np.random.default_rng(1)
    uv = np.column_stack([rng.uniform(0, 1, 100_000), rng.uniform(1e-6, 1 - 1e-6, 100_000)])
    back, valid = project_many(unproject_many(uv))
    assert valid.all()
    err = np.abs(back - uv)
    err[:, 0] = np.minimum(err[:, 0], 1 - err[:, 0])  # u = 0 and u -> 1 are the same column
    assert err.max() < 1e-12


@given(st.floats(0.0, 0.999999), st.floats(1e-6, 1 - 1e-6))
def test_round_trip_property(u, v):
    back = project(unproject((u, v)))
    assert abs(math.remainder(back.u - u, 1.0)) < 1e-12
    assert abs(back.v - v) < 1e-12
    assert np.linalg.norm(unproject((u, v))) == pytest.approx(1.0, abs=1e-15)


@given(st.tuples(coords, coords, coords).filter(lambda p: p[0] ** 2 + p[1] ** 2 > 1e-6),
       st.floats(1e-3, 1e3))
def test_projection_scale_invariant(p, s):
    a = project(p)
    b = project(tuple(s * c for c in p))
    assert abs(math.remainder(a.u - b.u, 1.0)) < 1e-12
    assert a.v == pytest.approx(b.v, abs=1e-12)


def test_h_form_examples():
    assert h_form((1, 1, 0), "paper-exact")[:2] == (1.0, 0.0)
    assert h_form((1, 0, 1), "paper-exact")[:2] == (0.0, 1.0)
    with pytest.raises(BranchDomain):
        h_form((0, 1, 0))
    with pytest.raises(BranchDomain):
        h_form((1e-10, 1, 0), Variant.PAPER)


def test_h_form_matches_tangent_identities():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        p = np.array([rng.uniform(0.1, 10), rng.uniform(-10, 10), rng.uniform(0.01, 10)])
        u, v = project(p)
        h = h_form(p, Variant.PAPER)
        assert h.h1 == pytest.approx(math.tan(math.pi - 2 * math.pi * u), rel=1e-9, abs=1e-12)
        assert h.h2 == pytest.approx(math.tan(math.pi / 2 - math.pi * v) ** 2, rel=1e-9, abs=1e-12)


def test_reconstruct_center():
    assert reconstruct_uv(HForm(0.0, 0.0, Variant.PAPER)) == (0.5, 0.5)
    assert reconstruct_uv(HForm(0.0, 0.0, Variant.SIGNED)) == (0.5, 0.5)


def test_reconstruct_rejects_negative_h2():
    with pytest.raises(InvalidArgument):
        reconstruct_uv(HForm(0.0, -0.1, Variant.PAPER))


def _sample_front(rng, n, upper_only):
    x = rng.uniform(1e-3, 20, n)
    y = rng.uniform(-20, 20, n)
    z = rng.uniform(0, 20, n) if upper_only else rng.uniform(-20, 20, n)
    return np.column_stack([x, y, z])


def test_branch_agreement_bulk():
    rng = np.random.default_rng(4)
    for p in _sample_front(rng, 20_000, upper_only=True):
        expect = project(p)
        for variant in Variant:
            got = reconstruct_uv(h_form(p, variant))
            assert abs(got.u - expect.u) < 1e-12 and abs(got.v - expect.v) < 1e-12


def test_signed_variant_covers_lower_hemisphere():
    rng = np.random.default_rng(5)
    pts = _sample_front(rng, 2000, upper_only=False)
    pts[:, 2] = -np.abs(pts[:, 2]) - 0.1
    for p in pts:
        expect = project(p)
        signed = reconstruct_uv(h_form(p, Variant.SIGNED))
        assert abs(signed.v - expect.v) < 1e-12 and abs(signed.u - expect.u) < 1e-12
        paper = reconstruct_uv(h_form(p, Variant.PAPER))
        # squared elevation term mirrors the point into the upper hemisphere
        assert paper.v == pytest.approx(1.0 - expect.v, abs=1e-12)
        assert abs(paper.v - expect.v) > 1e-6


def test_variant_parse():
    assert Variant.parse("paper") is Variant.PAPER
    assert Variant.parse("signed") is Variant.SIGNED
    with pytest.raises(InvalidArgument):
        Variant.parse("bogus")
