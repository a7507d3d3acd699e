import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from glap.projections import (
    GeneralPerspective,
    PanniniParams,
    ProjectionDomainError,
    SpherePoint,
    ViewportSpec,
    gpp_backward,
    gpp_forward,
    pannini_backward,
    pannini_forward,
    pixel_plane_coords,
    rectilinear_forward,
    rotate_to_vd,
    stereographic_forward,
    unrotate_from_vd,
    viewport_plane_extent,
    wrap_longitude,
)

D_VALUES = [round(0.1 * k, 1) for k in range(0, 13)]
VC_VALUES = [round(0.1 * k, 1) for k in range(0, 11)]


def grid(n=50, phi_max=80, theta_max=60):
    phi, theta = np.meshgrid(np.radians(np.linspace(-phi_max, phi_max, n)), np.radians(np.linspace(-theta_max, theta_max, n)))
    return phi, theta


@pytest.mark.parametrize("d", [0.0, 0.3, 0.5, 1.0, 1.2])
@pytest.mark.parametrize("vc", [0.0, 0.4, 1.0])
def test_forward_matches_cylinder_construction(d, vc):
    phi, theta = grid(25)
    x, y = pannini_forward(phi, theta, PanniniParams(d, vc))
    xo, yo = oracles.pannini_geometric(phi, theta, d, vc)
    assert np.allclose(x, xo, rtol=1e-13, atol=1e-13)
    assert np.allclose(y, yo, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("d,vc", [(0.0, 0.0), (0.5, 0.0), (0.5, 0.6), (1.0, 1.0), (1.2, 0.3)])
def test_backward_matches_root_finding(d, vc):
    rng = np.random.default_rng(7)
    p = PanniniParams(d, vc)
    for _ in range(40):
        phi, theta = rng.uniform(-1.3, 1.3), rng.uniform(-1.0, 1.0)
        x, y = p.forward(phi, theta)
        po, to = oracles.pannini_inverse_numeric(x, y, d, vc)
        pb, tb = p.backward(x, y)
        assert abs(pb - po) < 1e-11 and abs(tb - to) < 1e-11


def test_round_trip_full_grid():
    phi, theta = grid()
    worst = 0.0
    for d in D_VALUES:
        for vc in VC_VALUES:
            p = PanniniParams(d, vc)
            pb, tb = p.backward(*p.forward(phi, theta))
            worst = max(worst, np.max(np.abs(pb - phi)), np.max(np.abs(tb - theta)))
    assert worst < 1e-9


def test_round_trip_plane_side():
    p = PanniniParams(0.7, 0.4)
    x, y = np.meshgrid(np.linspace(-2, 2, 31), np.linspace(-1.5, 1.5, 21))
    xb, yb = p.forward(*p.backward(x, y))
    assert np.max(np.abs(xb - x)) < 1e-12 and np.max(np.abs(yb - y)) < 1e-12


def test_specialisations():
    phi, theta = grid()
    xr, yr = rectilinear_forward(phi, theta)
    for x, y in (pannini_forward(phi, theta, PanniniParams(0, 0)), gpp_forward(phi, theta, 0.0)):
        assert np.max(np.abs(x - xr)) < 1e-12 and np.max(np.abs(y - yr)) < 1e-12
    xs, ys = stereographic_forward(phi, theta)
    x1, y1 = gpp_forward(phi, theta, 1.0)
    assert np.array_equal(xs, x1) and np.array_equal(ys, y1)


def test_stereographic_closed_form():
    # stereographic from the antipode onto z = 1: r = 2 tan(c / 2), c = angle from the view axis
    phi, theta = grid(21)
    x, y = stereographic_forward(phi, theta)
    c = np.arccos(np.cos(theta) * np.cos(phi))
    assert np.allclose(np.hypot(x, y), 2 * np.tan(c / 2), atol=1e-12)


def test_gpp_matches_ray_construction_and_inverts():
    rng = np.random.default_rng(3)
    for d in (0.0, 0.25, 0.5, 1.0, 1.5):
        for _ in range(20):
            phi, theta = rng.uniform(-1.2, 1.2), rng.uniform(-0.9, 0.9)
            x, y = gpp_forward(phi, theta, d)
            xo, yo = oracles.gpp_geometric(phi, theta, d)
            assert abs(x - xo) < 1e-12 and abs(y - yo) < 1e-12
            pb, tb = gpp_backward(x, y, d)
            assert abs(pb - phi) < 1e-10 and abs(tb - theta) < 1e-10


def test_vertical_lines_stay_vertical():
    theta = np.radians(np.linspace(-60, 60, 101))
    for d in D_VALUES:
        for vc in VC_VALUES:
            p = PanniniParams(d, vc)
            for phi in np.radians(np.linspace(-75, 75, 20)):
                x, _ = p.forward(np.full_like(theta, phi), theta)
                assert np.var(x) < 1e-18


def test_odd_symmetry():
    phi, theta = grid(21)
    p = PanniniParams(0.6, 0.5)
    x, y = p.forward(phi, theta)
    xm, ym = p.forward(-phi, -theta)
    assert np.allclose(xm, -x, atol=1e-15) and np.allclose(ym, -y, atol=1e-15)


def test_monotone_in_phi_and_theta():
    p = PanniniParams(0.8, 0.3)
    phi = np.radians(np.linspace(-85, 85, 400))
    x, _ = p.forward(phi, 0.2)
    assert np.all(np.diff(x) > 0)
    theta = np.radians(np.linspace(-80, 80, 400))
    _, y = p.forward(0.4, theta)
    assert np.all(np.diff(y) > 0)


def test_centre_fixed():
    for d in (0.0, 0.5, 1.2):
        x, y = pannini_forward(0.0, 0.0, PanniniParams(d, 0.7))
        assert x == 0.0 and y == 0.0


def test_domain_errors():
    with pytest.raises(ProjectionDomainError):
        pannini_forward(math.radians(100), 0.0, PanniniParams(0.0, 0.0))
    with pytest.raises(ProjectionDomainError):
        pannini_forward(0.2, math.pi / 2, PanniniParams(0.5, 0.0))
    # vertical compression needs cos(phi) > 0
    with pytest.raises(ProjectionDomainError):
        pannini_forward(math.radians(100), 0.0, PanniniParams(1.0, 0.5))
    x, y = pannini_forward(np.radians([0.0, 100.0]), [0.0, 0.0], PanniniParams(0.0, 0.0), check=False)
    assert np.isfinite(x[0]) and np.isnan(x[1])
    with pytest.raises(ValueError):
        PanniniParams(-0.1, 0.0)
    with pytest.raises(ValueError):
        PanniniParams(0.5, 1.5)


def test_wide_phi_for_large_d():
    # d > 1 reaches past 90 degrees of longitude
    p = PanniniParams(1.2, 0.0)
    phi = math.radians(120)
    pb, _ = p.backward(*p.forward(phi, 0.3))
    assert abs(pb - phi) < 1e-10


def test_viewport_extent_identity():
    for d in (0.0, 0.5, 1.0):
        for ar in (16 / 9, 4 / 3, 908 / 510):
            hw, hh, fv = viewport_plane_extent(d, math.radians(150), ar)
            assert hh * ar == pytest.approx(hw, rel=0, abs=1e-15)
            assert math.tan(fv / 2) == pytest.approx(hh, rel=1e-15)


def test_viewport_extent_value():
    # independent arbitrary-precision evaluation of the same geometry
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    d, fh, ar = mp.mpf("0.5"), mp.radians(150), mp.mpf(16) / 9
    hw = (d + 1) * mp.sin(fh / 2) / (d + mp.cos(fh / 2))
    fv = mp.degrees(2 * mp.atan(hw / ar))
    got_hw, got_hh, got_fv = viewport_plane_extent(0.5, math.radians(150), 16 / 9)
    assert got_hw == pytest.approx(float(hw), rel=1e-14)
    assert math.degrees(got_fv) == pytest.approx(float(fv), abs=1e-10)
    assert math.degrees(got_fv) == pytest.approx(94.0889, abs=1e-4)


def test_extent_edge_of_projection():
    # the extent's corner sits on the phi = f_h/2 meridian at the equator
    p = PanniniParams(0.5, 0.0)
    hw, _ = p.half_extent(math.radians(150), 16 / 9)
    phi, theta = p.backward(hw, 0.0)
    assert math.degrees(phi) == pytest.approx(75.0, abs=1e-12) and theta == 0.0


def test_extent_domain_error():
    with pytest.raises(ProjectionDomainError):
        viewport_plane_extent(0.0, math.radians(185), 1.0)
    with pytest.raises(ValueError):
        viewport_plane_extent(0.5, 0.0, 1.0)


def test_rotation_round_trip_and_centre():
    phi, theta = grid(15, 170, 85)
    for vd in ((0.3, 0.2), (-2.0, -0.7), (math.pi, 0.0)):
        pw, tw = rotate_to_vd(phi, theta, *vd)
        pb, tb = unrotate_from_vd(pw, tw, *vd)
        assert np.max(np.abs(wrap_longitude(pb - phi))) < 1e-12 and np.max(np.abs(tb - theta)) < 1e-12
        cp, ct = rotate_to_vd(0.0, 0.0, *vd)
        assert abs(wrap_longitude(cp - vd[0])) < 1e-12 and abs(ct - vd[1]) < 1e-12


def test_rotation_preserves_angles():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, (2, 50))
    b = rng.uniform(-1, 1, (2, 50))

    def xyz(p, t):
        return np.stack([np.cos(t) * np.sin(p), np.sin(t), np.cos(t) * np.cos(p)])

    before = np.sum(xyz(*a) * xyz(*b), axis=0)
    after = np.sum(xyz(*rotate_to_vd(*a, 0.7, -0.4)) * xyz(*rotate_to_vd(*b, 0.7, -0.4)), axis=0)
    assert np.allclose(before, after, atol=1e-13)


def test_pixel_plane_coords_symmetric():
    x, y = pixel_plane_coords(2.0, 1.0, 10, 6)
    assert x.shape == (6, 10)
    assert np.allclose(x[:, 0], -x[:, -1]) and np.allclose(y[0], -y[-1])
    assert x[0, 0] == pytest.approx(-2.0 + 0.2) and y[0, 0] == pytest.approx(1.0 - 1 / 6)


def test_viewport_spec_validation():
    with pytest.raises(ValueError):
        ViewportSpec(SpherePoint(0, 0), 0.0, 10, 10)
    with pytest.raises(ValueError):
        SpherePoint(0.0, 2.0)
    s = ViewportSpec(SpherePoint(0, 0), 1.0, 100, 50).scaled(0.25)
    assert (s.width_px, s.height_px) == (25, 12)


def test_gpp_names():
    assert GeneralPerspective(0).name == "rectilinear"
    assert GeneralPerspective(1).name == "stereographic"
    assert GeneralPerspective(0.4).label() == "gpp(d=0.4)"


@settings(max_examples=200, deadline=None)
@given(
    d=st.floats(0.0, 1.2),
    vc=st.floats(0.0, 1.0),
    phi=st.floats(-1.4, 1.4),
    theta=st.floats(-1.3, 1.3),
)
def test_round_trip_property(d, vc, phi, theta):
    p = PanniniParams(d, vc)
    if d + math.cos(phi) < 1e-3:
        return
    pb, tb = p.backward(*p.forward(phi, theta))
    assert abs(pb - phi) < 1e-8 and abs(tb - theta) < 1e-8
