import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerorom import geometry as geo
from aerorom.errors import DimensionError, ValidationError


def make_section(**kw):
    base = dict(
        t_le_up=0.2, t_le_lo=0.2, t_te_up=0.3, t_te_lo=0.3,
        theta_te_up=math.radians(10), theta_te_lo=math.radians(10),
        twist=0.0, chord=1.0,
    )
    base.update(kw)
    return geo.FergusonSection(**base)


section_params = st.builds(
    dict,
    t_le_up=st.floats(0.05, 0.6),
    t_le_lo=st.floats(0.05, 0.6),
    t_te_up=st.floats(0.05, 0.6),
    t_te_lo=st.floats(0.05, 0.6),
    theta_te_up=st.floats(math.radians(1), math.radians(30)),
    theta_te_lo=st.floats(math.radians(1), math.radians(30)),
    twist=st.floats(math.radians(-5), math.radians(5)),
    chord=st.floats(0.5, 1.0),
)


class TestDecode:
    def test_zero_tangents_rejected(self):
        u = np.zeros(33)
        with pytest.raises(ValidationError):
            geo.decode_design(u)

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            geo.decode_design(np.zeros(32))

    def test_non_finite(self):
        u = geo.encode_design([make_section()] * 4, 0.0)
        u[5] = np.nan
        with pytest.raises(ValidationError):
            geo.decode_design(u)

    def test_paper_incidence_value(self):
        u = geo.encode_design([make_section()] * 4, 0.1013)
        _, inc = geo.decode_design(u)
        assert math.degrees(inc) == pytest.approx(5.8, abs=0.01)

    @given(section_params, section_params, st.floats(-0.05, 0.17))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_identity(self, pa, pb, inc):
        secs = [geo.FergusonSection(**pa), geo.FergusonSection(**pb)] * 2
        u = geo.encode_design(secs, inc)
        secs2, inc2 = geo.decode_design(u)
        assert np.array_equal(geo.encode_design(secs2, inc2), u)


class TestFergusonAirfoil:
    def test_hermite_endpoints(self):
        sec = make_section(chord=0.8)
        up, lo = geo.ferguson_airfoil(sec, 40, apply_twist=False)
        assert up[0] == pytest.approx([0.0, 0.0])
        assert up[-1] == pytest.approx([0.8, 0.0])
        assert lo[0] == pytest.approx([0.0, 0.0])
        assert lo[-1] == pytest.approx([0.8, 0.0])

    @given(section_params)
    @settings(max_examples=25, deadline=None)
    def test_mirror_symmetry(self, p):
        p = dict(p)
        # force mirror-symmetric parameters, zero twist
        p["t_le_lo"] = p["t_le_up"]
        p["t_te_lo"] = p["t_te_up"]
        p["theta_te_lo"] = p["theta_te_up"]
        p["twist"] = 0.0
        up, lo = geo.ferguson_airfoil(geo.FergusonSection(**p), 60)
        np.testing.assert_allclose(up[:, 0], lo[:, 0], atol=1e-14)
        np.testing.assert_allclose(up[:, 1], -lo[:, 1], atol=1e-14)

    def test_chord_scaling(self):
        sec1 = make_section(chord=0.5, twist=math.radians(3))
        sec2 = make_section(chord=1.0, twist=math.radians(3))
        up1, lo1 = geo.ferguson_airfoil(sec1, 50)
        up2, lo2 = geo.ferguson_airfoil(sec2, 50)
        pivot1 = np.array([0.125, 0.0])
        pivot2 = np.array([0.25, 0.0])
        np.testing.assert_allclose((up2 - pivot2), 2 * (up1 - pivot1), atol=1e-13)
        np.testing.assert_allclose((lo2 - pivot2), 2 * (lo1 - pivot1), atol=1e-13)

    def test_upper_above_lower(self):
        up, lo = geo.ferguson_airfoil(make_section(t_le_up=0.6, t_te_lo=0.6), 80)
        assert np.all(up[:, 1] >= lo[:, 1] - 1e-14)

    def test_twist_is_rigid(self):
        sec0 = make_section(twist=0.0)
        sec1 = make_section(twist=math.radians(4))
        up0, lo0 = geo.ferguson_airfoil(sec0, 50)
        up1, lo1 = geo.ferguson_airfoil(sec1, 50)
        d0 = np.linalg.norm(up0[:, None, :] - lo0[None, :, :], axis=-1)
        d1 = np.linalg.norm(up1[:, None, :] - lo1[None, :, :], axis=-1)
        np.testing.assert_allclose(d0, d1, atol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            geo.ferguson_airfoil(make_section(), 5)


class TestLoft:
    def test_constant_sections(self):
        wing = geo.loft_wing([make_section()] * 4, 0.0)
        for i in range(1, wing.n_span):
            np.testing.assert_allclose(
                wing.points[i, :, :, [0, 2]], wing.points[0, :, :, [0, 2]],
                atol=1e-15,
            )

    def test_default_grid_shape(self):
        wing = geo.loft_wing([make_section()] * 4, 0.0)
        assert wing.points.shape == (50, 50, 2, 3)

    def test_midpoint_average(self):
        secs = [
            make_section(chord=1.0),
            make_section(chord=0.6, twist=math.radians(2)),
            make_section(chord=0.6),
            make_section(chord=0.5),
        ]
        half_span = 2.0
        wing = geo.loft_wing(secs, 0.0, half_span=half_span, n_span=50, n_chord=30)
        y_mid = half_span / 6.0
        curves = geo._defining_curves(secs, 0.0, 30, wing.qc_x)
        expected = 0.5 * (curves[0] + curves[1])
        poly = wing.section_polygon(y_mid)
        got_upper = poly[:30]
        np.testing.assert_allclose(got_upper, expected[:, 0, :], atol=1e-12)

    def test_loft_linearity_between_stations(self):
        secs = [make_section(chord=c) for c in (1.0, 0.9, 0.7, 0.5)]
        wing = geo.loft_wing(secs, math.radians(3), n_span=13, n_chord=20)
        ys = wing.station_y
        # stations 1..3 lie inside the first defining segment [0, s/3]
        i, j, k = 0, 1, 2
        t = (ys[j] - ys[i]) / (ys[k] - ys[i])
        interp = wing.points[i] + t * (wing.points[k] - wing.points[i])
        np.testing.assert_allclose(wing.points[j], interp, atol=1e-12)

    def test_root_and_tip_positions(self):
        wing = geo.loft_wing([make_section()] * 4, 0.0, half_span=2.0)
        assert np.all(wing.points[0, :, :, 1] == 0.0)
        assert np.all(wing.points[-1, :, :, 1] == 2.0)

    def test_incidence_rigid(self):
        secs = [make_section(chord=c) for c in (1.0, 0.8, 0.7, 0.6)]
        w0 = geo.loft_wing(secs, 0.0, n_span=10, n_chord=15)
        w1 = geo.loft_wing(secs, math.radians(7), n_span=10, n_chord=15)
        p0 = w0.points.reshape(-1, 3)
        p1 = w1.points.reshape(-1, 3)
        rng = np.random.default_rng(0)
        ia = rng.integers(0, len(p0), 200)
        ib = rng.integers(0, len(p0), 200)
        d0 = np.linalg.norm(p0[ia] - p0[ib], axis=-1)
        d1 = np.linalg.norm(p1[ia] - p1[ib], axis=-1)
        np.testing.assert_allclose(d0, d1, atol=1e-12)


class TestThickness:
    def test_symmetric_peak(self):
        # quadratic-ish bump: calibrate via a symmetric section and check
        # that doubling tangents doubles the ratio in the thin limit
        sec = make_section()
        tc = geo.thickness_ratio(sec)
        up, lo = geo.ferguson_airfoil(sec, 400, apply_twist=False)
        xs = geo.cosine_spacing(400)
        zu = np.interp(xs, up[:, 0], up[:, 1])
        zl = np.interp(xs, lo[:, 0], lo[:, 1])
        assert tc == pytest.approx(np.max(zu - zl), rel=1e-3)

    def test_invariant_to_twist(self):
        a = geo.thickness_ratio(make_section(twist=0.0))
        b = geo.thickness_ratio(make_section(twist=math.radians(5)))
        assert a == pytest.approx(b, abs=1e-12)

    def test_four_values(self):
        vals = geo.thickness_ratios([make_section()] * 4)
        assert vals.shape == (4,)
        assert np.all(vals > 0)


class TestBounds:
    def test_incidence_bounds(self):
        b_l, b_u = geo.design_bounds()
        assert b_l[32] == pytest.approx(math.radians(-3), abs=1e-12)
        assert b_u[32] == pytest.approx(math.radians(10), abs=1e-12)
        assert b_l[32] == pytest.approx(-0.05236, abs=1e-5)
        assert b_u[32] == pytest.approx(0.17453, abs=1e-5)

    def test_well_formed(self):
        b_l, b_u = geo.design_bounds()
        assert np.all(b_l < b_u)

    def test_override(self):
        b_l, b_u = geo.design_bounds({"chord": (0.3, 0.9)})
        assert b_l[7] == 0.3 and b_u[7] == 0.9

    def test_unknown_group(self):
        with pytest.raises(ValidationError):
            geo.design_bounds({"nope": (0, 1)})


class TestSerialization:
    def test_degrees_in_files(self, tmp_path):
        u = geo.encode_design([make_section(twist=math.radians(2.5))] * 4, 0.1)
        vals = geo.design_to_json(u)
        assert vals[6] == pytest.approx(2.5)
        assert vals[32] == pytest.approx(math.degrees(0.1))
        p = tmp_path / "design.json"
        geo.save_design(u, p)
        np.testing.assert_allclose(geo.load_design(p), u, atol=1e-14)
