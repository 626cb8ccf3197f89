import numpy as np
import pytest

from radkin import kinematics
from radkin.errors import DataError, DegenerateFitError
from radkin.imagecore import BinaryImage
from radkin.kinematics import (SurfaceProfile, apex_velocity, curvature_fit,
                               surface_profile, velocity_field)


def profile(t, y, pitch=0.1):
    y = np.asarray(y, dtype=float)
    return SurfaceProfile(time_us=t, x_mm=np.arange(y.size) * pitch, y_mm=y)


class TestSurfaceProfile:
    def test_horizontal_bar_from_top(self):
        fg = np.zeros((10, 6), dtype=bool)
        fg[3, :] = True
        p = surface_profile(BinaryImage(fg), "from_top", 0.1, 5.0)
        assert np.allclose(p.y_mm, (10 - 1 - 3) * 0.1)
        assert p.time_us == 5.0

    def test_from_bottom_scan(self):
        fg = np.zeros((10, 4), dtype=bool)
        fg[2, :] = True
        fg[7, :] = True
        top = surface_profile(BinaryImage(fg), "from_top", 0.1, 0.0)
        bot = surface_profile(BinaryImage(fg), "from_bottom", 0.1, 0.0)
        assert np.allclose(top.y_mm, 0.7)
        assert np.allclose(bot.y_mm, 0.2)

    def test_empty_mask_raises(self):
        with pytest.raises(DataError):
            surface_profile(BinaryImage(np.zeros((5, 5), dtype=bool)),
                            "from_top", 0.1, 0.0)

    def test_absent_columns_are_nan(self):
        fg = np.zeros((5, 4), dtype=bool)
        fg[2, 1] = True
        p = surface_profile(BinaryImage(fg), "from_top", 0.1, 0.0)
        assert np.isnan(p.y_mm[0]) and np.isfinite(p.y_mm[1])

    def test_semicircular_cap_matches_circle_equation(self):
        # analytic cap renderer: material below y = cy + sqrt(R^2 - (x-cx)^2)
        h, w, pitch = 64, 64, 0.1
        R, cx, cy = 2.0, 3.15, 1.5
        cols = np.arange(w) * pitch
        rows_y = (h - 1 - np.arange(h)) * pitch
        inside = (cols[None, :] - cx) ** 2 + (rows_y[:, None] - cy) ** 2 <= R * R
        p = surface_profile(BinaryImage(inside), "from_top", pitch, 0.0)
        for x, y in zip(p.x_mm, p.y_mm):
            if np.isfinite(y) and abs(x - cx) < 0.9 * R:
                expected = cy + np.sqrt(R * R - (x - cx) ** 2)
                assert abs(y - expected) <= pitch

    def test_bad_direction(self):
        with pytest.raises(DataError):
            surface_profile(BinaryImage(np.ones((3, 3), dtype=bool)),
                            "sideways", 0.1, 0.0)


class TestVelocityField:
    def test_rigid_translation_one_km_s(self):
        p1 = profile(0.0, np.full(20, 1.0))
        p2 = profile(3.0, np.full(20, 4.0))
        f = velocity_field(p1, p2)
        assert np.allclose(f.v_mm_us, 1.0)
        assert f.mid_time_us == 1.5

    def test_identical_profiles_zero(self):
        p1 = profile(0.0, np.linspace(1, 2, 10))
        p2 = profile(2.0, np.linspace(1, 2, 10))
        assert np.allclose(velocity_field(p1, p2).v_mm_us, 0.0)

    def test_bulged_center_apex_exceeds_edges(self):
        x = np.arange(30) * 0.1
        bulge = 0.3 * np.exp(-((x - 1.5) ** 2) / 0.5)
        p1 = profile(0.0, np.full(30, 1.0))
        p2 = SurfaceProfile(3.0, x, 1.0 + 3.0 * 1.0 + bulge)
        f = velocity_field(p1, p2)
        expected = (0.3 - 0.3 * np.exp(-1.5 ** 2 / 0.5)) / 3.0
        assert f.v_mm_us[15] - f.v_mm_us[0] == pytest.approx(expected)

    def test_absent_propagates(self):
        y1 = np.array([1.0, np.nan, 1.0])
        y2 = np.array([2.0, 2.0, np.nan])
        f = velocity_field(profile(0.0, y1), profile(1.0, y2))
        assert np.isfinite(f.v_mm_us[0])
        assert np.isnan(f.v_mm_us[1]) and np.isnan(f.v_mm_us[2])

    def test_galilean_offset(self):
        rng = np.random.default_rng(0)
        y = 1.0 + rng.random(12)
        p1, p2 = profile(0.0, y), profile(2.0, y + 0.4)
        base = velocity_field(p1, p2).v_mm_us
        shifted = velocity_field(p1, profile(2.0, y + 0.4 + 0.6)).v_mm_us
        assert np.allclose(shifted - base, 0.6 / 2.0)

    def test_time_symmetry(self):
        rng = np.random.default_rng(1)
        p1 = profile(0.0, 1 + rng.random(8))
        p2 = profile(3.0, 2 + rng.random(8))
        fwd = velocity_field(p1, p2)
        rev = velocity_field(p2, p1)
        assert np.allclose(fwd.v_mm_us, -rev.v_mm_us)
        assert fwd.mid_time_us == rev.mid_time_us

    def test_equal_timestamps_rejected(self):
        p = profile(1.0, np.ones(5))
        with pytest.raises(DataError):
            velocity_field(p, profile(1.0, np.ones(5)))

    def test_mismatched_grids_rejected(self):
        with pytest.raises(DataError):
            velocity_field(profile(0.0, np.ones(5)),
                           profile(1.0, np.ones(6)))


class TestApexVelocity:
    def test_rigid_translation_constant_series(self):
        profs = [profile(3.0 * i, np.full(40, 1.0 + 0.9 * i)) for i in range(5)]
        series = apex_velocity(profs, center_x_mm=2.0, half_width_cols=5)
        assert len(series) == 4
        assert all(v == pytest.approx(0.3) for _, v in series)

    def test_k_zero_is_central_column(self):
        x = np.arange(11) * 0.1
        y2 = np.full(11, 1.0)
        y2[5] = 1.5
        profs = [profile(0.0, np.full(11, 1.0)), SurfaceProfile(1.0, x, y2)]
        series = apex_velocity(profs, center_x_mm=0.5, half_width_cols=0)
        assert series[0][1] == pytest.approx(0.5)

    def test_piecewise_speed_switch(self):
        # speed 1.0 for the first interval, 1.5 afterwards
        heights = [1.0, 1.0 + 3.0, 1.0 + 3.0 + 4.5]
        profs = [profile(3.0 * i, np.full(20, h)) for i, h in enumerate(heights)]
        series = apex_velocity(profs, center_x_mm=1.0, half_width_cols=3)
        assert series[0][1] == pytest.approx(1.0)
        assert series[1][1] == pytest.approx(1.5)

    def test_too_few_profiles(self):
        with pytest.raises(DataError):
            apex_velocity([profile(0.0, np.ones(5))], 0.2, 1)

    def test_band_absent(self):
        y = np.full(10, np.nan)
        y[9] = 1.0
        profs = [profile(0.0, y), profile(1.0, y)]
        with pytest.raises(DataError):
            apex_velocity(profs, center_x_mm=0.0, half_width_cols=1)


class TestCurvatureFit:
    def test_exact_semicircle(self):
        R, cx, cy = 5.0, 6.0, 1.0
        x = np.linspace(cx - 0.8 * R, cx + 0.8 * R, 50)
        y = cy + np.sqrt(R * R - (x - cx) ** 2)
        p = SurfaceProfile(0.0, x, y)
        fit = curvature_fit(p, (0, 50))
        assert fit.radius_mm == pytest.approx(R, abs=1e-9)
        assert fit.rms_residual_mm < 1e-9
        assert fit.center.x_mm == pytest.approx(cx, abs=1e-9)

    def test_noisy_circle_within_two_percent(self):
        rng = np.random.default_rng(12)
        R, cx, cy = 5.0, 6.0, 1.0
        x = np.linspace(cx - 0.8 * R, cx + 0.8 * R, 80)
        y = cy + np.sqrt(R * R - (x - cx) ** 2) + rng.uniform(-0.05, 0.05, 80)
        fit = curvature_fit(SurfaceProfile(0.0, x, y), (0, 80))
        assert abs(fit.radius_mm - R) / R < 0.02

    def test_collinear_degenerate(self):
        p = profile(0.0, np.linspace(1, 2, 10))
        with pytest.raises(DegenerateFitError):
            curvature_fit(p, (0, 10))

    def test_too_few_points(self):
        y = np.full(10, np.nan)
        y[0] = 1.0
        y[5] = 1.2
        p = SurfaceProfile(0.0, np.arange(10) * 0.1, y)
        with pytest.raises(DataError):
            curvature_fit(p, (0, 10))

    def test_window_restricts_points(self):
        R, cx, cy = 4.0, 5.0, 0.0
        x = np.linspace(cx - 3, cx + 3, 60)
        y = cy + np.sqrt(R * R - (x - cx) ** 2)
        y[:10] = 0.5  # junk outside the window
        fit = curvature_fit(SurfaceProfile(0.0, x, y), (10, 60))
        assert fit.radius_mm == pytest.approx(R, abs=1e-9)


class TestCsvRoundtrip:
    def test_profiles_roundtrip(self, tmp_path):
        y = np.array([1.0, np.nan, 2.0])
        profs = [profile(0.0, y), profile(3.0, y + 1)]
        path = tmp_path / "profiles.csv"
        kinematics.write_profiles_csv(profs, str(path))
        back = kinematics.read_profiles_csv(str(path))
        assert len(back) == 2
        assert np.allclose(back[0].y_mm, y, equal_nan=True)
        assert back[1].time_us == 3.0

    def test_apex_roundtrip(self, tmp_path):
        apex = [(1.5, 1.0), (4.5, 1.2)]
        path = tmp_path / "apex.csv"
        kinematics.write_apex_csv(apex, str(path))
        assert kinematics.read_apex_csv(str(path)) == apex

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(DataError):
            kinematics.read_profiles_csv(str(path))
