import numpy as np
import pytest

from radkin import fusion, phantom, visar
from radkin.errors import ConfigError, DataError
from radkin.fusion import (ExperimentRecord, FeatureTable, build_record,
                           feature_table, interpolate_missing, parse_descriptor,
                           trend_report)
from radkin.imagecore import save_gray, save_sidecar


def make_visar_csv(path, t, v):
    visar.save_visar(visar.VisarSeries(np.asarray(t, float),
                                       np.asarray(v, float)), str(path))


def record(th, **features):
    defaults = dict(plateau_v_km_s=1.0, noise_rms_km_s=0.01,
                    fluct_amplitude_km_s=0.1, first_fluct_t_us=10.0)
    defaults.update(features)
    rng = np.random.default_rng(0)
    series = visar.VisarSeries(np.arange(10.0), 1.0 + 0.001 * rng.random(10))
    return ExperimentRecord(thickness_in=th, visar_series=series,
                            features=visar.FeatureSet(**defaults))


class TestParseDescriptor:
    def test_basic(self, tmp_path):
        d = tmp_path / "exp.txt"
        d.write_text("thickness_in=0.25\nvisar=v.csv\nframes=a.pgm, b.pgm\n")
        desc = parse_descriptor(str(d))
        assert desc["thickness_in"] == "0.25"
        assert desc["visar"].endswith("v.csv")
        assert len(desc["frames"]) == 2

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            parse_descriptor("/nonexistent.txt")

    def test_empty_descriptor(self, tmp_path):
        d = tmp_path / "e.txt"
        d.write_text("# only a comment\n")
        with pytest.raises(ConfigError):
            parse_descriptor(str(d))

    def test_malformed_line(self, tmp_path):
        d = tmp_path / "m.txt"
        d.write_text("thickness_in 0.25\n")
        with pytest.raises(ConfigError):
            parse_descriptor(str(d))


class TestBuildRecord:
    def test_visar_only(self, tmp_path):
        rng = np.random.default_rng(1)
        t = np.arange(0, 30, 0.1)
        make_visar_csv(tmp_path / "v.csv", t, 1.5 + rng.normal(0, 0.01, t.size))
        d = tmp_path / "exp.txt"
        d.write_text("thickness_in=0.25\nvisar=v.csv\n"
                     "baseline_t0=0\nbaseline_t1=10\n")
        rec = build_record(parse_descriptor(str(d)))
        assert rec.frames == []
        assert rec.features is not None
        assert rec.features.plateau_v_km_s == pytest.approx(1.5, rel=0.01)
        assert rec.prad_apex is None

    def test_two_phantom_frames_one_apex_sample(self, tmp_path):
        spec = phantom.PhantomSpec(width_px=64, height_px=64, v_s_mm_us=1.0,
                                   y0_mm=1.0, gaussian_sigma=0.0, seed=2)
        frames, _ = phantom.generate_sequence(spec, [0.0, 3.0])
        names = []
        for i, f in enumerate(frames):
            p = tmp_path / f"f{i}.pgm"
            save_gray(f, str(p))
            save_sidecar(f, str(p))
            names.append(p.name)
        d = tmp_path / "exp.txt"
        d.write_text(f"thickness_in=0.3\nframes={','.join(names)}\nthreshold=0.5\n")
        rec = build_record(parse_descriptor(str(d)))
        assert len(rec.prad_apex) == 1
        assert rec.prad_apex[0][1] == pytest.approx(1.0, rel=0.1)

    def test_missing_frame_file(self, tmp_path):
        d = tmp_path / "exp.txt"
        d.write_text("thickness_in=0.3\nframes=ghost.pgm\n")
        with pytest.raises(ConfigError):
            build_record(parse_descriptor(str(d)))

    def test_descriptor_without_thickness(self):
        with pytest.raises(ConfigError):
            build_record({"frames": []})


class TestFeatureTable:
    def test_single_record(self):
        table = feature_table([record(0.25)])
        assert table.thickness_in.tolist() == [0.25]
        assert table.column("plateau_v")[0] == 1.0

    def test_rows_sorted_by_thickness(self):
        table = feature_table([record(0.5), record(0.25), record(0.375)])
        assert table.thickness_in.tolist() == [0.25, 0.375, 0.5]

    def test_duplicate_thickness_rejected(self):
        with pytest.raises(DataError):
            feature_table([record(0.25), record(0.25)])

    def test_missing_source_gives_nan(self):
        rec = ExperimentRecord(thickness_in=0.4, prad_apex=[(1.5, 1.2)])
        table = feature_table([rec])
        assert np.isnan(table.column("plateau_v")[0])
        assert table.column("mean_apex_v")[0] == 1.2

    def test_csv_export(self, tmp_path):
        table = feature_table([record(0.25), record(0.5)])
        path = tmp_path / "t.csv"
        fusion.table_to_csv(table, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("thickness_in,plateau_v")
        assert len(lines) == 3


class TestInterpolateMissing:
    def table(self):
        return FeatureTable(
            thickness_in=np.array([0.25, 0.5]),
            columns={"plateau_v": np.array([2.0, 1.0])})

    def test_linear_midpoint(self):
        assert interpolate_missing(self.table(), "plateau_v", 0.375) == 1.5

    def test_exact_at_rows(self):
        assert interpolate_missing(self.table(), "plateau_v", 0.25) == 2.0
        assert interpolate_missing(self.table(), "plateau_v", 0.5) == 1.0

    def test_out_of_range(self):
        with pytest.raises(DataError):
            interpolate_missing(self.table(), "plateau_v", 0.6)

    def test_insufficient_data(self):
        table = FeatureTable(thickness_in=np.array([0.25, 0.5]),
                             columns={"plateau_v": np.array([2.0, np.nan])})
        with pytest.raises(DataError):
            interpolate_missing(table, "plateau_v", 0.3)

    def test_affine_exactness(self):
        th = np.array([0.2, 0.3, 0.4, 0.5])
        vals = 3.0 - 2.0 * th
        table = FeatureTable(thickness_in=th, columns={"plateau_v": vals})
        for q in np.linspace(0.2, 0.5, 13):
            expected = 3.0 - 2.0 * q
            assert abs(interpolate_missing(table, "plateau_v", q) - expected) < 1e-12


class TestTrendReport:
    def trending_records(self):
        recs = []
        for i, th in enumerate([0.25, 0.3125, 0.375, 0.4375]):
            recs.append(record(
                th,
                plateau_v_km_s=2.0 - 0.2 * i,
                noise_rms_km_s=0.01 + 0.005 * i,
                fluct_amplitude_km_s=0.1 + 0.05 * i,
                first_fluct_t_us=8.0 + 2.0 * i))
        return recs

    def test_all_trends_pass(self):
        report = trend_report(feature_table(self.trending_records()))
        assert report["all_pass"]
        assert all(t["passed"] for t in report["trends"].values())

    def test_violating_pair_reported(self):
        recs = self.trending_records()
        recs[1].features = visar.FeatureSet(
            plateau_v_km_s=2.3, noise_rms_km_s=0.015,
            fluct_amplitude_km_s=0.15, first_fluct_t_us=10.0)
        report = trend_report(feature_table(recs))
        trend = report["trends"]["plateau_v"]
        assert not trend["passed"]
        assert trend["violations"][0][:2] == (0.25, 0.3125)

    def test_ties_allowed(self):
        recs = self.trending_records()
        recs[1].features = visar.FeatureSet(
            plateau_v_km_s=2.0, noise_rms_km_s=0.01,
            fluct_amplitude_km_s=0.1, first_fluct_t_us=8.0)
        assert trend_report(feature_table(recs))["all_pass"]

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            trend_report(feature_table([record(0.25), record(0.5)]))

    def test_scaling_invariance(self):
        table = feature_table(self.trending_records())
        scaled = FeatureTable(
            thickness_in=table.thickness_in.copy(),
            columns={k: 7.0 * v for k, v in table.columns.items()})
        assert trend_report(scaled)["all_pass"] == trend_report(table)["all_pass"]

    def test_determinism(self):
        r1 = trend_report(feature_table(self.trending_records()))
        r2 = trend_report(feature_table(self.trending_records()))
        assert r1 == r2
