"""Batch command-line front end.

Subcommands: phantom, denoise, contour, track, velocity, visar-features,
compare, report. Each run writes its artifacts under --out, plus a
manifest.json listing every artifact, input digests, and the effective
configuration (config-file values overridden by explicit flags).

Exit codes: 0 ok, 2 bad configuration, 3 data error, 4 internal error.
All diagnostics go to stderr; artifacts only under the output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import contour as contour_mod
from . import denoise as denoise_mod
from . import fusion, kinematics, phantom, plots, visar
from .errors import ConfigError, DataError
from .imagecore import (PixelCoord, load_gray_with_sidecar, save_gray,
                        save_mask, save_sidecar)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


# ---------------------------------------------------------------------------
# Configuration layering: hard defaults < config file < explicit flags.


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"no such config file: {path}")
    cfg = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: malformed line {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg[key] = value
    return cfg


def _effective_config(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _read_config_file(args.config)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, raw in file_cfg.items():
            ref = defaults[key]
            if isinstance(ref, bool):
                cfg[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(ref, int):
                cfg[key] = int(raw)
            elif isinstance(ref, float):
                cfg[key] = float(raw)
            else:
                cfg[key] = raw
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: str, subcommand: str, cfg: dict,
                    inputs: list, artifacts: list) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "inputs": {os.path.basename(p): _sha256(p) for p in sorted(set(inputs))},
        "artifacts": sorted(os.path.relpath(a, outdir) for a in artifacts),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _outdir(args) -> str:
    out = args.out
    if not out:
        raise ConfigError("--out is required")
    os.makedirs(out, exist_ok=True)
    return out


def _parse_float_list(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _map_frames(fn, frames, jobs: int):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, frames))
    return [fn(f) for f in frames]


# ---------------------------------------------------------------------------
# Subcommands.


PHANTOM_DEFAULTS = {
    "spec": "", "frame_start": 0.0, "frame_period": 3.0, "frame_count": 20,
    "emit_visar": False, "visar_period": 0.02, "visar_end": 60.0,
    "visar_onset": -1.0, "visar_amplitude": 0.0, "visar_frequency": 0.25,
    "visar_damping": 0.0, "visar_noise": 0.0,
}


def _cmd_phantom(args) -> int:
    cfg = _effective_config(args, PHANTOM_DEFAULTS)
    out = _outdir(args)
    if not cfg["spec"]:
        raise ConfigError("phantom needs --spec pointing at a spec file")
    spec = phantom.load_spec(cfg["spec"])
    times = [cfg["frame_start"] + i * cfg["frame_period"]
             for i in range(int(cfg["frame_count"]))]
    frames, truth = phantom.generate_sequence(spec, times)

    artifacts = []
    for i, frame in enumerate(frames):
        path = os.path.join(out, f"frame_{i:03d}.pgm")
        save_gray(frame, path)
        save_sidecar(frame, path)
        artifacts += [path, path + ".meta"]

    truth_path = os.path.join(out, "truth.csv")
    with open(truth_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_us", "apex_velocity_mm_us", "bubble_radius_mm"])
        for ft in truth.frames:
            writer.writerow([repr(ft.time_us), repr(ft.apex_velocity_mm_us),
                             "" if ft.bubble_radius_mm is None
                             else repr(ft.bubble_radius_mm)])
    artifacts.append(truth_path)

    profile_truth = [ft for ft in truth.frames if ft.surface_y_mm is not None]
    if profile_truth:
        tp_path = os.path.join(out, "truth_profiles.csv")
        with open(tp_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["time_us", "x_mm", "y_mm"])
            for ft in profile_truth:
                for x, y in zip(truth.x_mm, ft.surface_y_mm):
                    writer.writerow([repr(ft.time_us), repr(float(x)),
                                     repr(float(y))])
        artifacts.append(tp_path)

    if cfg["emit_visar"]:
        onset = cfg["visar_onset"]
        series = phantom.generate_visar(
            spec, cfg["visar_period"], cfg["visar_end"],
            fluct_onset_us=np.inf if onset < 0 else onset,
            fluct_amplitude=cfg["visar_amplitude"],
            fluct_frequency_per_us=cfg["visar_frequency"],
            fluct_damping_per_us=cfg["visar_damping"],
            noise_sigma=cfg["visar_noise"])
        vpath = os.path.join(out, "visar.csv")
        visar.save_visar(series, vpath)
        artifacts.append(vpath)

    _write_manifest(out, "phantom", cfg, [cfg["spec"]], artifacts)
    return EXIT_OK


DENOISE_DEFAULTS = {
    "edge_sensitivity": 0.15, "steps": 20, "dt": 0.2, "constant_g": -1.0,
}


def _cmd_denoise(args) -> int:
    cfg = _effective_config(args, DENOISE_DEFAULTS)
    out = _outdir(args)
    if not args.inputs:
        raise ConfigError("denoise needs input frames")

    def run(path):
        img = load_gray_with_sidecar(path)
        if cfg["constant_g"] >= 0:
            return denoise_mod.diffuse(img, cfg["constant_g"],
                                       int(cfg["steps"]), cfg["dt"])
        return denoise_mod.heat_denoise(img, cfg["edge_sensitivity"],
                                        int(cfg["steps"]), cfg["dt"])

    results = _map_frames(run, args.inputs, args.jobs)
    artifacts = []
    for src, img in zip(args.inputs, results):
        base = os.path.splitext(os.path.basename(src))[0]
        path = os.path.join(out, f"{base}_denoised.pgm")
        save_gray(img, path)
        save_sidecar(img, path)
        artifacts += [path, path + ".meta"]
    inputs = list(args.inputs) + [p + ".meta" for p in args.inputs]
    _write_manifest(out, "denoise", cfg, inputs, artifacts)
    return EXIT_OK


CONTOUR_DEFAULTS = {"thresholds": "0.5", "connectivity": 4}


def _cmd_contour(args) -> int:
    cfg = _effective_config(args, CONTOUR_DEFAULTS)
    out = _outdir(args)
    if not args.inputs or len(args.inputs) != 1:
        raise ConfigError("contour processes exactly one input frame")
    src = args.inputs[0]
    img = load_gray_with_sidecar(src)
    thresholds = _parse_float_list(cfg["thresholds"])
    masks = contour_mod.threshold_sweep(img, thresholds,
                                        int(cfg["connectivity"]))

    artifacts = []
    curves = []
    for t, cmask in zip(thresholds, masks):
        path = os.path.join(out, f"contour_t{t:.3f}.pgm")
        save_mask(cmask.mask, path)
        artifacts.append(path)
        if cmask.mask.foreground.any():
            largest = contour_mod.select_component(
                cmask.mask, "largest", connectivity=8)
            rows, cols = np.nonzero(largest.foreground)
            anchor = PixelCoord(int(cols[0]), int(rows[0]))
            curves.append(contour_mod.trace_boundary(
                cmask, anchor, pitch=img.pixel_pitch_mm, time_us=img.time_us))

    csv_path = os.path.join(out, "contours.csv")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame_time_us", "structure_label", "point_index",
                         "x_mm", "y_mm"])
        for row in contour_mod.contours_to_csv_rows(curves):
            writer.writerow([repr(row[0]), row[1], row[2],
                             repr(row[3]), repr(row[4])])
    artifacts.append(csv_path)

    fig_path = os.path.join(out, "contours.svg")
    plots.plot_contours(curves, fig_path)
    artifacts.append(fig_path)
    _write_manifest(out, "contour", cfg, [src, src + ".meta"], artifacts)
    return EXIT_OK


TRACK_DEFAULTS = {"threshold": 0.5, "direction": "from_top"}


def _cmd_track(args) -> int:
    cfg = _effective_config(args, TRACK_DEFAULTS)
    out = _outdir(args)
    if not args.inputs:
        raise ConfigError("track needs input frames")

    def run(path):
        img = load_gray_with_sidecar(path)
        fg = contour_mod.binarize(img, cfg["threshold"])
        return kinematics.surface_profile(fg, cfg["direction"],
                                          img.pixel_pitch_mm, img.time_us)

    profiles = _map_frames(run, args.inputs, args.jobs)
    profiles.sort(key=lambda p: p.time_us)
    csv_path = os.path.join(out, "profiles.csv")
    kinematics.write_profiles_csv(profiles, csv_path)
    fig_path = os.path.join(out, "profiles.svg")
    plots.plot_profiles(profiles, fig_path)
    inputs = list(args.inputs) + [p + ".meta" for p in args.inputs]
    _write_manifest(out, "track", cfg, inputs, [csv_path, fig_path])
    return EXIT_OK


VELOCITY_DEFAULTS = {
    "apex_center_x": -1.0,
    "apex_halfwidth": kinematics.DEFAULT_APEX_HALFWIDTH,
}


def _cmd_velocity(args) -> int:
    cfg = _effective_config(args, VELOCITY_DEFAULTS)
    out = _outdir(args)
    if not args.inputs or len(args.inputs) != 1:
        raise ConfigError("velocity takes exactly one profiles CSV")
    src = args.inputs[0]
    profiles = kinematics.read_profiles_csv(src)
    if len(profiles) < 2:
        raise DataError("need at least two profiles to difference")
    fields = [kinematics.velocity_field(a, b)
              for a, b in zip(profiles, profiles[1:])]
    center = cfg["apex_center_x"]
    if center < 0:
        center = float(profiles[0].x_mm[profiles[0].x_mm.size // 2])
    apex = kinematics.apex_velocity(profiles, center, int(cfg["apex_halfwidth"]))

    vel_path = os.path.join(out, "velocity.csv")
    with open(vel_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["mid_time_us", "x_mm", "v_mm_us"])
        for t, x, v in kinematics.velocity_csv_rows(fields):
            writer.writerow([repr(t), repr(x), v if v == "" else repr(v)])
    apex_path = os.path.join(out, "apex.csv")
    kinematics.write_apex_csv(apex, apex_path)
    fig_path = os.path.join(out, "velocity.svg")
    plots.plot_velocity_fields(fields, fig_path)
    _write_manifest(out, "velocity", cfg, [src],
                    [vel_path, apex_path, fig_path])
    return EXIT_OK


VISAR_DEFAULTS = {
    "baseline_t0": 0.0, "baseline_t1": 5.0,
    "fluct_k": visar.DEFAULT_EXCEED_FACTOR,
    "fluct_m": visar.DEFAULT_CONSECUTIVE,
    "detrend_halfwidth": visar.DEFAULT_DETREND_HALFWIDTH,
}


def _cmd_visar_features(args) -> int:
    cfg = _effective_config(args, VISAR_DEFAULTS)
    out = _outdir(args)
    if not args.inputs or len(args.inputs) != 1:
        raise ConfigError("visar-features takes exactly one CSV")
    src = args.inputs[0]
    series = visar.load_visar(src)
    features = visar.extract_features(
        series, (cfg["baseline_t0"], cfg["baseline_t1"]),
        k=cfg["fluct_k"], m=int(cfg["fluct_m"]),
        detrend_halfwidth=int(cfg["detrend_halfwidth"]))
    json_path = os.path.join(out, "features.json")
    with open(json_path, "w") as f:
        json.dump(features.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    fig_path = os.path.join(out, "visar.svg")
    plots.plot_time_series(series.t_us, series.v_km_s, fig_path,
                           title="Velocimeter record")
    _write_manifest(out, "visar-features", cfg, [src], [json_path, fig_path])
    return EXIT_OK


COMPARE_DEFAULTS: dict = {}


def _cmd_compare(args) -> int:
    cfg = _effective_config(args, COMPARE_DEFAULTS)
    out = _outdir(args)
    if not args.inputs or len(args.inputs) != 2:
        raise ConfigError("compare takes an apex CSV and a velocimeter CSV")
    apex_path, visar_path = args.inputs
    apex = kinematics.read_apex_csv(apex_path)
    series = visar.load_visar(visar_path)
    result = visar.compare_prad_visar(apex, series)
    json_path = os.path.join(out, "compare.json")
    with open(json_path, "w") as f:
        json.dump(result, f, indent=2, sort_keys=True)
        f.write("\n")
    fig_path = os.path.join(out, "compare.svg")
    plots.plot_time_series(series.t_us, series.v_km_s, fig_path,
                           title="Record vs image-derived apex",
                           overlay=([t for t, _ in apex], [v for _, v in apex]))
    _write_manifest(out, "compare", cfg, [apex_path, visar_path],
                    [json_path, fig_path])
    return EXIT_OK


REPORT_DEFAULTS: dict = {}


def _cmd_report(args) -> int:
    cfg = _effective_config(args, REPORT_DEFAULTS)
    out = _outdir(args)
    if not args.inputs:
        raise ConfigError("report needs experiment descriptor files")
    records = [fusion.build_record(fusion.parse_descriptor(p))
               for p in args.inputs]
    table = fusion.feature_table(records)
    report = fusion.trend_report(table)

    table_path = os.path.join(out, "feature_table.csv")
    fusion.table_to_csv(table, table_path)
    json_path = os.path.join(out, "trends.json")
    with open(json_path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    fig_path = os.path.join(out, "trends.svg")
    plots.plot_feature_trends(table, fig_path)
    _write_manifest(out, "report", cfg, list(args.inputs),
                    [table_path, json_path, fig_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring.

_SUBCOMMANDS = {
    "phantom": (_cmd_phantom, PHANTOM_DEFAULTS, "generate synthetic frames + truth"),
    "denoise": (_cmd_denoise, DENOISE_DEFAULTS, "heat-based denoising"),
    "contour": (_cmd_contour, CONTOUR_DEFAULTS, "1-bit erosion contour sweep"),
    "track": (_cmd_track, TRACK_DEFAULTS, "surface profiles per frame"),
    "velocity": (_cmd_velocity, VELOCITY_DEFAULTS, "velocity fields + apex series"),
    "visar-features": (_cmd_visar_features, VISAR_DEFAULTS,
                       "velocimeter feature extraction"),
    "compare": (_cmd_compare, COMPARE_DEFAULTS, "apex vs velocimeter residuals"),
    "report": (_cmd_report, REPORT_DEFAULTS, "feature table + trend checks"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radkin",
        description="Kinematics extraction from radiographic image sequences")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (_, defaults, help_text) in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("inputs", nargs="*", help="input files")
        p.add_argument("--out", required=False, help="output directory")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--jobs", type=int, default=1,
                       help="per-frame parallelism where permitted")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, dest=key, action="store_const", const=True,
                               default=None)
            elif isinstance(default, int):
                p.add_argument(flag, dest=key, type=int, default=None)
            elif isinstance(default, float):
                p.add_argument(flag, dest=key, type=float, default=None)
            else:
                p.add_argument(flag, dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = _SUBCOMMANDS[args.subcommand][0]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"radkin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"radkin: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"radkin: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
