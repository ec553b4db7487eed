"""Batch command line for the full pipeline.

Subcommands: calibrate, convert, segment, phantom, analyze, report-csv,
capture, serve. Every command is deterministic for fixed inputs and a
fixed seed; numeric outputs are byte-identical across runs.

Exit codes: 0 success, 2 usage, 3 input parse error, 4 precondition
violation, 5 pipeline failure. Failures print one machine-readable JSON
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import AnalysisReport
from .acquisition import CaptureServer, receive_sequence
from .errors import ParseError, PipelineError, PreconditionError, ThermofootError
from .phantom import PhantomSpec, generate, generate_periphery, save_truth
from .radiometry import (
    CalibrationSample,
    fit_calibration,
    load_calibration,
    load_raw_frame,
    load_temperature_map,
    save_calibration,
    save_raw_frame,
    save_temperature_map,
    temperature_map_to_csv,
    counts_to_temperature,
)
from .render import render_overlay, save_png
from .segmentation import (
    Rect,
    grabcut,
    mask_to_rle,
    normalize_for_segmentation,
    save_mask_png,
)
from .session import SessionDocument, parse_scribbles

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_PRECONDITION = 4
EXIT_PIPELINE = 5


def _read_samples_csv(path: Path) -> list[CalibrationSample]:
    samples = []
    try:
        lines = path.read_text().strip().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read samples file: {exc}") from exc
    for i, line in enumerate(lines):
        parts = [p.strip() for p in line.split(",")]
        if i == 0 and not _is_number(parts[0]):
            continue  # header row
        if len(parts) < 2:
            raise ParseError(f"line {i + 1}: expected 'reference_temp_c,mean_counts'")
        try:
            samples.append(CalibrationSample(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"line {i + 1}: {exc}") from exc
    return samples


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def cmd_calibrate(args) -> int:
    samples = _read_samples_csv(Path(args.samples))
    curve = fit_calibration(samples)
    save_calibration(curve, args.out)
    print(json.dumps(curve.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_convert(args) -> int:
    frame = load_raw_frame(Path(args.frame))
    curve = load_calibration(Path(args.calibration))
    tmap = counts_to_temperature(frame, curve)
    save_temperature_map(tmap, args.out)
    if args.csv:
        temperature_map_to_csv(tmap, args.csv)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    tmap = load_temperature_map(Path(args.map))
    norm = normalize_for_segmentation(tmap)
    h, w = tmap.shape
    if args.rect:
        rect = Rect(*[int(v) for v in args.rect.split(",")])
    else:
        rect = Rect(2, 2, h - 2, w - 2)
    scribbles = None
    if args.scribbles:
        scribbles = parse_scribbles(json.loads(Path(args.scribbles).read_text()))
    mask = grabcut(
        norm.intensities,
        rect,
        scribbles=scribbles,
        forced_background=norm.forced_background,
    )
    save_mask_png(mask, args.out)
    if args.rle:
        Path(args.rle).write_text(mask_to_rle(mask))
    print(f"wrote {args.out} ({mask.area} foreground px)")
    return EXIT_OK


def cmd_phantom(args) -> int:
    spec = PhantomSpec.load(Path(args.spec)) if args.spec else PhantomSpec()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame, truth = generate(spec, args.seed)
    save_raw_frame(frame, out_dir / "frame_plantar.raw")
    periphery_paths = []
    for angle in (0, 90, 180, 270):
        pframe = generate_periphery(spec, angle, seed=args.seed)
        periphery_paths.append(f"frame_periphery_{angle}.raw")
        save_raw_frame(pframe, out_dir / periphery_paths[-1])
    save_truth(truth, out_dir / "truth")
    save_calibration(truth.calibration, out_dir / "calibration.json")
    spec.save(out_dir / "phantom_spec.json")
    session = SessionDocument(
        plantar_frame="frame_plantar.raw",
        periphery_frames=periphery_paths,
        calibration="calibration.json",
        landmarks={
            foot: [[float(r), float(c)] for r, c in lm.points]
            for foot, lm in truth.landmarks.items()
        },
        suspect_foot="left",
        subject={"kind": "phantom", "seed": args.seed},
        base_dir=out_dir,
    )
    session.save(out_dir / "session.json")
    print(f"wrote phantom session to {out_dir}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    session = SessionDocument.load(Path(args.session))
    overrides: dict = {}
    if args.config:
        try:
            overrides.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {args.config}: {exc}") from exc
    if args.threshold is not None:
        overrides["delta_threshold_c"] = args.threshold
    inputs = session.to_pipeline_inputs(overrides)

    from .analysis import run_analysis

    report, artifacts = run_analysis(inputs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.save(out_dir / "report.json")
    stats_csv = _stats_csv_from_report(report)
    (out_dir / "roi_stats.csv").write_text(stats_csv)
    for foot, direction in artifacts.aligned.items():
        rgb = render_overlay(artifacts.temperature_map, direction.hotspots)
        save_png(rgb, out_dir / f"overlay_{foot}.png")
    if args.format == "csv":
        print(stats_csv, end="")
    else:
        print(report.to_json())
    return EXIT_OK


def _stats_csv_from_report(report: AnalysisReport) -> str:
    stats = report.data["roi_stats"]
    lines = ["region,foot_a_mt_c,foot_b_mt_c,diff_c"]
    for row in stats["rows"]:
        lines.append(
            f"{row['region']},{row['foot_a_mt_c']!r},{row['foot_b_mt_c']!r},{row['diff_c']!r}"
        )
    return "\n".join(lines) + "\n"


def cmd_report_csv(args) -> int:
    report = AnalysisReport.load(Path(args.report))
    csv_text = _stats_csv_from_report(report)
    if args.out:
        Path(args.out).write_text(csv_text)
    print(csv_text, end="")
    return EXIT_OK


def cmd_capture(args) -> int:
    if args.listen is not None and args.connect:
        raise PreconditionError("choose one of --listen or --connect")
    if args.listen is not None:
        spec = PhantomSpec.load(Path(args.spec)) if args.spec else PhantomSpec()
        server = CaptureServer(spec, args.seed, port=args.listen)
        host, port = server.address
        print(f"listening on {host}:{port}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.stop()
        return EXIT_OK
    if args.connect:
        host, _, port = args.connect.rpartition(":")
        frames = receive_sequence(host or "127.0.0.1", int(port))
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for frame in frames:
            suffix = (
                "plantar"
                if frame.view.kind == "plantar"
                else f"periphery_{frame.view.angle_deg}"
            )
            save_raw_frame(frame, out_dir / f"frame_{suffix}.raw")
        print(f"received {len(frames)} frames into {out_dir}")
        return EXIT_OK
    raise PreconditionError("capture needs --listen PORT or --connect HOST:PORT")


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermofoot", description="Thermal foot analysis pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a calibration curve from bath samples")
    p.add_argument("--samples", required=True, help="CSV: reference_temp_c,mean_counts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("convert", help="apply a calibration to a raw frame")
    p.add_argument("--frame", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write a CSV rendering")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("segment", help="run GrabCut on a temperature map")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True, help="mask PNG path")
    p.add_argument("--rect", help="row0,col0,row1,col1 (default: 2 px inset)")
    p.add_argument("--scribbles", help="JSON list of [row, col, fg|bg]")
    p.add_argument("--rle", help="also write a run-length encoded mask")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("phantom", help="generate a synthetic subject + session")
    p.add_argument("--spec", help="phantom spec JSON (default: built-in)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("analyze", help="run the full analysis on a session")
    p.add_argument("--session", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="JSON file with analysis config overrides")
    p.add_argument("--threshold", type=float, help="override delta_threshold_c")
    p.add_argument("--seed", type=int, default=0, help="recorded only; analysis is deterministic")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report-csv", help="export ROI stats from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_csv)

    p = sub.add_parser("capture", help="stream or receive a capture sequence")
    p.add_argument("--listen", type=int, help="serve phantom frames on this port")
    p.add_argument("--connect", help="HOST:PORT of a capture server")
    p.add_argument("--spec", help="phantom spec for --listen")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="captured")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("serve", help="run the clinician-facing HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--data-dir", default="sessions")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _fail("parse_error", exc)
        return EXIT_PARSE
    except PreconditionError as exc:
        _fail(type(exc).__name__, exc)
        return EXIT_PRECONDITION
    except (PipelineError, ThermofootError) as exc:
        _fail(type(exc).__name__, exc)
        return EXIT_PIPELINE


def _fail(code: str, exc: Exception) -> None:
    print(json.dumps({"error": code, "message": str(exc)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
