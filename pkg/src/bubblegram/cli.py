"""Command-line interface.

Units at this boundary are s, mm and Hz. Exit status is 0 on success, 1 for
usage errors (bad flags or configuration) and 2 for data errors (unreadable
or unsuitable input files, nothing to detect).

With ``--json`` every command prints one JSON document to stdout. The
``result`` block is a pure function of the inputs; wall-clock values live
in the separate ``metadata`` block.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .dsp import SpectrogramSpec, butterworth_bandpass, extract_segment, spectrogram
from .engine import (
    aggregate_radius_density,
    compute_bubblegram,
    default_window,
    find_local_maxima,
    map_estimate,
)
from .errors import ArgumentError, BubblegramError
from .export import (
    dumps_json,
    export_bubblegram,
    read_bubblegram,
    write_json,
    write_radius_density_csv,
    write_spectrogram_csv,
)
from .plotting import plot_radius_density, plot_spectrogram
from .simkit import PRESETS, SimScenario, simulate
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

#: simulated recordings are scaled so the peak sits at this fraction of full scale
SIM_PEAK = 0.9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- parsing


def _range(text: str, unit: str) -> tuple[float, float]:
    body = text[: -len(unit)] if unit and text.endswith(unit) else text
    try:
        lo, hi = (float(x) for x in body.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI{unit}, got {text!r}") from None
    return lo, hi


def _grid_shape(text: str) -> tuple[int, int]:
    try:
        nt, nr = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NTIMExNRADIUS, got {text!r}") from None
    return nt, nr


def _segment(text: str) -> tuple[float, float]:
    try:
        start, dur = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:DURATION in s, got {text!r}") from None
    return start, dur


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _add_common(p):
    p.add_argument("--json", action="store_true", help="print a JSON document to stdout")
    p.add_argument("--config", help=f"JSON config file (default: ${cfgmod.ENV_VAR})")


def _add_analysis(p):
    g = p.add_argument_group("analysis")
    g.add_argument("--grid", type=_grid_shape, metavar="NTxNR", help="grid size, e.g. 500x500")
    g.add_argument("--t", type=lambda s: _range(s, "s"), metavar="LO:HI", help="onset range in s")
    g.add_argument("--r", type=lambda s: _range(s, "mm"), metavar="LO:HImm", help="radius range in mm")
    g.add_argument("--log-radius", action="store_true", help="geometric radius axis")
    g.add_argument("--window-ms", type=float, help="basis window in ms")
    g.add_argument("--engine", choices=("exact", "approximate"))
    g.add_argument("--data-span", choices=("grid", "window"))
    g.add_argument("--onset", choices=("cell", "node"))
    g.add_argument("--bandpass", action="store_true", default=None, help="apply the bandpass filter")
    g.add_argument("--segment", type=_segment, metavar="START:DUR", help="analyse a section (s)")
    g.add_argument("--channel", type=int, default=0)
    g.add_argument(
        "--threads", type=_positive_int, default=os.cpu_count() or 1,
        help="worker threads (default: available cores)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bubblegram", description="Bayesian bubble radius estimation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesise a recording and its ground truth")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--manifest", help="scenario JSON (s, m, Hz)")
    p.add_argument("--seed", type=int, default=0, help="seed for presets")
    p.add_argument("-o", "--output", required=True, help="output WAV path")
    p.add_argument("--truth", help="ground-truth JSON path (default: <output>.truth.json)")
    p.add_argument("--bits", type=int, choices=(16, 24, 32), default=32)
    p.add_argument("--encoding", choices=("float", "pcm"), default="float")

    p = sub.add_parser("analyze", help="MAP estimate and detections for a recording")
    _add_common(p)
    p.add_argument("wav")
    _add_analysis(p)
    _add_detect_flags(p)
    p.add_argument("--report", metavar="DIR", help="also write tables and figures to DIR")
    p.add_argument("--truth", help="ground-truth JSON to mark on figures")

    p = sub.add_parser("bubblegram", help="compute and export a bubblegram")
    _add_common(p)
    p.add_argument("wav")
    _add_analysis(p)
    p.add_argument("-o", "--output", required=True, help="output stem")
    p.add_argument(
        "--format", default="csv,image",
        help="comma list of csv, binary, image, raster (default: csv,image)",
    )
    p.add_argument("--view", choices=("joint", "conditional"), default="joint")
    p.add_argument("--truth", help="ground-truth JSON to mark on the image")

    p = sub.add_parser("spectrogram", help="short-time power spectrum")
    _add_common(p)
    p.add_argument("wav")
    p.add_argument("-o", "--output", required=True, help="output stem")
    p.add_argument("--window-len", type=_positive_int, default=1024)
    p.add_argument("--hop", type=_positive_int, default=256)
    p.add_argument("--fft-len", type=_positive_int, default=1024)
    p.add_argument("--fmax", type=float, help="highest frequency shown, Hz")
    p.add_argument("--bandpass", action="store_true", default=None)
    p.add_argument("--segment", type=_segment, metavar="START:DUR")
    p.add_argument("--channel", type=int, default=0)

    p = sub.add_parser("radius-density", help="aggregate a bubblegram over time")
    _add_common(p)
    p.add_argument("bubblegram", help="bubblegram .csv or .json sidecar")
    p.add_argument("-o", "--output", required=True, help="output stem")
    p.add_argument("--source", choices=("conditional", "joint"), default="conditional")
    p.add_argument("--linear", action="store_true", help="plot density on a linear scale")

    p = sub.add_parser("detect", help="local maxima of a stored bubblegram")
    _add_common(p)
    p.add_argument("bubblegram", help="bubblegram .csv or .json sidecar")
    _add_detect_flags(p)

    p = sub.add_parser("config", help="configuration file helpers")
    csub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    c = csub.add_parser("init", help="write the full default configuration")
    c.add_argument("-o", "--output", help="path (default: stdout)")
    c.add_argument("--force", action="store_true", help="overwrite an existing file")
    c = csub.add_parser("show", help="print the effective configuration")
    c.add_argument("--config", help=f"JSON config file (default: ${cfgmod.ENV_VAR})")
    return parser


def _add_detect_flags(p):
    g = p.add_argument_group("detection")
    g.add_argument("--min-prominence", type=float)
    g.add_argument("--min-sep-ms", type=float, help="time separation, ms")
    g.add_argument("--min-sep-mm", type=float, help="radius separation, mm")


# ---------------------------------------------------------------- helpers


def _effective_config(args) -> cfgmod.AnalysisConfig:
    cfg = cfgmod.load(getattr(args, "config", None))
    kw = {}
    for name in ("engine", "data_span", "onset"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if getattr(args, "window_ms", None) is not None:
        kw["window_s"] = args.window_ms * 1e-3
    if getattr(args, "bandpass", None):
        kw["filter_enabled"] = True
    grid = cfg.grid
    if getattr(args, "grid", None):
        grid = replace(grid, n_time=args.grid[0], n_radius=args.grid[1])
    if getattr(args, "t", None):
        grid = replace(grid, t_min_s=args.t[0], t_max_s=args.t[1])
    if getattr(args, "r", None):
        grid = replace(grid, r_min_mm=args.r[0], r_max_mm=args.r[1])
    if getattr(args, "log_radius", False):
        grid = replace(grid, radius_spacing="logarithmic")
    kw["grid"] = grid
    det = cfg.detect
    if getattr(args, "min_prominence", None) is not None:
        det = replace(det, min_prominence=args.min_prominence)
    if getattr(args, "min_sep_ms", None) is not None:
        det = replace(det, min_separation_s=args.min_sep_ms * 1e-3)
    if getattr(args, "min_sep_mm", None) is not None:
        det = replace(det, min_separation_mm=args.min_sep_mm)
    kw["detect"] = det
    return replace(cfg, **kw)


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _load_signal(args, cfg):
    sig = read_wav(args.wav, channel=args.channel)
    info = {
        "path": str(args.wav),
        "sha256": _file_digest(args.wav),
        "sample_rate_hz": sig.sample_rate,
        "n_samples": len(sig),
        "encoding": sig.metadata.get("encoding"),
    }
    if args.segment:
        sig = extract_segment(sig, args.segment[0], args.segment[1])
        info["segment_start_s"] = sig.start_time
        info["segment_samples"] = len(sig)
    if cfg.filter_enabled:
        sig = butterworth_bandpass(sig, cfg.filter)
    return sig, info


def _load_truth(path):
    if not path:
        return None
    try:
        d = json.loads(Path(path).read_text())
        return [(float(p["t0"]), float(p["r0"])) for p in d["pulses"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BubblegramError(f"{path}: cannot read ground truth: {exc}") from exc


def _settings(cfg, grid, window_s) -> dict:
    return {
        "grid": {
            "t_min_s": grid.t_min,
            "t_max_s": grid.t_max,
            "r_min_mm": grid.r_min * 1e3,
            "r_max_mm": grid.r_max * 1e3,
            "n_time": grid.n_time,
            "n_radius": grid.n_radius,
            "time_spacing": grid.time_spacing,
            "radius_spacing": grid.radius_spacing,
        },
        "window_s": window_s,
        "engine": cfg.engine,
        "data_span": cfg.data_span,
        "onset": cfg.onset,
        "filter": cfgmod.to_dict(cfg)["filter"],
        "constants": cfgmod.to_dict(cfg)["constants"],
    }


def _bubblegram(sig, cfg, threads):
    grid = cfg.grid.resolve(sig.start_time, sig.end_time)
    window = cfg.window_s if cfg.window_s is not None else default_window(grid, cfg.constants)
    b = compute_bubblegram(
        sig, grid, cfg.constants, window=window, engine=cfg.engine,
        data_span=cfg.data_span, onset=cfg.onset, threads=threads,
    )
    return b, _settings(cfg, grid, b.metadata["window_s"])


def _detections(b, cfg):
    dets = find_local_maxima(b, cfg.detect.min_prominence, cfg.separation())
    return {
        "thresholds": {
            "min_prominence": cfg.detect.min_prominence,
            "min_separation_s": cfg.detect.min_separation_s,
            "min_separation_mm": cfg.detect.min_separation_mm,
        },
        "count": len(dets),
        "detections": [d.to_dict() for d in dets],
    }


def _emit(args, command, result, human, started):
    files = result.get("files") or []
    if args.json:
        doc = {
            "command": command,
            "result": result,
            "metadata": {
                "version": __version__,
                "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                "elapsed_s": round(time.perf_counter() - started, 3),
            },
        }
        sys.stdout.write(dumps_json(doc))
    else:
        for line in human:
            print(line)
        for f in files:
            print(f"wrote {f}")


# ---------------------------------------------------------------- commands


def cmd_simulate(args, started):
    if args.preset:
        scenario = PRESETS[args.preset](args.seed)
    else:
        try:
            scenario = SimScenario.from_dict(json.loads(Path(args.manifest).read_text()))
        except OSError as exc:
            raise BubblegramError(f"{args.manifest}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise BubblegramError(f"{args.manifest}: not valid JSON: {exc}") from exc
        except ArgumentError as exc:
            raise BubblegramError(f"{args.manifest}: {exc}") from exc
    cfg = cfgmod.load(args.config)
    sig, truth = simulate(scenario, cfg.constants)
    peak = float(np.max(np.abs(sig.samples)))
    scale = SIM_PEAK / peak if peak > 0 else 1.0
    out = Path(args.output)
    truth_path = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    clipped = write_wav(sig.scaled(scale), out, bits=args.bits, encoding=args.encoding)
    tdoc = truth.to_dict()
    tdoc.update(
        scenario=scenario.to_dict(),
        wav_scale=scale,
        wav_encoding=f"{args.encoding}{args.bits}",
        constants=cfg.constants.to_dict(),
    )
    write_json(tdoc, truth_path)
    result = {
        "wav": str(out),
        "truth": str(truth_path),
        "scenario_hash": truth.scenario_hash,
        "n_pulses": len(truth.pulses),
        "n_samples": len(sig),
        "wav_scale": scale,
        "clipped": clipped,
        "files": [str(out), str(truth_path)],
    }
    human = [f"simulated {len(truth.pulses)} pulse(s), {len(sig)} samples, scale {scale:.6g}"]
    _emit(args, "simulate", result, human, started)


def cmd_analyze(args, started):
    cfg = _effective_config(args)
    sig, info = _load_signal(args, cfg)
    b, settings = _bubblegram(sig, cfg, args.threads)
    best = map_estimate(b)
    det = _detections(b, cfg)
    rd = aggregate_radius_density(b)
    modes = [round(float(rd.radii[k]) * 1e3, 4) for k in rd.modes()]
    result = {
        "input": info,
        "settings": settings,
        "map": best.to_dict(),
        **det,
        "radius_density_modes_mm": modes,
    }
    files = []
    if args.report:
        outdir = Path(args.report)
        outdir.mkdir(parents=True, exist_ok=True)
        truth = _load_truth(args.truth)
        files += export_bubblegram(
            b, outdir / "bubblegram", ("csv", "image"), cfg.render, truth=truth
        )
        files += export_bubblegram(
            b, outdir / "bubblegram_conditional", ("image",), cfg.render, view="conditional", truth=truth
        )
        write_radius_density_csv(rd, outdir / "radius_density.csv")
        plot_radius_density(rd, outdir / "radius_density.png", render=cfg.render)
        files += [outdir / "radius_density.csv", outdir / "radius_density.png"]
        if len(sig) >= SpectrogramSpec().window_len:
            sp = spectrogram(sig)
            write_spectrogram_csv(sp, outdir / "spectrogram.csv")
            plot_spectrogram(sp, outdir / "spectrogram.png", cfg.render, fmax=5000.0)
            files += [outdir / "spectrogram.csv", outdir / "spectrogram.png"]
        report = {k: v for k, v in result.items()}
        write_json(report, outdir / "analysis.json")
        files.append(outdir / "analysis.json")
    result["files"] = [str(f) for f in files]
    human = [
        f"MAP: t0 = {best.t0:.6f} s, R0 = {best.r0 * 1e3:.4f} mm (score {best.score:.6g})",
        f"{det['count']} detection(s) with prominence >= {cfg.detect.min_prominence:g}",
    ]
    human += [
        f"  t0 = {d['t0_s']:.6f} s  R0 = {d['r0_mm']:.4f} mm  prominence {d['prominence']:.1f}"
        for d in det["detections"]
    ]
    _emit(args, "analyze", result, human, started)


def _formats(text):
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = set(fmts) - {"csv", "binary", "image", "raster"}
    if bad or not fmts:
        raise ArgumentError(f"--format: unknown format(s) {sorted(bad)}; use csv, binary, image, raster")
    return fmts


def cmd_bubblegram(args, started):
    fmts = _formats(args.format)
    cfg = _effective_config(args)
    sig, info = _load_signal(args, cfg)
    b, settings = _bubblegram(sig, cfg, args.threads)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    files = export_bubblegram(b, out, fmts, cfg.render, view=args.view, truth=_load_truth(args.truth))
    best = map_estimate(b)
    result = {
        "input": info,
        "settings": settings,
        "shape": list(b.values.shape),
        "supported_cells": int(b.mask.sum()),
        "map": best.to_dict(),
        "files": [str(f) for f in files],
    }
    human = [f"bubblegram {b.values.shape[0]}x{b.values.shape[1]}, MAP R0 = {best.r0 * 1e3:.4f} mm"]
    _emit(args, "bubblegram", result, human, started)


def cmd_spectrogram(args, started):
    cfg = _effective_config(args)
    sig, info = _load_signal(args, cfg)
    spec = SpectrogramSpec(args.window_len, args.hop, args.fft_len)
    sp = spectrogram(sig, spec)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, png_path = out.with_suffix(".csv"), out.with_suffix(".png")
    write_spectrogram_csv(sp, csv_path)
    plot_spectrogram(sp, png_path, cfg.render, fmax=args.fmax)
    result = {
        "input": info,
        "settings": spec.to_dict(),
        "frames": int(sp.power.shape[0]),
        "bins": int(sp.power.shape[1]),
        "files": [str(csv_path), str(png_path)],
    }
    _emit(args, "spectrogram", result, [f"{sp.power.shape[0]} frames x {sp.power.shape[1]} bins"], started)


def cmd_radius_density(args, started):
    cfg = cfgmod.load(args.config)
    b = read_bubblegram(args.bubblegram)
    rd = aggregate_radius_density(b, args.source)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, png_path = out.with_suffix(".csv"), out.with_suffix(".png")
    write_radius_density_csv(rd, csv_path)
    plot_radius_density(rd, png_path, render=cfg.render, log=not args.linear)
    modes = [round(float(rd.radii[k]) * 1e3, 4) for k in rd.modes()]
    result = {
        "source": args.source,
        "total": rd.total(),
        "modes_mm": modes,
        "files": [str(csv_path), str(png_path)],
    }
    _emit(args, "radius-density", result, [f"modes (mm): {', '.join(f'{m:.4f}' for m in modes)}"], started)


def cmd_detect(args, started):
    cfg = _effective_config(args)
    b = read_bubblegram(args.bubblegram)
    det = _detections(b, cfg)
    human = [f"{det['count']} detection(s)"] + [
        f"  t0 = {d['t0_s']:.6f} s  R0 = {d['r0_mm']:.4f} mm  prominence {d['prominence']:.1f}"
        for d in det["detections"]
    ]
    _emit(args, "detect", det, human, started)


def cmd_config(args, started):
    if args.action == "init":
        text = cfgmod.dumps(cfgmod.AnalysisConfig())
    else:
        text = cfgmod.dumps(cfgmod.load(args.config))
    if args.action == "init" and args.output:
        path = Path(args.output)
        if path.exists() and not args.force:
            raise ArgumentError(f"{path} exists; pass --force to overwrite")
        from .wavio import atomic_write_bytes

        try:
            atomic_write_bytes(path, text.encode())
        except OSError as exc:
            raise BubblegramError(f"{path}: cannot write: {exc.strerror or exc}") from exc
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "bubblegram": cmd_bubblegram,
    "spectrogram": cmd_spectrogram,
    "radius-density": cmd_radius_density,
    "detect": cmd_detect,
    "config": cmd_config,
}


def _fail(args, code, exc):
    kind = "usage" if code == EXIT_USAGE else "data"
    print(f"error: {exc}", file=sys.stderr)
    if args is not None and getattr(args, "json", False):
        sys.stdout.write(dumps_json({"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args, time.perf_counter())
    except UsageError as exc:
        want_json = argv is not None and "--json" in argv or argv is None and "--json" in sys.argv
        if want_json:
            sys.stdout.write(dumps_json({"error": {"kind": "usage", "type": "UsageError", "message": str(exc)}}))
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except ArgumentError as exc:
        return _fail(args, EXIT_USAGE, exc)
    except (BubblegramError, OSError) as exc:
        return _fail(args, EXIT_DATA, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
