"""``chaosveil`` command-line interface.

Exit codes::

    0  success
    1  unreadable/unwritable file, bad config or usage, refused lossy output
    2  cover too small for the message
    3  cover has no usable SIFT keypoint (or is too small to search)
    4  input is not a stego image (header magic mismatch)
    5  header declares more payload than the image carries
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__, analysis, chaoscrypt, keyforge, pipeline, sift, stego
from .errors import (BadMagic, ChaosVeilError, ImageTooSmall, InsufficientCapacity,
                     NoKeypointsFound, TruncatedPayload, UnsupportedFormat)
from .imagecore import Image, is_lossy_path, load_image, save_image

EXIT_OK = 0
EXIT_IO = 1
EXIT_CAPACITY = 2
EXIT_NO_KEYPOINTS = 3
EXIT_BAD_MAGIC = 4
EXIT_TRUNCATED = 5

CONFIG_ENV = "CHAOSVEIL_CONFIG"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    b11: float = chaoscrypt.DEFAULT_TEMPLATE.b11
    b12: float = chaoscrypt.DEFAULT_TEMPLATE.b12
    b32: float = chaoscrypt.DEFAULT_TEMPLATE.b32
    b33: float = chaoscrypt.DEFAULT_TEMPLATE.b33
    a1: float = chaoscrypt.DEFAULT_TEMPLATE.a1
    dt: float = chaoscrypt.DEFAULT_DT
    octaves: int = sift.DEFAULT_CONFIG.num_octaves
    levels: int = sift.DEFAULT_CONFIG.levels_per_octave
    base_sigma: float = sift.DEFAULT_CONFIG.base_sigma
    contrast: float = sift.DEFAULT_CONFIG.contrast
    edge_r: float = sift.DEFAULT_CONFIG.edge_r
    n_steps: int = stego.DEFAULT_N_STEPS

    def validate(self) -> "Config":
        if not self.dt > 0:
            raise UsageError("dt must be > 0")
        if not self.contrast > 0:
            raise UsageError("contrast must be > 0")
        if not self.edge_r > 1:
            raise UsageError("edge_r must be > 1")
        if self.n_steps < 1:
            raise UsageError("n_steps must be >= 1")
        return self

    def settings(self) -> pipeline.Settings:
        tpl = chaoscrypt.CnnTemplate(b11=self.b11, b12=self.b12, b32=self.b32,
                                     b33=self.b33, a1=self.a1)
        try:
            sc = sift.SiftConfig(num_octaves=self.octaves, levels_per_octave=self.levels,
                                 base_sigma=self.base_sigma, contrast=self.contrast,
                                 edge_r=self.edge_r)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return pipeline.Settings(template=tpl, dt=self.dt, sift_config=sc, n_steps=self.n_steps)


_CONFIG_TYPES = {f.name: f.type for f in fields(Config)}


def parse_config(text: str) -> Dict[str, object]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        conv = int if _CONFIG_TYPES[key] in (int, "int") else float
        try:
            out[key] = conv(value)
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return out


def resolve_config(args: argparse.Namespace) -> Config:
    path = args.config or os.environ.get(CONFIG_ENV) or None
    values = {}
    if path:
        try:
            values = parse_config(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    if args.dt is not None:
        values["dt"] = args.dt
    if args.n_steps is not None:
        values["n_steps"] = args.n_steps
    return replace(Config(), **values).validate()


def parse_fractions(text: str) -> List[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            f = float(Fraction(part))
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad occlusion fraction {part!r}") from None
        if not 0 <= f < 1:
            raise UsageError(f"occlusion fraction {part} outside [0, 1)")
        out.append(f)
    if not out:
        raise UsageError("no occlusion fractions given")
    return out


# ---------------------------------------------------------------- output helpers

def _jsonable(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit(obj) -> None:
    sys.stdout.write(json.dumps(_jsonable(obj), sort_keys=True) + "\n")


def _load(path) -> Image:
    try:
        return load_image(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _save(img: Image, path) -> None:
    if is_lossy_path(path):
        raise UnsupportedFormat(f"refusing lossy output format for {path}; use .pgm or .png")
    try:
        save_image(img, path)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def write_debug(debug_dir, carrier: Image, params: keyforge.KeyParams,
                ks: chaoscrypt.Keystream, s: pipeline.Settings) -> None:
    """KeyParams JSON, keystream hex and the carrier's keypoints CSV."""
    d = Path(debug_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "keyparams.json").write_text(params.to_json() + "\n")
    (d / "keystream.hex").write_text(ks.hex() + "\n")
    kps, _ = sift.detect_keypoints(keyforge.key_stable(carrier), s.sift_config)
    sift.write_keypoints_csv(kps, d / "keypoints.csv")


# ---------------------------------------------------------------- commands

def cmd_conceal(cover_path, message_path, out_path, config: Config, debug_dir=None) -> int:
    s = config.settings()
    if is_lossy_path(out_path):
        raise UnsupportedFormat(f"refusing lossy output format for {out_path}; use .pgm or .png")
    cover = _load(cover_path)
    message = _load(message_path)
    res = pipeline.conceal(cover, message, s)
    _save(res.stego, out_path)
    if debug_dir:
        write_debug(debug_dir, cover, res.params, res.keystream, s)
    emit({
        "capacity_bits": res.capacity_bits,
        "payload_bits": res.payload.bit_length,
        "psnr_vs_cover": analysis.psnr(res.stego, cover),
        "stego_entropy": analysis.shannon_entropy(res.stego),
    })
    return EXIT_OK


def cmd_reveal(stego_path, out_path, config: Config, debug_dir=None) -> int:
    s = config.settings()
    if is_lossy_path(out_path):
        raise UnsupportedFormat(f"refusing lossy output format for {out_path}; use .pgm or .png")
    img = _load(stego_path)
    res = pipeline.reveal(img, s)
    if res.message is None:
        raise UsageError("stego image carries an empty message; nothing to write")
    _save(res.message, out_path)
    if debug_dir:
        write_debug(debug_dir, img, res.params, res.keystream, s)
    emit({
        "psnr_estimate": stego.estimated_psnr(img, s.template, s.n_steps, s.dt),
        "header": res.payload.header_dict(),
    })
    return EXIT_OK


def cmd_capacity(cover_path, config: Config) -> int:
    s = config.settings()
    cover = _load(cover_path)
    bits = stego.capacity(cover, s.template, s.n_steps, s.dt)
    plan = stego.KPlan.for_image(cover, s.template, s.n_steps, s.dt).k[stego.HEADER_PIXELS:]
    hist = [int((plan == k).sum()) for k in range(stego.MAX_K + 1)]
    emit({
        "capacity_bits": bits,
        "header_bits": stego.HEADER_BITS,
        "max_message_pixels": (bits - stego.HEADER_BITS) // 8,
        "k_histogram": hist,
    })
    return EXIT_OK


def cmd_keyinfo(cover_path, message_path, config: Config, debug_dir=None) -> int:
    s = config.settings()
    cover = _load(cover_path)
    desc = keyforge.select_from_image(cover, s.sift_config)
    key = keyforge.descriptor_to_rawkey(desc)
    if message_path:
        message = _load(message_path)
        params = keyforge.derive_params(key, message)
        count = message.size
    else:
        params = keyforge.params_from_key(key, 0, 0)
        count = 0
    if debug_dir:
        ks = chaoscrypt.generate_keystream(params, count, s.template, s.dt)
        write_debug(debug_dir, cover, params, ks, s)
    kp = desc.keypoint
    emit({
        "key_params": params.to_dict(),
        "keypoint": {"x": kp.x, "y": kp.y, "sigma": kp.sigma, "theta": kp.theta,
                     "response": kp.response},
    })
    return EXIT_OK


def _attack_rows(cover: Image, message: Image, fracs, s) -> List[dict]:
    return [
        {"fraction": o.fraction, "status": o.status, "psnr_db": o.psnr_db,
         "wrong_bytes": o.wrong_bytes}
        for o in analysis.occlusion_attack(cover, message, fracs, s)
    ]


def cmd_attack(cover_path, message_path, fracs: Sequence[float], config: Config,
               out_dir=None) -> int:
    s = config.settings()
    cover = _load(cover_path)
    message = _load(message_path)
    rows = _attack_rows(cover, message, fracs, s)
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        stego_img = pipeline.conceal(cover, message, s).stego
        for i, f in enumerate(fracs):
            _save(analysis.occlude(stego_img, f), d / f"occluded-{i}.pgm")
    emit({"cover": str(cover_path), "attacks": rows})
    return EXIT_OK


def cmd_analyze(paths: Sequence[str], config: Config, reference=None, message_path=None,
                out_prefix="chaosveil-report", lowess_path=None, smoothing=0.9,
                fracs: Optional[Sequence[float]] = None) -> int:
    s = config.settings()
    ref = _load(reference) if reference else None
    message = _load(message_path) if message_path else None
    if fracs is not None and message is None:
        raise UsageError("--attack needs --message")
    report = analysis.MetricReport()
    attacks = {}
    for p in paths:
        img = _load(p)
        name = Path(p).name
        bits = None
        if ref is not None and message is not None:
            bits = stego.HEADER_BITS + 8 * message.size
        report.add(analysis.measure(name, img, ref, bits, message))
        if fracs is not None:
            attacks[name] = _attack_rows(img, message, fracs, s)

    csv_path = Path(f"{out_prefix}.csv")
    md_path = Path(f"{out_prefix}.md")
    try:
        csv_path.write_text(report.to_csv())
        md_path.write_text(report.to_markdown())
        if lowess_path:
            metric = "temporal_complexity" if ref is not None else "corr_adjacent"
            pts = [(i + 1, getattr(r, metric)) for i, r in enumerate(report.records)
                   if getattr(r, metric) is not None]
            if len(pts) < 3:
                raise UsageError("LOWESS trend needs at least 3 images")
            xs, ys = zip(*pts)
            Path(lowess_path).write_text(analysis.lowess_csv(xs, ys, smoothing))
    except OSError as exc:
        raise UsageError(f"cannot write report: {exc.strerror or exc}") from None

    summary = {"rows": len(report), "csv": str(csv_path), "markdown": str(md_path),
               "mean": vars(report.mean()) if len(report) else None}
    if lowess_path:
        summary["lowess"] = str(lowess_path)
    if fracs is not None:
        summary["attacks"] = attacks
    emit(summary)
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for InsufficientCapacity
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help=f"key=value config file (default: ${CONFIG_ENV})")
    common.add_argument("--dt", type=float, help="RK4 step size")
    common.add_argument("--n-steps", type=int, dest="n_steps",
                        help="CNN steps per pixel for the k plan")

    debug = argparse.ArgumentParser(add_help=False)
    debug.add_argument("--debug", metavar="DIR",
                       help="write keyparams.json, keystream.hex and keypoints.csv here")

    p = _Parser(prog="chaosveil", description="SIFT-keyed chaotic image encryption and steganography.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("conceal", parents=[common, debug], help="encrypt a message image into a cover")
    c.add_argument("cover")
    c.add_argument("message")
    c.add_argument("-o", "--output", required=True)

    r = sub.add_parser("reveal", parents=[common, debug], help="recover the message from a stego image")
    r.add_argument("stego")
    r.add_argument("-o", "--output", required=True)

    a = sub.add_parser("analyze", parents=[common], help="metric report over images")
    a.add_argument("images", nargs="+")
    a.add_argument("--reference", help="reference image for full-reference metrics")
    a.add_argument("--message", help="message image (embedding ratio, attacks)")
    a.add_argument("--out-prefix", default="chaosveil-report",
                   help="writes PREFIX.csv and PREFIX.md")
    a.add_argument("--lowess", metavar="CSV", help="write a LOWESS trend of the series")
    a.add_argument("--smoothing", type=float, default=0.9)
    a.add_argument("--attack", metavar="occlusion=FRACS",
                   help="run the occlusion attack per image, e.g. occlusion=1/36,1/18,1/12")

    k = sub.add_parser("capacity", parents=[common], help="embeddable bits of a cover")
    k.add_argument("cover")

    i = sub.add_parser("keyinfo", parents=[common, debug], help="print key parameters of a cover")
    i.add_argument("cover")
    i.add_argument("--message", help="message image supplying H1/H2")

    t = sub.add_parser("attack", parents=[common], help="occlusion attack on conceal/reveal")
    t.add_argument("cover")
    t.add_argument("message")
    t.add_argument("--occlusion", default="1/36,1/18,1/12", metavar="FRACS")
    t.add_argument("--out-dir", help="also save the occluded stego images here")
    return p


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.command == "conceal":
        return cmd_conceal(args.cover, args.message, args.output, config, args.debug)
    if args.command == "reveal":
        return cmd_reveal(args.stego, args.output, config, args.debug)
    if args.command == "capacity":
        return cmd_capacity(args.cover, config)
    if args.command == "keyinfo":
        return cmd_keyinfo(args.cover, args.message, config, args.debug)
    if args.command == "attack":
        return cmd_attack(args.cover, args.message, parse_fractions(args.occlusion),
                          config, args.out_dir)
    fracs = None
    if args.attack:
        kind, _, value = args.attack.partition("=")
        if kind != "occlusion":
            raise UsageError(f"unknown attack {kind!r}")
        fracs = parse_fractions(value)
    return cmd_analyze(args.images, config, args.reference, args.message,
                       args.out_prefix, args.lowess, args.smoothing, fracs)


_EXIT_FOR = [
    (InsufficientCapacity, EXIT_CAPACITY),
    (NoKeypointsFound, EXIT_NO_KEYPOINTS),
    (ImageTooSmall, EXIT_NO_KEYPOINTS),
    (BadMagic, EXIT_BAD_MAGIC),
    (TruncatedPayload, EXIT_TRUNCATED),
]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_IO
    try:
        return run(args)
    except UsageError as exc:
        print(f"chaosveil: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ChaosVeilError as exc:
        for cls, code in _EXIT_FOR:
            if isinstance(exc, cls):
                break
        else:
            code = EXIT_IO
        print(f"chaosveil: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
