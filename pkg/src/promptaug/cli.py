"""Command-line interface.

Subcommands:
  run               execute an experiment config, write records.csv + summary.md
  inspect           re-run one cell and render a before/after overlay PNG
  validate-adapter  conformance-check an external adapter over the wire protocol
  decode-coco       rasterize COCO annotation masks to PNG files

Exit codes: 0 success, 1 bad configuration or usage, 2 runtime failure
(--strict also maps skips or per-case failures to 2).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image as _PilImage

from .boxaug import BoxScheme, run_box_scheme
from .dataset import DatasetError, LoaderStats, decode_coco_masks
from .harness import (
    ConfigError,
    build_saliency_detector,
    build_segmenter,
    load_config,
    load_samples,
    run_experiment,
    sample_initial_point,
    strategy_label,
    write_reports,
)
from .imgcore import (
    BinaryMask,
    Box,
    Image,
    Point,
    PromptAugError,
    dice,
    rle_decode,
    rle_from_json_dict,
    save_image_png,
    save_mask_png,
)
from .rng import derive_seed
from .sampling import StrategyKind
from .segmenter import (
    ADAPTER_ENV_VAR,
    AdapterError,
    AdapterProcess,
    ProtocolError,
    SegmenterUnavailable,
    adapter_command_from_env,
    segment_payload,
    saliency_payload,
    spawn_adapter,
)

logger = logging.getLogger(__name__)

STUB_DISK_RADIUS = 4
STUB_SCORE = 0.5
STUB_SCORE_MULTIMASK = 0.75


# ---------------------------------------------------------------------------
# Overlay rendering (inspect)


def _contour(bits: np.ndarray) -> np.ndarray:
    if not bits.any():
        return np.zeros_like(bits)
    interior = bits.copy()
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        rolled = np.roll(bits, shift, axis=axis)
        if shift > 0:
            rolled[(slice(0, 1),) if axis == 0 else (slice(None), slice(0, 1))] = False
        else:
            rolled[(slice(-1, None),) if axis == 0 else (slice(None), slice(-1, None))] = False
        interior &= rolled
    return bits & ~interior


def _as_rgb(image: Image) -> np.ndarray:
    if image.channels == 1:
        return np.stack([image.pixels] * 3, axis=2).astype(np.float64)
    return image.pixels.astype(np.float64)


def _blend(rgb: np.ndarray, where: np.ndarray, color, alpha: float) -> None:
    rgb[where] = (1 - alpha) * rgb[where] + alpha * np.asarray(color, dtype=np.float64)


def _mark_point(rgb: np.ndarray, p: Point, color) -> None:
    h, w = rgb.shape[:2]
    y0, y1 = max(0, p.y - 1), min(h, p.y + 2)
    x0, x1 = max(0, p.x - 1), min(w, p.x + 2)
    rgb[y0:y1, x0:x1] = color


def _draw_box(rgb: np.ndarray, box: Box, color) -> None:
    rgb[box.y_min, box.x_min : box.x_max + 1] = color
    rgb[box.y_max, box.x_min : box.x_max + 1] = color
    rgb[box.y_min : box.y_max + 1, box.x_min] = color
    rgb[box.y_min : box.y_max + 1, box.x_max] = color


def render_panels(panels: list[np.ndarray], scale: Optional[int] = None) -> _PilImage.Image:
    h, w = panels[0].shape[:2]
    if scale is None:
        scale = max(1, 192 // max(h, w))
    gutter = np.full((h, 4, 3), 255.0)
    strip = panels[0]
    for panel in panels[1:]:
        strip = np.concatenate([strip, gutter, panel], axis=1)
    img = _PilImage.fromarray(np.clip(strip, 0, 255).astype(np.uint8))
    return img.resize((img.width * scale, img.height * scale), _PilImage.NEAREST)


GREEN = (40, 200, 60)
RED = (230, 40, 40)
BLUE = (70, 110, 235)
ORANGE = (245, 150, 40)
YELLOW = (245, 225, 50)


def render_point_inspection(
    sample, p0: Point, aug_points: Sequence[Point],
    initial_mask: BinaryMask, final_mask: BinaryMask,
) -> _PilImage.Image:
    base = _as_rgb(sample.image)
    first = base.copy()
    _blend(first, _contour(sample.gt_mask.bits), GREEN, 1.0)
    _mark_point(first, p0, RED)
    second = base.copy()
    _blend(second, initial_mask.bits, BLUE, 0.45)
    _mark_point(second, p0, RED)
    third = base.copy()
    _blend(third, final_mask.bits, ORANGE, 0.45)
    _mark_point(third, p0, RED)
    for p in aug_points:
        _mark_point(third, p, YELLOW)
    return render_panels([first, second, third])


def render_box_inspection(sample, chain) -> _PilImage.Image:
    base = _as_rgb(sample.image)
    first = base.copy()
    _blend(first, _contour(sample.gt_mask.bits), GREEN, 1.0)
    if chain.boxes:
        _draw_box(first, chain.boxes[0], YELLOW)
    if chain.initial_point is not None:
        _mark_point(first, chain.initial_point.point, RED)
    second = base.copy()
    _blend(second, chain.initial_mask.bits, BLUE, 0.45)
    if len(chain.boxes) > 1:
        _draw_box(second, chain.boxes[-1], YELLOW)
    third = base.copy()
    _blend(third, chain.final_mask.bits, ORANGE, 0.45)
    return render_panels([first, second, third])


# ---------------------------------------------------------------------------
# run


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = type(cfg)(**{**cfg.__dict__, "output_dir": Path(args.output_dir)})
    if args.workers:
        cfg = type(cfg)(**{**cfg.__dict__, "workers": args.workers})
    result = run_experiment(cfg)
    records_path, summary_path = write_reports(result, cfg.output_dir)
    print(f"samples: {result.sample_count}  records: {len(result.records)}  "
          f"load skips: {result.loader.skipped}  case failures: {len(result.failures)}")
    print(f"wrote {records_path}")
    print(f"wrote {summary_path}")
    if args.strict and (result.loader.skipped or result.failures):
        print("strict mode: partial failures present", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# inspect


def _cmd_inspect(args) -> int:
    cfg = load_config(args.config)
    samples, _ = load_samples(cfg)
    matches = [s for s in samples if s.id == args.sample_id]
    if not matches:
        preview = ", ".join(s.id for s in samples[:5])
        raise ConfigError(f"sample {args.sample_id!r} not found (first ids: {preview})")
    sample = matches[0]

    segmenter, close_seg = build_segmenter(cfg.segmenter)
    detector, close_det = build_saliency_detector(cfg.saliency_provider)
    try:
        if args.strategy in BoxScheme._value2member_map_:
            scheme = BoxScheme(args.strategy)
            seed = derive_seed(cfg.base_seed, sample.id, args.repeat, scheme.value)
            chain = run_box_scheme(scheme, sample.image, sample.gt_mask, segmenter, seed)
            d0 = dice(chain.initial_mask, sample.gt_mask)
            d1 = dice(chain.final_mask, sample.gt_mask)
            out = render_box_inspection(sample, chain)
            flags = list(chain.flags)
        else:
            strategy = StrategyKind(args.strategy)
            seed_p0 = derive_seed(cfg.base_seed, sample.id, args.repeat, "initial")
            p0 = sample_initial_point(sample.gt_mask, seed_p0, cfg.initial_point_rule)
            from .harness import run_point_case  # local import keeps cli deps thin
            from .imgcore import PointPrompt

            initial = segmenter.segment(sample.image, [PointPrompt(p0)],
                                        multimask=cfg.multimask)
            d0 = dice(initial.mask, sample.gt_mask)
            record = run_point_case(
                sample, strategy, args.k, args.repeat, cfg, segmenter,
                detector, p0, initial, d0,
            )
            # re-derive the augmented mask for rendering
            from .harness import _augment_points

            points, _ = _augment_points(
                sample, strategy, args.k, p0, initial.mask, cfg.point_source,
                record.seed, cfg.distance_mode, detector,
            ) if not initial.mask.is_empty() else ([], [])
            if points:
                final = segmenter.segment(
                    sample.image,
                    [PointPrompt(p0)] + [PointPrompt(p) for p in points],
                    multimask=cfg.multimask,
                )
                final_mask = final.mask
            else:
                final_mask = initial.mask
            d1 = record.dice_augmented
            flags = list(record.flags)
            out = render_point_inspection(sample, p0, points, initial.mask, final_mask)
    finally:
        for close in (close_seg, close_det):
            if close:
                close()

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out.save(out_path, format="PNG")
    flag_note = f"  flags: {','.join(flags)}" if flags else ""
    print(f"{sample.id} {args.strategy}: dice {d0:.4f} -> {d1:.4f}{flag_note}")
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# validate-adapter


def probe_image() -> Image:
    """Deterministic 16x12 RGB test card: gradients plus a bright square."""
    w, h = 16, 12
    xx, yy = np.meshgrid(np.arange(w), np.arange(h))
    r = (xx * 16) % 256
    g = (yy * 20) % 256
    b = ((xx + yy) * 8) % 256
    px = np.stack([r, g, b], axis=2).astype(np.uint8)
    px[4:9, 3:7] = (250, 250, 250)
    return Image(px)


def stub_segment_mask(height: int, width: int,
                      points: Sequence[Point], box: Optional[Box]) -> BinaryMask:
    """Reference stub behavior: radius-4 disks around clicks, plus box fill."""
    bits = np.zeros((height, width), dtype=bool)
    yy, xx = np.mgrid[0:height, 0:width]
    for p in points:
        bits |= (xx - p.x) ** 2 + (yy - p.y) ** 2 <= STUB_DISK_RADIUS**2
    if box is not None:
        bits[box.y_min : box.y_max + 1, box.x_min : box.x_max + 1] = True
    return BinaryMask(bits)


def stub_saliency_values(height: int, width: int) -> list[int]:
    """Reference stub saliency: integer radial falloff from the image center.

    Uses doubled coordinates so everything stays in exact integer arithmetic
    across implementations.
    """
    values = []
    dmax2 = max(
        (2 * x - (width - 1)) ** 2 + (2 * y - (height - 1)) ** 2
        for x in (0, width - 1)
        for y in (0, height - 1)
    )
    for y in range(height):
        for x in range(width):
            d2 = (2 * x - (width - 1)) ** 2 + (2 * y - (height - 1)) ** 2
            values.append((65535 * (dmax2 - d2)) // dmax2)
    return values


class _Conformance:
    def __init__(self):
        self.results: list[tuple[str, bool, str]] = []

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        self.results.append((name, ok, detail))
        if ok:
            print(f"ok - {name}" + (f" ({detail})" if detail else ""))
        else:
            print(f"FAIL - {name}: {detail}")

    @property
    def passed(self) -> int:
        return sum(1 for _, ok, _ in self.results if ok)


def _decode_result_mask(reply: dict, image: Image) -> BinaryMask:
    mask = rle_decode(rle_from_json_dict(reply["mask_rle"]))
    if mask.bits.shape != (image.height, image.width):
        raise ProtocolError(f"mask shape {mask.bits.shape} does not match the image")
    return mask


def _segment_probe(proc: AdapterProcess, image: Image, image_path: str,
                   points: list[Point], box: Optional[Box], multimask: bool = False) -> dict:
    payload = segment_payload(
        proc.allocate_id(), {"image_path": image_path},
        points, [1] * len(points), box, multimask,
    )
    return proc.request(payload)


def run_conformance(command: str, workdir: Path, *,
                    expect_stub: bool = False, check_saliency: bool = False,
                    handshake_timeout: float, request_timeout: float) -> _Conformance:
    checks = _Conformance()
    workdir.mkdir(parents=True, exist_ok=True)
    image = probe_image()
    image_path = str(workdir / "probe.png")
    save_image_png(image, image_path)
    point = Point(5, 6)       # inside the bright square
    box = Box(2, 3, 9, 8)

    try:
        proc = spawn_adapter(command, handshake_timeout=handshake_timeout,
                             request_timeout=request_timeout)
    except PromptAugError as exc:
        checks.record("handshake", False, str(exc))
        return checks
    checks.record("handshake", True, f"model: {proc.model or 'unnamed'}")

    with proc:
        def structural(name: str, points, box, multimask=False) -> Optional[BinaryMask]:
            try:
                reply = _segment_probe(proc, image, image_path, points, box, multimask)
                mask = _decode_result_mask(reply, image)
                score = float(reply["score"])
                if not (0.0 <= score <= 1.0):
                    raise ProtocolError(f"score {score} outside [0, 1]")
            except (PromptAugError, KeyError, TypeError, ValueError) as exc:
                checks.record(name, False, str(exc))
                return None
            checks.record(name, True)
            return mask

        mask_point = structural("segment with one point", [point], None)
        mask_box = structural("segment with a box", [], box)
        mask_both = structural("segment with point and box", [point], box)
        structural("segment with multimask", [point], None, multimask=True)

        try:
            reply = _segment_probe(proc, image, image_path, [point], None)
            again = _decode_result_mask(reply, image)
            if mask_point is not None and bool(np.array_equal(again.bits, mask_point.bits)):
                checks.record("determinism on repeated request", True)
            else:
                checks.record("determinism on repeated request", False, "masks differ")
        except PromptAugError as exc:
            checks.record("determinism on repeated request", False, str(exc))

        try:
            proc.exchange_raw(b"this is not json\n")
            checks.record("malformed line yields an error", False,
                          "adapter answered with a result")
        except AdapterError:
            checks.record("malformed line yields an error", True)
        except PromptAugError as exc:
            checks.record("malformed line yields an error", False, str(exc))

        structural("still alive after malformed input", [point], None)

        if check_saliency or expect_stub:
            try:
                reply = proc.request(saliency_payload(proc.allocate_id(),
                                                      {"image_path": image_path}))
                sal = reply["saliency"]
                h, w = sal["size"]
                values = sal["values"]
                ok = (int(h), int(w)) == (image.height, image.width) and \
                    len(values) == image.height * image.width and \
                    all(isinstance(v, int) and 0 <= v <= 65535 for v in values)
                checks.record("saliency request", ok,
                              "" if ok else "bad size or out-of-range values")
            except (PromptAugError, KeyError, TypeError, ValueError) as exc:
                checks.record("saliency request", False, str(exc))
                values = None

        if expect_stub:
            h, w = image.height, image.width
            expectations = [
                ("stub mask for one point", mask_point,
                 stub_segment_mask(h, w, [point], None)),
                ("stub mask for a box", mask_box, stub_segment_mask(h, w, [], box)),
                ("stub mask for point and box", mask_both,
                 stub_segment_mask(h, w, [point], box)),
            ]
            for name, got, want in expectations:
                if got is None:
                    checks.record(name, False, "no mask to compare")
                elif np.array_equal(got.bits, want.bits):
                    checks.record(name, True)
                else:
                    diff = int(np.count_nonzero(got.bits ^ want.bits))
                    checks.record(name, False, f"{diff} pixels differ")
            try:
                proc.request(segment_payload(proc.allocate_id(),
                                             {"image_path": image_path}, [], [], None, False))
                checks.record("stub rejects an empty prompt", False, "got a result")
            except AdapterError:
                checks.record("stub rejects an empty prompt", True)
            except PromptAugError as exc:
                checks.record("stub rejects an empty prompt", False, str(exc))
            if values is not None:
                want_values = stub_saliency_values(h, w)
                if list(values) == want_values:
                    checks.record("stub saliency values", True)
                else:
                    checks.record("stub saliency values", False, "values differ")

    return checks


def _cmd_validate_adapter(args) -> int:
    command = args.command or adapter_command_from_env(ADAPTER_ENV_VAR)
    workdir = Path(args.workdir) if args.workdir else Path("adapter-probe")
    checks = run_conformance(
        command, workdir,
        expect_stub=args.expect_stub, check_saliency=args.check_saliency,
        handshake_timeout=args.handshake_timeout, request_timeout=args.request_timeout,
    )
    total = len(checks.results)
    print(f"adapter conformance: {checks.passed}/{total} checks passed")
    return 0 if checks.passed == total else 2


# ---------------------------------------------------------------------------
# decode-coco


def _cmd_decode_coco(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    categories = args.categories.split(",") if args.categories else None
    stats = LoaderStats()
    count = 0
    for mask_name, mask in decode_coco_masks(args.annotations,
                                             categories=categories, stats=stats):
        path = out_dir / (mask_name.replace("/", "_") + ".png")
        save_mask_png(mask, path)
        count += 1
    print(f"decoded {count} masks to {out_dir} ({stats.skipped} skipped)")
    if args.strict and stats.skipped:
        return 2
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptaug",
        description="prompt augmentation strategies and evaluation harness",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command_name", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--output-dir", help="override the config's output directory")
    p_run.add_argument("--workers", type=int, help="override worker count")
    p_run.add_argument("--strict", action="store_true",
                       help="exit nonzero when anything was skipped or failed")
    p_run.set_defaults(func=_cmd_run)

    p_ins = sub.add_parser("inspect", help="render one augmentation cell")
    p_ins.add_argument("--config", required=True)
    p_ins.add_argument("--sample-id", required=True)
    p_ins.add_argument("--strategy", required=True)
    p_ins.add_argument("--k", type=int, default=1, help="extra points (default 1)")
    p_ins.add_argument("--repeat", type=int, default=0)
    p_ins.add_argument("--out", required=True, help="output PNG path")
    p_ins.set_defaults(func=_cmd_inspect)

    p_val = sub.add_parser("validate-adapter", help="conformance-check an adapter")
    p_val.add_argument("--command", help=f"adapter command (default ${ADAPTER_ENV_VAR})")
    p_val.add_argument("--workdir", help="where probe files are written")
    p_val.add_argument("--expect-stub", action="store_true",
                       help="assert the reference stub's exact outputs")
    p_val.add_argument("--check-saliency", action="store_true",
                       help="also probe the saliency request")
    p_val.add_argument("--handshake-timeout", type=float, default=120.0)
    p_val.add_argument("--request-timeout", type=float, default=60.0)
    p_val.set_defaults(func=_cmd_validate_adapter)

    p_dec = sub.add_parser("decode-coco", help="rasterize COCO annotations to PNGs")
    p_dec.add_argument("--annotations", required=True)
    p_dec.add_argument("--out", required=True)
    p_dec.add_argument("--categories", help="comma-separated category names")
    p_dec.add_argument("--strict", action="store_true")
    p_dec.set_defaults(func=_cmd_decode_coco)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PromptAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
