"""Experiment harness: config, the two-pass pipeline, aggregation, reports.

A run evaluates every (sample, repeat, strategy, point budget) cell: click
once, segment, derive extra clicks from the chosen strategy, segment again,
and score both masks against ground truth. Box schemes follow their own
chains (see boxaug). Results land in `records.csv` plus a human-readable
`summary.md`; both files are byte-reproducible for a given config.

Seeding: every stochastic decision derives its own SplitMix64 seed from
(base_seed, sample id, repeat, purpose), so any single cell can be replayed
in isolation and strategies share the same initial click within a cell.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import saliency as saliency_mod
from .boxaug import BoxScheme, run_box_scheme
from .dataset import (
    DatasetError,
    LoaderStats,
    Sample,
    load_coco_dataset,
    load_dir_dataset,
)
from .imgcore import BinaryMask, Image, Point, PointPrompt, PromptAugError, dice
from .rng import derive_seed
from .sampling import (
    EmptyCandidates,
    InsufficientCandidates,
    StrategyKind,
    build_candidates,
    centroid_point,
    sample_top_k,
    uniform_mask_point,
)
from .saliency import ProviderUnavailable, SaliencyEmpty
from .segmenter import (
    ADAPTER_ENV_VAR,
    ExternalSegmenter,
    MockBoxFill,
    MockDiskAroundSeeds,
    MockRegionGrow,
    SegmentationResult,
    adapter_command_from_env,
    spawn_adapter,
)
from .synthetic import TwoBlobSpec, two_blob_samples

logger = logging.getLogger(__name__)

FLAG_EMPTY_INITIAL = "EmptyInitial"
FLAG_EMPTY_CANDIDATES = "EmptyCandidates"
FLAG_SHORT_CANDIDATES = "InsufficientCandidates"
FLAG_SALIENCY_FALLBACK = "SaliencyFallback"

RECORD_COLUMNS = (
    "sample_id",
    "category",
    "strategy",
    "total_points",
    "rank",
    "repeat",
    "seed",
    "dice_initial",
    "dice_augmented",
    "flags",
)

# canonical column order in summary tables
STRATEGY_ORDER = (
    "initial",
    "random",
    "max_entropy",
    "max_distance",
    "saliency",
    "gt_random",
    "gt_max_entropy",
    "gt_max_distance",
    "inner_of_gt",
    "outer_of_gt",
    "inner_of_initial_box",
    "outer_of_initial_box",
    "outer_of_initial_point",
)


class ConfigError(PromptAugError):
    """The experiment configuration is invalid."""


class PointSource(enum.Enum):
    INITIAL = "initial"
    GT = "gt"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    segmenter: dict
    strategies: tuple[str, ...] = ("random", "max_entropy", "max_distance", "saliency")
    point_source: PointSource = PointSource.INITIAL
    extra_points: tuple[int, ...] = (1,)
    repeats: int = 3
    base_seed: int = 0
    distance_mode: str = "max"
    saliency_provider: dict = field(default_factory=lambda: {"provider": "intree"})
    initial_point_rule: str = "uniform"
    stability_top3: bool = False
    multimask: bool = False
    workers: int = 1
    output_dir: Path = Path("out")

    @property
    def point_strategies(self) -> list[StrategyKind]:
        return [StrategyKind(s) for s in self.strategies if s in StrategyKind._value2member_map_]

    @property
    def box_schemes(self) -> list[BoxScheme]:
        return [BoxScheme(s) for s in self.strategies if s in BoxScheme._value2member_map_]


_POINT_SOURCE_ALIASES = {
    "initial": PointSource.INITIAL,
    "initial_mask": PointSource.INITIAL,
    "gt": PointSource.GT,
    "gt_mask": PointSource.GT,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {
        "dataset", "segmenter", "strategies", "point_source", "extra_points",
        "repeats", "base_seed", "distance_mode", "saliency", "initial_point_rule",
        "stability_top3", "multimask", "workers", "output_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("dataset", "segmenter"):
        if not isinstance(raw.get(key), dict) or "kind" not in raw[key]:
            raise ConfigError(f"config needs a {key!r} object with a 'kind'")

    strategies = raw.get("strategies", ["random", "max_entropy", "max_distance", "saliency"])
    if not isinstance(strategies, list) or not strategies:
        raise ConfigError("strategies must be a nonempty list")
    valid = set(StrategyKind._value2member_map_) | set(BoxScheme._value2member_map_)
    for s in strategies:
        if s not in valid:
            raise ConfigError(f"unknown strategy {s!r}; valid: {sorted(valid)}")
    if len(set(strategies)) != len(strategies):
        raise ConfigError("strategies must be unique")

    source_raw = raw.get("point_source", "initial")
    if source_raw not in _POINT_SOURCE_ALIASES:
        raise ConfigError(f"unknown point_source {source_raw!r}")

    extra_points = raw.get("extra_points", [1])
    if (not isinstance(extra_points, list) or not extra_points
            or any(not isinstance(k, int) or k < 1 for k in extra_points)):
        raise ConfigError("extra_points must be a list of integers >= 1")

    repeats = raw.get("repeats", 3)
    if not isinstance(repeats, int) or repeats < 1:
        raise ConfigError("repeats must be a positive integer")

    distance_mode = raw.get("distance_mode", "max")
    if distance_mode not in ("max", "min"):
        raise ConfigError(f"distance_mode must be 'max' or 'min', got {distance_mode!r}")

    rule = raw.get("initial_point_rule", "uniform")
    if rule not in ("uniform", "centroid"):
        raise ConfigError(f"initial_point_rule must be 'uniform' or 'centroid', got {rule!r}")

    sal = raw.get("saliency", {"provider": "intree"})
    if not isinstance(sal, dict) or sal.get("provider") not in ("intree", "external"):
        raise ConfigError("saliency.provider must be 'intree' or 'external'")

    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")

    base_seed = raw.get("base_seed", 0)
    if not isinstance(base_seed, int):
        raise ConfigError("base_seed must be an integer")

    return ExperimentConfig(
        dataset=raw["dataset"],
        segmenter=raw["segmenter"],
        strategies=tuple(strategies),
        point_source=_POINT_SOURCE_ALIASES[source_raw],
        extra_points=tuple(sorted(set(extra_points))),
        repeats=repeats,
        base_seed=base_seed,
        distance_mode=distance_mode,
        saliency_provider=sal,
        initial_point_rule=rule,
        stability_top3=bool(raw.get("stability_top3", False)),
        multimask=bool(raw.get("multimask", False)),
        workers=workers,
        output_dir=Path(raw.get("output_dir", "out")),
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


@dataclass(frozen=True)
class ExperimentRecord:
    sample_id: str
    category: str
    strategy: str
    total_points: int  # clicks in the final segmenter call; 0 for box-only schemes
    rank: int          # 0 outside stability mode, else 1..3
    repeat: int
    seed: int
    dice_initial: float
    dice_augmented: float
    flags: tuple[str, ...] = ()


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[ExperimentRecord]
    loader: LoaderStats
    failures: list[str]
    sample_count: int


def strategy_label(strategy: StrategyKind, source: PointSource) -> str:
    # saliency draws from the image around the initial mask, never from GT
    if source is PointSource.GT and strategy is not StrategyKind.SALIENCY:
        return f"gt_{strategy.value}"
    return strategy.value


# ---------------------------------------------------------------------------
# Segmenter / saliency wiring


def build_segmenter(spec: dict) -> tuple[object, Optional[Callable]]:
    """Build a segmenter from its config object.

    Returns (segmenter, closer); the closer tears down any child process.
    """
    kind = spec.get("kind")
    if kind == "region_grow":
        return MockRegionGrow(int(spec.get("radius", 8)), int(spec.get("tolerance", 8))), None
    if kind == "box_fill":
        return MockBoxFill(), None
    if kind == "disk":
        return MockDiskAroundSeeds(int(spec.get("radius", 8))), None
    if kind == "external":
        command = spec.get("command") or adapter_command_from_env(ADAPTER_ENV_VAR)
        handle = ExternalSegmenter(
            spawn_adapter(command), image_transport=spec.get("image_transport", "path")
        )
        return handle, handle.close
    raise ConfigError(f"unknown segmenter kind {kind!r}")


def build_saliency_detector(spec: dict) -> tuple[Optional[Callable], Optional[Callable]]:
    """Detector callable for the saliency strategy (None means in-tree)."""
    if spec.get("provider") == "intree":
        return None, None
    command = spec.get("command") or adapter_command_from_env(ADAPTER_ENV_VAR)
    handle = ExternalSegmenter(spawn_adapter(command))

    def detect(crop: Image):
        return handle.saliency(crop)

    return detect, handle.close


# ---------------------------------------------------------------------------
# The two-pass pipeline


def sample_initial_point(gt_mask: BinaryMask, seed: int, rule: str = "uniform") -> Point:
    if rule == "centroid":
        return centroid_point(gt_mask)
    return uniform_mask_point(gt_mask, seed)


def _augment_points(
    sample: Sample,
    strategy: StrategyKind,
    k: int,
    p0: Point,
    initial_mask: BinaryMask,
    source: PointSource,
    seed: int,
    distance_mode: str,
    detector: Optional[Callable],
) -> tuple[list[Point], list[str]]:
    """Pick up to k extra clicks; degradations come back as record flags."""
    flags: list[str] = []
    if strategy is StrategyKind.SALIENCY:
        try:
            return (
                saliency_mod.sample_saliency_points(
                    sample.image, initial_mask, seed, k, detector=detector
                ),
                flags,
            )
        except SaliencyEmpty:
            flags.append(FLAG_SALIENCY_FALLBACK)
            strategy = StrategyKind.RANDOM
            source = PointSource.INITIAL

    source_mask = sample.gt_mask if source is PointSource.GT else initial_mask
    try:
        candidates = build_candidates(source_mask, exclude=p0)
    except EmptyCandidates:
        flags.append(FLAG_EMPTY_CANDIDATES)
        return [], flags
    take = k
    if len(candidates) < k:
        flags.append(FLAG_SHORT_CANDIDATES)
        take = len(candidates)
    points = sample_top_k(
        strategy,
        take,
        candidates=candidates,
        p0=p0,
        image=sample.image,
        seed=seed,
        distance_mode=distance_mode,
    )
    return points, flags


def run_point_case(
    sample: Sample,
    strategy: StrategyKind,
    k: int,
    repeat: int,
    cfg: ExperimentConfig,
    segmenter,
    detector: Optional[Callable],
    p0: Point,
    initial: SegmentationResult,
    dice_initial: float,
) -> ExperimentRecord:
    """One cell: augment the initial click with k strategy points and rescore."""
    label = strategy_label(strategy, cfg.point_source)
    seed = derive_seed(cfg.base_seed, sample.id, repeat, label, k)
    flags: list[str] = []
    dice_augmented = dice_initial
    if initial.mask.is_empty():
        flags.append(FLAG_EMPTY_INITIAL)
    else:
        points, flags = _augment_points(
            sample, strategy, k, p0, initial.mask, cfg.point_source, seed,
            cfg.distance_mode, detector,
        )
        if points:
            prompts = [PointPrompt(p0)] + [PointPrompt(p) for p in points]
            final = segmenter.segment(sample.image, prompts, multimask=cfg.multimask)
            dice_augmented = dice(final.mask, sample.gt_mask)
    return ExperimentRecord(
        sample_id=sample.id,
        category=sample.category,
        strategy=label,
        total_points=k + 1,
        rank=0,
        repeat=repeat,
        seed=seed,
        dice_initial=dice_initial,
        dice_augmented=dice_augmented,
        flags=tuple(flags),
    )


def run_stability_cases(
    sample: Sample,
    strategy: StrategyKind,
    repeat: int,
    cfg: ExperimentConfig,
    segmenter,
    detector: Optional[Callable],
    p0: Point,
    initial: SegmentationResult,
    dice_initial: float,
) -> list[ExperimentRecord]:
    """Evaluate the top-3 single augmentations of a strategy one at a time."""
    label = strategy_label(strategy, cfg.point_source)
    seed = derive_seed(cfg.base_seed, sample.id, repeat, label, "top3")
    if initial.mask.is_empty():
        return []
    points, flags = _augment_points(
        sample, strategy, 3, p0, initial.mask, cfg.point_source, seed,
        cfg.distance_mode, detector,
    )
    records = []
    for rank, point in enumerate(points, start=1):
        final = segmenter.segment(
            sample.image, [PointPrompt(p0), PointPrompt(point)], multimask=cfg.multimask
        )
        records.append(
            ExperimentRecord(
                sample_id=sample.id,
                category=sample.category,
                strategy=label,
                total_points=2,
                rank=rank,
                repeat=repeat,
                seed=seed,
                dice_initial=dice_initial,
                dice_augmented=dice(final.mask, sample.gt_mask),
                flags=tuple(flags),
            )
        )
    return records


def run_sample(
    sample: Sample,
    cfg: ExperimentConfig,
    segmenter,
    detector: Optional[Callable],
) -> tuple[list[ExperimentRecord], list[str]]:
    records: list[ExperimentRecord] = []
    failures: list[str] = []
    point_strategies = cfg.point_strategies
    for repeat in range(cfg.repeats):
        if point_strategies:
            seed_p0 = derive_seed(cfg.base_seed, sample.id, repeat, "initial")
            try:
                p0 = sample_initial_point(sample.gt_mask, seed_p0, cfg.initial_point_rule)
                initial = segmenter.segment(
                    sample.image, [PointPrompt(p0)], multimask=cfg.multimask
                )
                dice_initial = dice(initial.mask, sample.gt_mask)
            except PromptAugError as exc:
                failures.append(f"{sample.id} repeat {repeat} initial: {exc}")
                continue
            for strategy in point_strategies:
                for k in cfg.extra_points:
                    try:
                        records.append(
                            run_point_case(
                                sample, strategy, k, repeat, cfg, segmenter,
                                detector, p0, initial, dice_initial,
                            )
                        )
                    except PromptAugError as exc:
                        failures.append(
                            f"{sample.id} repeat {repeat} {strategy.value} k={k}: {exc}"
                        )
                if cfg.stability_top3:
                    try:
                        records.extend(
                            run_stability_cases(
                                sample, strategy, repeat, cfg, segmenter,
                                detector, p0, initial, dice_initial,
                            )
                        )
                    except PromptAugError as exc:
                        failures.append(
                            f"{sample.id} repeat {repeat} {strategy.value} top3: {exc}"
                        )
        for scheme in cfg.box_schemes:
            seed = derive_seed(cfg.base_seed, sample.id, repeat, scheme.value)
            try:
                chain = run_box_scheme(scheme, sample.image, sample.gt_mask, segmenter, seed)
                records.append(
                    ExperimentRecord(
                        sample_id=sample.id,
                        category=sample.category,
                        strategy=scheme.value,
                        total_points=1 if chain.initial_point is not None else 0,
                        rank=0,
                        repeat=repeat,
                        seed=seed,
                        dice_initial=dice(chain.initial_mask, sample.gt_mask),
                        dice_augmented=dice(chain.final_mask, sample.gt_mask),
                        flags=tuple(chain.flags),
                    )
                )
            except PromptAugError as exc:
                failures.append(f"{sample.id} repeat {repeat} {scheme.value}: {exc}")
    return records, failures


# ---------------------------------------------------------------------------
# Dataset wiring


def load_samples(cfg: ExperimentConfig) -> tuple[list[Sample], LoaderStats]:
    spec = cfg.dataset
    stats = LoaderStats()
    kind = spec.get("kind")
    if kind == "two_blob":
        count = spec.get("count", 100)
        if not isinstance(count, int) or count < 1:
            raise ConfigError("two_blob dataset needs a positive integer count")
        geometry = {
            key: spec[key]
            for key in TwoBlobSpec.__dataclass_fields__
            if key in spec
        }
        samples = two_blob_samples(count, spec.get("seed", 0), TwoBlobSpec(**geometry))
        stats.loaded = len(samples)
        return samples, stats
    if kind == "dir":
        for key in ("images_dir", "masks_dir"):
            if key not in spec:
                raise ConfigError(f"dir dataset needs {key!r}")
        samples = list(
            load_dir_dataset(
                spec["images_dir"],
                spec["masks_dir"],
                dataset_name=spec.get("name"),
                category=spec.get("category"),
                stats=stats,
            )
        )
        return samples, stats
    if kind == "coco":
        for key in ("annotations", "images_dir"):
            if key not in spec:
                raise ConfigError(f"coco dataset needs {key!r}")
        samples = list(
            load_coco_dataset(
                spec["annotations"],
                spec["images_dir"],
                categories=spec.get("categories"),
                per_category_cap=spec.get("per_category_cap", 20),
                seed=spec.get("seed", 0),
                dataset_name=spec.get("name"),
                stats=stats,
            )
        )
        return samples, stats
    raise ConfigError(f"unknown dataset kind {kind!r}")


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    samples, stats = load_samples(cfg)
    if not samples:
        raise DatasetError("dataset produced no usable samples")

    workers = min(cfg.workers, len(samples))
    all_records: list[ExperimentRecord] = []
    failures: list[str] = []

    if workers <= 1:
        segmenter, close_seg = build_segmenter(cfg.segmenter)
        detector, close_det = build_saliency_detector(cfg.saliency_provider)
        try:
            for sample in samples:
                recs, fails = run_sample(sample, cfg, segmenter, detector)
                all_records.extend(recs)
                failures.extend(fails)
        finally:
            for close in (close_seg, close_det):
                if close:
                    close()
    else:
        # each worker owns its own backend handles; records are order-independent
        chunks = [samples[i::workers] for i in range(workers)]

        def work(chunk: list[Sample]):
            segmenter, close_seg = build_segmenter(cfg.segmenter)
            detector, close_det = build_saliency_detector(cfg.saliency_provider)
            recs: list[ExperimentRecord] = []
            fails: list[str] = []
            try:
                for sample in chunk:
                    r, f = run_sample(sample, cfg, segmenter, detector)
                    recs.extend(r)
                    fails.extend(f)
            finally:
                for close in (close_seg, close_det):
                    if close:
                        close()
            return recs, fails

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for recs, fails in pool.map(work, chunks):
                all_records.extend(recs)
                failures.extend(fails)

    all_records.sort(key=lambda r: (r.sample_id, r.strategy, r.total_points, r.rank, r.repeat))
    failures.sort()
    return RunResult(cfg, all_records, stats, failures, sample_count=len(samples))


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class AggregateRow:
    category: str
    strategy: str
    total_points: int
    rank: int
    mean: float
    std: float
    samples: int
    repeats: int

    def cell(self) -> str:
        return f"{self.mean:.3f}±{self.std:.3f}"


def _repeat_mean_stats(values_by_repeat: dict[int, list[float]]) -> tuple[float, float]:
    """Mean of per-repeat means, and the population std across repeat means."""
    repeat_means = [float(np.mean(values_by_repeat[r])) for r in sorted(values_by_repeat)]
    return float(np.mean(repeat_means)), float(np.std(repeat_means))


def aggregate_records(records: Sequence[ExperimentRecord]) -> list[AggregateRow]:
    """Per (category, strategy, points, rank) plus 'initial' pseudo-strategy rows.

    Initial scores are shared by every strategy within a (sample, repeat)
    cell, so they are deduplicated before aggregation. Category 'all' pools
    every sample.
    """
    rows: list[AggregateRow] = []
    point_records = [r for r in records if r.strategy not in BoxScheme._value2member_map_]
    box_records = [r for r in records if r.strategy in BoxScheme._value2member_map_]

    def emit(category: str, strategy: str, total_points: int, rank: int,
             by_repeat: dict[int, list[float]], sample_ids: set):
        mean, std = _repeat_mean_stats(by_repeat)
        rows.append(AggregateRow(category, strategy, total_points, rank,
                                 mean, std, len(sample_ids), len(by_repeat)))

    def group(recs, key_fn, value_fn, dedup=False):
        grouped: dict = {}
        for rec in recs:
            for category in (rec.category, "all"):
                key = key_fn(rec, category)
                entry = grouped.setdefault(key, ({}, set(), set()))
                cell_key = (rec.sample_id, rec.repeat)
                if dedup and cell_key in entry[2]:
                    continue
                entry[2].add(cell_key)
                entry[0].setdefault(rec.repeat, []).append(value_fn(rec))
                entry[1].add(rec.sample_id)
        return grouped

    # initial pseudo-strategy, from point-strategy records (shared per cell)
    for key, (by_repeat, ids, _) in sorted(
        group(
            point_records,
            lambda r, cat: (cat, "initial", r.total_points),
            lambda r: r.dice_initial,
            dedup=True,
        ).items()
    ):
        emit(key[0], "initial", key[2], 0, by_repeat, ids)

    for key, (by_repeat, ids, _) in sorted(
        group(
            point_records,
            lambda r, cat: (cat, r.strategy, r.total_points, r.rank),
            lambda r: r.dice_augmented,
        ).items()
    ):
        emit(key[0], key[1], key[2], key[3], by_repeat, ids)

    for key, (by_repeat, ids, _) in sorted(
        group(
            box_records,
            lambda r, cat: (cat, r.strategy),
            lambda r: r.dice_augmented,
        ).items()
    ):
        emit(key[0], key[1], 0, 0, by_repeat, ids)

    return rows


# ---------------------------------------------------------------------------
# Report writers


def records_csv_text(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for r in records:
        writer.writerow([
            r.sample_id,
            r.category,
            r.strategy,
            r.total_points,
            r.rank,
            r.repeat,
            r.seed,
            f"{r.dice_initial:.6f}",
            f"{r.dice_augmented:.6f}",
            "|".join(r.flags),
        ])
    return buf.getvalue()


def parse_records_csv(text: str) -> list[ExperimentRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != RECORD_COLUMNS:
        raise PromptAugError(f"unexpected records header {header!r}")
    out = []
    for row in reader:
        out.append(ExperimentRecord(
            sample_id=row[0],
            category=row[1],
            strategy=row[2],
            total_points=int(row[3]),
            rank=int(row[4]),
            repeat=int(row[5]),
            seed=int(row[6]),
            dice_initial=float(row[7]),
            dice_augmented=float(row[8]),
            flags=tuple(row[9].split("|")) if row[9] else (),
        ))
    return out


def _strategy_sort_key(name: str) -> tuple:
    try:
        return (0, STRATEGY_ORDER.index(name))
    except ValueError:
        return (1, name)


def _markdown_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


def summary_markdown_text(result: RunResult) -> str:
    cfg = result.config
    rows = aggregate_records(result.records)
    lines = [
        "# Experiment summary",
        "",
        f"- dataset: `{json.dumps(cfg.dataset, sort_keys=True)}`",
        f"- segmenter: `{json.dumps(cfg.segmenter, sort_keys=True)}`",
        f"- samples: {result.sample_count} (skipped at load: {result.loader.skipped})",
        f"- repeats: {cfg.repeats}, base seed: {cfg.base_seed}, "
        f"point source: {cfg.point_source.value}",
        f"- case failures: {len(result.failures)}",
        "",
    ]

    main_rows = [r for r in rows if r.rank == 0 and r.strategy not in
                 BoxScheme._value2member_map_]
    if main_rows:
        strategies = sorted({r.strategy for r in main_rows}, key=_strategy_sort_key)
        by_key = {(r.category, r.strategy, r.total_points): r for r in main_rows}
        categories = sorted({r.category for r in main_rows})
        categories.sort(key=lambda c: (c != "all", c))
        lines += ["## Point strategies", ""]
        header = ["Category", "Points"] + strategies
        body = []
        points_list = sorted({r.total_points for r in main_rows if r.strategy != "initial"})
        for category in categories:
            for points in points_list:
                cells = [category, str(points)]
                for strategy in strategies:
                    key_points = points
                    row = by_key.get((category, strategy, key_points))
                    if strategy == "initial" and row is None:
                        row = by_key.get((category, "initial", points))
                    cells.append(row.cell() if row else "-")
                body.append(cells)
        lines += _markdown_table(header, body) + [""]

    box_rows = [r for r in rows if r.strategy in BoxScheme._value2member_map_]
    if box_rows:
        schemes = sorted({r.strategy for r in box_rows}, key=_strategy_sort_key)
        by_key = {(r.category, r.strategy): r for r in box_rows}
        categories = sorted({r.category for r in box_rows})
        categories.sort(key=lambda c: (c != "all", c))
        lines += ["## Box schemes", ""]
        body = [
            [category] + [
                by_key[(category, s)].cell() if (category, s) in by_key else "-"
                for s in schemes
            ]
            for category in categories
        ]
        lines += _markdown_table(["Category"] + schemes, body) + [""]

    stab_rows = [r for r in rows if r.rank > 0]
    if stab_rows:
        by_key = {(r.category, r.strategy, r.rank): r for r in stab_rows}
        categories = sorted({r.category for r in stab_rows})
        categories.sort(key=lambda c: (c != "all", c))
        strategies = sorted({r.strategy for r in stab_rows}, key=_strategy_sort_key)
        lines += ["## Stability of the top-3 single augmentations", ""]
        body = []
        for category in categories:
            for strategy in strategies:
                cells = [category, strategy]
                for rank in (1, 2, 3):
                    row = by_key.get((category, strategy, rank))
                    cells.append(row.cell() if row else "-")
                body.append(cells)
        lines += _markdown_table(
            ["Category", "Strategy", "Rank 1", "Rank 2", "Rank 3"], body
        ) + [""]

    if result.loader.reasons or result.failures:
        lines += ["## Skips and failures", ""]
        for reason in result.loader.reasons[:20]:
            lines.append(f"- load skip: {reason}")
        if result.loader.skipped > 20:
            lines.append(f"- ... {result.loader.skipped - 20} more load skips")
        for failure in result.failures[:20]:
            lines.append(f"- case failure: {failure}")
        if len(result.failures) > 20:
            lines.append(f"- ... {len(result.failures) - 20} more case failures")
        lines.append("")

    return "\n".join(lines)


def write_reports(result: RunResult, output_dir: Union[str, Path]) -> tuple[Path, Path]:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    records_path = output_dir / "records.csv"
    summary_path = output_dir / "summary.md"
    records_path.write_text(records_csv_text(result.records))
    summary_path.write_text(summary_markdown_text(result))
    return records_path, summary_path
