"""Raw viewer ratings to screened, combined, rescaled MOS tables.

Stages, in the order the orchestrator applies them:

1. :func:`zscore` -- standardize each viewer's ratings by their own mean
   and standard deviation.
2. :func:`screen_bt500` -- classical observer screening in the z-score
   domain (kurtosis-dependent 2-sigma / sqrt(20)-sigma bounds, P/Q
   counting, 0.05 / 0.3 thresholds).
3. :func:`screen_ratio_average` -- consistency screening in the raw-score
   domain over adjacent operating-point pairs: large inversions count
   toward removal, small inversions are averaged away.
4. :func:`map_dataset` -- least-squares linear mapping of one test
   session's z-scores onto a reference session via common PVSs.
5. :func:`rescale` -- map each viewer's z-score range onto a common scale
   (by default the medians of viewers' extreme raw ratings).
6. :func:`aggregate_mos` -- per-PVS means with Student-t confidence
   intervals, retaining the contributing scores for ANOVA.

Every removal or adjustment is logged in a report structure so a batch run
can be audited action by action.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

from scipy import stats as scipy_stats

from .errors import DataError, DomainError
from .model import qs_from_qp
from .validation import check_finite

__all__ = [
    "StarLabel",
    "RatingRecord",
    "ZScoreRecord",
    "ScaledRecord",
    "LinearMap",
    "RescaleConfig",
    "MosCell",
    "MosTable",
    "PipelineConfig",
    "zscore",
    "screen_bt500",
    "screen_ratio_average",
    "map_dataset",
    "apply_linear_map",
    "rescale",
    "aggregate_mos",
    "process_ratings",
]


class StarLabel(NamedTuple):
    """One operating point as carried in data files: frame size, rate, QP."""

    width: int
    height: int
    fps: float
    qp: float

    @property
    def s(self) -> float:
        """Spatial resolution in pixels per frame."""
        return float(self.width * self.height)

    @property
    def t(self) -> float:
        return float(self.fps)

    @property
    def q(self) -> float:
        """Linear quantization stepsize derived from the QP."""
        return qs_from_qp(self.qp)


@dataclass(frozen=True)
class RatingRecord:
    viewer_id: str
    test_id: str
    sequence_id: str
    star: StarLabel
    raw_score: float


@dataclass(frozen=True)
class ZScoreRecord:
    viewer_id: str
    test_id: str
    sequence_id: str
    star: StarLabel
    raw_score: float
    z: float


@dataclass(frozen=True)
class ScaledRecord:
    viewer_id: str
    test_id: str
    sequence_id: str
    star: StarLabel
    scaled: float


@dataclass(frozen=True)
class LinearMap:
    """Order-preserving affine map between two tests' z-score scales."""

    gain: float
    offset: float

    def __post_init__(self):
        check_finite("offset", self.offset)
        if not (self.gain > 0.0 and math.isfinite(self.gain)):
            raise DomainError(f"gain must be > 0, got {self.gain!r}")

    def __call__(self, z: float) -> float:
        return self.gain * z + self.offset


@dataclass(frozen=True)
class RescaleConfig:
    """Target range for per-viewer rescaling of z-scores."""

    target_min: float = 1.0
    target_max: float = 10.0

    def __post_init__(self):
        check_finite("target_min", self.target_min)
        check_finite("target_max", self.target_max)
        if not self.target_max > self.target_min:
            raise DomainError("target_max must exceed target_min")

    @classmethod
    def from_records(cls, records: Iterable[RatingRecord]) -> "RescaleConfig":
        """Targets from the medians of viewers' minimum and maximum ratings."""
        per_viewer: dict[tuple[str, str], list[float]] = {}
        for rec in records:
            per_viewer.setdefault((rec.test_id, rec.viewer_id), []).append(rec.raw_score)
        if not per_viewer:
            raise DataError("no records to derive rescale targets from")
        mins = [min(v) for v in per_viewer.values()]
        maxs = [max(v) for v in per_viewer.values()]
        return cls(statistics.median(mins), statistics.median(maxs))


@dataclass(frozen=True)
class MosCell:
    mos: float
    n: int
    ci_halfwidth: float | None
    scores: tuple[float, ...]


@dataclass(frozen=True)
class MosTable:
    """Aggregated per-PVS scores keyed by ``(sequence_id, StarLabel)``."""

    cells: dict[tuple[str, StarLabel], MosCell]

    def sequences(self) -> list[str]:
        return sorted({seq for seq, _ in self.cells})

    def labels_for(self, sequence_id: str) -> dict[StarLabel, MosCell]:
        return {
            label: cell for (seq, label), cell in self.cells.items() if seq == sequence_id
        }

    def cells_for(self, sequence_id: str) -> dict[tuple[float, float, float], float]:
        """``(s, t, q) -> MOS`` mapping for the fitting layer."""
        out = {
            (label.s, label.t, label.q): cell.mos
            for (seq, label), cell in self.cells.items()
            if seq == sequence_id
        }
        if not out:
            raise DataError(f"no MOS cells for sequence {sequence_id!r}")
        return out


# ---------------------------------------------------------------------------
# Stage 1: z-scoring
# ---------------------------------------------------------------------------


def zscore(
    records: Iterable[RatingRecord], ddof: int = 1
) -> tuple[list[ZScoreRecord], list[dict]]:
    """Standardize every viewer's ratings by their own mean and std.

    Viewers are identified per test session. Viewers with fewer than two
    ratings or zero spread cannot be standardized; their records are
    excluded and reported.
    """
    groups: dict[tuple[str, str], list[RatingRecord]] = {}
    for rec in records:
        groups.setdefault((rec.test_id, rec.viewer_id), []).append(rec)
    out: list[ZScoreRecord] = []
    exclusions: list[dict] = []
    for key in sorted(groups):
        recs = groups[key]
        values = [r.raw_score for r in recs]
        if len(values) < 2:
            exclusions.append(
                {"test_id": key[0], "viewer_id": key[1], "reason": "fewer than 2 ratings"}
            )
            continue
        mean = statistics.fmean(values)
        sd = statistics.stdev(values) if ddof == 1 else statistics.pstdev(values)
        if sd == 0.0:
            exclusions.append(
                {"test_id": key[0], "viewer_id": key[1], "reason": "zero rating spread"}
            )
            continue
        for r in recs:
            out.append(
                ZScoreRecord(
                    r.viewer_id, r.test_id, r.sequence_id, r.star, r.raw_score,
                    (r.raw_score - mean) / sd,
                )
            )
    return out, exclusions


# ---------------------------------------------------------------------------
# Stage 2: BT.500-style observer screening (z-score domain)
# ---------------------------------------------------------------------------


def _kurtosis_moment(values: Sequence[float]) -> float:
    """Moment kurtosis m4 / m2^2 (biased moments, no excess)."""
    n = len(values)
    mean = sum(values) / n
    m2 = sum((v - mean) ** 2 for v in values) / n
    m4 = sum((v - mean) ** 4 for v in values) / n
    return m4 / (m2 * m2)


def screen_bt500(
    records: Iterable[ZScoreRecord],
    mode: str = "per_pvs",
    min_viewers: int = 3,
    fraction_threshold: float = 0.05,
    asymmetry_threshold: float = 0.3,
) -> tuple[list[ZScoreRecord], dict]:
    """Observer screening with kurtosis-dependent outlier bounds.

    Per PVS distribution (within a test), scores outside
    ``mean +/- k * std`` are tallied against their viewer, with ``k = 2``
    for near-normal distributions (moment kurtosis in [2, 4]) and
    ``k = sqrt(20)`` otherwise. A viewer is flagged when the tallies
    satisfy ``(P+Q)/N > fraction_threshold`` and
    ``|P-Q|/(P+Q) < asymmetry_threshold``.

    ``mode="per_pvs"`` removes only a flagged viewer's out-of-bounds
    ratings; ``mode="global"`` removes all of a flagged viewer's ratings
    in that test.
    """
    if mode not in ("per_pvs", "global"):
        raise DomainError(f"unknown BT.500 mode {mode!r}")
    records = list(records)
    by_pvs: dict[tuple[str, str, StarLabel], list[ZScoreRecord]] = {}
    for rec in records:
        by_pvs.setdefault((rec.test_id, rec.sequence_id, rec.star), []).append(rec)

    ratings_per_viewer: dict[tuple[str, str], int] = {}
    for rec in records:
        key = (rec.test_id, rec.viewer_id)
        ratings_per_viewer[key] = ratings_per_viewer.get(key, 0) + 1

    p_count: dict[tuple[str, str], int] = {}
    q_count: dict[tuple[str, str], int] = {}
    outliers: dict[tuple[str, str], list[ZScoreRecord]] = {}
    skipped = 0
    screened = 0
    for pvs_key in sorted(by_pvs):
        recs = by_pvs[pvs_key]
        if len(recs) < min_viewers:
            skipped += 1
            continue
        screened += 1
        zs = [r.z for r in recs]
        mean = statistics.fmean(zs)
        sd = statistics.stdev(zs)
        if sd == 0.0:
            continue
        factor = 2.0 if 2.0 <= _kurtosis_moment(zs) <= 4.0 else math.sqrt(20.0)
        hi = mean + factor * sd
        lo = mean - factor * sd
        for r in recs:
            viewer = (r.test_id, r.viewer_id)
            if r.z > hi:
                p_count[viewer] = p_count.get(viewer, 0) + 1
                outliers.setdefault(viewer, []).append(r)
            elif r.z < lo:
                q_count[viewer] = q_count.get(viewer, 0) + 1
                outliers.setdefault(viewer, []).append(r)

    flagged: list[dict] = []
    flagged_keys: set[tuple[str, str]] = set()
    for viewer in sorted(set(p_count) | set(q_count)):
        p = p_count.get(viewer, 0)
        q = q_count.get(viewer, 0)
        n = ratings_per_viewer[viewer]
        if (p + q) / n > fraction_threshold and abs(p - q) / (p + q) < asymmetry_threshold:
            flagged_keys.add(viewer)
            flagged.append(
                {"test_id": viewer[0], "viewer_id": viewer[1], "p": p, "q": q, "n": n}
            )

    if mode == "global":
        survivors = [
            r for r in records if (r.test_id, r.viewer_id) not in flagged_keys
        ]
    else:
        drop = {
            id(r)
            for viewer in flagged_keys
            for r in outliers.get(viewer, [])
        }
        survivors = [r for r in records if id(r) not in drop]
    report = {
        "mode": mode,
        "screened_distributions": screened,
        "skipped_distributions": skipped,
        "flagged_viewers": flagged,
        "removed_ratings": len(records) - len(survivors),
    }
    if screened == 0 and skipped > 0:
        report["warning"] = (
            f"all {skipped} distributions have fewer than {min_viewers} viewers; "
            "screening was a no-op"
        )
    return survivors, report


# ---------------------------------------------------------------------------
# Stage 3: ratio/averaging consistency screening (raw-score domain)
# ---------------------------------------------------------------------------


def _adjacent_pairs(
    labels: Iterable[StarLabel],
) -> dict[str, list[tuple[StarLabel, StarLabel]]]:
    """Adjacent (lower-resolution, higher-resolution) pairs per sweep.

    Adjacency is between neighboring values in the sorted grid of the
    supplied labels. For the QP sweep the lower-resolution member is the
    one with the *higher* QP.
    """
    labels = set(labels)
    sizes = sorted({(l.width, l.height) for l in labels}, key=lambda wh: wh[0] * wh[1])
    fpss = sorted({l.fps for l in labels})
    qps = sorted({l.qp for l in labels})
    pairs: dict[str, list[tuple[StarLabel, StarLabel]]] = {"sr": [], "tr": [], "qp": []}
    for fps in fpss:
        for qp in qps:
            for lo_wh, hi_wh in zip(sizes, sizes[1:]):
                pairs["sr"].append(
                    (StarLabel(*lo_wh, fps, qp), StarLabel(*hi_wh, fps, qp))
                )
    for wh in sizes:
        for qp in qps:
            for lo_fps, hi_fps in zip(fpss, fpss[1:]):
                pairs["tr"].append(
                    (StarLabel(*wh, lo_fps, qp), StarLabel(*wh, hi_fps, qp))
                )
    for wh in sizes:
        for fps in fpss:
            for lo_qp, hi_qp in zip(qps, qps[1:]):
                # higher QP = lower amplitude resolution
                pairs["qp"].append(
                    (StarLabel(*wh, fps, hi_qp), StarLabel(*wh, fps, lo_qp))
                )
    return pairs


def screen_ratio_average(
    records: Iterable[RatingRecord],
    threshold: float = 1.1,
    max_outliers: int = 2,
) -> tuple[list[RatingRecord], dict]:
    """Consistency screening over adjacent operating-point pairs.

    For each viewer and source, the rating of the lower-resolution member
    of an adjacent pair should not exceed the higher-resolution one. A
    ratio above ``threshold`` increments that viewer's outlier counter for
    the source; a ratio in ``(1, threshold]`` replaces both ratings by
    their average. Sweeps run over spatial, then temporal, then QP pairs;
    averaged values feed later sweeps. Once all sweeps finish, viewers
    whose counter exceeds ``max_outliers`` lose all their ratings for that
    source.
    """
    records = list(records)
    grid_labels: dict[tuple[str, str], set[StarLabel]] = {}
    blocks: dict[tuple[str, str, str], dict[StarLabel, float]] = {}
    for rec in records:
        grid_labels.setdefault((rec.test_id, rec.sequence_id), set()).add(rec.star)
        block = blocks.setdefault((rec.test_id, rec.viewer_id, rec.sequence_id), {})
        if rec.star in block:
            raise DataError(
                f"duplicate rating by viewer {rec.viewer_id!r} for "
                f"{rec.sequence_id!r} at {tuple(rec.star)}"
            )
        block[rec.star] = rec.raw_score

    counters: dict[tuple[str, str, str], int] = {}
    averaged: list[dict] = []
    outlier_pairs: list[dict] = []
    for sweep in ("sr", "tr", "qp"):
        for block_key in sorted(blocks):
            test_id, viewer_id, sequence_id = block_key
            block = blocks[block_key]
            pairs = _adjacent_pairs(grid_labels[(test_id, sequence_id)])[sweep]
            for lo_label, hi_label in pairs:
                if lo_label not in block or hi_label not in block:
                    continue
                r_lo = block[lo_label]
                r_hi = block[hi_label]
                ratio = r_lo / r_hi
                entry = {
                    "test_id": test_id,
                    "viewer_id": viewer_id,
                    "sequence_id": sequence_id,
                    "sweep": sweep,
                    "lower": tuple(lo_label),
                    "higher": tuple(hi_label),
                    "ratio": ratio,
                }
                if ratio > threshold:
                    counters[block_key] = counters.get(block_key, 0) + 1
                    outlier_pairs.append(entry)
                elif ratio > 1.0:
                    avg = (r_lo + r_hi) / 2.0
                    block[lo_label] = avg
                    block[hi_label] = avg
                    averaged.append({**entry, "average": avg})

    removals = [
        {
            "test_id": key[0],
            "viewer_id": key[1],
            "sequence_id": key[2],
            "outlier_pairs": count,
        }
        for key, count in sorted(counters.items())
        if count > max_outliers
    ]
    removed_keys = {(r["test_id"], r["viewer_id"], r["sequence_id"]) for r in removals}

    survivors = [
        RatingRecord(viewer_id, test_id, sequence_id, star, score)
        for (test_id, viewer_id, sequence_id), block in sorted(blocks.items())
        if (test_id, viewer_id, sequence_id) not in removed_keys
        for star, score in sorted(block.items())
    ]
    report = {
        "threshold": threshold,
        "max_outliers": max_outliers,
        "averaged_pairs": averaged,
        "outlier_pairs": outlier_pairs,
        "removals": removals,
    }
    return survivors, report


# ---------------------------------------------------------------------------
# Stage 4: cross-test linear mapping
# ---------------------------------------------------------------------------


def _pvs_means(records: Iterable[ZScoreRecord]) -> dict[tuple[str, StarLabel], float]:
    sums: dict[tuple[str, StarLabel], list[float]] = {}
    for rec in records:
        sums.setdefault((rec.sequence_id, rec.star), []).append(rec.z)
    return {k: statistics.fmean(v) for k, v in sums.items()}


def _ols_map(pairs: Sequence[tuple[float, float]]) -> LinearMap:
    if len(pairs) < 2:
        raise DataError(
            f"cross-test mapping needs at least 2 common PVSs, got {len(pairs)}"
        )
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    mx = statistics.fmean(xs)
    my = statistics.fmean(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0.0:
        raise DataError("cross-test mapping undefined: source PVS means are constant")
    gain = sum((x - mx) * (y - my) for x, y in pairs) / sxx
    if gain <= 0.0:
        raise DataError(f"cross-test mapping is order-violating (gain={gain:g})")
    return LinearMap(gain=gain, offset=my - gain * mx)


def map_dataset(
    src: Iterable[ZScoreRecord],
    tgt: Iterable[ZScoreRecord],
    per_sequence: bool = False,
) -> LinearMap | dict[str, LinearMap]:
    """Least-squares map of source-test z-scores onto the target test.

    Ordinary least squares of target per-PVS mean z on source per-PVS mean
    z over the PVSs present in both tests; either one global map or one
    per source video.
    """
    src_means = _pvs_means(src)
    tgt_means = _pvs_means(tgt)
    common = sorted(set(src_means) & set(tgt_means))
    if not per_sequence:
        return _ols_map([(src_means[k], tgt_means[k]) for k in common])
    by_seq: dict[str, list[tuple[float, float]]] = {}
    for key in common:
        by_seq.setdefault(key[0], []).append((src_means[key], tgt_means[key]))
    return {seq: _ols_map(pairs) for seq, pairs in sorted(by_seq.items())}


def apply_linear_map(
    records: Iterable[ZScoreRecord], mapping: LinearMap | Mapping[str, LinearMap]
) -> list[ZScoreRecord]:
    out = []
    for rec in records:
        if isinstance(mapping, LinearMap):
            m = mapping
        else:
            if rec.sequence_id not in mapping:
                raise DataError(
                    f"no linear map for sequence {rec.sequence_id!r}"
                )
            m = mapping[rec.sequence_id]
        out.append(replace(rec, z=m(rec.z)))
    return out


# ---------------------------------------------------------------------------
# Stage 5: rescaling to the common score range
# ---------------------------------------------------------------------------


def rescale(
    records: Iterable[ZScoreRecord], cfg: RescaleConfig = RescaleConfig()
) -> tuple[list[ScaledRecord], list[dict]]:
    """Map each viewer's z-score range onto ``[target_min, target_max]``.

    Every surviving viewer's outputs span the target range exactly; viewers
    with a degenerate z range are excluded and reported.
    """
    groups: dict[tuple[str, str], list[ZScoreRecord]] = {}
    for rec in records:
        groups.setdefault((rec.test_id, rec.viewer_id), []).append(rec)
    span = cfg.target_max - cfg.target_min
    out: list[ScaledRecord] = []
    exclusions: list[dict] = []
    for key in sorted(groups):
        recs = groups[key]
        z_min = min(r.z for r in recs)
        z_max = max(r.z for r in recs)
        if z_max <= z_min:
            exclusions.append(
                {"test_id": key[0], "viewer_id": key[1], "reason": "degenerate z range"}
            )
            continue
        for r in recs:
            scaled = span * (r.z - z_min) / (z_max - z_min) + cfg.target_min
            out.append(ScaledRecord(r.viewer_id, r.test_id, r.sequence_id, r.star, scaled))
    return out, exclusions


# ---------------------------------------------------------------------------
# Stage 6: aggregation
# ---------------------------------------------------------------------------


def aggregate_mos(
    records: Iterable[ScaledRecord], ci_method: str = "t"
) -> MosTable:
    """Per-PVS mean of the scaled scores with a 95% confidence half-width.

    ``ci_method="t"`` uses the Student-t quantile at the cell's degrees of
    freedom; ``"normal"`` uses the fixed 1.96-sigma factor. Cells with a
    single score carry no interval. Contributing scores are retained per
    cell (in deterministic viewer order) for downstream ANOVA.
    """
    if ci_method not in ("t", "normal"):
        raise DomainError(f"unknown ci_method {ci_method!r}")
    groups: dict[tuple[str, StarLabel], list[tuple[str, str, float]]] = {}
    for rec in records:
        groups.setdefault((rec.sequence_id, rec.star), []).append(
            (rec.test_id, rec.viewer_id, rec.scaled)
        )
    cells: dict[tuple[str, StarLabel], MosCell] = {}
    for key in sorted(groups):
        entries = sorted(groups[key])
        scores = tuple(e[2] for e in entries)
        n = len(scores)
        mos = statistics.fmean(scores)
        if n >= 2:
            sd = statistics.stdev(scores)
            factor = (
                float(scipy_stats.t.ppf(0.975, n - 1))
                if ci_method == "t"
                else float(scipy_stats.norm.ppf(0.975))
            )
            ci = factor * sd / math.sqrt(n)
        else:
            ci = None
        cells[key] = MosCell(mos=mos, n=n, ci_halfwidth=ci, scores=scores)
    return MosTable(cells=cells)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the full ratings-to-MOS pipeline."""

    scale_min: float = 1.0
    scale_max: float = 10.0
    zscore_ddof: int = 1
    bt500_enabled: bool = True
    bt500_mode: str = "per_pvs"
    bt500_min_viewers: int = 3
    bt500_fraction_threshold: float = 0.05
    bt500_asymmetry_threshold: float = 0.3
    ratio_enabled: bool = True
    ratio_threshold: float = 1.1
    ratio_max_outliers: int = 2
    mapping_enabled: bool = True
    reference_test: str | None = None
    map_per_sequence: bool = False
    rescale_target_min: float | None = None
    rescale_target_max: float | None = None
    ci_method: str = "t"

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "PipelineConfig":
        """Build from a flat config mapping; keys may carry a ``pipeline.`` prefix."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            name = key.removeprefix("pipeline.")
            if name not in known:
                raise DataError(f"unknown pipeline config key {key!r}")
            kwargs[name] = value
        return cls(**kwargs)


def process_ratings(
    records: Iterable[RatingRecord], config: PipelineConfig = PipelineConfig()
) -> tuple[MosTable, dict]:
    """Run the full pipeline and collect a per-stage action report."""
    records = list(records)
    for rec in records:
        if not (config.scale_min <= rec.raw_score <= config.scale_max):
            raise DataError(
                f"raw score {rec.raw_score!r} by viewer {rec.viewer_id!r} outside "
                f"scale [{config.scale_min:g}, {config.scale_max:g}]"
            )
    report: dict = {}

    zrecs, excl = zscore(records, config.zscore_ddof)
    report["zscore_exclusions"] = excl

    if config.bt500_enabled:
        zrecs, bt_report = screen_bt500(
            zrecs,
            mode=config.bt500_mode,
            min_viewers=config.bt500_min_viewers,
            fraction_threshold=config.bt500_fraction_threshold,
            asymmetry_threshold=config.bt500_asymmetry_threshold,
        )
        report["bt500"] = bt_report

    raw_survivors = [
        RatingRecord(r.viewer_id, r.test_id, r.sequence_id, r.star, r.raw_score)
        for r in zrecs
    ]
    if config.ratio_enabled:
        raw_survivors, ratio_report = screen_ratio_average(
            raw_survivors, config.ratio_threshold, config.ratio_max_outliers
        )
        report["ratio_average"] = ratio_report

    # Ratio averaging edits raw scores, so standardization is redone on the
    # surviving, adjusted ratings.
    zrecs, excl2 = zscore(raw_survivors, config.zscore_ddof)
    report["zscore_exclusions_after_screening"] = excl2

    test_ids = sorted({r.test_id for r in zrecs})
    if config.mapping_enabled and len(test_ids) > 1:
        reference = config.reference_test
        if reference is None:
            counts = {tid: 0 for tid in test_ids}
            for r in zrecs:
                counts[r.test_id] += 1
            reference = max(test_ids, key=lambda tid: (counts[tid], tid))
        elif reference not in test_ids:
            raise DataError(f"reference test {reference!r} not present in data")
        mapped: list[ZScoreRecord] = [r for r in zrecs if r.test_id == reference]
        maps_report = {}
        tgt = [r for r in zrecs if r.test_id == reference]
        for tid in test_ids:
            if tid == reference:
                continue
            src = [r for r in zrecs if r.test_id == tid]
            mapping = map_dataset(src, tgt, per_sequence=config.map_per_sequence)
            mapped.extend(apply_linear_map(src, mapping))
            if isinstance(mapping, LinearMap):
                maps_report[tid] = {"gain": mapping.gain, "offset": mapping.offset}
            else:
                maps_report[tid] = {
                    seq: {"gain": m.gain, "offset": m.offset}
                    for seq, m in mapping.items()
                }
        zrecs = mapped
        report["mapping"] = {"reference_test": reference, "maps": maps_report}

    targets = (config.rescale_target_min, config.rescale_target_max)
    if all(v is not None for v in targets):
        rescale_cfg = RescaleConfig(*targets)
    elif any(v is not None for v in targets):
        raise DataError(
            "rescale_target_min and rescale_target_max must be set together"
        )
    else:
        rescale_cfg = RescaleConfig.from_records(raw_survivors)
    scaled, excl3 = rescale(zrecs, rescale_cfg)
    report["rescale"] = {
        "target_min": rescale_cfg.target_min,
        "target_max": rescale_cfg.target_max,
        "exclusions": excl3,
    }

    table = aggregate_mos(scaled, config.ci_method)
    report["cells"] = len(table.cells)
    return table, report
