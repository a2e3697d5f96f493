"""Keyword-search scoring: detection alignment, TWV curves and MTWV.

Detections are aligned to references once, at the no-threshold operating
point; the term-weighted value is then swept over every distinct detection
score. Only the ranking of scores matters, so any strictly monotone
rescoring of a detection list leaves MTWV unchanged.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from .errors import DataError

DEFAULT_BETA = 999.9
DEFAULT_TOLERANCE = 0.5


@dataclass(frozen=True)
class Reference:
    keyword: str
    tbeg: float
    dur: float

    @property
    def midpoint(self) -> float:
        return self.tbeg + self.dur / 2.0


@dataclass(frozen=True)
class Detection:
    keyword: str
    tbeg: float
    dur: float
    score: float

    @property
    def midpoint(self) -> float:
        return self.tbeg + self.dur / 2.0


@dataclass
class ReferenceSet:
    occurrences: list[Reference]
    total_duration: float

    def __post_init__(self):
        for r in self.occurrences:
            if r.dur <= 0:
                raise ValueError(f"reference {r.keyword} has non-positive duration")
            if r.tbeg + r.dur > self.total_duration + 1e-9:
                raise ValueError(f"reference {r.keyword} extends past the total duration")

    def keywords(self) -> list[str]:
        return sorted({r.keyword for r in self.occurrences})


@dataclass
class DetectionSet:
    detections: list[Detection]

    def __post_init__(self):
        for d in self.detections:
            if d.dur <= 0:
                raise ValueError(f"detection {d.keyword} has non-positive duration")
            if not math.isfinite(d.score):
                raise ValueError(f"detection {d.keyword} has a non-finite score")

    def rescored(self, transform) -> "DetectionSet":
        return DetectionSet([Detection(d.keyword, d.tbeg, d.dur, transform(d))
                             for d in self.detections])


@dataclass
class Alignment:
    hits: list[tuple[Detection, Reference]]
    false_alarms: list[Detection]
    misses: list[Reference]
    references: ReferenceSet


def align(dets: DetectionSet, refs: ReferenceSet, tol: float = DEFAULT_TOLERANCE) -> Alignment:
    """Greedy one-to-one matching per keyword.

    A detection is a hit when its temporal midpoint lies within `tol`
    seconds of an unmatched reference midpoint for the same keyword; pairs
    are taken smallest midpoint distance first, higher score breaking ties.
    """
    if tol <= 0:
        raise ValueError("alignment tolerance must be positive")
    by_kw_refs: dict[str, list[tuple[int, Reference]]] = {}
    for i, r in enumerate(refs.occurrences):
        by_kw_refs.setdefault(r.keyword, []).append((i, r))
    by_kw_dets: dict[str, list[tuple[int, Detection]]] = {}
    for i, d in enumerate(dets.detections):
        by_kw_dets.setdefault(d.keyword, []).append((i, d))

    hits: list[tuple[Detection, Reference]] = []
    false_alarms: list[Detection] = []
    matched_refs: set[int] = set()
    for kw in sorted(by_kw_dets):
        cand = []
        for di, d in by_kw_dets[kw]:
            for ri, r in by_kw_refs.get(kw, ()):
                dist = abs(d.midpoint - r.midpoint)
                if dist <= tol:
                    cand.append((dist, -d.score, di, ri))
        cand.sort()
        matched_dets: set[int] = set()
        for _dist, _negscore, di, ri in cand:
            if di in matched_dets or ri in matched_refs:
                continue
            matched_dets.add(di)
            matched_refs.add(ri)
            hits.append((dets.detections[di], refs.occurrences[ri]))
        for di, d in by_kw_dets[kw]:
            if di not in matched_dets:
                false_alarms.append(d)
    misses = [r for i, r in enumerate(refs.occurrences) if i not in matched_refs]
    return Alignment(hits, false_alarms, misses, refs)


@dataclass
class TwvResult:
    thresholds: list[float]
    twv: list[float]
    mtwv: float
    theta: float
    per_keyword: dict[str, tuple[float, float]] = field(default_factory=dict)
    recall: float = 0.0

    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.thresholds, self.twv))


def _twv_at(
    threshold: float,
    hit_scores: dict[str, list[float]],
    fa_scores: dict[str, list[float]],
    n_ref: dict[str, int],
    trials: dict[str, float],
    beta: float,
) -> tuple[float, dict[str, tuple[float, float]]]:
    per_kw: dict[str, tuple[float, float]] = {}
    cost = 0.0
    for kw, n in n_ref.items():
        n_hit = sum(1 for s in hit_scores.get(kw, ()) if s >= threshold)
        n_fa = sum(1 for s in fa_scores.get(kw, ()) if s >= threshold)
        p_miss = 1.0 - n_hit / n
        p_fa = n_fa / trials[kw] if trials[kw] > 0 else 0.0
        per_kw[kw] = (p_miss, p_fa)
        cost += p_miss + beta * p_fa
    return 1.0 - cost / len(n_ref), per_kw


def twv_curve(alignment: Alignment, beta: float = DEFAULT_BETA) -> TwvResult:
    """Sweep the term-weighted value over every distinct detection score.

    Keywords without reference occurrences are excluded from the average;
    the silent operating point (no detections kept, TWV = 0) is always a
    candidate for the maximum, so an empty detection set scores exactly 0.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    refs = alignment.references
    n_ref: dict[str, int] = {}
    ref_time: dict[str, float] = {}
    for r in refs.occurrences:
        n_ref[r.keyword] = n_ref.get(r.keyword, 0) + 1
        ref_time[r.keyword] = ref_time.get(r.keyword, 0.0) + r.dur
    if not n_ref:
        raise ValueError("reference set has no keyword occurrences")
    trials = {kw: refs.total_duration - ref_time[kw] for kw in n_ref}

    hit_scores: dict[str, list[float]] = {}
    for d, _r in alignment.hits:
        hit_scores.setdefault(d.keyword, []).append(d.score)
    fa_scores: dict[str, list[float]] = {}
    for d in alignment.false_alarms:
        fa_scores.setdefault(d.keyword, []).append(d.score)

    thresholds = sorted({d.score for d, _ in alignment.hits}
                        | {d.score for d in alignment.false_alarms})
    twv = []
    best = 0.0
    best_theta = float("inf")
    best_per_kw = {kw: (1.0, 0.0) for kw in n_ref}
    for theta in thresholds:
        value, per_kw = _twv_at(theta, hit_scores, fa_scores, n_ref, trials, beta)
        twv.append(value)
        # Strict improvement keeps the largest threshold among ties.
        if value > best:
            best = value
            best_theta = theta
            best_per_kw = per_kw
    total_refs = len(refs.occurrences)
    recall = len(alignment.hits) / total_refs if total_refs else 0.0
    return TwvResult(thresholds, twv, best, best_theta, best_per_kw, recall)


def evaluate(dets: DetectionSet, refs: ReferenceSet,
             beta: float = DEFAULT_BETA, tol: float = DEFAULT_TOLERANCE) -> TwvResult:
    return twv_curve(align(dets, refs, tol), beta)


def sweep_report(results: Sequence[tuple[str, TwvResult]]) -> str:
    """Tab-separated comparison table, one row per labeled configuration."""
    if not results:
        raise ValueError("nothing to report")
    lines = ["label\tmtwv\ttheta\trecall"]
    for label, r in results:
        theta = "inf" if r.theta == float("inf") else f"{r.theta:.6f}"
        lines.append(f"{label}\t{r.mtwv:.4f}\t{theta}\t{r.recall:.4f}")
    return "\n".join(lines) + "\n"


# -- file formats ------------------------------------------------------------


def read_detections(path: str) -> DetectionSet:
    """One detection per line: ``kwid tbeg dur score``."""
    dets = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 'kwid tbeg dur score'")
            try:
                dets.append(Detection(parts[0], float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    return DetectionSet(dets)


def write_detections(path: str, dets: DetectionSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in dets.detections:
            f.write(f"{d.keyword} {d.tbeg:.2f} {d.dur:.2f} {d.score:.6f}\n")


def read_references(path: str) -> ReferenceSet:
    """Header line ``duration T`` followed by ``kwid tbeg dur`` lines."""
    occurrences = []
    total = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if total is None:
                if len(parts) != 2 or parts[0] != "duration":
                    raise DataError(f"{path}:{lineno}: expected header 'duration <seconds>'")
                total = float(parts[1])
                continue
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 'kwid tbeg dur'")
            try:
                occurrences.append(Reference(parts[0], float(parts[1]), float(parts[2])))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    if total is None:
        raise DataError(f"{path}: missing duration header")
    return ReferenceSet(occurrences, total)


def write_references(path: str, refs: ReferenceSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"duration {refs.total_duration:.2f}\n")
        for r in refs.occurrences:
            f.write(f"{r.keyword} {r.tbeg:.2f} {r.dur:.2f}\n")
