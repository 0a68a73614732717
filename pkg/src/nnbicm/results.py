"""BER result CSVs, per-receiver curve files and dB-gap analysis."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from .pipelines import BerPoint

CSV_COLUMNS = ("gamma_e_db", "receiver", "ber", "fer", "frames", "ci_low", "ci_high", "mean_bp_iters", "seed")


class ResultsFormatError(ValueError):
    pass


def point_row(p: BerPoint) -> list[str]:
    lo, hi = p.ci
    vals = (p.gamma_e_db, p.receiver, p.ber, p.fer, p.frames, lo, hi, p.mean_bp_iters, p.seed)
    return [repr(v) if isinstance(v, float) else str(v) for v in vals]


def append_rows(path, points) -> None:
    """Append result rows; the header is written only when the file is new or empty."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    if not fresh:
        with open(path, newline="") as fh:
            head = next(csv.reader(fh), None)
        if tuple(head or ()) != CSV_COLUMNS:
            raise ResultsFormatError(f"{path}: existing header {head} does not match {list(CSV_COLUMNS)}")
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow(point_row(p))


@dataclass(frozen=True)
class CurvePoint:
    gamma_e_db: float
    ber: float
    ci_low: float
    ci_high: float
    frames: int


def read_results(paths) -> dict[str, list[CurvePoint]]:
    """Read one or more result CSVs into per-receiver curves sorted by Eb/N0.

    Rows repeating a (receiver, Eb/N0) pair replace earlier ones, so
    appended re-runs do not produce duplicate points.
    """
    curves: dict[str, dict[float, CurvePoint]] = {}
    for path in paths:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_COLUMNS:
            raise ResultsFormatError(f"{path}: missing or unexpected header")
        for lineno, row in enumerate(rows[1:], start=2):
            if tuple(row) == CSV_COLUMNS:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise ResultsFormatError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            rec = dict(zip(CSV_COLUMNS, row))
            try:
                pt = CurvePoint(float(rec["gamma_e_db"]), float(rec["ber"]), float(rec["ci_low"]),
                                float(rec["ci_high"]), int(rec["frames"]))
            except ValueError as exc:
                raise ResultsFormatError(f"{path}:{lineno}: {exc}") from exc
            if not 0.0 <= pt.ber <= 1.0:
                raise ResultsFormatError(f"{path}:{lineno}: ber {pt.ber} outside [0, 1]")
            # a later row for the same receiver and Eb/N0 replaces the earlier one
            curves.setdefault(rec["receiver"], {})[pt.gamma_e_db] = pt
    return {r: [c[g] for g in sorted(c)] for r, c in curves.items()}


def write_curves(curves: dict, out_dir) -> list[Path]:
    """One whitespace-separated data file per receiver (gnuplot friendly)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r, pts in sorted(curves.items()):
        f = out / f"{r}.dat"
        lines = ["# gamma_e_db ber ci_low ci_high frames"]
        lines += [f"{p.gamma_e_db!r} {p.ber!r} {p.ci_low!r} {p.ci_high!r} {p.frames}" for p in pts]
        f.write_text("\n".join(lines) + "\n")
        written.append(f)
    return written


def crossing(points, target_ber: float) -> float | None:
    """Eb/N0 where the curve falls through ``target_ber``, interpolated in (dB, log10 ber).

    Zero-BER points are below the measurement resolution and are skipped.
    Returns None when the curve never reaches the target.
    """
    pts = [(p.gamma_e_db, p.ber) for p in points if p.ber > 0]
    lt = math.log10(target_ber)
    for (g0, b0), (g1, b1) in zip(pts, pts[1:]):
        l0, l1 = math.log10(b0), math.log10(b1)
        if l0 >= lt >= l1 and l0 != l1:
            return g0 + (lt - l0) * (g1 - g0) / (l1 - l0)
        if l0 == lt:
            return g0
    if pts and math.log10(pts[-1][1]) == lt:
        return pts[-1][0]
    return None


def crossing_label(points, target_ber: float) -> str:
    g = crossing(points, target_ber)
    if g is not None:
        return f"{g:.3f} dB"
    positive = [p.ber for p in points if p.ber > 0]
    if positive and min(positive) > target_ber:
        return "not reached"
    return "below target over the whole sweep"


def gap_report(curves: dict, target_ber: float) -> tuple[dict, dict]:
    """Crossing points per receiver and gaps (second minus first, dB) for every pair."""
    cross = {r: crossing(pts, target_ber) for r, pts in sorted(curves.items())}
    gaps = {}
    for a, b in combinations(sorted(curves), 2):
        ga, gb = cross[a], cross[b]
        gaps[(a, b)] = None if ga is None or gb is None else gb - ga
    return cross, gaps


def format_summary(curves: dict, target_ber: float | None = None) -> str:
    lines = [f"{'receiver':<10} {'gamma_e_db':>10} {'ber':>12} {'ci_low':>12} {'ci_high':>12} {'frames':>7}"]
    for r, pts in sorted(curves.items()):
        for p in pts:
            lines.append(f"{r:<10} {p.gamma_e_db:>10.3f} {p.ber:>12.4e} {p.ci_low:>12.4e} {p.ci_high:>12.4e} {p.frames:>7d}")
    if target_ber is not None and len(curves) >= 2:
        cross, gaps = gap_report(curves, target_ber)
        lines.append("")
        lines.append(f"dB gap at BER {target_ber:g}")
        for r in cross:
            lines.append(f"  {r:<10} {crossing_label(curves[r], target_ber)}")
        for (a, b), d in gaps.items():
            lines.append(f"  {b} - {a}: {'n/a' if d is None else f'{d:+.3f} dB'}")
    return "\n".join(lines)


def monotone_nonincreasing(points, ci_slack: bool = True) -> bool:
    """True when BER never rises along the curve; with ``ci_slack`` a rise only counts if the CIs separate."""
    for p0, p1 in zip(points, points[1:]):
        if p1.ber > p0.ber and (not ci_slack or p1.ci_low > p0.ci_high):
            return False
    return True
