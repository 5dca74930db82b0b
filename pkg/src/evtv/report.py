"""Cohort CSV ingestion, JSON report emission, and trade-off curve output
as CSV or a self-contained SVG.

All writers are pure functions returning text, deterministic down to the
byte for identical inputs.  JSON numbers rely on Python's shortest
round-trip float formatting, so documents parse back to exactly the
values that were written; two-decimal display is left to consumers.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from typing import IO, Iterable, Literal, Optional, Sequence, Union

from . import __version__
from .estimation import CohortRecord, MsmResult
from .evalue import (
    EffectEstimate,
    EValueReport,
    NormalizedEstimate,
    TradeoffPoint,
    equal_split_evalue,
    evalue_from_rr,
)

__all__ = [
    "CurveDocument",
    "MissingColumn",
    "NonBinaryValue",
    "EmptyFile",
    "read_cohort_csv",
    "write_cohort_csv",
    "write_report_json",
    "write_curve",
    "curve_document",
    "write_experiment_json",
    "write_analysis_json",
    "write_replication_json",
]

COHORT_COLUMNS = ("l0", "a0", "l1", "a1", "y")

CurveFormat = Literal["csv", "svg"]
TargetLabel = Literal["point_estimate", "ci_limit"]


class MissingColumn(ValueError):
    """The cohort CSV header lacks one or more required columns."""


class NonBinaryValue(ValueError):
    """A cohort CSV cell holds something other than 0 or 1."""


class EmptyFile(ValueError):
    """The cohort CSV has no header or no data rows."""


@dataclass(frozen=True)
class CurveDocument:
    """A trade-off curve ready for rendering.

    target_label records whether the curve explains away the point
    estimate or a confidence limit.  axis_max is the single-timepoint
    E-value of the target, the natural plotting bound for both axes.
    """

    target_rr: float
    target_label: TargetLabel
    points: tuple[TradeoffPoint, ...]
    axis_max: float

    def __post_init__(self) -> None:
        if self.target_label not in ("point_estimate", "ci_limit"):
            raise ValueError(f"unknown target_label {self.target_label!r}")
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("curve document needs at least one point")
        for a, b in zip(pts, pts[1:]):
            if b.strength_t0 < a.strength_t0:
                raise ValueError("curve points must be sorted by strength_t0")
        first, last = pts[0], pts[-1]
        if first.strength_t0 != 1.0 or last.strength_t1 != 1.0:
            raise ValueError("curve endpoints must attribute everything to one time point")
        if abs(first.strength_t1 - self.axis_max) > 1e-9 * self.axis_max or abs(
            last.strength_t0 - self.axis_max
        ) > 1e-9 * self.axis_max:
            raise ValueError("curve endpoints disagree with axis_max")


def curve_document(
    target_rr: float,
    points: Iterable[TradeoffPoint],
    target_label: TargetLabel = "point_estimate",
) -> CurveDocument:
    """Assemble a CurveDocument, collapsing consecutive duplicate points
    (a null target degenerates to the single point (1, 1))."""
    deduped: list[TradeoffPoint] = []
    for p in points:
        if not deduped or p != deduped[-1]:
            deduped.append(p)
    return CurveDocument(
        target_rr=float(target_rr),
        target_label=target_label,
        points=tuple(deduped),
        axis_max=evalue_from_rr(target_rr),
    )


def _open_source(source: Union[str, IO[str]]) -> tuple[IO[str], bool]:
    if hasattr(source, "read"):
        return source, False
    return open(source, "r", encoding="utf-8-sig", newline=""), True


def read_cohort_csv(source: Union[str, IO[str]]) -> list[CohortRecord]:
    """Parse a cohort CSV into records, preserving file order.

    The header must contain l0, a0, l1, a1, y (case-insensitive, any
    order); extra columns are ignored with a warning.  Cells must be the
    integers 0 or 1.  Row numbers in errors count the header as row 1.
    """
    stream, owned = _open_source(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile("cohort CSV has no header row") from None
        # a byte order mark survives stream inputs decoded as plain utf-8
        names = [h.lstrip("\ufeff").strip().lower() for h in header]
        missing = [c for c in COHORT_COLUMNS if c not in names]
        if missing:
            raise MissingColumn(f"cohort CSV is missing columns: {', '.join(missing)}")
        extra = [h for h in names if h not in COHORT_COLUMNS]
        if extra:
            warnings.warn(
                f"ignoring extra cohort CSV columns: {', '.join(extra)}",
                UserWarning,
                stacklevel=2,
            )
        positions = [names.index(c) for c in COHORT_COLUMNS]
        records: list[CohortRecord] = []
        for rownum, row in enumerate(reader, start=2):
            if len(row) < len(names):
                raise ValueError(
                    f"row {rownum}: expected {len(names)} cells, got {len(row)}"
                )
            values = []
            for col, pos in zip(COHORT_COLUMNS, positions):
                cell = row[pos].strip()
                if cell not in ("0", "1"):
                    raise NonBinaryValue(
                        f"row {rownum}, column {col}: {cell!r} is not 0 or 1"
                    )
                values.append(int(cell))
            records.append(CohortRecord(*values))
        if not records:
            raise EmptyFile("cohort CSV has no data rows")
        return records
    finally:
        if owned:
            stream.close()


def write_cohort_csv(records: Sequence[CohortRecord]) -> str:
    """Serialize records to CSV text; inverse of read_cohort_csv."""
    out = io.StringIO()
    out.write(",".join(COHORT_COLUMNS) + "\n")
    for r in records:
        out.write(f"{r.l0},{r.a0},{r.l1},{r.a1},{r.y}\n")
    return out.getvalue()


def _report_payload(
    estimate: EffectEstimate,
    normalized: NormalizedEstimate,
    report: EValueReport,
) -> dict:
    inp: dict = {"measure": estimate.measure.value, "value": estimate.value}
    if estimate.has_ci:
        inp["ci_lower"] = estimate.ci_lower
        inp["ci_upper"] = estimate.ci_upper
    inp["outcome_rare"] = estimate.outcome_rare
    doc: dict = {
        "input": inp,
        "timepoints": report.timepoints,
        "normalized_rr": normalized.rr,
        "inverted": normalized.inverted,
        "evalue_equal_split": report.evalue_equal_split,
        "evalue_single": report.evalue_single_timepoint,
    }
    if report.ci_evalue_equal_split is not None:
        doc["ci_evalue_equal_split"] = report.ci_evalue_equal_split
    if report.ci_evalue_single_timepoint is not None:
        doc["ci_evalue_single"] = report.ci_evalue_single_timepoint
    doc["tool_version"] = __version__
    if report.curve is not None:
        doc["curve"] = [_point_payload(p) for p in report.curve]
    return doc


def _point_payload(p: TradeoffPoint) -> dict:
    return {
        "strength_t0": p.strength_t0,
        "strength_t1": p.strength_t1,
        "b0": p.b0,
        "b1": p.b1,
    }


def write_report_json(
    estimate: EffectEstimate,
    normalized: NormalizedEstimate,
    report: EValueReport,
) -> str:
    """Emit the E-value report as stable-key-order JSON.

    Absent confidence-any keys are omitted entirely, never written as
    null, so presence encodes availability.
    """
    return json.dumps(_report_payload(estimate, normalized, report), indent=2) + "\n"


def _msm_payload(msm: MsmResult) -> dict:
    doc = {
        "rr_obs": msm.rr_obs,
        "p11": msm.p11,
        "p00": msm.p00,
        "weight_mean": msm.weight_mean,
        "weight_max": msm.weight_max,
    }
    if msm.ci_lower is not None:
        doc["ci_lower"] = msm.ci_lower
        doc["ci_upper"] = msm.ci_upper
    return doc


def _params_payload(p) -> dict:
    return {
        "p_u0": p.p_u0,
        "p_l0": p.p_l0,
        "p_u1": p.p_u1,
        "a0_model": list(p.a0_model),
        "l1_model": list(p.l1_model),
        "a1_model": list(p.a1_model),
        "outcome_model": list(p.outcome_model),
        "n": p.n,
    }


def write_experiment_json(record) -> str:
    """Serialize one simulation experiment, including both enumeration
    conventions so the L1 convention gap stays visible."""
    doc = {
        "params": _params_payload(record.params),
        "seed": record.seed,
        "true_rr_mc": record.true_rr_mc,
        "true_rr_enumerated": record.true_rr_enumerated,
        "true_rr_enumerated_observed_l1": record.true_rr_enumerated_observed_l1,
        "estimate": _msm_payload(record.msm),
        "report": _report_payload(record.estimate, record.normalized, record.report),
    }
    return json.dumps(doc, indent=2) + "\n"


def write_analysis_json(
    msm: MsmResult,
    estimate: EffectEstimate,
    normalized: NormalizedEstimate,
    report: EValueReport,
) -> str:
    """Serialize an observed-data analysis: the MSM fit plus its E-value report."""
    doc = {
        "estimate": _msm_payload(msm),
        "report": _report_payload(estimate, normalized, report),
    }
    return json.dumps(doc, indent=2) + "\n"


def write_replication_json(params, seed: int, results, enumerated: dict) -> str:
    """Serialize a replication study: per-replication numbers plus summaries."""
    reps = []
    for r in results:
        entry: dict = {"seed": r.seed}
        if r.true_rr_mc is not None:
            entry["true_rr_mc"] = r.true_rr_mc
        if r.error is None:
            entry["rr_obs"] = r.rr_obs
            if r.ci_lower is not None:
                entry["ci_lower"] = r.ci_lower
                entry["ci_upper"] = r.ci_upper
            entry["weight_mean"] = r.weight_mean
        else:
            entry["error"] = r.error
        reps.append(entry)
    ok = [r for r in results if r.error is None]
    rr_true = [r.true_rr_mc for r in results if r.true_rr_mc is not None]
    rr_obs = [r.rr_obs for r in ok]
    summary = {
        "replications": len(results),
        "failures": len(results) - len(ok),
        "true_rr_mc_mean": _mean(rr_true),
        "true_rr_mc_sd": _sd(rr_true),
        "rr_obs_mean": _mean(rr_obs),
        "rr_obs_sd": _sd(rr_obs),
    }
    doc = {
        "params": _params_payload(params),
        "seed": seed,
        "summary": summary,
        "enumerated": enumerated,
        "replications_detail": reps,
    }
    return json.dumps(doc, indent=2) + "\n"


def _mean(values) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _sd(values) -> Optional[float]:
    if len(values) < 2:
        return None
    m = _mean(values)
    return (sum((v - m) ** 2 for v in values) / (len(values) - 1)) ** 0.5


def write_curve(doc: CurveDocument, format: CurveFormat = "csv") -> str:
    """Render a curve document as CSV rows or a self-contained SVG."""
    if format == "csv":
        return _curve_csv(doc)
    if format == "svg":
        return _curve_svg(doc)
    raise ValueError(f"format must be 'csv' or 'svg', got {format!r}")


def _curve_csv(doc: CurveDocument) -> str:
    lines = ["strength_t0,strength_t1,b0,b1"]
    for p in doc.points:
        lines.append(f"{p.strength_t0!r},{p.strength_t1!r},{p.b0!r},{p.b1!r}")
    return "\n".join(lines) + "\n"


# fixed geometry so identical documents render to identical bytes
_SVG_SIZE = 560
_SVG_MARGIN_LEFT = 72
_SVG_MARGIN_BOTTOM = 64
_SVG_MARGIN_TOP = 28
_SVG_MARGIN_RIGHT = 28


def _curve_svg(doc: CurveDocument) -> str:
    size = _SVG_SIZE
    x0, y0 = _SVG_MARGIN_LEFT, size - _SVG_MARGIN_BOTTOM
    x1, y1 = size - _SVG_MARGIN_RIGHT, _SVG_MARGIN_TOP
    span = max(doc.axis_max - 1.0, 1e-9)

    def px(v: float) -> float:
        return x0 + (v - 1.0) / span * (x1 - x0)

    def py(v: float) -> float:
        return y0 - (v - 1.0) / span * (y0 - y1)

    target_name = (
        "risk ratio" if doc.target_label == "point_estimate" else "CI limit"
    )
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" font-family="sans-serif">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="18" text-anchor="middle" font-size="14">'
        f"Unmeasured confounding needed to explain away {target_name} "
        f"{doc.target_rr:.2f}</text>",
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    ticks = 5
    for i in range(ticks + 1):
        v = 1.0 + span * i / ticks
        tx, ty = px(v), py(v)
        parts.append(
            f'<line x1="{tx:.2f}" y1="{y0}" x2="{tx:.2f}" y2="{y0 + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{tx:.2f}" y="{y0 + 20}" text-anchor="middle" font-size="11">'
            f"{v:.2f}</text>"
        )
        parts.append(
            f'<line x1="{x0 - 5}" y1="{ty:.2f}" x2="{x0}" y2="{ty:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{ty + 4:.2f}" text-anchor="end" font-size="11">'
            f"{v:.2f}</text>"
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{size - 16}" text-anchor="middle" '
        f'font-size="13">Joint confounder strength at time 0</text>'
    )
    parts.append(
        f'<text x="20" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2:.1f})">'
        f"Joint confounder strength at time 1</text>"
    )
    parts.append(
        f'<line x1="{px(1.0):.2f}" y1="{py(1.0):.2f}" x2="{px(doc.axis_max):.2f}" '
        f'y2="{py(doc.axis_max):.2f}" stroke="#999999" stroke-dasharray="4 3"/>'
    )
    if len(doc.points) > 1:
        coords = " ".join(
            f"{px(p.strength_t0):.2f},{py(p.strength_t1):.2f}" for p in doc.points
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="#1f6fb4" stroke-width="1.8"/>'
        )
    # the equal-split point, where the diagonal meets the curve
    eq = equal_split_evalue(doc.target_rr, 2)
    parts.append(
        f'<circle cx="{px(eq):.2f}" cy="{py(eq):.2f}" r="3.5" fill="#c23b22"/>'
    )
    parts.append(
        f'<text x="{px(eq) + 8:.2f}" y="{py(eq) - 8:.2f}" font-size="11" '
        f'fill="#c23b22">{eq:.2f}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
