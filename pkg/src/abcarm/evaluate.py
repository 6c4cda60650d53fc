"""Accuracy evaluation: backend suggestions vs. a human preference matrix.

For each stimulus image and degradation scenario, the harness degrades
the image, asks the backend for suggestions over the stimulus's offered
response gestures, and scores the first suggestion against the humans'
top-ranked response plus the top-3 overlap. Nine degradation scenarios
are built in; "normal" is the untouched baseline.

Preference CSV format: header row holds the response labels (first column
is the stimulus-label column); each row holds one stimulus's integer
score totals. A blank cell means that response was not offered for that
stimulus, which is how per-stimulus extra response options are encoded.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DecodeError, RangeError, SchemaError, UnknownStimulus
from .recommend import (
    RecommendationRequest,
    VisionBackend,
    request_recommendation,
)

LIKERT_MIN = 1
LIKERT_MAX = 5
DEFAULT_PARTICIPANTS = 14

RESPONSE_GESTURES = (
    "wave hand", "thumb up", "clap hands", "shake hand", "thumb down",
    "raise hand", "point finger", "fist bump", "high five", "hug", "OK", "pat",
)

SCENARIO_LABELS = (
    "underexposed", "normal", "overexposed",
    "high_motion_blur", "moderate_motion_blur", "low_motion_blur",
    "partial_subject", "partial_subject_off_focus", "interference",
)


@dataclass(frozen=True)
class DegradationSpec:
    """Deterministic image-corruption parameters.

    Pipeline order: crop -> linear motion blur (normalized 1-D box kernel
    of `blur_len` pixels at `blur_angle_deg`) -> Gaussian blur
    (`focus_sigma`) -> per-channel brightness multiply by `gain`, clamped
    to [0, 255].
    """

    label: str
    gain: float = 1.0
    blur_len: int = 1
    blur_angle_deg: float = 0.0
    crop: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # left, top, w, h
    focus_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gain <= 4.0:
            raise ValueError(f"gain {self.gain} outside [0, 4]")
        if self.blur_len < 1:
            raise ValueError("blur kernel length must be >= 1 pixel")
        left, top, w, h = self.crop
        if not (0.0 < w <= 1.0 and 0.0 < h <= 1.0):
            raise ValueError("crop width/height fractions must be in (0, 1]")
        if not (0.0 <= left < 1.0 and 0.0 <= top < 1.0):
            raise ValueError("crop origin fractions must be in [0, 1)")
        if left + w > 1.0 + 1e-9 or top + h > 1.0 + 1e-9:
            raise ValueError("crop rectangle exceeds the image")
        if self.focus_sigma < 0:
            raise ValueError("focus sigma must be >= 0")

    @property
    def is_identity(self) -> bool:
        return (
            self.gain == 1.0
            and self.blur_len == 1
            and self.focus_sigma == 0.0
            and self.crop == (0.0, 0.0, 1.0, 1.0)
        )


def default_scenarios() -> list[DegradationSpec]:
    """The nine built-in scenarios with implementer-chosen default parameters."""
    return [
        DegradationSpec("underexposed", gain=0.15),
        DegradationSpec("normal"),
        DegradationSpec("overexposed", gain=2.5),
        DegradationSpec("high_motion_blur", blur_len=31),
        DegradationSpec("moderate_motion_blur", blur_len=15),
        DegradationSpec("low_motion_blur", blur_len=7),
        DegradationSpec("partial_subject", crop=(0.25, 0.0, 0.5, 1.0)),
        DegradationSpec("partial_subject_off_focus", crop=(0.25, 0.0, 0.5, 1.0), focus_sigma=4.0),
        DegradationSpec("interference", crop=(0.0, 0.1, 1.0, 0.9), focus_sigma=0.8),
    ]


def scenarios_by_label(labels: Sequence[str]) -> list[DegradationSpec]:
    table = {s.label: s for s in default_scenarios()}
    out = []
    for label in labels:
        if label not in table:
            raise SchemaError(f"unknown scenario label {label!r}")
        out.append(table[label])
    return out


# -- degradation pipeline -----------------------------------------------------

def _motion_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Normalized 1-D box line of `length` pixels rasterized at angle_deg."""
    if length == 1:
        return np.array([[1.0]])
    kernel = np.zeros((length, length))
    center = (length - 1) / 2.0
    theta = math.radians(angle_deg)
    for t in np.linspace(-center, center, length):
        x = int(round(center + t * math.cos(theta)))
        y = int(round(center - t * math.sin(theta)))
        kernel[y, x] += 1.0
    return kernel / kernel.sum()


def degrade_pixels(pixels: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply the degradation pipeline to a uint8 array (H, W) or (H, W, C)."""
    if pixels.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D pixel array, got shape {pixels.shape}")
    arr = pixels.astype(np.float64)

    left, top, w, h = spec.crop
    if (left, top, w, h) != (0.0, 0.0, 1.0, 1.0):
        height, width = arr.shape[:2]
        x0 = int(round(left * width))
        y0 = int(round(top * height))
        x1 = max(x0 + 1, int(round((left + w) * width)))
        y1 = max(y0 + 1, int(round((top + h) * height)))
        arr = arr[y0:y1, x0:x1]

    def conv_channels(a: np.ndarray, kernel2d: np.ndarray) -> np.ndarray:
        if a.ndim == 2:
            return ndimage.convolve(a, kernel2d, mode="nearest")
        return np.stack(
            [ndimage.convolve(a[..., c], kernel2d, mode="nearest") for c in range(a.shape[-1])],
            axis=-1,
        )

    if spec.blur_len > 1:
        arr = conv_channels(arr, _motion_kernel(spec.blur_len, spec.blur_angle_deg))
    if spec.focus_sigma > 0:
        sigma = (spec.focus_sigma, spec.focus_sigma) + (0,) * (arr.ndim - 2)
        arr = ndimage.gaussian_filter(arr, sigma=sigma, mode="nearest")

    arr = np.clip(arr * spec.gain, 0.0, 255.0)
    return np.rint(arr).astype(np.uint8)


def degrade_image(data: bytes, spec: DegradationSpec) -> bytes:
    """Decode, degrade, and re-encode an image as PNG.

    An identity spec returns the input bytes untouched so the "normal"
    scenario keeps the original file digest stable across encoder versions.
    """
    if spec.is_identity:
        decode_image(data)  # still enforce decodability
        return data
    pixels = decode_image(data)
    out = Image.fromarray(degrade_pixels(pixels, spec))
    buf = io.BytesIO()
    out.save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc


# -- preference matrix ---------------------------------------------------------

class PreferenceMatrix:
    """Aggregate Likert totals: stimulus gesture x offered response gesture."""

    def __init__(
        self,
        scores: dict[str, dict[str, int]],
        participants: int = DEFAULT_PARTICIPANTS,
    ):
        if participants < 1:
            raise SchemaError("participant count must be >= 1")
        self.participants = participants
        lo, hi = participants * LIKERT_MIN, participants * LIKERT_MAX
        for stimulus, row in scores.items():
            if not row:
                raise SchemaError(f"stimulus {stimulus!r} offers no responses")
            for response, value in row.items():
                if not lo <= value <= hi:
                    raise RangeError(
                        f"score {value} for ({stimulus!r}, {response!r}) outside [{lo}, {hi}]"
                    )
        self.scores = {s: dict(row) for s, row in scores.items()}

    @property
    def stimuli(self) -> list[str]:
        return list(self.scores)

    def responses_for(self, stimulus: str) -> list[str]:
        """Responses offered to this stimulus, in CSV column order."""
        if stimulus not in self.scores:
            raise UnknownStimulus(f"unknown stimulus {stimulus!r}")
        return list(self.scores[stimulus])

    def rank(self, stimulus: str, k: int = 3) -> list[str]:
        """Top-k responses by total score, ties broken lexicographically."""
        if stimulus not in self.scores:
            raise UnknownStimulus(f"unknown stimulus {stimulus!r}")
        row = self.scores[stimulus]
        ordered = sorted(row, key=lambda name: (-row[name], name))
        return ordered[:k]

    @classmethod
    def load_csv(cls, path: str | Path, participants: int = DEFAULT_PARTICIPANTS
                 ) -> "PreferenceMatrix":
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise SchemaError(f"cannot read preference file {path}: {exc}") from exc
        if len(rows) < 2 or len(rows[0]) < 2:
            raise SchemaError(f"preference file {path} needs a header and at least one row")
        header = rows[0]
        responses = [h.strip() for h in header[1:]]
        if len(set(responses)) != len(responses):
            raise SchemaError("duplicate response labels in header")
        scores: dict[str, dict[str, int]] = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            stimulus = row[0].strip()
            if not stimulus:
                raise SchemaError(f"line {lineno}: empty stimulus label")
            if stimulus in scores:
                raise SchemaError(f"line {lineno}: duplicate stimulus {stimulus!r}")
            if len(row) - 1 > len(responses):
                raise SchemaError(f"line {lineno}: more cells than response columns")
            cells: dict[str, int] = {}
            for response, cell in zip(responses, row[1:]):
                cell = cell.strip()
                if not cell:
                    continue  # response not offered for this stimulus
                try:
                    cells[response] = int(cell)
                except ValueError as exc:
                    raise SchemaError(
                        f"line {lineno}: cell {cell!r} for {response!r} is not an integer"
                    ) from exc
            scores[stimulus] = cells
        return cls(scores, participants=participants)


# -- manifest --------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    image: Path
    stimulus: str
    extra_responses: tuple[str, ...] = ()


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError(f"manifest {path} must be a JSON array")
    entries = []
    for item in doc:
        try:
            image = Path(item["image"])
            if not image.is_absolute():
                image = path.parent / image
            entry = ManifestEntry(
                image=image,
                stimulus=str(item["stimulus"]),
                extra_responses=tuple(str(x) for x in item.get("extra_responses", [])),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed manifest entry {item!r}: {exc}") from exc
        if not entry.image.exists():
            raise SchemaError(f"manifest image {entry.image} does not exist")
        entries.append(entry)
    return entries


# -- evaluation ---------------------------------------------------------------------

@dataclass
class EvalCell:
    stimulus: str
    scenario: str
    suggestions: tuple[str, ...] = ()
    human_top3: tuple[str, ...] = ()
    top1_match: Optional[bool] = None
    top3_overlap: Optional[int] = None
    latency_s: Optional[float] = None
    error: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "stimulus": self.stimulus,
            "scenario": self.scenario,
            "suggestions": list(self.suggestions),
            "human_top3": list(self.human_top3),
            "top1_match": self.top1_match,
            "top3_overlap": self.top3_overlap,
            "latency_s": self.latency_s,
            "error": self.error,
        }


@dataclass
class ScenarioAggregate:
    cells: int = 0
    failed: int = 0
    top1_matches: int = 0
    latency_sum: float = 0.0

    @property
    def evaluated(self) -> int:
        return self.cells - self.failed

    @property
    def top1_match_rate(self) -> Optional[float]:
        return self.top1_matches / self.evaluated if self.evaluated else None

    @property
    def mean_latency_s(self) -> Optional[float]:
        return self.latency_sum / self.evaluated if self.evaluated else None

    def as_dict(self) -> dict:
        return {
            "cells": self.cells,
            "failed": self.failed,
            "top1_matches": self.top1_matches,
            "top1_match_rate": self.top1_match_rate,
            "mean_latency_s": self.mean_latency_s,
        }


@dataclass
class EvalReport:
    cells: list[EvalCell] = field(default_factory=list)

    def scenario_aggregate(self, label: str) -> ScenarioAggregate:
        agg = ScenarioAggregate()
        for cell in self.cells:
            if cell.scenario != label:
                continue
            agg.cells += 1
            if cell.error is not None:
                agg.failed += 1
                continue
            agg.top1_matches += 1 if cell.top1_match else 0
            agg.latency_sum += cell.latency_s or 0.0
        return agg

    def overall(self) -> ScenarioAggregate:
        agg = ScenarioAggregate()
        for cell in self.cells:
            agg.cells += 1
            if cell.error is not None:
                agg.failed += 1
                continue
            agg.top1_matches += 1 if cell.top1_match else 0
            agg.latency_sum += cell.latency_s or 0.0
        return agg

    def scenario_labels(self) -> list[str]:
        seen: list[str] = []
        for cell in self.cells:
            if cell.scenario not in seen:
                seen.append(cell.scenario)
        return seen

    def as_dict(self) -> dict:
        return {
            "version": 1,
            "overall": self.overall().as_dict(),
            "scenarios": {
                label: self.scenario_aggregate(label).as_dict()
                for label in self.scenario_labels()
            },
            "cells": [cell.as_dict() for cell in self.cells],
        }


def run_eval(
    manifest: Sequence[ManifestEntry],
    matrix: PreferenceMatrix,
    backend: VisionBackend,
    scenarios: Sequence[DegradationSpec] | None = None,
    parallel: int = 1,
) -> EvalReport:
    """Evaluate every (stimulus, scenario) pair against the preference matrix.

    Backend failures mark the cell failed and are excluded from the match
    rate and latency aggregates; they never abort the run.
    """
    specs = list(scenarios) if scenarios is not None else default_scenarios()
    jobs: list[tuple[ManifestEntry, DegradationSpec]] = [
        (entry, spec) for entry in manifest for spec in specs
    ]

    def evaluate(job: tuple[ManifestEntry, DegradationSpec]) -> EvalCell:
        entry, spec = job
        cell = EvalCell(stimulus=entry.stimulus, scenario=spec.label)
        try:
            top3 = matrix.rank(entry.stimulus)
            cell.human_top3 = tuple(top3)
            actions = matrix.responses_for(entry.stimulus)
            degraded = degrade_image(entry.image.read_bytes(), spec)
            result = request_recommendation(
                backend, RecommendationRequest(degraded, tuple(actions))
            )
            cell.suggestions = result.suggestions
            cell.latency_s = result.latency_s
            cell.top1_match = result.suggestions[0] == top3[0]
            cell.top3_overlap = len(set(result.suggestions) & set(top3))
        except Exception as exc:  # per-cell failure, recorded not raised
            cell.error = f"{type(exc).__name__}: {exc}"
        return cell

    report = EvalReport()
    if parallel <= 1:
        report.cells = [evaluate(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            report.cells = list(pool.map(evaluate, jobs))
    return report


def emit_report(report: EvalReport, fmt: str, path: str | Path) -> None:
    """Write the report as deterministic JSON or a markdown summary."""
    if fmt == "json":
        text = json.dumps(report.as_dict(), indent=2) + "\n"
    elif fmt == "markdown":
        text = render_markdown(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        from .errors import StorageError

        raise StorageError(f"cannot write report {path}: {exc}") from exc


def _fmt_rate(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _fmt_latency(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value * 1000:.1f} ms"


def render_markdown(report: EvalReport) -> str:
    lines = ["# Recommendation accuracy report", ""]
    overall = report.overall()
    lines.append(
        f"Overall: top-1 match rate {_fmt_rate(overall.top1_match_rate)} over "
        f"{overall.evaluated} evaluated cells ({overall.failed} failed), "
        f"mean latency {_fmt_latency(overall.mean_latency_s)}."
    )
    lines.append("")
    lines.append("| scenario | cells | failed | top-1 rate | mean latency |")
    lines.append("|---|---|---|---|---|")
    for label in report.scenario_labels():
        agg = report.scenario_aggregate(label)
        lines.append(
            f"| {label} | {agg.cells} | {agg.failed} | "
            f"{_fmt_rate(agg.top1_match_rate)} | {_fmt_latency(agg.mean_latency_s)} |"
        )
    lines.append("")
    lines.append("| stimulus | scenario | first suggestion | human top-1 | match |")
    lines.append("|---|---|---|---|---|")
    for cell in report.cells:
        first = cell.suggestions[0] if cell.suggestions else "-"
        human = cell.human_top3[0] if cell.human_top3 else "-"
        mark = "error" if cell.error else ("yes" if cell.top1_match else "no")
        lines.append(f"| {cell.stimulus} | {cell.scenario} | {first} | {human} | {mark} |")
    return "\n".join(lines) + "\n"
