"""Synthetic evaluation corpus: placeholder stimulus images, a constructed
preference matrix, and a faithful digest-keyed mock backend mapping.

Real stimulus photographs are user-supplied and never ship with the repo,
so CI and the acceptance suite run on deterministic generated images. The
preference totals are implementer-constructed with a fixed rank structure:
each stimulus's highest-scored response is the mirrored gesture (same
label), exercising the ranking and matching machinery end to end.

Run `python -m abcarm.fixtures --out DIR` to materialize a corpus for the
abc-eval CLI.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .evaluate import (
    DegradationSpec,
    ManifestEntry,
    PreferenceMatrix,
    RESPONSE_GESTURES,
    default_scenarios,
    degrade_image,
)

# Eleven stimulus gestures; the mirrored response exists for each.
DEFAULT_STIMULI = RESPONSE_GESTURES[:11]

# The third stimulus can be answered several ways, so it carries one extra
# response option beyond the base twelve.
EXTRA_RESPONSE_STIMULUS_INDEX = 2
EXTRA_RESPONSE_LABEL = "salute"
EXTRA_RESPONSE_SCORE = 68

IMAGE_SIZE = 64


def make_stimulus_image(label: str, size: int = IMAGE_SIZE) -> bytes:
    """Deterministic PNG placeholder derived from the stimulus label."""
    seed = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    tile = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    pixels = np.kron(tile, np.ones((size // 8, size // 8, 1), dtype=np.uint8))
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def build_preference_scores(
    stimuli: Sequence[str] = DEFAULT_STIMULI,
    responses: Sequence[str] = RESPONSE_GESTURES,
) -> dict[str, dict[str, int]]:
    """Constructed Likert totals with a known rank structure.

    For stimulus i the response scores are 70, 66, 62, ... rotated so the
    mirrored response (same label) scores highest; all totals stay within
    the 14-participant range [14, 70]. The designated extra-response
    stimulus gets one additional option scored into rank 2.
    """
    scores: dict[str, dict[str, int]] = {}
    for i, stimulus in enumerate(stimuli):
        base = len(responses)
        row = {}
        for j, response in enumerate(responses):
            rank = (j - i) % base
            row[response] = 70 - 4 * rank
        scores[stimulus] = row
    extra_stimulus = stimuli[EXTRA_RESPONSE_STIMULUS_INDEX]
    scores[extra_stimulus][EXTRA_RESPONSE_LABEL] = EXTRA_RESPONSE_SCORE
    return scores


def build_preference_matrix() -> PreferenceMatrix:
    return PreferenceMatrix(build_preference_scores())


def write_preferences_csv(path: Path, scores: dict[str, dict[str, int]]) -> None:
    responses = list(RESPONSE_GESTURES) + [EXTRA_RESPONSE_LABEL]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stimulus", *responses])
        for stimulus, row in scores.items():
            writer.writerow([stimulus] + [row.get(r, "") for r in responses])


def build_faithful_mock(
    manifest: Sequence[ManifestEntry],
    matrix: PreferenceMatrix,
    scenarios: Sequence[DegradationSpec] | None = None,
) -> dict[str, str]:
    """Digest -> reply mapping that answers every cell with the human top two."""
    specs = list(scenarios) if scenarios is not None else default_scenarios()
    mapping: dict[str, str] = {}
    for entry in manifest:
        data = entry.image.read_bytes()
        top = matrix.rank(entry.stimulus)
        reply = f"{top[0]}, {top[1]}"
        for spec in specs:
            digest = hashlib.sha256(degrade_image(data, spec)).hexdigest()
            mapping[digest] = reply
    return mapping


def corrupt_mock(
    mapping: dict[str, str],
    manifest: Sequence[ManifestEntry],
    matrix: PreferenceMatrix,
    scenario: DegradationSpec,
    stimuli: Sequence[str],
) -> dict[str, str]:
    """Copy of a mock with the given stimuli answering wrongly in one scenario."""
    wrong = dict(mapping)
    targets = set(stimuli)
    for entry in manifest:
        if entry.stimulus not in targets:
            continue
        digest = hashlib.sha256(
            degrade_image(entry.image.read_bytes(), scenario)
        ).hexdigest()
        top = matrix.rank(entry.stimulus)
        wrong[digest] = f"{top[1]}, {top[2]}"
    return wrong


def build_eval_corpus(out_dir: str | Path) -> dict[str, Path]:
    """Materialize images, manifest, preferences CSV, and faithful mock mapping."""
    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    scores = build_preference_scores()
    matrix = PreferenceMatrix(scores)

    manifest_doc = []
    entries = []
    for i, stimulus in enumerate(DEFAULT_STIMULI):
        filename = f"stimulus_{i:02d}.png"
        (images_dir / filename).write_bytes(make_stimulus_image(stimulus))
        extra = [EXTRA_RESPONSE_LABEL] if i == EXTRA_RESPONSE_STIMULUS_INDEX else []
        manifest_doc.append(
            {"image": f"images/{filename}", "stimulus": stimulus, "extra_responses": extra}
        )
        entries.append(
            ManifestEntry(images_dir / filename, stimulus, tuple(extra))
        )

    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest_doc, indent=2) + "\n", encoding="utf-8")

    preferences_path = out / "preferences.csv"
    write_preferences_csv(preferences_path, scores)

    mock_path = out / "mock.json"
    mock_path.write_text(
        json.dumps(build_faithful_mock(entries, matrix), indent=2) + "\n", encoding="utf-8"
    )

    return {
        "manifest": manifest_path,
        "preferences": preferences_path,
        "mock": mock_path,
        "images": images_dir,
    }


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate a synthetic evaluation corpus for abc-eval."
    )
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    paths = build_eval_corpus(args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
