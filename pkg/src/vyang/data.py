"""Dataset model and manifest loading.

A manifest is one JSON object per line:

    {"id": ..., "show": ..., "text": ..., "speaker": ..., "label": 0|1,
     "frames": "path.vtf" | null, "audio": "path.wav" | null,
     "context": [{"text": ..., "speaker": ..., "frames": ..., "audio": ...}]}

Relative frame/audio paths are resolved against the manifest's directory.
Validation failures always name the offending sample id and field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple


class ManifestError(ValueError):
    """Raised when a manifest or one of its samples is malformed."""


@dataclass
class ContextTurn:
    text: Optional[str] = None
    speaker: Optional[str] = None
    frames: Optional[str] = None
    audio: Optional[str] = None


@dataclass
class Sample:
    id: str
    show: str
    text: Optional[str]
    speaker: Optional[str]
    label: int
    frames: Optional[str] = None
    audio: Optional[str] = None
    context: List[ContextTurn] = field(default_factory=list)


def _check_str(value, sid: str, fieldname: str, allow_none: bool = True):
    if value is None:
        if allow_none:
            return None
        raise ManifestError(f"sample {sid!r}: field {fieldname!r} is required")
    if not isinstance(value, str):
        raise ManifestError(f"sample {sid!r}: field {fieldname!r} must be a string")
    return value


def _resolve_ref(value, sid: str, fieldname: str, base: Path,
                 check_exists: bool) -> Optional[str]:
    ref = _check_str(value, sid, fieldname)
    if ref is None:
        return None
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    if check_exists and not path.exists():
        raise ManifestError(f"sample {sid!r}: field {fieldname!r} references missing file {path}")
    return str(path)


def _parse_sample(record: dict, base: Path, check_files: bool) -> Sample:
    sid = record.get("id")
    if not isinstance(sid, str) or not sid:
        raise ManifestError(f"sample {sid!r}: field 'id' must be a non-empty string")
    if "label" not in record:
        raise ManifestError(f"sample {sid!r}: field 'label' is required")
    label = record["label"]
    if label not in (0, 1):
        raise ManifestError(f"sample {sid!r}: field 'label' must be 0 or 1, got {label!r}")
    show = _check_str(record.get("show"), sid, "show", allow_none=False)
    context_raw = record.get("context", [])
    if not isinstance(context_raw, list):
        raise ManifestError(f"sample {sid!r}: field 'context' must be a list")
    context = []
    for i, turn in enumerate(context_raw):
        if not isinstance(turn, dict):
            raise ManifestError(f"sample {sid!r}: field 'context[{i}]' must be an object")
        context.append(ContextTurn(
            text=_check_str(turn.get("text"), sid, f"context[{i}].text"),
            speaker=_check_str(turn.get("speaker"), sid, f"context[{i}].speaker"),
            frames=_resolve_ref(turn.get("frames"), sid, f"context[{i}].frames", base, check_files),
            audio=_resolve_ref(turn.get("audio"), sid, f"context[{i}].audio", base, check_files),
        ))
    return Sample(
        id=sid,
        show=show,
        text=_check_str(record.get("text"), sid, "text"),
        speaker=_check_str(record.get("speaker"), sid, "speaker"),
        label=int(label),
        frames=_resolve_ref(record.get("frames"), sid, "frames", base, check_files),
        audio=_resolve_ref(record.get("audio"), sid, "audio", base, check_files),
        context=context,
    )


def load_manifest(path, check_files: bool = True) -> List[Sample]:
    """Parse and validate a manifest; referenced files must exist."""
    path = Path(path)
    base = path.parent
    samples: List[Sample] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            sample = _parse_sample(record, base, check_files)
            if sample.id in seen:
                raise ManifestError(f"sample {sample.id!r}: field 'id' duplicates an earlier sample")
            seen.add(sample.id)
            samples.append(sample)
    if not samples:
        raise ManifestError(f"{path}: no samples")
    return samples


def dataset_counts(samples: List[Sample]) -> Tuple[int, int, int]:
    """(total, positive, negative) sample counts."""
    pos = sum(s.label for s in samples)
    return len(samples), pos, len(samples) - pos
