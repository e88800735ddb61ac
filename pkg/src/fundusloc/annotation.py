"""Semi-automated ground-truth workflow.

The localizer proposes a box per image; a human reviewer accepts,
corrects, or rejects each proposal; accepted and corrected boxes are
exported as ground truth. State lives in an append-only JSON-lines
decision log that replays to the current store, which gives trivial
crash recovery and a full audit trail.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Callable

from .errors import (
    EmptyDataset,
    FunduslocError,
    InvalidBox,
    NotFound,
    StoreCorrupt,
    VersionConflict,
)
from .geometry import BoundingBox
from .imaging import load_image
from .localizer import LocalizerConfig, localize_disc

VALID_LABELS = ("healthy", "glaucoma", "unlabeled")
STATUSES = ("proposed", "accepted", "corrected", "rejected")
DECISIONS = ("accept", "reject", "correct")


@dataclass(frozen=True)
class ManifestImage:
    image_id: str
    path: str
    width: int
    height: int
    label: str = "unlabeled"

    def __post_init__(self):
        if self.label not in VALID_LABELS:
            raise ValueError(f"label must be one of {VALID_LABELS}, got {self.label!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"{self.image_id}: dimensions must be positive")


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    images: tuple[ManifestImage, ...]

    def __post_init__(self):
        ids = [im.image_id for im in self.images]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image ids in manifest: {dupes}")

    def __len__(self) -> int:
        return len(self.images)

    def get(self, image_id: str) -> ManifestImage:
        for im in self.images:
            if im.image_id == image_id:
                return im
        raise NotFound(f"image {image_id!r} not in manifest")

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "images": [
                {"image_id": im.image_id, "path": im.path, "width": im.width,
                 "height": im.height, "label": im.label}
                for im in self.images
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        images = tuple(
            ManifestImage(str(e["image_id"]), str(e["path"]), int(e["width"]),
                          int(e["height"]), str(e.get("label", "unlabeled")))
            for e in d["images"]
        )
        return cls(str(d["dataset_name"]), images)


def load_manifest(path: str | Path) -> DatasetManifest:
    with open(path) as fh:
        return DatasetManifest.from_dict(json.load(fh))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class AnnotationRecord:
    """One image's proposal and review state.

    Invariants: accepted implies final_box == proposed_box; corrected
    implies final_box present and different; rejected implies no
    final_box; any reviewed status implies reviewer and reviewed_at.
    """

    image_id: str
    proposed_box: BoundingBox | None
    status: str = "proposed"
    final_box: BoundingBox | None = None
    reviewer: str | None = None
    reviewed_at: str | None = None
    source: str = "heuristic"
    note: str | None = None
    version: int = 0

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "proposed_box": self.proposed_box.to_dict() if self.proposed_box else None,
            "status": self.status,
            "final_box": self.final_box.to_dict() if self.final_box else None,
            "reviewer": self.reviewer,
            "reviewed_at": self.reviewed_at,
            "source": self.source,
            "note": self.note,
            "version": self.version,
        }


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _box_or_none(d: dict | None) -> BoundingBox | None:
    return None if d is None else BoundingBox.from_dict(d)


class AnnotationStore:
    """Records keyed by image id, backed by an append-only event log.

    Every mutation is appended (and fsynced when ``durable``) before the
    in-memory state changes are acknowledged; reloading the log always
    reproduces the live state. Writes are serialized by a lock so the
    store can back a concurrent review service.
    """

    def __init__(self, manifest: DatasetManifest, log_path: str | Path,
                 durable: bool = True):
        self.manifest = manifest
        self.log_path = Path(log_path)
        self.durable = durable
        self._records: dict[str, AnnotationRecord] = {}
        self._lock = threading.Lock()
        self._log_fh: IO[str] | None = None

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, manifest: DatasetManifest, log_path: str | Path,
             durable: bool = True) -> "AnnotationStore":
        """Load a store by replaying its event log."""
        store = cls(manifest, log_path, durable)
        store._replay()
        return store

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        lines = self.log_path.read_text().splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    continue  # torn final write from an interrupted process
                raise StoreCorrupt(f"{self.log_path}:{i + 1}: malformed event")
            self._apply_event(event)

    def _apply_event(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "propose":
            record = AnnotationRecord(
                image_id=event["image_id"],
                proposed_box=_box_or_none(event.get("box")),
                status=event.get("status", "proposed"),
                source=event.get("source", "heuristic"),
                note=event.get("note"),
            )
            self._records[record.image_id] = record
        elif kind == "review":
            self._records[event["image_id"]] = self._reviewed(
                self._records[event["image_id"]],
                event["decision"],
                _box_or_none(event.get("box")),
                event["reviewer"],
                event["at"],
            )
        else:
            raise StoreCorrupt(f"unknown event kind {kind!r}")

    def _append(self, event: dict) -> None:
        if self._log_fh is None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_fh = open(self.log_path, "a")
        self._log_fh.write(json.dumps(event, separators=(",", ":")) + "\n")
        self._log_fh.flush()
        if self.durable:
            os.fsync(self._log_fh.fileno())

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- reads ---------------------------------------------------------------

    def get(self, image_id: str) -> AnnotationRecord:
        try:
            return self._records[image_id]
        except KeyError:
            raise NotFound(f"no annotation record for {image_id!r}") from None

    def records(self) -> list[AnnotationRecord]:
        return [self._records[im.image_id] for im in self.manifest.images
                if im.image_id in self._records]

    def progress(self) -> dict[str, int]:
        counts = {status: 0 for status in STATUSES}
        for rec in self._records.values():
            counts[rec.status] += 1
        counts["total"] = len(self._records)
        return counts

    # -- mutations ------------------------------------------------------------

    def add_proposal(self, image_id: str, box: BoundingBox | None,
                     note: str | None = None) -> AnnotationRecord:
        """Record the localizer's proposal (or its failure) for one image."""
        with self._lock:
            status = "proposed" if box is not None else "rejected"
            event = {
                "event": "propose",
                "image_id": image_id,
                "box": box.to_dict() if box else None,
                "status": status,
                "source": "heuristic",
                "note": note,
                "at": _utcnow(),
            }
            self._append(event)
            self._apply_event(event)
            return self._records[image_id]

    def _validate_correction(self, record: AnnotationRecord, box: BoundingBox) -> None:
        image = self.manifest.get(record.image_id)
        if box.x < 0 or box.y < 0 or box.x1 > image.width or box.y1 > image.height:
            raise InvalidBox(
                f"corrected box {box.to_dict()} exceeds {image.width}x{image.height} image"
            )
        if record.proposed_box is not None and box == record.proposed_box:
            raise InvalidBox("corrected box equals the proposal; use accept")

    def _reviewed(self, record: AnnotationRecord, decision: str,
                  box: BoundingBox | None, reviewer: str, at: str) -> AnnotationRecord:
        if decision == "accept":
            if record.proposed_box is None:
                raise InvalidBox(f"{record.image_id}: nothing proposed to accept")
            return replace(record, status="accepted", final_box=record.proposed_box,
                           reviewer=reviewer, reviewed_at=at,
                           version=record.version + 1)
        if decision == "reject":
            return replace(record, status="rejected", final_box=None,
                           reviewer=reviewer, reviewed_at=at,
                           version=record.version + 1)
        if decision == "correct":
            if box is None:
                raise InvalidBox("correct decision requires a box")
            return replace(record, status="corrected", final_box=box,
                           reviewer=reviewer, reviewed_at=at,
                           version=record.version + 1)
        raise ValueError(f"decision must be one of {DECISIONS}, got {decision!r}")

    def _is_noop(self, record: AnnotationRecord, decision: str,
                 box: BoundingBox | None, reviewer: str) -> bool:
        if record.reviewer != reviewer:
            return False
        if decision == "accept":
            return record.status == "accepted"
        if decision == "reject":
            return record.status == "rejected" and record.reviewed_at is not None
        return record.status == "corrected" and record.final_box == box

    def apply_review(self, image_id: str, decision: str, reviewer: str,
                     box: BoundingBox | None = None,
                     version: int | None = None) -> AnnotationRecord:
        """Apply one review decision.

        Re-applying an identical decision is a no-op (safe retries).
        Otherwise, when ``version`` is given it must match the record's
        current version or VersionConflict is raised.
        """
        if decision not in DECISIONS:
            raise ValueError(f"decision must be one of {DECISIONS}, got {decision!r}")
        with self._lock:
            record = self.get(image_id)
            if decision == "correct":
                if box is None:
                    raise InvalidBox("correct decision requires a box")
                self._validate_correction(record, box)
            if self._is_noop(record, decision, box, reviewer):
                return record
            if version is not None and version != record.version:
                raise VersionConflict(
                    f"{image_id}: submitted version {version}, current {record.version}",
                    current_version=record.version,
                )
            at = _utcnow()
            updated = self._reviewed(record, decision, box, reviewer, at)
            event = {
                "event": "review",
                "image_id": image_id,
                "decision": decision,
                "box": box.to_dict() if decision == "correct" else None,
                "reviewer": reviewer,
                "at": at,
            }
            self._append(event)
            self._records[image_id] = updated
            return updated

    # -- export -----------------------------------------------------------------

    def export_ground_truth(self, out: IO[str]) -> dict[str, int]:
        """Write accepted and corrected boxes as ``{"image_id", "box"}``
        JSON lines followed by one per-status summary line; returns the
        summary counts."""
        exported = 0
        for rec in self.records():
            if rec.status in ("accepted", "corrected"):
                out.write(json.dumps(
                    {"image_id": rec.image_id, "box": rec.final_box.to_dict()},
                    separators=(",", ":")) + "\n")
                exported += 1
        counts = self.progress()
        counts["exported"] = exported
        out.write(json.dumps({"summary": counts}, separators=(",", ":")) + "\n")
        return counts

    def state_snapshot(self) -> dict[str, dict]:
        """Full record state keyed by image id (for replay comparison)."""
        return {i: r.to_dict() for i, r in self._records.items()}


def generate_proposals(manifest: DatasetManifest, cfg: LocalizerConfig,
                       log_path: str | Path, images_root: str | Path,
                       durable: bool = True,
                       progress: Callable[[str, str], None] | None = None,
                       ) -> AnnotationStore:
    """Run the localizer over a manifest and seed a fresh store.

    Images where localization fails (or cannot be decoded) enter the
    store as rejected records with the failure noted, so the reviewer can
    still annotate them from scratch.
    """
    if len(manifest) == 0:
        raise EmptyDataset("manifest contains no images")
    store = AnnotationStore(manifest, log_path, durable=durable)
    root = Path(images_root)
    for entry in manifest.images:
        try:
            img = load_image(root / entry.path)
            if (img.width, img.height) != (entry.width, entry.height):
                raise ValueError(
                    f"manifest says {entry.width}x{entry.height} but file decodes "
                    f"to {img.width}x{img.height}"
                )
            result = localize_disc(img, cfg)
            store.add_proposal(entry.image_id, result.box)
            if progress:
                progress(entry.image_id, "proposed")
        except (FunduslocError, OSError, ValueError) as exc:
            store.add_proposal(entry.image_id, None,
                               note=f"{type(exc).__name__}: {exc}")
            if progress:
                progress(entry.image_id, "rejected")
    return store


def read_ground_truth(path: str | Path) -> dict[str, BoundingBox]:
    """Read a ground-truth JSONL file; summary lines are skipped."""
    boxes: dict[str, BoundingBox] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "summary" in obj:
                continue
            boxes[obj["image_id"]] = BoundingBox.from_dict(obj["box"])
    return boxes


def read_predictions(path: str | Path) -> dict[str, BoundingBox | None]:
    """Read localization output; images whose line carries an error are
    recorded as missing predictions."""
    preds: dict[str, BoundingBox | None] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "summary" in obj:
                continue
            if obj.get("box") is None:
                preds[obj["image_id"]] = None
            else:
                preds[obj["image_id"]] = BoundingBox.from_dict(obj["box"])
    return preds
