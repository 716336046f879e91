"""Dataset layout: ``<root>/manifest.csv`` listing one row per recorded sequence.

Columns: subject, trajectory, camera, frames (directory), detections (file),
all paths relative to the root.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

MANIFEST = "manifest.csv"
UB_PARAMS = "ub_params.txt"
COLUMNS = ("subject", "trajectory", "camera", "frames", "detections")


@dataclass(frozen=True)
class SequenceRecord:
    subject: str
    trajectory: str
    camera: str
    frames: Path
    detections: Optional[Path]

    @property
    def key(self):
        return (self.subject, self.trajectory, self.camera)


def read_manifest(root) -> List[SequenceRecord]:
    root = Path(root)
    path = root / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST} in dataset root {root}")
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS[:4]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            det = row.get("detections") or ""
            out.append(SequenceRecord(row["subject"], row["trajectory"], row["camera"],
                                      root / row["frames"], root / det if det else None))
    out.sort(key=lambda r: r.key)
    return out


def write_manifest(root, records) -> None:
    root = Path(root)
    with open(root / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in sorted(records, key=lambda r: r.key):
            det = "" if r.detections is None else str(Path(r.detections).relative_to(root))
            w.writerow([r.subject, r.trajectory, r.camera, str(Path(r.frames).relative_to(root)), det])
