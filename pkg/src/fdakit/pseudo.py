"""Semi-supervised data path: confidence-filtered pseudo-labels and the
mixed half-labeled / half-pseudo training manifest.

The detector producing predictions is external; this module owns the file
contract only. val/test splits are never touched.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fdakit.dataset import Annotation, save_labels
from fdakit.errors import ParameterError, PseudoLabelError
from fdakit.metrics import parse_predictions


@dataclass(frozen=True)
class PseudoLabelPolicy:
    confidence_threshold: float = 0.5
    labeled_fraction: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ParameterError(
                f"confidence threshold must be in (0, 1], got {self.confidence_threshold}"
            )
        if not 0.0 < self.labeled_fraction <= 1.0:
            raise ParameterError(
                f"labeled fraction must be in (0, 1], got {self.labeled_fraction}"
            )


@dataclass(frozen=True)
class AuditEntry:
    image_id: str
    kept: int
    dropped: int
    max_dropped_confidence: float


def filter_predictions(preds, policy: PseudoLabelPolicy):
    """Keep predictions with confidence >= threshold (inclusive), strip the
    confidence, and emit label annotations in input order."""
    policy.validate()
    kept = []
    dropped = []
    for pred in preds:
        if pred.confidence >= policy.confidence_threshold:
            kept.append(Annotation(pred.class_id, pred.cx, pred.cy, pred.w, pred.h))
        else:
            dropped.append(pred.confidence)
    return kept, dropped


def filter_prediction_dir(preds_dir, out_labels_dir, policy: PseudoLabelPolicy):
    """Filter every prediction file into a pseudo-label file; returns the
    per-image audit entries (image, kept, dropped, max dropped confidence)."""
    preds_dir = Path(preds_dir)
    out_labels_dir = Path(out_labels_dir)
    out_labels_dir.mkdir(parents=True, exist_ok=True)
    audit = []
    for pred_path in sorted(preds_dir.glob("*.txt")):
        preds = parse_predictions(pred_path.read_text(), pred_path.stem)
        kept, dropped = filter_predictions(preds, policy)
        save_labels(kept, out_labels_dir / pred_path.name)
        audit.append(
            AuditEntry(
                image_id=pred_path.stem,
                kept=len(kept),
                dropped=len(dropped),
                max_dropped_confidence=max(dropped, default=0.0),
            )
        )
    return audit


def format_audit_log(entries) -> str:
    lines = [
        f"{e.image_id}\t{e.kept}\t{e.dropped}\t{e.max_dropped_confidence:.6f}"
        for e in entries
    ]
    return "".join(line + "\n" for line in lines)


def compile_mixed_manifest(full_manifest, policy: PseudoLabelPolicy, pseudo_label_dir):
    """Partition the train split into a labeled half and a pseudo-labeled half.

    Returns (labeled, unlabeled, mixed) manifests. The unlabeled half's
    records point at pseudo-label files named after each image's stem in
    `pseudo_label_dir` and carry provenance "pseudo". Record order follows
    the input manifest, so labeled_fraction=1 reproduces the train manifest
    byte-for-byte.
    """
    policy.validate()
    train = [r for r in full_manifest if r.split == "train"]
    if not train:
        raise PseudoLabelError("manifest has no train split assigned")

    n_labeled = int(policy.labeled_fraction * len(train))
    rng = np.random.default_rng(policy.seed)
    labeled_idx = set(rng.permutation(len(train))[:n_labeled].tolist())

    pseudo_label_dir = Path(pseudo_label_dir)
    labeled = []
    unlabeled = []
    mixed = []
    missing = []
    for i, record in enumerate(train):
        if i in labeled_idx:
            labeled.append(record)
            mixed.append(record)
        else:
            pseudo_path = pseudo_label_dir / (Path(record.image_path).stem + ".txt")
            if not pseudo_path.exists():
                missing.append(str(pseudo_path))
                continue
            pseudo_record = dataclasses.replace(
                record, label_path=str(pseudo_path), provenance="pseudo"
            )
            unlabeled.append(pseudo_record)
            mixed.append(pseudo_record)
    if missing:
        raise PseudoLabelError(
            f"{len(missing)} pseudo-label file(s) missing", missing=missing
        )
    return labeled, unlabeled, mixed
