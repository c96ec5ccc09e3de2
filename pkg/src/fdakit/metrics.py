"""Detection evaluation: IoU, confidence-ordered matching, all-point
interpolated AP, and the Precision/Recall/mAP50/mAP50-95 report.

Predictions come from external detectors as per-image files of
"class cx cy w h confidence" lines; ground truth uses the dataset label
format. Boxes are (cx, cy, w, h), normalized.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fdakit.dataset import CLASS_NAMES, parse_labels
from fdakit.errors import InputError, LabelParseError

IOU_50_95 = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    class_id: int
    cx: float
    cy: float
    w: float
    h: float
    confidence: float


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    class_id: int
    cx: float
    cy: float
    w: float
    h: float


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    ap50: float
    ap50_95: float
    num_gt: int
    tp: int
    fp: int
    confidence_threshold: float


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict          # class id -> ClassMetrics
    aggregate: ClassMetrics  # macro average over contributing classes
    pr_curve: dict           # class id -> (recalls, precisions, confidences) at IoU 0.5


def iou(a, b) -> float:
    """Intersection over union of two (cx, cy, w, h) boxes; 0 when disjoint."""
    ax0, ax1 = a.cx - a.w / 2.0, a.cx + a.w / 2.0
    ay0, ay1 = a.cy - a.h / 2.0, a.cy + a.h / 2.0
    bx0, bx1 = b.cx - b.w / 2.0, b.cx + b.w / 2.0
    by0, by1 = b.cy - b.h / 2.0, b.cy + b.h / 2.0
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def match_detections(preds, gts, iou_threshold):
    """Greedy TP/FP flags for predictions of one image and one class.

    Predictions are processed in descending confidence (stable on ties);
    each takes the unmatched ground truth with the highest IoU >= threshold,
    and every ground truth is used at most once. Returns flags in the
    processing order along with that order's indices into `preds`.
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    matched = [False] * len(gts)
    flags = []
    for i in order:
        best_j = -1
        best_iou = iou_threshold
        for j, gt in enumerate(gts):
            if matched[j]:
                continue
            overlap = iou(preds[i], gt)
            if overlap >= best_iou and (best_j == -1 or overlap > best_iou):
                best_j = j
                best_iou = overlap
        if best_j >= 0:
            matched[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, order


def average_precision(flags, num_gt) -> float:
    """All-point interpolated area under the PR curve.

    `flags` are TP/FP indicators already in descending-confidence order.
    AP is 0 when there is ground truth but no true positives, and 0 when
    predictions exist without any ground truth. The no-GT/no-prediction case
    is the caller's to exclude from averaging.
    """
    if num_gt == 0:
        return 0.0
    tp = 0
    recalls = []
    precisions = []
    for rank, is_tp in enumerate(flags, start=1):
        if is_tp:
            tp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / rank)
    if not recalls:
        return 0.0
    # Monotone non-increasing precision envelope, integrated over recall.
    envelope = list(precisions)
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    area = recalls[0] * envelope[0]
    for i in range(1, len(recalls)):
        area += (recalls[i] - recalls[i - 1]) * envelope[i]
    return area


def _class_flags(preds, gts_by_image, iou_threshold):
    """Descending-confidence TP/FP flags for one class across all images."""
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    matched = {img: [False] * len(g) for img, g in gts_by_image.items()}
    flags = []
    confidences = []
    for i in order:
        pred = preds[i]
        gts = gts_by_image.get(pred.image_id, [])
        used = matched.get(pred.image_id, [])
        best_j = -1
        best_iou = iou_threshold
        for j, gt in enumerate(gts):
            if used[j]:
                continue
            overlap = iou(pred, gt)
            if overlap >= best_iou and (best_j == -1 or overlap > best_iou):
                best_j = j
                best_iou = overlap
        if best_j >= 0:
            used[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
        confidences.append(pred.confidence)
    return flags, confidences


def evaluate(preds, gts, iou_thresholds=IOU_50_95) -> MetricsReport:
    """Full per-class and macro-averaged report.

    ap50 uses IoU 0.5; ap50_95 averages AP over `iou_thresholds`. Precision
    and recall are reported at the confidence maximizing F1 on the IoU-0.5
    curve. Classes with neither ground truth nor predictions are excluded
    from the macro average.
    """
    for record in list(preds) + list(gts):
        if record.class_id not in CLASS_NAMES:
            raise InputError(f"unknown class id {record.class_id}")

    per_class = {}
    curves = {}
    contributing = []
    for class_id in sorted(CLASS_NAMES):
        class_preds = [p for p in preds if p.class_id == class_id]
        gts_by_image = {}
        for gt in gts:
            if gt.class_id == class_id:
                gts_by_image.setdefault(gt.image_id, []).append(gt)
        num_gt = sum(len(v) for v in gts_by_image.values())
        if num_gt == 0 and not class_preds:
            per_class[class_id] = ClassMetrics(0.0, 0.0, 0.0, 0.0, 0, 0, 0, 0.0)
            curves[class_id] = ([], [], [])
            continue

        aps = {}
        for threshold in iou_thresholds:
            flags, _ = _class_flags(class_preds, gts_by_image, threshold)
            aps[threshold] = average_precision(flags, num_gt)
        flags50, confidences = _class_flags(class_preds, gts_by_image, 0.5)
        ap50 = average_precision(flags50, num_gt)

        recalls = []
        precisions = []
        tp = 0
        for rank, is_tp in enumerate(flags50, start=1):
            if is_tp:
                tp += 1
            recalls.append(tp / num_gt if num_gt else 0.0)
            precisions.append(tp / rank)
        curves[class_id] = (recalls, precisions, confidences)

        best = (-1.0, 0.0, 0.0, 0, 0, 1.0)  # f1, p, r, tp, fp, confidence
        tp = 0
        for rank, is_tp in enumerate(flags50, start=1):
            if is_tp:
                tp += 1
            p = tp / rank
            r = tp / num_gt if num_gt else 0.0
            f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
            if f1 > best[0]:
                best = (f1, p, r, tp, rank - tp, confidences[rank - 1])
        _, precision, recall, tps, fps, threshold = best
        if not flags50:
            precision, recall, tps, fps, threshold = 0.0, 0.0, 0, 0, 1.0

        per_class[class_id] = ClassMetrics(
            precision=precision,
            recall=recall,
            ap50=ap50,
            ap50_95=sum(aps.values()) / len(aps) if aps else 0.0,
            num_gt=num_gt,
            tp=tps,
            fp=fps,
            confidence_threshold=threshold,
        )
        contributing.append(class_id)

    if contributing:
        def mean(attr):
            return sum(getattr(per_class[c], attr) for c in contributing) / len(
                contributing
            )

        aggregate = ClassMetrics(
            precision=mean("precision"),
            recall=mean("recall"),
            ap50=mean("ap50"),
            ap50_95=mean("ap50_95"),
            num_gt=sum(per_class[c].num_gt for c in contributing),
            tp=sum(per_class[c].tp for c in contributing),
            fp=sum(per_class[c].fp for c in contributing),
            confidence_threshold=0.0,
        )
    else:
        aggregate = ClassMetrics(0.0, 0.0, 0.0, 0.0, 0, 0, 0, 0.0)
    return MetricsReport(per_class=per_class, aggregate=aggregate, pr_curve=curves)


# ---------------------------------------------------------------------------
# File interfaces


def parse_predictions(text: str, image_id: str):
    """One DetectionRecord per "class cx cy w h confidence" line."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise LabelParseError(
                f"line {lineno}: expected 6 fields, got {len(parts)}", lineno
            )
        try:
            class_id = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise LabelParseError(f"line {lineno}: {exc}", lineno) from None
        if class_id not in CLASS_NAMES:
            raise InputError(f"line {lineno}: unknown class id {class_id}")
        confidence = values[4]
        if not 0.0 <= confidence <= 1.0:
            raise InputError(f"line {lineno}: confidence {confidence} outside [0, 1]")
        records.append(DetectionRecord(image_id, class_id, *values[:4], confidence))
    return records


def load_detection_dirs(preds_dir, gts_dir):
    """Load filename-matched prediction and ground-truth directories."""
    preds_dir, gts_dir = Path(preds_dir), Path(gts_dir)
    preds = []
    gts = []
    for gt_path in sorted(gts_dir.glob("*.txt")):
        image_id = gt_path.stem
        for ann in parse_labels(gt_path.read_text()):
            gts.append(GroundTruth(image_id, ann.class_id, ann.cx, ann.cy, ann.w, ann.h))
        pred_path = preds_dir / gt_path.name
        if pred_path.exists():
            preds.extend(parse_predictions(pred_path.read_text(), image_id))
    return preds, gts


def format_report(report: MetricsReport) -> str:
    """Human-readable table: one row per class plus an "All" row."""
    header = (
        f"{'class':<8} {'P':>7} {'R':>7} {'AP50':>7} {'AP50-95':>8} "
        f"{'GT':>6} {'TP':>6} {'FP':>6} {'conf':>6}"
    )
    lines = [header]
    for class_id in sorted(report.per_class):
        m = report.per_class[class_id]
        lines.append(
            f"{CLASS_NAMES[class_id]:<8} {m.precision:7.4f} {m.recall:7.4f} "
            f"{m.ap50:7.4f} {m.ap50_95:8.4f} {m.num_gt:6d} {m.tp:6d} {m.fp:6d} "
            f"{m.confidence_threshold:6.3f}"
        )
    a = report.aggregate
    lines.append(
        f"{'All':<8} {a.precision:7.4f} {a.recall:7.4f} {a.ap50:7.4f} "
        f"{a.ap50_95:8.4f} {a.num_gt:6d} {a.tp:6d} {a.fp:6d} {'':>6}"
    )
    return "\n".join(lines) + "\n"


def export_report(report: MetricsReport) -> str:
    """Machine-readable line export: "name precision recall ap50 ap50_95"."""
    lines = []
    for class_id in sorted(report.per_class):
        m = report.per_class[class_id]
        lines.append(
            f"{CLASS_NAMES[class_id]} {m.precision:.9f} {m.recall:.9f} "
            f"{m.ap50:.9f} {m.ap50_95:.9f}"
        )
    a = report.aggregate
    lines.append(f"all {a.precision:.9f} {a.recall:.9f} {a.ap50:.9f} {a.ap50_95:.9f}")
    return "\n".join(lines) + "\n"
