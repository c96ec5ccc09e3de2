"""Source-dataset construction: labels, taxonomy mapping, merging,
box-aware augmentation, yellow-class rebalancing, resizing and splitting.

Label files are plain text, one box per line: "class cx cy w h" with
coordinates normalized to [0, 1]. Manifests are TSV lines
"image_path<TAB>label_path<TAB>provenance<TAB>split".
"""

import dataclasses
import math
import shutil
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from fdakit.errors import (
    LabelParseError,
    ManifestError,
    RebalanceError,
    SplitError,
    TaxonomyError,
)
from fdakit.imageio import resize_bicubic
from fdakit.weather import derive_seed

CLASS_RED = 0
CLASS_GREEN = 1
CLASS_YELLOW = 2
CLASS_NAMES = {CLASS_RED: "red", CLASS_GREEN: "green", CLASS_YELLOW: "yellow"}

PROVENANCES = ("original", "augmented", "fda", "weather", "pseudo")
SPLITS = ("train", "val", "test", "unassigned")

#: Fraction of yellow-containing images the merged dataset is rebalanced to.
DEFAULT_YELLOW_FRACTION = 0.13
DEFAULT_SPLIT_RATIOS = (0.7, 0.2, 0.1)
DEFAULT_OUT_HEIGHT = 1080
DEFAULT_OUT_WIDTH = 1280

EXCLUDE = "EXCLUDE"


@dataclass(frozen=True)
class Annotation:
    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def validate(self) -> None:
        if self.class_id not in CLASS_NAMES:
            raise TaxonomyError(f"class id {self.class_id} outside {{0,1,2}}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise LabelParseError(f"box center ({self.cx}, {self.cy}) outside [0,1]")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise LabelParseError(f"box size ({self.w}, {self.h}) outside (0,1]")


@dataclass
class ManifestRecord:
    image_path: str
    label_path: str
    provenance: str = "original"
    split: str = "unassigned"


# ---------------------------------------------------------------------------
# Label files


def parse_labels(text: str):
    """Parse one annotation per non-empty line of "class cx cy w h"."""
    annotations = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise LabelParseError(
                f"line {lineno}: expected 5 fields, got {len(parts)}", lineno
            )
        try:
            class_id = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise LabelParseError(f"line {lineno}: {exc}", lineno) from None
        if class_id not in CLASS_NAMES:
            raise TaxonomyError(f"line {lineno}: class id {class_id} outside {{0,1,2}}")
        annotations.append(Annotation(class_id, *values))
    return annotations


def serialize_labels(annotations) -> str:
    lines = [
        f"{a.class_id} {a.cx:.6f} {a.cy:.6f} {a.w:.6f} {a.h:.6f}" for a in annotations
    ]
    return "".join(line + "\n" for line in lines)


def load_labels(path) -> list:
    return parse_labels(Path(path).read_text())


def save_labels(annotations, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_labels(annotations))


# ---------------------------------------------------------------------------
# Taxonomy

@dataclass(frozen=True)
class TaxonomyMap:
    """Raw class name -> class id, or None for excluded classes."""

    entries: dict

    def __contains__(self, raw_name: str) -> bool:
        return raw_name in self.entries


def load_taxonomy(text: str) -> TaxonomyMap:
    """Parse "raw_name=class_id" / "raw_name=EXCLUDE" lines ('#' comments)."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LabelParseError(f"taxonomy line {lineno}: missing '='", lineno)
        raw, value = (part.strip() for part in line.split("=", 1))
        if raw in entries:
            raise TaxonomyError(f"taxonomy line {lineno}: duplicate entry {raw!r}")
        if value == EXCLUDE:
            entries[raw] = None
        else:
            try:
                class_id = int(value)
            except ValueError:
                raise LabelParseError(
                    f"taxonomy line {lineno}: bad class value {value!r}", lineno
                ) from None
            if class_id not in CLASS_NAMES:
                raise TaxonomyError(
                    f"taxonomy line {lineno}: class id {class_id} outside {{0,1,2}}"
                )
            entries[raw] = class_id
    return TaxonomyMap(entries)


def map_class(raw_name: str, taxonomy: TaxonomyMap):
    """Mapped class id, or None when the class is excluded. Unregistered
    names fail loud rather than being dropped silently."""
    if raw_name not in taxonomy.entries:
        raise TaxonomyError(f"class name {raw_name!r} not registered in taxonomy")
    return taxonomy.entries[raw_name]


def parse_raw_labels(text: str, taxonomy: TaxonomyMap):
    """Like parse_labels but the class field is a raw name mapped through
    `taxonomy`; excluded classes are dropped."""
    annotations = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise LabelParseError(
                f"line {lineno}: expected 5 fields, got {len(parts)}", lineno
            )
        class_id = map_class(parts[0], taxonomy)
        if class_id is None:
            continue
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise LabelParseError(f"line {lineno}: {exc}", lineno) from None
        annotations.append(Annotation(class_id, *values))
    return annotations


# ---------------------------------------------------------------------------
# Manifests


def read_manifest(path) -> list:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ManifestError(f"manifest line {lineno}: expected 4 fields")
        image_path, label_path, provenance, split = parts
        if provenance not in PROVENANCES:
            raise ManifestError(f"manifest line {lineno}: bad provenance {provenance!r}")
        if split not in SPLITS:
            raise ManifestError(f"manifest line {lineno}: bad split {split!r}")
        records.append(ManifestRecord(image_path, label_path, provenance, split))
    seen = set()
    for rec in records:
        if rec.image_path in seen:
            raise ManifestError(f"duplicate image path {rec.image_path}")
        seen.add(rec.image_path)
    return records


def write_manifest(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{r.image_path}\t{r.label_path}\t{r.provenance}\t{r.split}\n" for r in records
    ]
    path.write_text("".join(lines))


def merge_datasets(sources, out_dir) -> list:
    """Merge datasets into one normalized tree under `out_dir`.

    `sources` is a list of (name, images_dir, labels_dir, taxonomy-or-None).
    Label files with raw class names require a taxonomy; numeric label files
    pass through unchanged. Images are copied under a name-prefixed filename
    so merged paths stay unique.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    records = []
    for name, images_dir, labels_dir, taxonomy in sources:
        images_dir = Path(images_dir)
        labels_dir = Path(labels_dir)
        for image_path in sorted(images_dir.iterdir()):
            if image_path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            label_path = labels_dir / (image_path.stem + ".txt")
            text = label_path.read_text() if label_path.exists() else ""
            if taxonomy is not None:
                annotations = parse_raw_labels(text, taxonomy)
            else:
                annotations = parse_labels(text)
            stem = f"{name}_{image_path.stem}"
            out_image = out_dir / "images" / (stem + image_path.suffix.lower())
            out_label = out_dir / "labels" / (stem + ".txt")
            shutil.copyfile(image_path, out_image)
            save_labels(annotations, out_label)
            records.append(ManifestRecord(str(out_image), str(out_label)))
    return records


# ---------------------------------------------------------------------------
# Statistics


@dataclass(frozen=True)
class ClassStats:
    num_images: int
    presence_counts: dict   # class id -> images containing >= 1 instance
    instance_counts: dict   # class id -> total boxes

    def presence_fraction(self, class_id: int) -> float:
        if self.num_images == 0:
            return 0.0
        return self.presence_counts[class_id] / self.num_images


def class_statistics(manifest) -> ClassStats:
    """Per-class image-presence counts/fractions plus raw instance counts.

    An image containing several classes is counted once per class, so the
    presence fractions may sum past 100%.
    """
    presence = {c: 0 for c in CLASS_NAMES}
    instances = {c: 0 for c in CLASS_NAMES}
    for record in manifest:
        annotations = load_labels(record.label_path)
        present = set()
        for ann in annotations:
            instances[ann.class_id] += 1
            present.add(ann.class_id)
        for c in present:
            presence[c] += 1
    return ClassStats(len(manifest), presence, instances)


# ---------------------------------------------------------------------------
# Augmentation


@dataclass(frozen=True)
class AugSpec:
    horizontal_flip: bool = True
    brightness_limit: float = 0.2
    contrast_limit: float = 0.2
    shear_degrees: tuple = (0.0, 20.0)
    blur_kernel_max: int = 7
    probability: float = 0.5  # per-transform application probability

    def validate(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        if self.blur_kernel_max < 1 or self.blur_kernel_max % 2 == 0:
            raise ValueError("blur kernel limit must be odd and >= 1")


def flip_horizontal(image, annotations):
    flipped = np.ascontiguousarray(image[:, ::-1])
    new_annotations = [
        dataclasses.replace(a, cx=1.0 - a.cx) for a in annotations
    ]
    return flipped, new_annotations


def adjust_brightness_contrast(image, brightness: float, contrast: float):
    return np.clip(image * (1.0 + contrast) + brightness, 0.0, 1.0)


def blur(image, kernel_size: int):
    return np.clip(cv2.blur(image, (kernel_size, kernel_size)), 0.0, 1.0)


def shear_box(annotation, shear_deg: float, height: int, width: int):
    """Axis-aligned hull of the box's four corners under a horizontal shear
    about the image center, clipped to the image. None when degenerate."""
    s = math.tan(math.radians(shear_deg))
    if s == 0.0:
        return annotation
    cy_px = height / 2.0
    x0 = (annotation.cx - annotation.w / 2.0) * width
    x1 = (annotation.cx + annotation.w / 2.0) * width
    y0 = (annotation.cy - annotation.h / 2.0) * height
    y1 = (annotation.cy + annotation.h / 2.0) * height
    corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    xs = [x + s * (y - cy_px) for x, y in corners]
    ys = [y for _, y in corners]
    nx0 = max(0.0, min(xs))
    nx1 = min(float(width), max(xs))
    ny0 = max(0.0, min(ys))
    ny1 = min(float(height), max(ys))
    if nx1 - nx0 <= 0.0 or ny1 - ny0 <= 0.0:
        return None
    return dataclasses.replace(
        annotation,
        cx=(nx0 + nx1) / 2.0 / width,
        cy=(ny0 + ny1) / 2.0 / height,
        w=(nx1 - nx0) / width,
        h=(ny1 - ny0) / height,
    )


def shear_image(image, shear_deg: float):
    h, w = image.shape[:2]
    s = math.tan(math.radians(shear_deg))
    matrix = np.array([[1.0, s, -s * h / 2.0], [0.0, 1.0, 0.0]])
    warped = cv2.warpAffine(
        image, matrix, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT
    )
    return np.clip(warped, 0.0, 1.0)


def augment_image(image, annotations, spec: AugSpec, rng, require_change=False):
    """Apply the enabled transforms, each with spec.probability.

    Photometric transforms leave the boxes untouched; flip and shear move
    them. Boxes that degenerate under the shear clip are dropped. With
    require_change=True the transform mask is re-sampled until at least one
    transform fires, so duplicated images are never byte-identical.
    """
    spec.validate()
    while True:
        do_flip = spec.horizontal_flip and rng.random() < spec.probability
        do_bc = rng.random() < spec.probability
        do_shear = rng.random() < spec.probability
        do_blur = rng.random() < spec.probability
        if not require_change or do_flip or do_bc or do_shear or do_blur:
            break

    out_image = image
    out_annotations = list(annotations)
    if do_flip:
        out_image, out_annotations = flip_horizontal(out_image, out_annotations)
    if do_bc:
        b = rng.uniform(-spec.brightness_limit, spec.brightness_limit)
        c = rng.uniform(-spec.contrast_limit, spec.contrast_limit)
        out_image = adjust_brightness_contrast(out_image, b, c)
    if do_shear:
        deg = rng.uniform(*spec.shear_degrees)
        if deg != 0.0:
            h, w = out_image.shape[:2]
            out_image = shear_image(out_image, deg)
            sheared = [shear_box(a, deg, h, w) for a in out_annotations]
            out_annotations = [a for a in sheared if a is not None]
    if do_blur:
        choices = list(range(3, spec.blur_kernel_max + 1, 2)) or [1]
        k = int(choices[rng.integers(0, len(choices))])
        out_image = blur(out_image, k)
    if out_image is image:
        out_image = image.copy()
    return out_image, out_annotations


# ---------------------------------------------------------------------------
# Rebalancing, resizing, splitting


def minimal_duplicates(num_images: int, num_yellow: int, target_fraction: float) -> int:
    """Smallest k with (num_yellow + k) / (num_images + k) >= target_fraction."""
    if num_yellow / num_images >= target_fraction:
        return 0
    return math.ceil(
        (target_fraction * num_images - num_yellow) / (1.0 - target_fraction)
    )


def rebalance_yellow(manifest, target_fraction, spec, seed, output_dir):
    """Append augmented copies of yellow-containing images until the yellow
    image-presence fraction reaches `target_fraction`.

    New images/labels are written under output_dir/images and output_dir/labels
    with provenance "augmented". Existing records are never modified.
    """
    from fdakit import imageio

    if not 0.0 < target_fraction < 1.0:
        raise RebalanceError(f"target fraction must be in (0, 1), got {target_fraction}")
    if not manifest:
        raise RebalanceError("empty manifest")
    yellow_records = [
        r for r in manifest
        if any(a.class_id == CLASS_YELLOW for a in load_labels(r.label_path))
    ]
    if not yellow_records:
        raise RebalanceError("no yellow-containing images to duplicate")

    k = minimal_duplicates(len(manifest), len(yellow_records), target_fraction)
    if k == 0:
        return list(manifest)

    output_dir = Path(output_dir)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(yellow_records))
    new_records = list(manifest)
    for i in range(k):
        source = yellow_records[order[i % len(yellow_records)]]
        record_rng = np.random.default_rng(
            # keyed on the file name, not the full path, so moving the
            # dataset root does not change the augmentations
            derive_seed(seed, f"rebalance:{i}:{Path(source.image_path).name}")
        )
        image = imageio.load_image(source.image_path)
        annotations = load_labels(source.label_path)
        aug_image, aug_annotations = augment_image(
            image, annotations, spec, record_rng, require_change=True
        )
        stem = f"{Path(source.image_path).stem}_aug{i:04d}"
        image_path = output_dir / "images" / (stem + ".png")
        label_path = output_dir / "labels" / (stem + ".txt")
        imageio.save_image(aug_image, image_path)
        save_labels(aug_annotations, label_path)
        new_records.append(
            ManifestRecord(str(image_path), str(label_path), provenance="augmented")
        )
    return new_records


def resize_with_labels(image, annotations,
                       out_h=DEFAULT_OUT_HEIGHT, out_w=DEFAULT_OUT_WIDTH):
    """Bicubic resample; normalized boxes are resolution-independent under
    axis-wise scaling so the annotations come back unchanged."""
    return resize_bicubic(image, out_h, out_w), list(annotations)


def split_dataset(manifest, ratios=DEFAULT_SPLIT_RATIOS, seed=0):
    """Seeded shuffle, then contiguous train/val/test assignment with counts
    floor(r_i * N); rounding remainders go to train."""
    r_train, r_val, r_test = ratios
    if min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be positive and sum to 1, got {ratios}")
    n = len(manifest)
    if n < 3:
        raise SplitError(f"need at least 3 records to split, got {n}")
    n_val = int(r_val * n)
    n_test = int(r_test * n)
    n_train = n - n_val - n_test
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    split_of = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            split_of[idx] = "train"
        elif pos < n_train + n_val:
            split_of[idx] = "val"
        else:
            split_of[idx] = "test"
    return [
        dataclasses.replace(rec, split=split_of[i]) for i, rec in enumerate(manifest)
    ]
