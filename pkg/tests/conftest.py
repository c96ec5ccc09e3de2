import zlib

import numpy as np
import pytest

from fdakit import dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, height, width):
    return rng.random((height, width, 3))


def make_dataset(tmp_path, name, class_sets, image_size=(6, 8)):
    """Write a tiny images/labels tree; class_sets[i] lists the class ids
    present on image i. Returns the manifest."""
    from fdakit import imageio

    images_dir = tmp_path / name / "images"
    labels_dir = tmp_path / name / "labels"
    images_dir.mkdir(parents=True)
    labels_dir.mkdir(parents=True)
    gen = np.random.default_rng(zlib.crc32(name.encode()))
    records = []
    for i, classes in enumerate(class_sets):
        image_path = images_dir / f"{name}_{i:04d}.png"
        label_path = labels_dir / f"{name}_{i:04d}.txt"
        imageio.save_image(gen.random((*image_size, 3)), image_path)
        annotations = [
            dataset.Annotation(c, 0.3 + 0.1 * k, 0.4, 0.1, 0.2)
            for k, c in enumerate(classes)
        ]
        dataset.save_labels(annotations, label_path)
        records.append(dataset.ManifestRecord(str(image_path), str(label_path)))
    return records


def presence_table_manifest(tmp_path, name, num_images, red, green, yellow):
    """Label-only manifest where exactly `red`/`green`/`yellow` images contain
    each class (images may carry several classes, as in multiclass datasets)."""
    labels_dir = tmp_path / name
    labels_dir.mkdir(parents=True)
    records = []
    for i in range(num_images):
        annotations = []
        if i < red:
            annotations.append(dataset.Annotation(0, 0.5, 0.5, 0.1, 0.1))
        if i < green:
            annotations.append(dataset.Annotation(1, 0.6, 0.5, 0.1, 0.1))
        if num_images - i <= yellow:
            annotations.append(dataset.Annotation(2, 0.7, 0.5, 0.1, 0.1))
        label_path = labels_dir / f"{i:05d}.txt"
        dataset.save_labels(annotations, label_path)
        records.append(dataset.ManifestRecord(f"{name}/{i:05d}.png", str(label_path)))
    return records
