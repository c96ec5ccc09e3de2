import math

import numpy as np
import pytest

from fdakit import dataset, imageio
from fdakit.errors import (
    LabelParseError,
    ManifestError,
    RebalanceError,
    SplitError,
    TaxonomyError,
)

from conftest import make_dataset, presence_table_manifest
from oracles import resize_bicubic_ref


class TestLabelParsing:
    def test_single_red_box(self):
        anns = dataset.parse_labels("0 0.5 0.5 0.1 0.2")
        assert anns == [dataset.Annotation(0, 0.5, 0.5, 0.1, 0.2)]

    def test_empty_text(self):
        assert dataset.parse_labels("") == []

    def test_whitespace_tolerant(self):
        anns = dataset.parse_labels("  1   0.2\t0.3  0.1 0.1  \n\n2 0.5 0.5 0.2 0.2\n")
        assert [a.class_id for a in anns] == [1, 2]

    def test_roundtrip_canonical(self, rng):
        for _ in range(20):
            anns = [
                dataset.Annotation(
                    int(rng.integers(0, 3)),
                    round(float(rng.uniform(0.1, 0.9)), 6),
                    round(float(rng.uniform(0.1, 0.9)), 6),
                    round(float(rng.uniform(0.01, 0.2)), 6),
                    round(float(rng.uniform(0.01, 0.2)), 6),
                )
                for _ in range(int(rng.integers(0, 5)))
            ]
            text = dataset.serialize_labels(anns)
            assert dataset.serialize_labels(dataset.parse_labels(text)) == text

    def test_malformed_line_reports_number(self):
        with pytest.raises(LabelParseError) as excinfo:
            dataset.parse_labels("0 0.5 0.5 0.1 0.2\n1 0.5 oops 0.1 0.2")
        assert excinfo.value.line_number == 2

    def test_class_out_of_range(self):
        with pytest.raises(TaxonomyError):
            dataset.parse_labels("5 0.5 0.5 0.1 0.2")


class TestTaxonomy:
    def test_excluded_class(self):
        tax = dataset.load_taxonomy("wait_on=EXCLUDE")
        assert dataset.map_class("wait_on", tax) is None

    def test_identity_lookup(self):
        tax = dataset.load_taxonomy("red=0\ngreen=1\nyellow=2")
        assert dataset.map_class("red", tax) == 0

    def test_lisa_style_lookup(self):
        tax = dataset.load_taxonomy("stop=0")
        assert dataset.map_class("stop", tax) == 0

    def test_unregistered_name_fails_loud(self):
        tax = dataset.load_taxonomy("stop=0")
        with pytest.raises(TaxonomyError):
            dataset.map_class("goForward", tax)

    def test_duplicate_entry_rejected(self):
        with pytest.raises(TaxonomyError):
            dataset.load_taxonomy("stop=0\nstop=1")

    def test_raw_label_mapping_drops_excluded(self):
        tax = dataset.load_taxonomy("stop=0\noff=EXCLUDE")
        anns = dataset.parse_raw_labels(
            "stop 0.5 0.5 0.1 0.1\noff 0.2 0.2 0.1 0.1", tax
        )
        assert [a.class_id for a in anns] == [0]


class TestClassStatistics:
    def test_empty_manifest_all_zero(self):
        stats = dataset.class_statistics([])
        assert stats.num_images == 0
        assert all(stats.presence_fraction(c) == 0.0 for c in range(3))

    def test_direct_counting(self, tmp_path):
        manifest = presence_table_manifest(tmp_path, "tiny", 3, red=2, green=0, yellow=1)
        stats = dataset.class_statistics(manifest)
        assert stats.presence_fraction(0) == pytest.approx(2 / 3)
        assert stats.presence_fraction(2) == pytest.approx(1 / 3)

    def test_multiclass_images_counted_once_per_class(self, tmp_path):
        manifest = presence_table_manifest(tmp_path, "multi", 4, red=4, green=4, yellow=0)
        stats = dataset.class_statistics(manifest)
        # fractions may sum past 100%
        assert stats.presence_fraction(0) + stats.presence_fraction(1) == 2.0


class TestAugmentations:
    def test_flip_moves_center_and_is_involution(self, rng):
        image = rng.random((6, 8, 3))
        anns = [dataset.Annotation(0, 0.3, 0.4, 0.1, 0.2)]
        flipped, fanns = dataset.flip_horizontal(image, anns)
        assert fanns[0].cx == pytest.approx(0.7)
        back, banns = dataset.flip_horizontal(flipped, fanns)
        np.testing.assert_array_equal(back, image)
        assert banns[0].cx == pytest.approx(anns[0].cx)
        assert (banns[0].cy, banns[0].w, banns[0].h) == (0.4, 0.1, 0.2)

    def test_brightness_leaves_annotations_untouched(self, rng):
        image = rng.random((6, 8, 3))
        anns = [dataset.Annotation(1, 0.5, 0.5, 0.2, 0.2)]
        spec = dataset.AugSpec(horizontal_flip=False, probability=1.0,
                               shear_degrees=(0.0, 0.0), blur_kernel_max=1)
        # probability 1 applies brightness/contrast (and no-op shear/blur)
        out_image, out_anns = dataset.augment_image(image, anns, spec, rng)
        assert out_anns == anns

    def test_shear_box_matches_corner_oracle(self, rng):
        h, w = 100, 160
        for _ in range(50):
            ann = dataset.Annotation(
                0,
                float(rng.uniform(0.2, 0.8)),
                float(rng.uniform(0.2, 0.8)),
                float(rng.uniform(0.05, 0.3)),
                float(rng.uniform(0.05, 0.3)),
            )
            deg = float(rng.uniform(0.0, 20.0))
            out = dataset.shear_box(ann, deg, h, w)
            s = math.tan(math.radians(deg))
            xs, ys = [], []
            for dx in (-ann.w / 2, ann.w / 2):
                for dy in (-ann.h / 2, ann.h / 2):
                    x_px = (ann.cx + dx) * w
                    y_px = (ann.cy + dy) * h
                    xs.append(x_px + s * (y_px - h / 2))
                    ys.append(y_px)
            x0, x1 = max(0, min(xs)), min(w, max(xs))
            y0, y1 = max(0, min(ys)), min(h, max(ys))
            assert out.cx == pytest.approx((x0 + x1) / 2 / w)
            assert out.w == pytest.approx((x1 - x0) / w)
            assert out.cy == pytest.approx((y0 + y1) / 2 / h)
            assert out.h == pytest.approx((y1 - y0) / h)

    def test_degenerate_sheared_box_dropped(self):
        # box pushed fully off the right edge by the shear
        ann = dataset.Annotation(0, 0.99, 0.99, 0.01, 0.01)
        out = dataset.shear_box(ann, 45.0, 10, 10)
        assert out is None or out.w > 0

    def test_require_change_never_returns_identity(self, rng):
        image = rng.random((6, 8, 3))
        spec = dataset.AugSpec(probability=0.1)
        for _ in range(10):
            out, _ = dataset.augment_image(image, [], spec, rng, require_change=True)
            assert not np.array_equal(out, image)


class TestResize:
    def test_resize_to_own_size_is_identity(self, rng):
        image = rng.random((8, 10, 3))
        out, anns = dataset.resize_with_labels(image, [], out_h=8, out_w=10)
        np.testing.assert_array_equal(out, image)

    def test_annotations_unchanged(self, rng):
        image = rng.random((960, 1280, 3))[:96, :128]  # small stand-in
        anns = [dataset.Annotation(2, 0.5, 0.5, 0.25, 0.25)]
        _, out_anns = dataset.resize_with_labels(image, anns, out_h=108, out_w=128)
        assert out_anns == anns

    def test_checkerboard_matches_kernel_oracle(self):
        board = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.float64)
        image = np.repeat(board[:, :, None], 3, axis=2)
        out, _ = dataset.resize_with_labels(image, [], out_h=2, out_w=2)
        oracle = np.clip(resize_bicubic_ref(image, 2, 2), 0.0, 1.0)
        assert np.abs(out - oracle).max() < 1e-5

    def test_random_resizes_match_kernel_oracle(self, rng):
        for out_h, out_w in [(5, 7), (12, 4), (9, 9)]:
            image = rng.random((8, 6, 3))
            out, _ = dataset.resize_with_labels(image, [], out_h=out_h, out_w=out_w)
            oracle = np.clip(resize_bicubic_ref(image, out_h, out_w), 0.0, 1.0)
            assert np.abs(out - oracle).max() < 1e-5


class TestRebalance:
    def test_minimal_duplicates_closed_form(self):
        # 10 images, 1 yellow, target 13% -> one duplicate (2/11 ~ 18.2%)
        assert dataset.minimal_duplicates(10, 1, 0.13) == 1
        assert dataset.minimal_duplicates(10, 2, 0.13) == 0

    def test_already_balanced_manifest_unchanged(self, tmp_path, rng):
        manifest = make_dataset(tmp_path, "bal", [[2], [2], [0], [0], [1]])
        out = dataset.rebalance_yellow(
            manifest, 0.13, dataset.AugSpec(), seed=0, output_dir=tmp_path / "out"
        )
        assert out == manifest

    def test_rebalance_reaches_target(self, tmp_path):
        class_sets = [[0]] * 9 + [[2]]
        manifest = make_dataset(tmp_path, "imb", class_sets)
        out = dataset.rebalance_yellow(
            manifest, 0.13, dataset.AugSpec(), seed=3, output_dir=tmp_path / "out"
        )
        assert len(out) == 11
        stats = dataset.class_statistics(out)
        assert stats.presence_fraction(2) >= 0.13

    def test_only_appends_augmented_records(self, tmp_path):
        manifest = make_dataset(tmp_path, "app", [[0]] * 9 + [[2]])
        out = dataset.rebalance_yellow(
            manifest, 0.13, dataset.AugSpec(), seed=3, output_dir=tmp_path / "out"
        )
        assert out[: len(manifest)] == manifest
        assert all(r.provenance == "augmented" for r in out[len(manifest):])

    def test_deterministic_given_seed(self, tmp_path):
        manifest = make_dataset(tmp_path, "det", [[0]] * 9 + [[2]])
        a = dataset.rebalance_yellow(
            manifest, 0.13, dataset.AugSpec(), seed=5, output_dir=tmp_path / "a"
        )
        b = dataset.rebalance_yellow(
            manifest, 0.13, dataset.AugSpec(), seed=5, output_dir=tmp_path / "b"
        )
        img_a = imageio.load_image(a[-1].image_path)
        img_b = imageio.load_image(b[-1].image_path)
        np.testing.assert_array_equal(img_a, img_b)

    def test_no_yellow_images_is_an_error(self, tmp_path):
        manifest = make_dataset(tmp_path, "noy", [[0], [1], [0]])
        with pytest.raises(RebalanceError):
            dataset.rebalance_yellow(
                manifest, 0.13, dataset.AugSpec(), seed=0, output_dir=tmp_path / "out"
            )


class TestSplit:
    def _manifest(self, n):
        return [dataset.ManifestRecord(f"im{i}.png", f"im{i}.txt") for i in range(n)]

    def test_ten_records_split_7_2_1(self):
        out = dataset.split_dataset(self._manifest(10), seed=1)
        counts = {s: sum(1 for r in out if r.split == s) for s in ("train", "val", "test")}
        assert counts == {"train": 7, "val": 2, "test": 1}

    def test_degenerate_sizes_rejected(self):
        for n in (0, 1, 2):
            with pytest.raises(SplitError):
                dataset.split_dataset(self._manifest(n), seed=0)

    def test_same_seed_same_assignment(self):
        a = dataset.split_dataset(self._manifest(50), seed=9)
        b = dataset.split_dataset(self._manifest(50), seed=9)
        assert a == b

    def test_partition_is_disjoint_and_exhaustive(self):
        manifest = self._manifest(37)
        out = dataset.split_dataset(manifest, seed=4)
        assert [r.image_path for r in out] == [r.image_path for r in manifest]
        assert all(r.split in ("train", "val", "test") for r in out)
        n_val = sum(1 for r in out if r.split == "val")
        n_test = sum(1 for r in out if r.split == "test")
        assert n_val == int(0.2 * 37)
        assert n_test == int(0.1 * 37)

    def test_bad_ratios_rejected(self):
        with pytest.raises(SplitError):
            dataset.split_dataset(self._manifest(10), ratios=(0.5, 0.5, 0.5), seed=0)


class TestManifestIo:
    def test_roundtrip(self, tmp_path):
        records = [
            dataset.ManifestRecord("a.png", "a.txt", "original", "train"),
            dataset.ManifestRecord("b.png", "b.txt", "fda", "val"),
        ]
        path = tmp_path / "m.tsv"
        dataset.write_manifest(records, path)
        assert dataset.read_manifest(path) == records

    def test_duplicate_paths_rejected(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("a.png\ta.txt\toriginal\ttrain\na.png\tb.txt\toriginal\tval\n")
        with pytest.raises(ManifestError):
            dataset.read_manifest(path)

    def test_bad_provenance_rejected(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("a.png\ta.txt\tmystery\ttrain\n")
        with pytest.raises(ManifestError):
            dataset.read_manifest(path)


class TestMerge:
    def test_merges_with_taxonomy(self, tmp_path, rng):
        for name, lines in [
            ("lisa", "stop 0.5 0.5 0.1 0.1\ngoForward 0.2 0.2 0.1 0.1"),
            ("s2tld", "0 0.5 0.5 0.1 0.1\n2 0.6 0.6 0.1 0.1"),
        ]:
            (tmp_path / name / "images").mkdir(parents=True)
            (tmp_path / name / "labels").mkdir(parents=True)
            imageio.save_image(rng.random((4, 4, 3)), tmp_path / name / "images" / "x.png")
            (tmp_path / name / "labels" / "x.txt").write_text(lines)
        taxonomy = dataset.load_taxonomy("stop=0\ngoForward=1")
        manifest = dataset.merge_datasets(
            [
                ("lisa", tmp_path / "lisa/images", tmp_path / "lisa/labels", taxonomy),
                ("s2tld", tmp_path / "s2tld/images", tmp_path / "s2tld/labels", None),
            ],
            tmp_path / "merged",
        )
        assert len(manifest) == 2
        assert {r.image_path for r in manifest} == {
            str(tmp_path / "merged/images/lisa_x.png"),
            str(tmp_path / "merged/images/s2tld_x.png"),
        }
        lisa_anns = dataset.load_labels(manifest[0].label_path)
        assert [a.class_id for a in lisa_anns] == [0, 1]
