"""Trainer smoke tests: desk-scale runs plus interchange soundness.

The acceptance path trains all three models for 2 epochs on a 16-image
synthetic dataset, pushes every export back through the lofkit validators,
and composes segmenter output into a full evaluation report.
"""

import json
import logging
import time

import numpy as np
import pytest

from lofkit import dataio, synth
from lofkit.coverage import compute_coverage_soft
from lofkit.errors import SplitError, ValidationError
from lofkit.metrics import ScoredPrediction, compute_metrics, confusion_from_scored, emit_report
from lofkit.preprocess import export_channel_stack, read_rgb, stack_channels
from lofkit.rules import FIGURE1_DEFAULT, FoulingObservation, classify_lof
from lofkit_trainer import (
    TrainConfig,
    export_classifier_predictions,
    export_segmenter_probs,
    train_classifier,
    train_segmenter,
)
from lofkit_trainer.data import SegmentationDataset, load_channels

SMOKE_COUNTS = [1, 3, 3, 3, 3, 3]  # 16 images


@pytest.fixture(scope="session")
def smoke_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("trainer-data")
    manifest = synth.generate_dataset(SMOKE_COUNTS, root, seed=31, width=64, height=64)
    split = dataio.make_split(manifest, dataio.SplitSpec(train_fraction=0.8, seed=1))
    dataio.write_split(split, root / "split.json")
    return root, manifest, split


def smoke_config(model, **overrides):
    defaults = dict(model=model, epochs=2, batch_size=8, pretrained=False, seed=5)
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestConfig:
    def test_defaults_serialize_to_shared_hyperparameters(self):
        payload = TrainConfig().to_json()
        assert payload["epochs"] == 60
        assert payload["batch_size"] == 32
        assert payload["learning_rate"] == 0.001

    def test_round_trip(self):
        cfg = smoke_config("segformer", channels=("R", "G", "B", "H", "S", "V", "E"))
        assert TrainConfig.from_json(cfg.to_json()) == cfg

    def test_validation(self):
        with pytest.raises(ValidationError, match="unknown model"):
            TrainConfig(model="vgg")
        with pytest.raises(ValidationError):
            TrainConfig(epochs=0)


class TestDataContracts:
    def test_split_must_already_exist(self, smoke_dataset, tmp_path):
        root, _, _ = smoke_dataset
        with pytest.raises(SplitError, match="does not exist"):
            train_classifier(
                smoke_config("resnet18"), root / "manifest.jsonl",
                tmp_path / "nope.json", tmp_path / "ckpt", images_root=root,
            )

    def test_non_rgb_channels_require_stack_exports(self, smoke_dataset):
        root, manifest, _ = smoke_dataset
        record = manifest.records[0]
        with pytest.raises(ValidationError, match="needs channel-stack exports"):
            load_channels(record, ("R", "G", "B", "E"), root, None)

    def test_channel_spec_mismatch_with_exports(self, smoke_dataset, tmp_path):
        root, manifest, _ = smoke_dataset
        record = manifest.records[0]
        stacks = tmp_path / "stacks"
        image = read_rgb(root / record.path)
        export_channel_stack(stack_channels(image, ("R", "G", "B")), stacks / record.id)
        with pytest.raises(ValidationError, match="channel spec mismatch"):
            load_channels(record, ("R", "G", "B", "E"), root, stacks)

    def test_all_water_target_skipped_with_warning(self, tmp_path, caplog):
        masks_dir = tmp_path / "masks"
        images_dir = tmp_path / "images"
        masks_dir.mkdir()
        images_dir.mkdir()
        from lofkit.coverage import MaskRaster
        from lofkit.dataio import render_mask_rgb, write_mask
        from PIL import Image

        water = MaskRaster(np.zeros((8, 8), dtype=np.uint8))
        hull = MaskRaster(np.ones((8, 8), dtype=np.uint8))
        records = []
        for record_id, mask, label in (("all-water", water, 0), ("ok", hull, 0)):
            write_mask(mask, masks_dir / f"{record_id}.png")
            Image.fromarray(render_mask_rgb(mask)).save(images_dir / f"{record_id}.png")
            records.append(dataio.ImageRecord(id=record_id, path=f"images/{record_id}.png",
                                              lof_label=label))
        manifest = dataio.DatasetManifest(records=tuple(records))
        with caplog.at_level(logging.WARNING):
            dataset = SegmentationDataset(
                manifest, manifest.ids(), ("R", "G", "B"),
                images_root=tmp_path, masks_dir=masks_dir, image_size=8,
            )
        assert len(dataset) == 1
        assert "all-Water" in caplog.text


class TestDeterminism:
    def test_same_seed_same_first_epoch_loss(self, smoke_dataset, tmp_path):
        root, _, _ = smoke_dataset
        losses = []
        for name in ("a", "b"):
            cfg = smoke_config("resnet18", epochs=1)
            _, log = train_classifier(cfg, root / "manifest.jsonl", root / "split.json",
                                      tmp_path / name, images_root=root)
            losses.append(log.epoch_losses[0])
        # observed delta on CPU is 0.0; the contract allows up to 1e-6
        assert abs(losses[0] - losses[1]) <= 1e-6


class TestSevenChannelInput:
    def test_segmenter_consumes_full_stack_without_shape_error(self, smoke_dataset, tmp_path):
        root, manifest, split = smoke_dataset
        channels = ("R", "G", "B", "H", "S", "V", "E")
        stacks = tmp_path / "stacks"
        for record in manifest.records:
            image = read_rgb(root / record.path)
            export_channel_stack(stack_channels(image, channels), stacks / record.id)
        cfg = smoke_config("segformer", epochs=1, channels=channels)
        checkpoint, log = train_segmenter(
            cfg, root / "manifest.jsonl", root / "split.json", root / "masks",
            tmp_path / "ckpt", images_root=root, stacks_dir=stacks,
        )
        assert np.isfinite(log.epoch_losses).all()
        paths = export_segmenter_probs(checkpoint, manifest, split.test_ids[:2],
                                       tmp_path / "probs", images_root=root,
                                       stacks_dir=stacks)
        for path in paths:
            dataio.read_probs(path)

    def test_classifier_first_conv_widened(self, smoke_dataset, tmp_path):
        root, _, _ = smoke_dataset
        channels = ("R", "G", "B", "H", "S", "V", "E")
        stacks = tmp_path / "stacks"
        manifest = dataio.load_manifest(root / "manifest.jsonl")
        for record in manifest.records:
            image = read_rgb(root / record.path)
            export_channel_stack(stack_channels(image, channels), stacks / record.id)
        cfg = smoke_config("resnet18", epochs=1, channels=channels)
        _, log = train_classifier(cfg, root / "manifest.jsonl", root / "split.json",
                                  tmp_path / "ckpt", images_root=root, stacks_dir=stacks)
        assert np.isfinite(log.epoch_losses).all()


def test_trainer_smoke_all_models(smoke_dataset, tmp_path, caplog):
    """Secondary acceptance: 2-epoch runs, validated exports, full composition."""
    root, manifest, split = smoke_dataset
    truth = manifest.labels()
    start = time.perf_counter()

    # classifiers: train, export, reload through lofkit with zero warnings
    for model in ("resnet18", "resnet50"):
        checkpoint, log = train_classifier(
            smoke_config(model), root / "manifest.jsonl", root / "split.json",
            tmp_path / model, images_root=root,
        )
        assert len(log.epoch_losses) == 2
        assert np.isfinite(log.epoch_losses).all()
        csv_path = tmp_path / f"{model}.csv"
        export_classifier_predictions(checkpoint, manifest, split.test_ids, csv_path,
                                      images_root=root)
        with caplog.at_level(logging.WARNING):
            caplog.clear()
            records = dataio.load_predictions(csv_path, known_ids=set(truth))
            assert not caplog.records
        assert len(records) == len(split.test_ids)

    # segmenter: train, export probability rasters, validate quantized simplex
    checkpoint, log = train_segmenter(
        smoke_config("segformer"), root / "manifest.jsonl", root / "split.json",
        root / "masks", tmp_path / "segformer", images_root=root,
    )
    assert len(log.epoch_losses) == 2 and len(log.per_class_iou) == 2
    prob_paths = export_segmenter_probs(checkpoint, manifest, split.test_ids,
                                        tmp_path / "probs", images_root=root)
    rasters = {}
    for path in prob_paths:
        raster = dataio.read_probs(path)
        assert np.abs(raster.probs.sum(axis=2) - 1.0).max() <= 4 / 65535
        rasters[path.stem] = raster

    # compose: probabilities -> coverage -> LoF -> full eval report
    scored = []
    for image_id, raster in sorted(rasters.items()):
        report = compute_coverage_soft(raster, mode="expected")
        rank = classify_lof(FoulingObservation.from_coverage(report), FIGURE1_DEFAULT)
        scored.append(ScoredPrediction(image_id=image_id, top1=rank))
    metrics = compute_metrics(truth, scored)
    assert metrics.n_total == len(split.test_ids)
    matrix = confusion_from_scored(truth, scored)
    written = emit_report(metrics, matrix, tmp_path / "report")
    assert all(p.exists() for p in written)
    payload = json.loads((tmp_path / "report" / "report.json").read_text())
    assert payload["metrics"]["classification_rate"] == 1.0

    elapsed = time.perf_counter() - start
    assert elapsed < 600.0, f"smoke run took {elapsed:.0f}s"
