import json

import numpy as np
import pytest

from fundusloc.annotation import (
    AnnotationStore,
    DatasetManifest,
    ManifestImage,
    generate_proposals,
    load_manifest,
    read_ground_truth,
    save_manifest,
)
from fundusloc.errors import (
    EmptyDataset,
    InvalidBox,
    NotFound,
    StoreCorrupt,
    VersionConflict,
)
from fundusloc.geometry import BoundingBox
from fundusloc.localizer import LocalizerConfig


def tiny_manifest(n=3, w=200, h=150):
    return DatasetManifest("unit", tuple(
        ManifestImage(f"img_{i:02d}", f"images/img_{i:02d}.png", w, h)
        for i in range(n)))


def seeded_store(tmp_path, n=3, with_boxes=True):
    store = AnnotationStore(tiny_manifest(n), tmp_path / "store.jsonl")
    for i in range(n):
        box = BoundingBox(10 + i, 10, 30, 30) if with_boxes else None
        store.add_proposal(f"img_{i:02d}", box)
    return store


# -- manifest ------------------------------------------------------------------

def test_manifest_roundtrip(tmp_path):
    m = tiny_manifest()
    save_manifest(m, tmp_path / "m.json")
    assert load_manifest(tmp_path / "m.json") == m


def test_manifest_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        DatasetManifest("d", (ManifestImage("a", "a.png", 5, 5),
                              ManifestImage("a", "b.png", 5, 5)))


def test_manifest_rejects_bad_label():
    with pytest.raises(ValueError):
        ManifestImage("a", "a.png", 5, 5, label="suspect")


# -- proposals --------------------------------------------------------------------

def test_generate_proposals_counts(tmp_path, small_corpus):
    corpus_dir, corpus = small_corpus
    manifest = DatasetManifest(corpus.manifest.dataset_name,
                               corpus.manifest.images[:3])
    store = generate_proposals(manifest, LocalizerConfig(), tmp_path / "s.jsonl",
                               corpus_dir, durable=False)
    counts = store.progress()
    assert counts["total"] == 3
    assert counts["proposed"] == 3
    for rec in store.records():
        assert rec.status == "proposed"
        assert rec.proposed_box is not None
        assert rec.version == 0


def test_generate_proposals_degenerate_image(tmp_path):
    from PIL import Image

    (tmp_path / "images").mkdir()
    Image.new("RGB", (64, 64)).save(tmp_path / "images" / "black.png")
    manifest = DatasetManifest("d", (ManifestImage("black", "images/black.png", 64, 64),))
    store = generate_proposals(manifest, LocalizerConfig(), tmp_path / "s.jsonl", tmp_path)
    rec = store.get("black")
    assert rec.status == "rejected"
    assert rec.proposed_box is None
    assert "RetinaNotFound" in rec.note or "NoCandidateRegion" in rec.note


def test_generate_proposals_origa_scale_count(tmp_path):
    # 650 entries (482 healthy / 168 glaucoma), one record each
    from fundusloc import synth
    from fundusloc.imaging import StructuringElement, save_image

    (tmp_path / "images").mkdir()
    rng = np.random.default_rng([5, 1])
    scene = synth.sample_scene(rng, fringe_rate=0.0, spot_rate=0.0)
    save_image(synth.render_scene(scene, 300, 300), tmp_path / "images" / "shared.png")
    entries = tuple(
        ManifestImage(f"o{i:03d}", "images/shared.png", 300, 300,
                      "healthy" if i < 482 else "glaucoma")
        for i in range(650))
    cfg = LocalizerConfig(working_size=300, min_blob_area=4,
                          erode_se=StructuringElement("disk", 1),
                          dilate_se=StructuringElement("disk", 3))
    store = generate_proposals(DatasetManifest("origa-shaped", entries), cfg,
                               tmp_path / "s.jsonl", tmp_path, durable=False)
    counts = store.progress()
    assert counts["total"] == 650
    assert counts["proposed"] == 650
    assert len(store.records()) == 650


def test_generate_proposals_dimension_mismatch(tmp_path):
    from PIL import Image

    (tmp_path / "images").mkdir()
    Image.new("RGB", (64, 64)).save(tmp_path / "images" / "img.png")
    manifest = DatasetManifest("d", (ManifestImage("img", "images/img.png", 99, 64),))
    store = generate_proposals(manifest, LocalizerConfig(), tmp_path / "s.jsonl", tmp_path)
    rec = store.get("img")
    assert rec.status == "rejected"
    assert "decodes" in rec.note


def test_generate_proposals_unreadable_file(tmp_path):
    manifest = DatasetManifest("d", (ManifestImage("gone", "missing.png", 10, 10),))
    store = generate_proposals(manifest, LocalizerConfig(), tmp_path / "s.jsonl", tmp_path)
    rec = store.get("gone")
    assert rec.status == "rejected"
    assert rec.note


def test_generate_proposals_empty_manifest(tmp_path):
    with pytest.raises(EmptyDataset):
        generate_proposals(DatasetManifest("d", ()), LocalizerConfig(),
                           tmp_path / "s.jsonl", tmp_path)


# -- review decisions ----------------------------------------------------------------

def test_accept_sets_final_box(tmp_path):
    store = seeded_store(tmp_path)
    rec = store.apply_review("img_00", "accept", "drw")
    assert rec.status == "accepted"
    assert rec.final_box == rec.proposed_box
    assert rec.reviewer == "drw" and rec.reviewed_at is not None
    assert rec.version == 1


def test_correct_stores_box_verbatim(tmp_path):
    store = seeded_store(tmp_path)
    shifted = BoundingBox(20, 20, 30, 30)
    rec = store.apply_review("img_00", "correct", "drw", box=shifted)
    assert rec.status == "corrected"
    assert rec.final_box == shifted
    assert rec.proposed_box == BoundingBox(10, 10, 30, 30)


def test_reject_clears_final_box(tmp_path):
    store = seeded_store(tmp_path)
    store.apply_review("img_01", "accept", "drw")
    rec = store.apply_review("img_01", "reject", "drw")
    assert rec.status == "rejected"
    assert rec.final_box is None
    assert rec.version == 2


def test_identical_decision_is_noop(tmp_path):
    store = seeded_store(tmp_path)
    first = store.apply_review("img_00", "accept", "drw")
    again = store.apply_review("img_00", "accept", "drw")
    assert again == first
    assert again.reviewed_at == first.reviewed_at
    assert again.version == first.version
    # identical retry with a stale version token also succeeds
    assert store.apply_review("img_00", "accept", "drw", version=0) == first


def test_unknown_image_rejected(tmp_path):
    store = seeded_store(tmp_path)
    with pytest.raises(NotFound):
        store.apply_review("nope", "accept", "drw")


def test_correct_requires_valid_box(tmp_path):
    store = seeded_store(tmp_path)
    with pytest.raises(InvalidBox):
        store.apply_review("img_00", "correct", "drw")  # no box
    with pytest.raises(InvalidBox):
        BoundingBox(0, 0, 0, 10)  # zero area is unconstructible
    with pytest.raises(InvalidBox):
        # exceeds the 200x150 manifest dimensions
        store.apply_review("img_00", "correct", "drw", box=BoundingBox(190, 10, 30, 30))
    with pytest.raises(InvalidBox):
        # equal to the proposal: that is an accept
        store.apply_review("img_00", "correct", "drw", box=BoundingBox(10, 10, 30, 30))


def test_version_conflict(tmp_path):
    store = seeded_store(tmp_path)
    store.apply_review("img_00", "accept", "ann")
    with pytest.raises(VersionConflict) as exc:
        store.apply_review("img_00", "reject", "ben", version=0)
    assert exc.value.current_version == 1
    # correct version goes through
    rec = store.apply_review("img_00", "reject", "ben", version=1)
    assert rec.status == "rejected"


def test_from_scratch_box_on_failed_proposal(tmp_path):
    store = seeded_store(tmp_path, with_boxes=False)
    rec = store.get("img_00")
    assert rec.status == "rejected"
    drawn = BoundingBox(5, 5, 40, 40)
    rec = store.apply_review("img_00", "correct", "drw", box=drawn)
    assert rec.status == "corrected" and rec.final_box == drawn
    with pytest.raises(InvalidBox):
        store.apply_review("img_01", "accept", "drw")  # nothing to accept


# -- progress and export ------------------------------------------------------------------

def test_progress_conservation(tmp_path):
    store = seeded_store(tmp_path, n=4)
    store.apply_review("img_00", "accept", "drw")
    store.apply_review("img_01", "reject", "drw")
    store.apply_review("img_02", "correct", "drw", box=BoundingBox(1, 1, 5, 5))
    counts = store.progress()
    assert counts["total"] == 4
    assert (counts["proposed"], counts["accepted"],
            counts["corrected"], counts["rejected"]) == (1, 1, 1, 1)
    assert sum(counts[s] for s in ("proposed", "accepted", "corrected", "rejected")) == 4


def test_export_filters_and_summarizes(tmp_path):
    import io

    store = seeded_store(tmp_path, n=4)
    store.apply_review("img_00", "accept", "drw")
    store.apply_review("img_01", "accept", "drw")
    store.apply_review("img_02", "reject", "drw")
    buf = io.StringIO()
    counts = store.export_ground_truth(buf)
    lines = [json.loads(l) for l in buf.getvalue().splitlines()]
    assert len(lines) == 3  # 2 boxes + summary
    assert {l["image_id"] for l in lines[:2]} == {"img_00", "img_01"}
    assert lines[-1]["summary"]["exported"] == 2
    assert counts["exported"] == 2


def test_export_prefers_corrected_box(tmp_path):
    import io

    store = seeded_store(tmp_path)
    fixed = BoundingBox(50, 40, 20, 20)
    store.apply_review("img_00", "correct", "drw", box=fixed)
    store.apply_review("img_01", "reject", "drw")
    buf = io.StringIO()
    store.export_ground_truth(buf)
    exported = [json.loads(l) for l in buf.getvalue().splitlines() if "summary" not in l]
    assert exported == [{"image_id": "img_00", "box": fixed.to_dict()}]


def test_export_empty_store(tmp_path):
    import io

    store = AnnotationStore(tiny_manifest(2), tmp_path / "s.jsonl")
    buf = io.StringIO()
    counts = store.export_ground_truth(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["summary"]["exported"] == 0
    assert counts["total"] == 0


def test_export_roundtrips_through_reader(tmp_path):
    store = seeded_store(tmp_path)
    store.apply_review("img_00", "accept", "drw")
    gt_path = tmp_path / "gt.jsonl"
    with open(gt_path, "w") as fh:
        store.export_ground_truth(fh)
    boxes = read_ground_truth(gt_path)
    assert boxes == {"img_00": BoundingBox(10, 10, 30, 30)}


# -- durability and replay ------------------------------------------------------------------

def test_replay_reconstructs_state(tmp_path):
    store = seeded_store(tmp_path, n=5)
    rng = np.random.default_rng(271)
    ids = [f"img_{i:02d}" for i in range(5)]
    for _ in range(60):
        image_id = ids[rng.integers(len(ids))]
        decision = ("accept", "reject", "correct")[rng.integers(3)]
        box = None
        if decision == "correct":
            box = BoundingBox(int(rng.integers(0, 100)), int(rng.integers(0, 80)),
                              int(rng.integers(1, 60)), int(rng.integers(1, 50)))
        try:
            store.apply_review(image_id, decision, "drw", box=box)
        except InvalidBox:
            pass
    replayed = AnnotationStore.open(tiny_manifest(5), tmp_path / "store.jsonl")
    assert replayed.state_snapshot() == store.state_snapshot()


def test_replay_tolerates_torn_final_line(tmp_path):
    store = seeded_store(tmp_path)
    store.apply_review("img_00", "accept", "drw")
    store.close()
    log = tmp_path / "store.jsonl"
    before = AnnotationStore.open(tiny_manifest(3), log).state_snapshot()
    with open(log, "a") as fh:
        fh.write('{"event":"review","image_id":"img_01","deci')  # torn write
    replayed = AnnotationStore.open(tiny_manifest(3), log)
    assert replayed.state_snapshot() == before


def test_replay_rejects_mid_log_corruption(tmp_path):
    store = seeded_store(tmp_path)
    store.close()
    log = tmp_path / "store.jsonl"
    lines = log.read_text().splitlines()
    lines[0] = "not json"
    log.write_text("\n".join(lines) + "\n")
    with pytest.raises(StoreCorrupt):
        AnnotationStore.open(tiny_manifest(3), log)
