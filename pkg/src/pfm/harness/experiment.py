"""End-to-end identification experiment on a dataset described by a manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import persons
from ..background import localize_by_background
from ..classify import OvaModel, Prediction, majority_vote, predict, train_ova
from ..encode import (HIGH_LEVEL, LOW_LEVEL, GmmModel, PcaModel, PyramidConfig, apply_pca,
                      fit_gmm, fit_pca, pfm_encode, subsequence_windows)
from ..media import FrameSequence, load_sequence, mirror_sequence
from ..tracklets import DcsDescriptor, extract
from .config import ExperimentConfig, feature_mask, selected_split
from .dataset import UB_PARAMS, SequenceRecord, read_manifest

log = logging.getLogger(__name__)

# config keys that change how, not what, is computed
EXECUTION_ONLY = ("workers",)


@dataclass
class SequenceFeatures:
    key: Tuple[str, str, str]
    mirrored: bool
    n_frames: int
    track: Optional[persons.PersonTrack]
    descriptors: List[DcsDescriptor]
    n_tracklets: int = 0
    n_tracks: int = 0


@dataclass
class ModelBundle:
    gmm: GmmModel
    ova: OvaModel
    pca_low: Optional[PcaModel] = None
    pca_high: Optional[PcaModel] = None
    features: str = "ft1111"
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    config_text: str = ""


# ---------------------------------------------------------------- extraction

def frame_detections(record: SequenceRecord, seq: FrameSequence, cfg: ExperimentConfig,
                     ub_params: persons.TransformParams,
                     tracking: persons.TrackingParams) -> List[List[persons.BoundingBox]]:
    if cfg.detections == "background":
        return localize_by_background(seq, min(cfg.bg_train_frames, len(seq)))
    if record.detections is None or not Path(record.detections).is_file():
        raise FileNotFoundError(f"missing detections for sequence {'/'.join(record.key)}")
    raw = persons.read_detections(record.detections)
    ordinal = {f.index: i for i, f in enumerate(seq.frames)}
    out = []
    for i, fr in enumerate(seq.frames):
        boxes = raw.get(fr.index, [])
        if seq.mirrored:
            boxes = [b.mirrored(seq.width) for b in boxes]
        fbs = [b for b in boxes if b.kind == persons.FULL_BODY]
        ubs = [b for b in boxes if b.kind == persons.UPPER_BODY]
        fused = persons.fuse_frame(fbs, ubs, ub_params, tracking)
        out.append([persons.BoundingBox(b.cx, b.cy, b.w, b.h, b.score, b.kind, ordinal[fr.index])
                    for b in fused])
    return out


def load_ub_params(root) -> persons.TransformParams:
    path = Path(root) / UB_PARAMS
    return persons.read_transform_params(path) if path.is_file() else persons.TransformParams()


def process_sequence(record: SequenceRecord, cfg: ExperimentConfig, mirrored: bool = False) -> SequenceFeatures:
    """Tracklets of the dominant person track of one recorded sequence."""
    seq = load_sequence(record.frames, record.camera, record.subject, record.trajectory)
    if mirrored:
        seq = mirror_sequence(seq)
    tracking = persons.TrackingParams()
    dets = frame_detections(record, seq, cfg, load_ub_params(cfg.dataset_root), tracking)
    tracks = persons.build_tracks(dets, tracking)
    tracks = persons.link_tracks(tracks, seq, tracking.chi2_max, tracking.hist_bins)
    tracklets, descs = extract(seq, cfg.tracklet_params)
    by_id = {id(t): d for t, d in zip(tracklets, descs)}
    kept = persons.filter_tracklets(tracklets, tracks, len(seq))
    feat = SequenceFeatures(record.key, mirrored, len(seq), None, [], len(tracklets), len(tracks))
    if not kept:
        return feat
    counts: Dict[str, int] = defaultdict(int)
    for _, tid in kept:
        counts[tid] += 1
    order = {t.track_id: i for i, t in enumerate(tracks)}
    score = {t.track_id: t.mean_score for t in tracks}
    best = max(counts, key=lambda tid: (counts[tid], score[tid], -order[tid]))
    feat.track = next(t for t in tracks if t.track_id == best)
    feat.descriptors = [by_id[id(t)] for t, tid in kept if tid == best]
    return feat


def _process(args):
    record, cfg, mirrored = args
    return process_sequence(record, cfg, mirrored)


def extract_all(jobs: Sequence[Tuple[SequenceRecord, bool]], cfg: ExperimentConfig,
                cache: Optional[dict] = None) -> List[SequenceFeatures]:
    """Process (record, mirrored) jobs; results follow job order regardless of workers."""
    cache = {} if cache is None else cache
    todo = [(r, m) for r, m in jobs if (r.key, m) not in cache]
    if todo:
        args = [(r, cfg, m) for r, m in todo]
        if cfg.workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_process, args, chunksize=1))
        else:
            results = [_process(a) for a in args]
        for (r, m), res in zip(todo, results):
            cache[(r.key, m)] = res
    return [cache[(r.key, m)] for r, m in jobs]


# ---------------------------------------------------------------- encoding

def _windows(feat: SequenceFeatures, pyramid: PyramidConfig):
    """(descriptor subset, span) per temporal window with at least one tracklet."""
    out = []
    mids = np.array([d.mid_frame for d in feat.descriptors])
    for s, e in subsequence_windows(feat.n_frames, pyramid.subseq_len, pyramid.subseq_overlap):
        sel = [d for d, m in zip(feat.descriptors, mids) if s <= m < e]
        if sel:
            out.append((sel, (s, e) if pyramid.subseq_len else None))
    return out


def encode_sequence(feat: SequenceFeatures, gmm: GmmModel, pca_low: Optional[PcaModel],
                    pyramid: PyramidConfig, mask: np.ndarray) -> List[np.ndarray]:
    if feat.track is None or not feat.descriptors:
        return []
    vecs = []
    for descs, span in _windows(feat, pyramid):
        pfm = pfm_encode([(d, feat.track.track_id) for d in descs], feat.track, gmm, pca_low,
                         pyramid, mask, span)
        vecs.append(pfm.vector)
    return vecs


def pyramid_of(cfg: ExperimentConfig) -> PyramidConfig:
    return PyramidConfig(cfg.pyramid, cfg.temporal_cells, cfg.subseq_len, cfg.subseq_overlap)


def fit_bundle(train: Sequence[SequenceFeatures], dictionary: Sequence[SequenceFeatures],
               cfg: ExperimentConfig, timings: Optional[dict] = None) -> ModelBundle:
    """PCAL, GMM, PCAH and classifiers from training (and dictionary) sequences only."""
    timings = {} if timings is None else timings
    mask = feature_mask(cfg.features, cfg.tracklet_params)
    pyramid = pyramid_of(cfg)
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    X = np.concatenate([np.stack([d.full for d in f.descriptors]) for f in dictionary if f.descriptors])
    X = X[:, mask]
    if len(X) > cfg.max_fit_descriptors:
        X = X[np.sort(rng.choice(len(X), cfg.max_fit_descriptors, replace=False))]
    pca_low = None
    if cfg.pcal is not None:
        split = selected_split(cfg.features, cfg.tracklet_params) if isinstance(cfg.pcal, float) else None
        pca_low = fit_pca(X, cfg.pcal, LOW_LEVEL, split)
        X = apply_pca(X, pca_low)
    gmm = fit_gmm(X, cfg.K, seed=cfg.seed)
    timings["dictionary"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    samples = []
    for f in train:
        for v in encode_sequence(f, gmm, pca_low, pyramid, mask):
            samples.append((v, f.key[0]))
    if not samples:
        raise ValueError("no training sequence produced a descriptor")
    timings["encode_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pca_high = None
    if cfg.pcah is not None:
        pca_high = fit_pca(np.stack([v for v, _ in samples]), cfg.pcah, HIGH_LEVEL)
        samples = [(apply_pca(v, pca_high), lbl) for v, lbl in samples]
    ova = train_ova(samples, C=cfg.C, seed=cfg.seed)
    timings["classifier"] = time.perf_counter() - t0
    return ModelBundle(gmm, ova, pca_low, pca_high, cfg.features, pyramid, cfg.to_text())


def predict_sequence(feat: SequenceFeatures, bundle: ModelBundle) -> Optional[Prediction]:
    mask = feature_mask(bundle.features)
    vecs = encode_sequence(feat, bundle.gmm, bundle.pca_low, bundle.pyramid, mask)
    if not vecs:
        return None
    preds = []
    for v in vecs:
        if bundle.pca_high is not None:
            v = apply_pca(v, bundle.pca_high)
        preds.append(predict(bundle.ova, v))
    if len(preds) == 1:
        return preds[0]
    mean_scores = tuple(float(s) for s in np.mean([p.scores for p in preds], axis=0))
    return Prediction(majority_vote(preds), mean_scores, preds[0].labels)


# ---------------------------------------------------------------- reporting

@dataclass
class SequenceResult:
    subject: str
    trajectory: str
    camera: str
    predicted: str  # empty when no descriptor could be computed
    prediction: Optional[Prediction] = None

    @property
    def correct(self) -> bool:
        return self.predicted == self.subject


@dataclass
class MetricsReport:
    per_camera: Dict[str, float]
    multiview: float
    confusion: Dict[str, Dict[str, int]]
    sequences: List[SequenceResult]
    instances: List[Tuple[str, str, str]]  # subject, trajectory, voted label
    config_text: str = ""
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def per_camera_average(self) -> float:
        return float(np.mean(list(self.per_camera.values()))) if self.per_camera else 0.0

    @property
    def single_view(self) -> float:
        """Accuracy over all test sequences pooled across cameras."""
        return 100.0 * float(np.mean([r.correct for r in self.sequences])) if self.sequences else 0.0

    @classmethod
    def from_results(cls, results: Sequence[SequenceResult], config_text: str = "",
                     timings: Optional[dict] = None) -> "MetricsReport":
        results = sorted(results, key=lambda r: (r.subject, r.trajectory, r.camera))
        by_cam: Dict[str, List[bool]] = defaultdict(list)
        confusion: Dict[str, Dict[str, int]] = defaultdict(lambda: defaultdict(int))
        groups: Dict[Tuple[str, str], List[Prediction]] = defaultdict(list)
        for r in results:
            by_cam[r.camera].append(r.correct)
            confusion[r.subject][r.predicted or "-"] += 1
            groups.setdefault((r.subject, r.trajectory), [])
            if r.prediction is not None:
                groups[(r.subject, r.trajectory)].append(r.prediction)
        instances = []
        for (subj, traj), preds in sorted(groups.items()):
            instances.append((subj, traj, majority_vote(preds) if preds else ""))
        multiview = 100.0 * np.mean([lbl == s for s, _, lbl in instances]) if instances else 0.0
        per_camera = {c: 100.0 * float(np.mean(v)) for c, v in sorted(by_cam.items())}
        conf = {k: dict(sorted(v.items())) for k, v in sorted(confusion.items())}
        return cls(per_camera, float(multiview), conf, list(results), instances,
                   config_text, dict(timings or {}))

    def to_dict(self, with_timings: bool = True) -> dict:
        d = {
            "per_camera": self.per_camera,
            "per_camera_average": self.per_camera_average,
            "multiview": self.multiview,
            "confusion": self.confusion,
            "sequences": [
                {"subject": r.subject, "trajectory": r.trajectory, "camera": r.camera,
                 "predicted": r.predicted, "correct": r.correct,
                 "scores": list(r.prediction.scores) if r.prediction else None}
                for r in self.sequences
            ],
            "instances": [list(i) for i in self.instances],
            "config": self.config_text,
        }
        if with_timings:
            d["timings"] = self.timings
        return d

    def fingerprint(self) -> str:
        """Hash of the results and config echo; timings and worker count are excluded."""
        d = self.to_dict(with_timings=False)
        d["config"] = "".join(l for l in self.config_text.splitlines(True)
                              if l.split("=")[0].strip() not in EXECUTION_ONLY)
        blob = json.dumps(d, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subject", "trajectory", "camera", "predicted", "correct"])
        for r in self.sequences:
            w.writerow([r.subject, r.trajectory, r.camera, r.predicted, int(r.correct)])
        return buf.getvalue()

    def to_table(self) -> str:
        lines = ["camera    accuracy(%)   n"]
        counts = defaultdict(int)
        for r in self.sequences:
            counts[r.camera] += 1
        for cam, acc in self.per_camera.items():
            lines.append(f"{cam:<9} {acc:>10.1f}   {counts[cam]}")
        lines.append(f"{'avg':<9} {self.per_camera_average:>10.1f}")
        lines.append(f"{'multiview':<9} {self.multiview:>10.1f}   {len(self.instances)}")
        if self.timings:
            lines.append("timings (s): " + ", ".join(f"{k}={v:.1f}" for k, v in self.timings.items()))
        return "\n".join(lines)


def evaluate(bundle: ModelBundle, test: Sequence[SequenceFeatures], config_text: str = "",
             timings: Optional[dict] = None) -> MetricsReport:
    results = []
    for f in test:
        p = predict_sequence(f, bundle)
        results.append(SequenceResult(f.key[0], f.key[1], f.key[2], p.label if p else "", p))
    return MetricsReport.from_results(results, config_text or bundle.config_text, timings)


# ---------------------------------------------------------------- drivers

def select_records(cfg: ExperimentConfig) -> List[SequenceRecord]:
    recs = read_manifest(cfg.dataset_root)
    if cfg.cameras:
        recs = [r for r in recs if r.camera in cfg.cameras]
    return recs


def _jobs(records, trajectories, mirror):
    jobs = [(r, False) for r in records if r.trajectory in trajectories]
    if mirror:
        jobs += [(r, True) for r in records if r.trajectory in trajectories]
    return jobs


def train_from_config(cfg: ExperimentConfig, cache: Optional[dict] = None,
                      timings: Optional[dict] = None) -> ModelBundle:
    timings = {} if timings is None else timings
    records = select_records(cfg)
    t0 = time.perf_counter()
    train_jobs = _jobs(records, cfg.train_trajectories, cfg.mirror)
    dict_jobs = _jobs(records, cfg.dictionary_trajectories, cfg.mirror)
    if not train_jobs:
        raise ValueError("training split is empty")
    train = extract_all(train_jobs, cfg, cache)
    dictionary = extract_all(dict_jobs, cfg, cache)
    timings["extract_train"] = time.perf_counter() - t0
    return fit_bundle(train, dictionary, cfg, timings)


def evaluate_from_config(bundle: ModelBundle, cfg: ExperimentConfig, cache: Optional[dict] = None,
                         timings: Optional[dict] = None) -> MetricsReport:
    timings = {} if timings is None else timings
    records = select_records(cfg)
    test_jobs = _jobs(records, cfg.test_trajectories, False)
    if not test_jobs:
        raise ValueError("test split is empty")
    t0 = time.perf_counter()
    test = extract_all(test_jobs, cfg, cache)
    timings["extract_test"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    report = evaluate(bundle, test, cfg.to_text(), timings)
    timings["predict"] = time.perf_counter() - t0
    report.timings = dict(timings)
    return report


def run_experiment(cfg: ExperimentConfig, cache: Optional[dict] = None) -> MetricsReport:
    timings: Dict[str, float] = {}
    bundle = train_from_config(cfg, cache, timings)
    return evaluate_from_config(bundle, cfg, cache, timings)


def run_rotation(cfg: ExperimentConfig, cache: Optional[dict] = None):
    """Leave-one-trajectory-out over every trajectory in the dataset.

    Returns (per-fold reports, pooled report).
    """
    cache = {} if cache is None else cache
    trajs = sorted({r.trajectory for r in select_records(cfg)})
    if len(trajs) < 2:
        raise ValueError("rotation needs at least two trajectories")
    folds = []
    for held in trajs:
        fold_cfg = cfg.replace(train_trajectories=tuple(t for t in trajs if t != held),
                               test_trajectories=(held,), dict_trajectories=())
        folds.append(run_experiment(fold_cfg, cache))
    pooled = MetricsReport.from_results([r for f in folds for r in f.sequences], cfg.to_text(),
                                        {k: sum(f.timings.get(k, 0.0) for f in folds)
                                         for k in folds[0].timings})
    return folds, pooled
