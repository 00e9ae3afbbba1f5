"""Semantic frontier features and the linear priority model.

The feature vector of a frontier blends a binary region indicator per class
(class observed anywhere in the frontier's region) with a binary local
indicator (class observed within a small radius and line of sight), and
appends a region-novelty bit that stays 1 until enough objects were observed
in the frontier's region.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import yaml

from .raycast import los_clear
from .simcore import WorldBelief
from .topo import Frontier

WEIGHTS_FORMAT_VERSION = 1


@dataclass
class SemanticsConfig:
    lam: float = 0.7               # region/local blend
    r_loc: float = 1.75            # meters; "small radius" for local features
    novelty_min_objects: int = 2   # region novelty drops once this many seen


@dataclass
class FeatureVector:
    phi_s: np.ndarray  # per-class blend, each in {0, 1-lam, lam, 1}
    phi_n: float       # region novelty bit

    @property
    def phi(self) -> np.ndarray:
        return np.concatenate([self.phi_s, [self.phi_n]])


@dataclass
class PriorityModel:
    """Weights over [per-class features..., region novelty]; w_I weighs the
    coverage gain inside the expert utility only."""
    w: np.ndarray
    w_I: float
    feature_names: list = field(default_factory=list)

    def clamped(self) -> "PriorityModel":
        return PriorityModel(np.clip(self.w, 0.0, 1.0), max(0.0, self.w_I),
                             self.feature_names)


def local_semantic(belief: WorldBelief, position, r_loc_cells: float) -> np.ndarray:
    """Binary per-class vector: class visible within r_loc of `position`.

    Only already-observed objects count; line of sight runs over the belief
    grid with known-occupied cells blocking.
    """
    scn = belief.scenario
    out = np.zeros(len(scn.class_names), dtype=np.float64)
    idxs = belief.observed_order
    if not idxs:
        return out
    y, x = int(position[0]), int(position[1])
    op = scn.obj_pos[idxs]
    d = np.hypot(op[:, 0] - y, op[:, 1] - x)
    blocking = belief.occupancy == -1
    for k in np.nonzero(d <= r_loc_cells + 1e-9)[0]:
        oi = idxs[int(k)]
        cidx = int(scn.obj_class[oi])
        if out[cidx] == 1.0:
            continue
        oy, ox = int(op[k, 0]), int(op[k, 1])
        if los_clear(blocking, y, x, oy, ox):
            out[cidx] = 1.0
    return out


def region_semantic(belief: WorldBelief, region_id: int, n_classes: int) -> np.ndarray:
    """Binary per-class vector: class observed in the given region."""
    out = np.zeros(n_classes, dtype=np.float64)
    for cidx in belief.region_classes.get(int(region_id), ()):
        out[cidx] = 1.0
    return out


def feature_vector(belief: WorldBelief, frontier: Frontier,
                   cfg: SemanticsConfig) -> FeatureVector:
    scn = belief.scenario
    r_loc_cells = cfg.r_loc / scn.cell_size
    loc = local_semantic(belief, frontier.position, r_loc_cells)
    reg = region_semantic(belief, frontier.region_id, len(scn.class_names))
    phi_s = cfg.lam * reg + (1.0 - cfg.lam) * loc
    count = belief.region_object_count.get(int(frontier.region_id), 0)
    phi_n = 1.0 if count < cfg.novelty_min_objects else 0.0
    return FeatureVector(phi_s=phi_s, phi_n=phi_n)


def priority(model: PriorityModel, fv: FeatureVector) -> float:
    return float(np.dot(model.w, fv.phi))


def augmented_features(fv: FeatureVector, gain: float, discount: float) -> np.ndarray:
    """Distance-discounted [phi, gain] vector used by the choice model."""
    return discount * np.concatenate([fv.phi, [gain]])


def feature_names(class_names: list) -> list:
    return list(class_names) + ["region_novelty"]


def dataset_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def save_model(model: PriorityModel, path, metadata: dict | None = None) -> None:
    doc = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "w": [float(v) for v in model.w],
        "w_I": float(model.w_I),
        "metadata": metadata or {},
    }
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=True)


def load_model(path) -> PriorityModel:
    with open(path) as f:
        doc = yaml.safe_load(f)
    if doc.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported weights format_version")
    names = [str(n) for n in doc["feature_names"]]
    w = np.array(doc["w"], dtype=np.float64)
    if len(w) != len(names):
        raise ValueError(f"{path}: weight vector length does not match feature names")
    return PriorityModel(w=w, w_I=float(doc["w_I"]), feature_names=names)
