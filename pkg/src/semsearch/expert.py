"""Expert frontier-choice model and the synthetic intervention oracle.

The expert scores each candidate frontier with a distance-discounted utility
(semantic priority plus weighted coverage gain) and chooses stochastically:
with probability 2*rho uniformly at random, otherwise by argmax of the
rationality-scaled utility perturbed with Gumbel noise. For two candidates
this reproduces the shifted-sigmoid pairwise choice probability exactly.

An intervention is issued when the sampled choice beats the planner's current
subgoal by more than the engagement threshold tau.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import DEFAULT_CHARACTERISTIC

DATASET_FORMAT_VERSION = 1


class ExpertError(Exception):
    pass


class InvalidIntervention(ExpertError):
    pass


@dataclass
class ExpertParams:
    beta: float = 25.0          # rationality; math.inf = deterministic argmax
    rho: float = 0.0            # residual error floor, in [0, 0.5]
    eps: float = 0.2            # minimum distance discount
    tau: float = 0.05           # intervention threshold on utility gap
    discount_kind: str = "linear"   # or "exponential"
    gamma: float = 0.1          # rate for the exponential discount

    def validate(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0.0 <= self.rho <= 0.5:
            raise ValueError("rho must be in [0, 0.5]")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.discount_kind not in ("linear", "exponential"):
            raise ValueError(f"unknown discount_kind {self.discount_kind!r}")


@dataclass(frozen=True)
class FrontierSnapshot:
    """Frozen per-candidate view taken at decision time; training and the
    oracle never touch the simulator again."""
    node_id: int
    position: tuple
    region_id: int
    gain: float
    dist: float        # meters through the graph from the robot node
    discount: float
    phi: np.ndarray
    phi_local: np.ndarray
    phi_region: np.ndarray
    phi_aug: np.ndarray


@dataclass
class ChoiceRecord:
    scenario_id: str
    timestep: int
    chosen_frontier_id: int
    candidates: list            # of (frontier_id, phi_aug ndarray, position)
    provenance: str = "oracle"  # or "human"
    revision: int | None = None


def discounts(dists: np.ndarray, params: ExpertParams) -> np.ndarray:
    """Distance-based discount per frontier given all frontier distances.

    Distances are normalized by the farthest frontier; when every frontier is
    at the robot (d_max = 0) the normalized distance is taken as 0 for all,
    keeping utilities finite.
    """
    d = np.asarray(dists, dtype=np.float64)
    dmax = d.max() if len(d) else 0.0
    dn = d / dmax if dmax > 0 else np.zeros_like(d)
    if params.discount_kind == "linear":
        return 1.0 - dn + params.eps
    return np.exp(-params.gamma * dn)


def sigma_rho(x, rho: float):
    """Shifted logistic with residual floor: (1 - 2 rho) sigma(x) + rho."""
    x = np.asarray(x, dtype=np.float64)
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.clip(x, -700, 700))),
                   np.exp(np.clip(x, -700, 700)) / (1.0 + np.exp(np.clip(x, -700, 700))))
    out = (1.0 - 2.0 * rho) * sig + rho
    return float(out) if out.ndim == 0 else out


def utility(phi_aug: np.ndarray, w: np.ndarray, w_I: float) -> float:
    """Expert utility = w_aug . phi_aug with w_aug = [w, w_I]."""
    return float(np.dot(np.concatenate([w, [w_I]]), phi_aug))


def choice_probability(phi_aug_e: np.ndarray, phi_aug_f: np.ndarray,
                       w_aug: np.ndarray, params: ExpertParams) -> float:
    """P(f_e preferred over f) = sigma_rho(beta * w_aug . (phi_e - phi_f))."""
    return float(sigma_rho(params.beta * np.dot(w_aug, phi_aug_e - phi_aug_f),
                           params.rho))


@dataclass
class RoomPriorityTable:
    target_room: float = 1.0
    unseen_room: float = 0.6
    door_bonus: float = 0.0
    other: float = 0.0


@dataclass
class OraclePolicy:
    """Room-type oracle (paper-style data generation) or a known linear model
    (synthetic recovery harness)."""
    kind: str = "room_table"    # or "linear"
    table: RoomPriorityTable = field(default_factory=RoomPriorityTable)
    w_gain: float = 0.005       # oracle coverage weight; small so gaps below tau stay semantic
    class_names: list = field(default_factory=list)
    target_class: str = "bed"
    characteristic: dict = field(default_factory=lambda: dict(DEFAULT_CHARACTERISTIC))
    w: np.ndarray | None = None  # linear kind: length nweights

    def target_category(self) -> str:
        for cat, names in self.characteristic.items():
            if self.target_class in names:
                return cat
        raise ValueError(f"target class {self.target_class!r} is not characteristic "
                         "of any room category")

    def _category_masks(self) -> dict:
        idx = {n: i for i, n in enumerate(self.class_names)}
        masks = {}
        for cat, names in self.characteristic.items():
            masks[cat] = [idx[n] for n in names if n in idx]
        return masks

    def priorities(self, candidates: list) -> np.ndarray:
        if self.kind == "linear":
            return np.array([float(np.dot(self.w, c.phi)) for c in candidates])
        masks = self._category_masks()
        tgt_cat = self.target_category()
        door_idx = self.class_names.index("door") if "door" in self.class_names else -1
        out = np.zeros(len(candidates))
        for i, c in enumerate(candidates):
            cats = [cat for cat, cols in masks.items()
                    if cols and c.phi_region[cols].any()]
            if tgt_cat in cats:
                p = self.table.target_room
            elif not cats:
                p = self.table.unseen_room  # no characteristic object yet
            else:
                p = self.table.other        # recognized, not the target's room
            if door_idx >= 0 and c.phi_local[door_idx] > 0:
                p += self.table.door_bonus
            out[i] = p
        return out


def oracle_utilities(candidates: list, policy: OraclePolicy) -> np.ndarray:
    if policy.kind == "linear":
        w_aug = np.concatenate([policy.w, [policy.w_gain]])
        return np.array([float(np.dot(w_aug, c.phi_aug)) for c in candidates])
    p = policy.priorities(candidates)
    return np.array([c.discount * (p[i] + policy.w_gain * c.gain)
                     for i, c in enumerate(candidates)])


def sample_choice(utilities: np.ndarray, node_ids: list, params: ExpertParams,
                  rng: np.random.Generator) -> int:
    """Index of the expert's stochastic pick among candidates.

    Gumbel-perturbed argmax of beta-scaled utilities (pairwise win rates equal
    the logistic of the utility difference), mixed with a uniform pick at
    probability 2*rho; ties break toward the lowest node id.
    """
    n = len(utilities)
    order = np.lexsort((node_ids, -utilities))  # stable tie-break helper
    if params.rho > 0 and rng.random() < 2.0 * params.rho:
        return int(rng.integers(n))
    if math.isinf(params.beta):
        return int(order[0])
    score = params.beta * utilities + rng.gumbel(size=n)
    best = np.nonzero(score == score.max())[0]
    if len(best) == 1:
        return int(best[0])
    ids = np.array(node_ids)[best]
    return int(best[np.argmin(ids)])


def oracle_decide(candidates: list, planner_node_id: int, policy: OraclePolicy,
                  params: ExpertParams, rng: np.random.Generator) -> int | None:
    """Return the frontier node id to intervene with, or None.

    The sampled choice must beat the planner's current subgoal by more than
    tau in oracle utility; picking the planner's own subgoal never intervenes.
    """
    if not candidates:
        return None
    u = oracle_utilities(candidates, policy)
    ids = [c.node_id for c in candidates]
    k = sample_choice(u, ids, params, rng)
    if ids[k] == planner_node_id:
        return None
    try:
        kp = ids.index(planner_node_id)
    except ValueError:
        return None  # planner subgoal no longer a frontier; skip this round
    if u[k] > u[kp] + params.tau:
        return int(ids[k])
    return None


def record_choice(scenario_id: str, timestep: int, chosen_id: int,
                  candidates: list, provenance: str = "oracle",
                  revision: int | None = None) -> ChoiceRecord:
    """Snapshot a decision as a training record.

    Raises InvalidIntervention when the chosen id is not among the candidates
    or fewer than two candidates exist (no pairwise choice to learn from).
    """
    ids = [c.node_id for c in candidates]
    if chosen_id not in ids:
        raise InvalidIntervention(f"chosen frontier {chosen_id} not in candidate set")
    if len(candidates) < 2:
        raise InvalidIntervention("a choice needs at least 2 candidates")
    return ChoiceRecord(
        scenario_id=scenario_id,
        timestep=timestep,
        chosen_frontier_id=int(chosen_id),
        candidates=[(c.node_id, np.asarray(c.phi_aug, dtype=np.float64),
                     tuple(c.position)) for c in candidates],
        provenance=provenance,
        revision=revision,
    )


# ------------------------------------------------------------------ dataset IO

def write_dataset(path, records: list, meta: dict) -> None:
    with open(path, "w") as f:
        header = {"type": "header", "format_version": DATASET_FORMAT_VERSION}
        header.update(meta)
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for r in records:
            doc = {
                "type": "choice",
                "scenario_id": r.scenario_id,
                "timestep": r.timestep,
                "chosen": r.chosen_frontier_id,
                "provenance": r.provenance,
                "revision": r.revision,
                "candidates": [
                    {"id": int(i), "pos": [int(p[0]), int(p[1])],
                     "phi_aug": [float(v) for v in phi]}
                    for (i, phi, p) in r.candidates
                ],
            }
            f.write(json.dumps(doc, sort_keys=True) + "\n")


def read_dataset(path) -> tuple:
    records = []
    meta = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("type") == "header":
                meta = doc
                if doc.get("format_version") != DATASET_FORMAT_VERSION:
                    raise ValueError(f"{path}: unsupported dataset format_version")
                continue
            records.append(ChoiceRecord(
                scenario_id=doc["scenario_id"],
                timestep=int(doc["timestep"]),
                chosen_frontier_id=int(doc["chosen"]),
                candidates=[(int(c["id"]),
                             np.array(c["phi_aug"], dtype=np.float64),
                             tuple(c["pos"])) for c in doc["candidates"]],
                provenance=doc.get("provenance", "oracle"),
                revision=doc.get("revision"),
            ))
    return records, meta
