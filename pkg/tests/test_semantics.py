import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semsearch.semantics import (FeatureVector, PriorityModel, SemanticsConfig,
                                 augmented_features, feature_names,
                                 feature_vector, load_model, local_semantic,
                                 priority, region_semantic, save_model)
from semsearch.simcore import SimConfig, WorldBelief, sense
from semsearch.topo import Frontier

from conftest import two_room_scenario


def observed_belief(s, pos, r_m=8.0):
    b = WorldBelief(s)
    sense(s, b, pos, SimConfig(sensing_range=r_m))
    return b


def test_local_semantic_empty_without_observations():
    s = two_room_scenario()
    b = WorldBelief(s)
    assert not local_semantic(b, (3, 2), 8.0).any()


def test_local_semantic_door_within_radius():
    s = two_room_scenario(objects=[(3, 7, "door")], start=(3, 5))
    b = observed_belief(s, (3, 5))
    v = local_semantic(b, (3, 5), r_loc_cells=4.0)
    assert v[s.class_index("door")] == 1.0
    assert v.sum() == 1.0


def test_local_semantic_boundary_exclusive():
    s = two_room_scenario(objects=[(3, 7, "door")], start=(3, 2))
    b = observed_belief(s, (3, 2))
    assert local_semantic(b, (3, 2), r_loc_cells=5.0)[s.class_index("door")] == 1.0
    # object at distance 5 with radius just below stays out
    assert local_semantic(b, (3, 2), r_loc_cells=4.99)[s.class_index("door")] == 0.0


def test_region_semantic():
    s = two_room_scenario(objects=[(1, 2, "sink"), (5, 11, "sofa"),
                                   (1, 3, "sink")], start=(3, 4))
    b = observed_belief(s, (3, 4))
    sense(s, b, (3, 10), SimConfig(sensing_range=8.0))  # see the living room too
    kitchen = int(s.region_map[1, 2])
    living = int(s.region_map[5, 11])
    vk = region_semantic(b, kitchen, len(s.class_names))
    assert vk[s.class_index("sink")] == 1.0          # binary even with two sinks
    assert vk[s.class_index("sofa")] == 0.0          # different region
    vl = region_semantic(b, living, len(s.class_names))
    assert vl[s.class_index("sofa")] == 1.0


def make_frontier(s, b, pos):
    return Frontier(node_id=0, position=pos,
                    region_id=int(b.region_of[pos[0], pos[1]]), coverage_gain=3.0)


def test_feature_vector_blend():
    cfg = SemanticsConfig(lam=0.7, r_loc=0.5, novelty_min_objects=3)
    s = two_room_scenario(objects=[(1, 2, "fridge"), (3, 6, "sink")], start=(3, 4))
    b = observed_belief(s, (3, 4))
    f = make_frontier(s, b, (3, 4))
    fv = feature_vector(b, f, cfg)
    # fridge observed in region but not local (r_loc = 2 cells): 0.7
    assert fv.phi_s[s.class_index("fridge")] == pytest.approx(0.7)
    # sink is both local and in region: 0.7 + 0.3 = 1.0
    assert fv.phi_s[s.class_index("sink")] == pytest.approx(1.0)
    # two objects observed in kitchen < 3: novelty still on
    assert fv.phi_n == 1.0


def test_feature_vector_novelty_steps_off():
    cfg = SemanticsConfig(novelty_min_objects=3)
    s = two_room_scenario(objects=[(1, 2, "fridge"), (1, 3, "sink"),
                                   (5, 4, "countertop")], start=(3, 4))
    b = observed_belief(s, (3, 4))
    f = make_frontier(s, b, (3, 4))
    assert feature_vector(b, f, cfg).phi_n == 0.0
    b2 = WorldBelief(s)
    f2 = Frontier(node_id=0, position=(3, 4), region_id=0, coverage_gain=1.0)
    assert feature_vector(b2, f2, cfg).phi_n == 1.0  # nothing observed yet


def test_priority_examples():
    n = 5
    fv = FeatureVector(phi_s=np.zeros(n - 1), phi_n=0.0)
    assert priority(PriorityModel(np.zeros(n), 0.0), fv) == 0.0
    fv2 = FeatureVector(phi_s=np.eye(n - 1)[2], phi_n=0.0)
    w = np.eye(n)[2]
    assert priority(PriorityModel(w, 0.0), fv2) == 1.0
    w3 = np.array([0.5, 0.2, 0.9, 0.1, 0.4])
    fv3 = FeatureVector(phi_s=np.array([1.0, 0.7, 0.0, 0.3]), phi_n=1.0)
    hand = 0.5 * 1.0 + 0.2 * 0.7 + 0.9 * 0.0 + 0.1 * 0.3 + 0.4 * 1.0
    assert priority(PriorityModel(w3, 0.0), fv3) == pytest.approx(hand)


def test_monotone_in_new_observations():
    cfg = SemanticsConfig()
    s = two_room_scenario(objects=[(1, 2, "fridge"), (5, 2, "sink")], start=(3, 4))
    b1 = WorldBelief(s)
    sense(s, b1, (3, 4), SimConfig(sensing_range=0.6))   # sees nothing
    f = Frontier(node_id=0, position=(3, 4), region_id=0, coverage_gain=1.0)
    before = feature_vector(b1, f, cfg).phi_s
    sense(s, b1, (2, 3), SimConfig(sensing_range=8.0))   # now sees the kitchen
    after = feature_vector(b1, f, cfg).phi_s
    assert (after >= before - 1e-12).all()


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_priority_is_linear(alpha, w, phi1, phi2):
    w = np.array(w + [0.0])
    a = FeatureVector(np.array(phi1), 0.0)
    b = FeatureVector(np.array(phi2), 0.0)
    mix = FeatureVector(alpha * np.array(phi1) + (1 - alpha) * np.array(phi2), 0.0)
    m = PriorityModel(w, 0.0)
    lhs = priority(m, mix)
    rhs = alpha * priority(m, a) + (1 - alpha) * priority(m, b)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_augmented_features_shape_and_scale():
    fv = FeatureVector(phi_s=np.array([1.0, 0.0]), phi_n=1.0)
    aug = augmented_features(fv, gain=4.0, discount=0.5)
    assert np.allclose(aug, [0.5, 0.0, 0.5, 2.0])


def test_model_save_load_roundtrip(tmp_path):
    names = feature_names(["door", "bed"])
    m = PriorityModel(np.array([0.25, 1.0, 0.5]), 0.125, names)
    p = tmp_path / "w.yaml"
    save_model(m, p, metadata={"seed": 3, "epochs": 10})
    m2 = load_model(p)
    assert np.allclose(m2.w, m.w)
    assert m2.w_I == m.w_I
    assert m2.feature_names == names
