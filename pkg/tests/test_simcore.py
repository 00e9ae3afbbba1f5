import math

import numpy as np
import pytest

from semsearch.raycast import build_ray_fan, sweep_visible
from semsearch.simcore import (IllegalMove, SimConfig, WorldBelief,
                               apply_action, check_termination, sense)

from conftest import ascii_scenario, two_room_scenario


def small_cfg(r_m=0.75):
    # r = 3 cells at 0.25 m/cell
    return SimConfig(sensing_range=r_m, delta_max=1.0, max_steps=100)


def test_object_outside_radius_not_observed():
    s = two_room_scenario(objects=[(3, 6, "fridge")], start=(3, 2))
    cfg = small_cfg()  # 3 cells; object 4 cells away
    b = WorldBelief(s)
    sense(s, b, (3, 2), cfg)
    assert b.observed_order == []


def test_object_inside_radius_observed():
    s = two_room_scenario(objects=[(3, 5, "fridge")], start=(3, 2))
    b = WorldBelief(s)
    sense(s, b, (3, 2), small_cfg())
    assert [s.class_names[s.obj_class[i]] for i in b.observed_order] == ["fridge"]


def test_object_behind_wall_not_observed():
    # wall column between kitchen and living room occludes
    s = two_room_scenario(objects=[(1, 9, "sofa")], start=(1, 5))
    b = WorldBelief(s)
    sense(s, b, (1, 5), SimConfig(sensing_range=1.5))  # 6 cells, wall at x=7
    assert b.observed_order == []
    assert b.occupancy[1, 9] == 0  # cell behind the wall stays unexplored


def test_sense_disc_matches_brute_force():
    art = "\n".join("o" * 31 for _ in range(31))
    s = ascii_scenario(art.replace("o", "c"), start=(15, 15), target=("bed", 0),
                       objects=[(1, 1, "bed")])
    cfg = SimConfig(sensing_range=2.5)  # 10 cells in a 31-cell open room
    b = WorldBelief(s)
    sense(s, b, (15, 15), cfg)
    for y in range(31):
        for x in range(31):
            within = math.hypot(y - 15, x - 15) <= 10 + 1e-9
            assert (b.occupancy[y, x] != 0) == within


def test_sense_marks_blocking_walls_and_reveals_regions():
    s = two_room_scenario(start=(3, 2))
    b = WorldBelief(s)
    sense(s, b, (3, 2), small_cfg())
    assert b.occupancy[3, 2] == 1
    assert (b.occupancy == -1).any()      # some wall cells seen
    ys, xs = np.nonzero(b.occupancy == 1)
    assert (b.region_of[ys, xs] >= 0).all()


def test_apply_action_zero_is_noop():
    s = two_room_scenario()
    b = WorldBelief(s)
    sense(s, b, b.robot_cell, small_cfg())
    t0 = b.traveled
    n0 = len(b.path_log)
    apply_action(b, (0, 0), small_cfg())
    assert b.traveled == t0 and len(b.path_log) == n0


def test_apply_action_strict_delta_max():
    s = two_room_scenario(start=(3, 2))
    b = WorldBelief(s)
    sense(s, b, (3, 2), small_cfg())
    cfg = SimConfig(sensing_range=0.75, delta_max=1.0)
    with pytest.raises(IllegalMove):
        apply_action(b, (0, 4), cfg)  # exactly 1.0 m: strict bound
    apply_action(b, (0, 3), cfg)      # 0.75 m is fine
    assert b.robot_cell == (3, 5)
    assert b.traveled == pytest.approx(0.75)


def test_apply_action_into_unknown_is_illegal():
    s = two_room_scenario(start=(3, 2))
    b = WorldBelief(s)
    cfg = small_cfg()
    sense(s, b, (3, 2), cfg)
    assert b.occupancy[3, 8] == 0  # beyond the wall, unknown
    with pytest.raises(IllegalMove):
        apply_action(b, (0, 6), SimConfig(sensing_range=0.75, delta_max=9.9))


def test_traveled_is_sum_of_steps():
    s = two_room_scenario(start=(3, 2))
    b = WorldBelief(s)
    cfg = small_cfg()
    sense(s, b, (3, 2), cfg)
    apply_action(b, (0, 1), cfg)
    apply_action(b, (1, 0), cfg)
    apply_action(b, (0, 1), cfg)
    total = sum(math.hypot(a[0] - c[0], a[1] - c[1])
                for a, c in zip(b.path_log, b.path_log[1:])) * s.cell_size
    assert b.traveled == pytest.approx(total)


def test_check_termination():
    s = two_room_scenario(objects=[(3, 5, "bed")], start=(3, 2))
    b = WorldBelief(s)
    assert check_termination(s, b, frontier_count=3) == "running"
    assert check_termination(s, b, frontier_count=0) == "exhausted"
    sense(s, b, (3, 2), small_cfg())
    assert check_termination(s, b, frontier_count=3) == "found"


def test_monotone_knowledge_and_sensing_soundness():
    s = two_room_scenario(start=(3, 2))
    cfg = SimConfig(sensing_range=0.75)
    b = WorldBelief(s)
    sense(s, b, (3, 2), cfg)
    explored = [b.explored_count()]
    observed = [len(b.observed_order)]
    for dx in range(3, 8):
        apply_action(b, (0, 1), cfg)
        sense(s, b, b.robot_cell, cfg)
        explored.append(b.explored_count())
        observed.append(len(b.observed_order))
    assert explored == sorted(explored)
    assert observed == sorted(observed)
    # soundness replay: every observed object was visible from some logged position
    fan = build_ray_fan(cfg.sense_rays, cfg.range_cells(s.cell_size))
    for oi in b.observed_order:
        o = s.objects[oi]
        ok = False
        for (py, px) in b.path_log:
            if math.hypot(o.y - py, o.x - px) <= cfg.range_cells(s.cell_size) + 1e-9:
                vis = sweep_visible(fan, s.occupied, py, px)
                ok = ok or bool(vis[o.y, o.x])
        assert ok
