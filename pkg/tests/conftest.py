import numpy as np
import pytest

from semsearch.scenario import (GeneratorConfig, Region, Scenario,
                                SemanticObject, generate_scenario)

# region letter -> category used by ascii_scenario maps
CATEGORY_KEY = {"k": "kitchen", "b": "bathroom", "l": "living_room",
                "d": "bedroom", "c": "corridor"}


def ascii_scenario(art, objects=(), start=None, target=("bed", 0),
                   class_names=None, cell_size=0.25, scn_id="ascii"):
    """Scenario from ascii art: '#' occupied, letters assign region cells.

    Distinct letters become distinct regions; the letter's lowercase initial
    picks the category via CATEGORY_KEY (e.g. rows of 'k' form a kitchen).
    `objects` is a list of (y, x, class_name).
    """
    rows = [r for r in art.strip("\n").splitlines()]
    m = max(len(rows), max(len(r) for r in rows))
    occupied = np.ones((m, m), dtype=bool)
    region_cells = {}
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#" or ch == " ":
                continue
            occupied[y, x] = False
            region_cells.setdefault(ch, []).append((y, x))
    if class_names is None:
        class_names = ["door", "fridge", "sink", "countertop", "toilet",
                       "shower", "sofa", "tv", "bed", "wardrobe"]
    cls = {n: i for i, n in enumerate(class_names)}
    regions = [Region(id=i, category=CATEGORY_KEY[ch.lower()], cells=cells)
               for i, (ch, cells) in enumerate(sorted(region_cells.items()))]
    objs = [SemanticObject(y, x, cls[name]) for (y, x, name) in objects]
    if start is None:
        start = regions[0].cells[0]
    return Scenario(
        id=scn_id, grid_size=m, cell_size=cell_size, occupied=occupied,
        regions=regions, objects=objs, start_cell=tuple(start),
        target_class=target[0], target_instance=target[1],
        class_names=class_names)


def two_room_scenario(**kw):
    """A kitchen and a living room joined by a 1-cell door."""
    art = """
################
#kkkkkk#llllll##
#kkkkkk#llllll##
#kkkkkkklllllll#
#kkkkkk#llllll##
#kkkkkk#llllll##
################
"""
    defaults = dict(
        objects=[(3, 7, "door"), (1, 2, "fridge"), (5, 11, "sofa"),
                 (2, 12, "bed")],
        start=(3, 2),
        target=("bed", 0),
    )
    defaults.update(kw)
    return ascii_scenario(art, **defaults)


@pytest.fixture(scope="session")
def gen_scenario_7():
    return generate_scenario(7, GeneratorConfig())


@pytest.fixture()
def small_gen_config():
    return GeneratorConfig(grid_size=64)
