"""Static world model: occupancy truth, regions, semantic objects, file format.

Floorplans are generated on a jittered 4x4 slot grid: a large living room in
the center block, kitchens and the bedroom on slots adjacent to it, and one
bathroom attached to each kitchen. Doors are carved so that the bedroom opens
only into the living room and each bathroom is reachable only through its
kitchen; all remaining slots stay solid.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field

import numpy as np
import yaml

FORMAT_VERSION = 1

ROOM_CATEGORIES = ("kitchen", "bathroom", "living_room", "bedroom", "corridor")

DEFAULT_CHARACTERISTIC = {
    "kitchen": ["fridge", "sink", "countertop"],
    "bathroom": ["toilet", "shower"],
    "living_room": ["sofa", "tv"],
    "bedroom": ["bed", "wardrobe"],
}

DEFAULT_SMALL_OBJECTS = {
    "kitchen": ["cup", "pan"],
    "bathroom": ["towel"],
    "living_room": ["plant", "lamp", "book"],
    "bedroom": ["lamp", "book"],
}


class ScenarioError(Exception):
    pass


class GenerationFailed(ScenarioError):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class SemanticObject:
    y: int
    x: int
    class_index: int


@dataclass
class Region:
    id: int
    category: str
    cells: list  # list of (y, x) tuples


@dataclass
class Scenario:
    id: str
    grid_size: int
    cell_size: float
    occupied: np.ndarray  # bool [m, m], True = obstacle
    regions: list
    objects: list
    start_cell: tuple
    target_class: str
    target_instance: int
    class_names: list

    # derived lookups, built in __post_init__
    region_map: np.ndarray = field(init=False)
    obj_pos: np.ndarray = field(init=False)
    obj_class: np.ndarray = field(init=False)

    def __post_init__(self):
        m = self.grid_size
        self.region_map = np.full((m, m), -1, dtype=np.int32)
        for reg in self.regions:
            for (y, x) in reg.cells:
                self.region_map[y, x] = reg.id
        if self.objects:
            self.obj_pos = np.array([[o.y, o.x] for o in self.objects], dtype=np.int32)
            self.obj_class = np.array([o.class_index for o in self.objects], dtype=np.int32)
        else:
            self.obj_pos = np.zeros((0, 2), dtype=np.int32)
            self.obj_class = np.zeros(0, dtype=np.int32)

    def class_index(self, name: str) -> int:
        return self.class_names.index(name)

    def target_object_index(self) -> int:
        hits = [i for i, o in enumerate(self.objects)
                if self.class_names[o.class_index] == self.target_class]
        return hits[self.target_instance]

    def free_mask(self) -> np.ndarray:
        return ~self.occupied


@dataclass
class GeneratorConfig:
    grid_size: int = 100
    cell_size: float = 0.25
    room_counts: dict = field(default_factory=lambda: {
        "kitchen": 3, "bathroom": 3, "living_room": 1, "bedroom": 1})
    start_room: str = "kitchen"
    target_class: str = "bed"
    target_instance: int = 0
    characteristic_objects: dict = field(default_factory=lambda: dict(DEFAULT_CHARACTERISTIC))
    small_objects: dict = field(default_factory=lambda: dict(DEFAULT_SMALL_OBJECTS))
    small_objects_per_100_cells: tuple = (0.8, 2.0)
    door_widths: tuple = (1, 2)
    cut_jitter: float = 0.06  # fraction of grid size
    max_attempts: int = 50

    def class_names(self) -> list:
        names = ["door"]
        for cat in ("kitchen", "bathroom", "living_room", "bedroom"):
            for n in self.characteristic_objects.get(cat, []):
                if n not in names:
                    names.append(n)
        for cat in ("kitchen", "bathroom", "living_room", "bedroom"):
            for n in self.small_objects.get(cat, []):
                if n not in names:
                    names.append(n)
        return names


# slots adjacent (edge-sharing) to the central 2x2 living block of a 4x4 grid
_RING_ADJACENT = [(0, 1), (0, 2), (1, 0), (2, 0), (1, 3), (2, 3), (3, 1), (3, 2)]
_ALL_SLOTS = [(i, j) for i in range(4) for j in range(4)]
_LIVING_SLOTS = {(1, 1), (1, 2), (2, 1), (2, 2)}


def _slot_adjacent(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def _try_layout(rng, cfg):
    """One attempt at a slot assignment + geometry; returns None on failure."""
    m = cfg.grid_size
    jit = max(1, int(cfg.cut_jitter * m))
    cuts = {}
    for axis in ("y", "x"):
        base = [0, m // 4, m // 2, 3 * m // 4, m - 1]
        c = [base[0]]
        for k in (1, 2, 3):
            c.append(base[k] + int(rng.integers(-jit, jit + 1)))
        c.append(base[4])
        spans = [c[k + 1] - c[k] for k in range(4)]
        if min(spans) < max(10, m // 10):
            return None
        cuts[axis] = c

    kitchens = [tuple(x) for x in rng.permutation(_RING_ADJACENT)[:3]]
    remaining = [s for s in _RING_ADJACENT if s not in kitchens]
    bedroom = tuple(remaining[int(rng.integers(len(remaining)))])
    used = set(kitchens) | {bedroom} | _LIVING_SLOTS
    bathrooms = []
    for k in kitchens:
        options = [s for s in _ALL_SLOTS
                   if s not in used and _slot_adjacent(s, k) and s not in _LIVING_SLOTS]
        if not options:
            return None
        b = options[int(rng.integers(len(options)))]
        bathrooms.append(b)
        used.add(b)
    return cuts, kitchens, bathrooms, bedroom


def _slot_interior(cuts, slot):
    """Interior cell rect of a slot: (y0, y1, x0, x1) inclusive bounds."""
    i, j = slot
    cy, cx = cuts["y"], cuts["x"]
    return cy[i] + 1, cy[i + 1] - 1, cx[j] + 1, cx[j + 1] - 1


def generate_scenario(seed: int, config: GeneratorConfig | None = None) -> Scenario:
    """Deterministic multi-room scenario for (seed, config).

    Raises GenerationFailed when no valid slot assignment fits the grid within
    the retry budget.
    """
    cfg = config or GeneratorConfig()
    if cfg.room_counts != {"kitchen": 3, "bathroom": 3, "living_room": 1, "bedroom": 1}:
        raise GenerationFailed(
            "generator only packs the 3-kitchen/3-bathroom/1-living/1-bedroom layout")
    rng = np.random.default_rng(seed)
    for _ in range(cfg.max_attempts):
        layout = _try_layout(rng, cfg)
        if layout is None:
            continue
        try:
            return _build(seed, cfg, rng, layout)
        except GenerationFailed:
            continue
    raise GenerationFailed(f"no feasible room layout after {cfg.max_attempts} attempts")


def _build(seed, cfg, rng, layout):
    cuts, kitchens, bathrooms, bedroom = layout
    m = cfg.grid_size
    occupied = np.ones((m, m), dtype=bool)
    class_names = cfg.class_names()
    cls = {n: i for i, n in enumerate(class_names)}

    rooms = []  # (category, rect, slot)
    ly0 = cuts["y"][1] + 1
    ly1 = cuts["y"][3] - 1
    lx0 = cuts["x"][1] + 1
    lx1 = cuts["x"][3] - 1
    rooms.append(("living_room", (ly0, ly1, lx0, lx1)))
    for k in kitchens:
        rooms.append(("kitchen", _slot_interior(cuts, k)))
    for b in bathrooms:
        rooms.append(("bathroom", _slot_interior(cuts, b)))
    rooms.append(("bedroom", _slot_interior(cuts, bedroom)))

    regions = []
    for rid, (cat, rect) in enumerate(rooms):
        y0, y1, x0, x1 = rect
        occupied[y0:y1 + 1, x0:x1 + 1] = False
        cells = [(y, x) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
        regions.append(Region(id=rid, category=cat, cells=cells))

    def carve_door(rect_a, rect_b, into_region):
        """Open a 1-2 cell gap in the shared wall; door cells join into_region."""
        ay0, ay1, ax0, ax1 = rect_a
        by0, by1, bx0, bx1 = rect_b
        w = int(rng.choice(cfg.door_widths))
        if ax1 + 2 == bx0 or bx1 + 2 == ax0:  # vertically shared wall column
            wall_x = ax1 + 1 if ax1 + 2 == bx0 else bx1 + 1
            lo = max(ay0, by0) + 1
            hi = min(ay1, by1) - 1 - (w - 1)
            if hi < lo:
                raise GenerationFailed("door does not fit shared wall")
            y = int(rng.integers(lo, hi + 1))
            cells = [(y + d, wall_x) for d in range(w)]
        elif ay1 + 2 == by0 or by1 + 2 == ay0:
            wall_y = ay1 + 1 if ay1 + 2 == by0 else by1 + 1
            lo = max(ax0, bx0) + 1
            hi = min(ax1, bx1) - 1 - (w - 1)
            if hi < lo:
                raise GenerationFailed("door does not fit shared wall")
            x = int(rng.integers(lo, hi + 1))
            cells = [(wall_y, x + d) for d in range(w)]
        else:
            raise GenerationFailed("rooms do not share a wall")
        for (y, x) in cells:
            occupied[y, x] = False
            regions[into_region].cells.append((y, x))
        return cells

    # door cells and their door objects belong to the hub-side room (living
    # room, or the kitchen for bathroom doors): doorways read as features of
    # the space they open from, and removing the hub still severs the passage
    living_rect = rooms[0][1]
    objects = []
    door_idx = cls["door"]
    for ridx, (cat, rect) in enumerate(rooms[1:], start=1):
        if cat in ("kitchen", "bedroom"):
            cells = carve_door(living_rect, rect, into_region=0)
            objects.append(SemanticObject(cells[0][0], cells[0][1], door_idx))
    for bi, b in enumerate(bathrooms):
        k_ridx = 1 + bi  # kitchens come right after living room
        b_ridx = 1 + len(kitchens) + bi
        k_rect = rooms[k_ridx][1]
        b_rect = rooms[b_ridx][1]
        cells = carve_door(k_rect, b_rect, into_region=k_ridx)
        objects.append(SemanticObject(cells[0][0], cells[0][1], door_idx))

    # characteristic + small objects on distinct interior cells per room
    taken = {(o.y, o.x) for o in objects}
    lo_rate, hi_rate = cfg.small_objects_per_100_cells
    for ridx, (cat, rect) in enumerate(rooms):
        y0, y1, x0, x1 = rect
        interior = [(y, x) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)
                    if (y, x) not in taken]
        area = (y1 - y0 + 1) * (x1 - x0 + 1)
        names = list(cfg.characteristic_objects.get(cat, []))
        pool = cfg.small_objects.get(cat, [])
        n_small = int(round(float(rng.uniform(lo_rate, hi_rate)) * area / 100.0))
        if pool:
            names += [pool[int(rng.integers(len(pool)))] for _ in range(n_small)]
        if len(names) > len(interior):
            raise GenerationFailed("room too small for its object list")
        picks = rng.choice(len(interior), size=len(names), replace=False)
        for name, pi in zip(names, picks):
            y, x = interior[int(pi)]
            taken.add((y, x))
            objects.append(SemanticObject(y, x, cls[name]))

    start_candidates = [i for i, (cat, _) in enumerate(rooms) if cat == cfg.start_room]
    if not start_candidates:
        raise GenerationFailed(f"no room of start category {cfg.start_room!r}")
    sr = start_candidates[int(rng.integers(len(start_candidates)))]
    y0, y1, x0, x1 = rooms[sr][1]
    free_cells = [(y, x) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)
                  if (y, x) not in taken]
    start = free_cells[int(rng.integers(len(free_cells)))]

    scn = Scenario(
        id=f"s{seed:06d}",
        grid_size=m,
        cell_size=cfg.cell_size,
        occupied=occupied,
        regions=regions,
        objects=objects,
        start_cell=start,
        target_class=cfg.target_class,
        target_instance=cfg.target_instance,
        class_names=class_names,
    )
    validate_scenario(scn)
    return scn


def validate_scenario(s: Scenario) -> None:
    """Checks every scenario invariant, naming the violated one."""
    if len(set(s.class_names)) != len(s.class_names):
        raise ValidationError("duplicate class names")
    m = s.grid_size
    if s.occupied.shape != (m, m):
        raise ValidationError("occupancy shape does not match grid_size")
    free = ~s.occupied

    seen = np.zeros((m, m), dtype=bool)
    for reg in s.regions:
        if reg.category not in ROOM_CATEGORIES:
            raise ValidationError(f"unknown region category {reg.category!r}")
        for (y, x) in reg.cells:
            if not (0 <= y < m and 0 <= x < m) or not free[y, x]:
                raise ValidationError("region cell not in free space")
            if seen[y, x]:
                raise ValidationError("regions overlap")
            seen[y, x] = True
    if not np.array_equal(seen, free):
        raise ValidationError("region cells do not cover free space exactly")

    for o in s.objects:
        if not (0 <= o.class_index < len(s.class_names)):
            raise ValidationError("object class index out of range")
        if s.occupied[o.y, o.x]:
            raise ValidationError("object in occupied cell")
        if s.region_map[o.y, o.x] < 0:
            raise ValidationError("object outside any region")

    n_target = sum(1 for o in s.objects
                   if s.class_names[o.class_index] == s.target_class)
    if s.target_instance < 0 or s.target_instance >= n_target:
        raise ValidationError("target does not resolve to exactly one object")

    sy, sx = s.start_cell
    if s.occupied[sy, sx]:
        raise ValidationError("start cell occupied")
    reach = _bfs_reachable(free, (sy, sx))
    if not np.array_equal(reach, free):
        raise ValidationError("start cell not connected to all free cells")


def _bfs_reachable(free: np.ndarray, start) -> np.ndarray:
    m, n = free.shape
    out = np.zeros_like(free)
    dq = collections.deque([start])
    out[start] = True
    while dq:
        y, x = dq.popleft()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < m and 0 <= nx < n and free[ny, nx] and not out[ny, nx]:
                out[ny, nx] = True
                dq.append((ny, nx))
    return out


# ---------------------------------------------------------------- file format

def _rle_encode_row(row: np.ndarray) -> str:
    out = []
    run = 1
    for i in range(1, len(row) + 1):
        if i < len(row) and row[i] == row[i - 1]:
            run += 1
        else:
            out.append(f"{run}{'o' if row[i - 1] else 'f'}")
            if i < len(row):
                run = 1
    return " ".join(out)


def _rle_decode_row(text: str, width: int, lineno: int) -> np.ndarray:
    vals = []
    for tok in text.split():
        if not tok[:-1].isdigit() or tok[-1] not in "fo":
            raise ParseError(f"occupancy row {lineno}: bad run token {tok!r}")
        vals.extend([tok[-1] == "o"] * int(tok[:-1]))
    if len(vals) != width:
        raise ParseError(f"occupancy row {lineno}: got {len(vals)} cells, want {width}")
    return np.array(vals, dtype=bool)


def _region_rows(cells) -> list:
    by_row = collections.defaultdict(list)
    for (y, x) in cells:
        by_row[y].append(x)
    rows = []
    for y in sorted(by_row):
        xs = sorted(by_row[y])
        spans = []
        s = e = xs[0]
        for x in xs[1:]:
            if x == e + 1:
                e = x
            else:
                spans.append((s, e))
                s = e = x
        spans.append((s, e))
        rows.append(f"{y} " + " ".join(f"{a}-{b}" for a, b in spans))
    return rows


def _parse_region_rows(rows) -> list:
    cells = []
    for r in rows:
        parts = r.split()
        if len(parts) < 2:
            raise ParseError(f"region row {r!r}: want 'y x0-x1 ...'")
        y = int(parts[0])
        for span in parts[1:]:
            a, _, b = span.partition("-")
            cells.extend((y, x) for x in range(int(a), int(b) + 1))
    return cells


def save_scenario(s: Scenario, path) -> None:
    lines = [
        f"format_version: {FORMAT_VERSION}",
        f"id: {s.id}",
        f"grid_size: {s.grid_size}",
        f"cell_size: {s.cell_size}",
        "class_names: [" + ", ".join(s.class_names) + "]",
        f"start_cell: [{s.start_cell[0]}, {s.start_cell[1]}]",
        f"target: {{class: {s.target_class}, instance: {s.target_instance}}}",
        "occupancy_rle:",
    ]
    for y in range(s.grid_size):
        lines.append(f'  - "{_rle_encode_row(s.occupied[y])}"')
    lines.append("regions:")
    for reg in s.regions:
        lines.append(f"  - id: {reg.id}")
        lines.append(f"    category: {reg.category}")
        lines.append("    rows:")
        for row in _region_rows(reg.cells):
            lines.append(f'      - "{row}"')
    lines.append("objects:")
    for o in s.objects:
        lines.append(f"  - [{o.y}, {o.x}, {s.class_names[o.class_index]}]")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_scenario(path) -> Scenario:
    with open(path) as f:
        text = f.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: not a mapping document")
    for key in ("format_version", "id", "grid_size", "cell_size", "class_names",
                "start_cell", "target", "occupancy_rle", "regions", "objects"):
        if key not in doc:
            raise ParseError(f"{path}: missing field {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported format_version {doc['format_version']}")
    m = int(doc["grid_size"])
    rows = doc["occupancy_rle"]
    if len(rows) != m:
        raise ParseError(f"{path}: {len(rows)} occupancy rows, want {m}")
    occ = np.stack([_rle_decode_row(r, m, i) for i, r in enumerate(rows)])
    class_names = [str(c) for c in doc["class_names"]]
    name_to_idx = {n: i for i, n in enumerate(class_names)}
    regions = []
    for rd in doc["regions"]:
        regions.append(Region(id=int(rd["id"]), category=str(rd["category"]),
                              cells=_parse_region_rows(rd["rows"])))
    objects = []
    for od in doc["objects"]:
        y, x, cname = int(od[0]), int(od[1]), str(od[2])
        if cname not in name_to_idx:
            raise ValidationError(f"unknown class name {cname!r} in object")
        objects.append(SemanticObject(y, x, name_to_idx[cname]))
    tgt = doc["target"]
    scn = Scenario(
        id=str(doc["id"]),
        grid_size=m,
        cell_size=float(doc["cell_size"]),
        occupied=occ,
        regions=regions,
        objects=objects,
        start_cell=(int(doc["start_cell"][0]), int(doc["start_cell"][1])),
        target_class=str(tgt["class"]),
        target_instance=int(tgt["instance"]),
        class_names=class_names,
    )
    validate_scenario(scn)
    return scn
