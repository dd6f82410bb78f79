"""Regenerate the bundled scenes, lexicon and episode files under src/cornav/data."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "cornav" / "data"
RES = 0.1

LEXICON = {
    "drink": ["juice", "soft drink", "water"],
    "thirsty": ["water", "drink"],
    "hungry": ["apple", "bread"],
    "tired": ["bed", "sofa"],
    "read": ["book"],
    "coffee": ["mug", "kettle"],
    "cold": ["blanket"],
    "music": ["speaker"],
    "plants": ["plant"],
}


def _box(occ, x0, y0, x1, y1):
    occ[int(round(y0 / RES)) : int(round(y1 / RES)), int(round(x0 / RES)) : int(round(x1 / RES))] = True


def _doc(name, occ, objects, rooms):
    rows, cols = np.nonzero(occ)
    return {
        "name": name,
        "resolution": RES,
        "width": occ.shape[1],
        "height": occ.shape[0],
        "occupied": [[int(r), int(c)] for r, c in zip(rows, cols)],
        "objects": [{"id": i, "category": c, "x": x, "y": y, "radius": r} for i, c, x, y, r in objects],
        "rooms": [{"name": n, "xmin": a, "ymin": b, "xmax": c, "ymax": d} for n, a, b, c, d in rooms],
    }


def home():
    """10 x 8 m: living room on the left, kitchen bottom right, bedroom top right."""
    occ = np.zeros((80, 100), dtype=bool)
    _box(occ, 4.9, 0.0, 5.1, 8.0)  # living | east rooms
    _box(occ, 5.1, 3.9, 10.0, 4.1)  # kitchen | bedroom
    # doorways
    occ[20:30, 49:51] = False  # living <-> kitchen, y 2.0-3.0
    occ[55:65, 49:51] = False  # living <-> bedroom, y 5.5-6.5
    occ[39:41, 75:85] = False  # kitchen <-> bedroom, x 7.5-8.5
    _box(occ, 2.0, 3.6, 3.0, 4.4)  # coffee table block
    _box(occ, 6.8, 0.2, 8.8, 0.6)  # kitchen counter block
    _box(occ, 8.0, 6.2, 9.8, 7.8)  # bed block
    objects = [
        ("sofa_1", "sofa", 1.0, 6.8, 0.4),
        ("tv_1", "tv", 0.4, 2.0, 0.3),
        ("plant_1", "plant", 4.5, 7.5, 0.2),
        ("curtain_1", "curtain", 0.3, 7.6, 0.3),
        ("shelf_1", "shelf", 4.6, 0.4, 0.3),
        ("mug_1", "mug", 4.3, 0.5, 0.1),
        ("table_1", "table", 2.5, 4.6, 0.4),
        ("book_1", "book", 3.2, 4.0, 0.1),
        ("fridge_1", "fridge", 9.6, 0.5, 0.4),
        ("counter_1", "counter", 7.8, 0.8, 0.3),
        ("juice_1", "juice", 9.2, 1.2, 0.1),
        ("kettle_1", "kettle", 7.0, 0.8, 0.1),
        ("sink_1", "sink", 8.6, 0.8, 0.2),
        ("apple_1", "apple", 9.6, 3.5, 0.1),
        ("bed_1", "bed", 8.9, 6.0, 0.5),
        ("closet_1", "closet", 5.5, 7.6, 0.4),
        ("lamp_1", "lamp", 9.6, 4.5, 0.1),
        ("monitor_1", "monitor", 6.8, 4.5, 0.2),
        ("blanket_1", "blanket", 7.6, 7.3, 0.2),
    ]
    rooms = [
        ("living room", 0.0, 0.0, 4.9, 8.0),
        ("kitchen", 5.1, 0.0, 10.0, 3.9),
        ("bedroom", 5.1, 4.1, 10.0, 8.0),
    ]
    return _doc("home", occ, objects, rooms)


def cafe():
    """8 x 6 m: seating area and a back storeroom behind a short corridor."""
    occ = np.zeros((60, 80), dtype=bool)
    _box(occ, 5.4, 0.0, 5.6, 6.0)
    occ[40:50, 54:56] = False  # doorway y 4.0-5.0
    _box(occ, 1.5, 1.5, 2.3, 2.3)  # table blocks
    _box(occ, 3.2, 3.2, 4.0, 4.0)
    objects = [
        ("table_1", "table", 1.9, 2.5, 0.4),
        ("table_2", "table", 3.6, 4.2, 0.4),
        ("counter_1", "counter", 4.8, 0.5, 0.4),
        ("mug_1", "mug", 4.4, 0.4, 0.1),
        ("water_1", "water", 0.5, 5.5, 0.1),
        ("plant_1", "plant", 0.4, 0.4, 0.2),
        ("speaker_1", "speaker", 5.0, 5.6, 0.1),
        ("shelf_1", "shelf", 7.6, 0.5, 0.3),
        ("bread_1", "bread", 7.5, 3.0, 0.1),
        ("soft_drink_1", "soft drink", 7.6, 5.5, 0.1),
    ]
    rooms = [("seating area", 0.0, 0.0, 5.4, 6.0), ("storeroom", 5.6, 0.0, 8.0, 6.0)]
    return _doc("cafe", occ, objects, rooms)


def ep(eid, task, instruction, targets, x, y, heading, scene, landmarks=()):
    return {
        "id": eid,
        "task": task,
        "instruction": instruction,
        "target_categories": list(targets),
        "landmark_categories": list(landmarks),
        "start": {"x": x, "y": y, "heading": heading},
        "scene": scene,
    }


SOLVABLE = [
    ep("home-on-01", "ObjectNav", "sofa", ["sofa"], 2.5, 6.0, 90.0, "home"),
    ep("home-on-02", "ObjectNav", "mug", ["mug"], 2.0, 1.5, 0.0, "home"),
    ep("home-on-03", "ObjectNav", "fridge", ["fridge"], 6.5, 2.0, 0.0, "home"),
    ep("home-si-01", "Simple", "Please bring me the book on the coffee table.", ["book"], 1.5, 2.5, 0.0, "home"),
    ep("home-si-02", "Simple", "Go to the kettle so I can make tea.", ["kettle"], 6.0, 2.5, 270.0, "home"),
    ep("home-ab-01", "Abstract", "I am thirsty", ["juice", "water", "drink"], 7.0, 2.5, 0.0, "home"),
    ep("home-ab-02", "Abstract", "I am so tired after work", ["bed", "sofa"], 3.5, 6.5, 180.0, "home"),
    ep(
        "home-sbs-01",
        "StepByStep",
        "Start at the table, walk past the curtain and stop at the plant.",
        ["plant"],
        1.5, 5.5, 90.0, "home",
        ["table", "curtain", "plant"],
    ),
    ep("cafe-on-01", "ObjectNav", "counter", ["counter"], 1.0, 4.0, 0.0, "cafe"),
    ep("cafe-si-01", "Simple", "Could you find the speaker for me?", ["speaker"], 1.0, 1.0, 45.0, "cafe"),
]


def _valid(scene_doc, goal, x, y) -> bool:
    # keep only episodes that start outside the success region
    from cornav.bench import GeodesicOracle
    from cornav.geometry import Pose
    from cornav.world import load_scene

    oracle = GeodesicOracle(load_scene(scene_doc))
    return oracle.distance(Pose(x, y, 0.0), [goal]) > oracle.threshold + 0.5


def noisy():
    """Thirty goals spread over both scenes, several needing exploration."""
    plan = [
        (home(), "home", 21,
         ["sofa", "tv", "plant", "curtain", "shelf", "mug", "table", "fridge", "counter", "juice",
          "kettle", "sink", "bed", "closet", "lamp", "monitor", "blanket", "apple", "book"],
         [(2.5, 2.5, 0.0), (3.5, 6.5, 180.0), (7.0, 2.5, 90.0), (6.5, 5.5, 270.0)]),
        (cafe(), "cafe", 9,
         ["table", "counter", "mug", "water", "plant", "speaker", "shelf", "bread", "soft drink"],
         [(1.0, 4.0, 0.0), (4.5, 2.0, 180.0), (7.0, 2.0, 90.0)]),
    ]
    out = []
    for doc, name, count, goals, starts in plan:
        i = k = 0
        while i < count:
            g = goals[k % len(goals)]
            x, y, h = starts[(k * 7 + k // len(goals)) % len(starts)]
            k += 1
            if _valid(doc, g, x, y):
                out.append(ep(f"noisy-{name}-{i:02d}", "ObjectNav", g, [g], x, y, h, name))
                i += 1
    return out


FBE_SIDE_ROOM = [ep("fbe-side-01", "ObjectNav", "bread", ["bread"], 1.0, 4.0, 0.0, "cafe")]
UNSATISFIABLE = [ep("unsat-01", "ObjectNav", "piano", ["piano"], 1.0, 4.0, 0.0, "cafe")]


def write(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")


def main() -> None:
    write(DATA / "lexicon.json", LEXICON)
    write(DATA / "scenes" / "home.json", home())
    write(DATA / "scenes" / "cafe.json", cafe())
    write(DATA / "episodes" / "solvable.json", SOLVABLE)
    write(DATA / "episodes" / "noisy.json", noisy())
    write(DATA / "episodes" / "fbe_side_room.json", FBE_SIDE_ROOM)
    write(DATA / "episodes" / "unsatisfiable.json", UNSATISFIABLE)


if __name__ == "__main__":
    main()
