"""Corridor-with-rooms scenarios (about 40 x 10 x 3 m).

Four rooms sit along the +y side of a corridor, each reached through a door.
`easy` and `kidnap` furnish every room differently; `repeated` furnishes them
identically so that only the corridor ends disambiguate the rooms.
"""

import math

from steinloc.simulation.models import (
    BoxSpec,
    DoorSpec,
    RoomSpec,
    Scenario,
    TrajectorySpec,
    Waypoint,
    WorldSpec,
)

N_ROOMS = 4
ROOM_PITCH = 10.0
HEIGHT = 3.0
CORRIDOR_WIDTH = 3.0
WALL_GAP = 0.2
ROOM_DEPTH = 10.0
OCCLUSION_FRAMES = 100

FURNITURE = [
    [((1.0, 4.0, 0.0), (2.5, 5.2, 0.8)), ((8.0, 9.3, 0.0), (9.3, 9.9, 2.0))],
    [((11.0, 4.0, 0.0), (12.0, 9.0, 0.75))],
    [((21.0, 3.6, 0.0), (22.5, 4.6, 1.0)), ((21.0, 8.0, 0.0), (22.0, 9.8, 1.8))],
    [((35.0, 5.0, 0.0), (36.5, 6.5, 1.2)), ((38.5, 3.5, 0.0), (39.3, 9.5, 2.2))],
]
CORRIDOR_FURNITURE = [
    ((8.0, 0.0, 0.0), (8.6, 0.5, 1.0)),
    ((17.0, 2.5, 0.0), (18.5, 3.0, 1.8)),
    ((31.0, 0.0, 0.0), (31.8, 0.5, 2.5)),
]


def _door_x(i: int) -> float:
    return ROOM_PITCH * i + 0.5 * ROOM_PITCH


def corridor_world(repeated: bool = False, density: float = 50.0) -> WorldSpec:
    corridor = RoomSpec(
        lo=(0.0, 0.0, 0.0),
        hi=(ROOM_PITCH * N_ROOMS, CORRIDOR_WIDTH, HEIGHT),
        doors=[DoorSpec(wall="y+", center=_door_x(i), width=1.2, height=2.2) for i in range(N_ROOMS)],
    )
    rooms = [corridor]
    boxes = []
    for i in range(N_ROOMS):
        x0 = ROOM_PITCH * i
        rooms.append(
            RoomSpec(
                lo=(x0 + 0.5, CORRIDOR_WIDTH + WALL_GAP, 0.0),
                hi=(x0 + ROOM_PITCH - 0.5, ROOM_DEPTH, HEIGHT),
                doors=[DoorSpec(wall="y-", center=_door_x(i), width=1.2, height=2.2)],
            )
        )
        layout = FURNITURE[0] if repeated else FURNITURE[i]
        shift = x0 if repeated else 0.0
        for lo, hi in layout:
            boxes.append(BoxSpec(lo=(lo[0] + shift, lo[1], lo[2]), hi=(hi[0] + shift, hi[1], hi[2])))
    if not repeated:
        boxes += [BoxSpec(lo=lo, hi=hi) for lo, hi in CORRIDOR_FURNITURE]
    return WorldSpec(rooms=rooms, boxes=boxes, density=density)


def _walk_into_room(room: int) -> list[Waypoint]:
    x = _door_x(room)
    return [
        Waypoint(x=2.0, y=1.5, yaw=0.0),
        Waypoint(x=x, y=1.5, yaw=0.0),
        Waypoint(x=x, y=1.5, yaw=math.pi / 2),
        Waypoint(x=x, y=6.5, yaw=math.pi / 2),
    ]


def easy(seed: int = 0) -> Scenario:
    return Scenario(
        name="easy",
        world=corridor_world(),
        trajectory=TrajectorySpec(waypoints=_walk_into_room(2)),
        seed=seed,
    )


def repeated(seed: int = 0) -> Scenario:
    return Scenario(
        name="repeated",
        world=corridor_world(repeated=True),
        trajectory=TrajectorySpec(waypoints=_walk_into_room(1)),
        seed=seed,
    )


def kidnap(seed: int = 0) -> Scenario:
    """Two blind windows, each starting with a teleport into another room."""
    waypoints = [
        Waypoint(x=2.0, y=1.5, yaw=0.0),
        Waypoint(x=14.0, y=1.5, yaw=0.0),
        Waypoint(x=24.0, y=5.5, yaw=math.pi / 2, teleport=True),
        Waypoint(x=24.0, y=9.0, yaw=math.pi / 2),
        Waypoint(x=24.0, y=9.0, yaw=-math.pi / 2),
        Waypoint(x=26.0, y=5.0, yaw=-math.pi / 2),
        Waypoint(x=26.0, y=5.0, yaw=0.0),
        Waypoint(x=28.5, y=5.0, yaw=0.0),
        Waypoint(x=5.0, y=6.5, yaw=0.0, teleport=True),
        Waypoint(x=8.0, y=6.5, yaw=0.0),
        Waypoint(x=8.0, y=6.5, yaw=math.pi),
        Waypoint(x=2.5, y=6.5, yaw=math.pi),
        Waypoint(x=2.5, y=8.5, yaw=math.pi / 2),
        Waypoint(x=7.0, y=8.5, yaw=0.0),
    ]
    trajectory = TrajectorySpec(waypoints=waypoints)
    reached = trajectory.waypoint_frames()
    occlusions = [
        (reached[i], reached[i] + OCCLUSION_FRAMES)
        for i, wp in enumerate(waypoints)
        if wp.teleport
    ]
    return Scenario(
        name="kidnap",
        world=corridor_world(),
        trajectory=trajectory,
        occlusions=occlusions,
        seed=seed,
    )


PRESETS = {"easy": easy, "kidnap": kidnap, "repeated": repeated}
