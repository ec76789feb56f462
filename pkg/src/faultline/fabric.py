"""Tile-grid model of an FPGA fabric with first-fit placement and relocation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class NoFitError(RuntimeError):
    """No healthy, free rectangle can host the footprint."""


@dataclass(frozen=True)
class Footprint:
    name: str
    luts: int
    ffs: int

    def __post_init__(self):
        if self.luts < 0 or self.ffs < 0:
            raise ValueError(f"footprint {self.name!r} has negative resources")


# resource usage of the reference design
REFERENCE_FOOTPRINTS = {
    "system": Footprint("system", 15359, 6350),
    "core": Footprint("core", 3179, 1557),
    "alu": Footprint("alu", 617, 125),
    "tdc": Footprint("tdc", 64, 320),
}
DEFAULT_PLACEMENTS = ("core", "alu", "tdc")


def load_footprints(text: str | None = None) -> dict[str, Footprint]:
    """Footprints from JSON ``{"name": {"luts": .., "ffs": ..}}``; defaults to the reference footprints."""
    if text is None:
        return dict(REFERENCE_FOOTPRINTS)
    data = json.loads(text)
    return {name: Footprint(name, int(v["luts"]), int(v["ffs"])) for name, v in data.items()}


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    def tiles(self):
        return (slice(self.y, self.y + self.h), slice(self.x, self.x + self.w))

    def overlaps(self, other: "Rect") -> bool:
        return (self.x < other.x + other.w and other.x < self.x + self.w
                and self.y < other.y + other.h and other.y < self.y + self.h)

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Placement:
    pid: int
    footprint: str
    rect: Rect


@dataclass(frozen=True)
class ReconfigCost:
    tiles: int
    time_us: float

    def cycles(self, clock_mhz: float = 200.0) -> int:
        return int(math.ceil(self.time_us * clock_mhz))


@dataclass
class FabricGrid:
    width: int = 40
    height: int = 60
    tile_luts: int = 50
    tile_ffs: int = 100
    us_per_tile: float = 1.0
    damaged: np.ndarray = field(default=None, repr=False)
    owner: np.ndarray = field(default=None, repr=False)  # -1 when free
    placements: dict = field(default_factory=dict)
    _next_id: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.tile_luts < 1 or self.tile_ffs < 1:
            raise ValueError("tile capacity must be positive")
        if self.damaged is None:
            self.damaged = np.zeros((self.height, self.width), dtype=bool)
        if self.owner is None:
            self.owner = np.full((self.height, self.width), -1, dtype=np.int64)

    def copy(self) -> "FabricGrid":
        return FabricGrid(self.width, self.height, self.tile_luts, self.tile_ffs, self.us_per_tile,
                          self.damaged.copy(), self.owner.copy(), dict(self.placements), self._next_id)

    def tiles_needed(self, f: Footprint) -> int:
        return max(math.ceil(f.luts / self.tile_luts), math.ceil(f.ffs / self.tile_ffs), 1)

    def healthy_tiles(self) -> int:
        return int((~self.damaged).sum())

    def free_tiles(self) -> int:
        return int(((~self.damaged) & (self.owner < 0)).sum())

    def _shapes(self, n: int) -> list[tuple[int, int]]:
        shapes = set()
        for h in range(1, min(n, self.height) + 1):
            w = math.ceil(n / h)
            if w <= self.width:
                shapes.add((w, h))
        return sorted(shapes, key=lambda s: (s[0] * s[1], s[1]))

    def find(self, f: Footprint, exclude: Rect | None = None) -> Rect:
        """Smallest-area, then first row-major, rectangle of free healthy tiles."""
        blocked = self.damaged | (self.owner >= 0)
        if exclude is not None:
            blocked = blocked.copy()
            blocked[exclude.tiles()] = True
        # 2-D prefix sums make each candidate test O(1)
        ps = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        ps[1:, 1:] = blocked.astype(np.int64).cumsum(0).cumsum(1)
        for w, h in self._shapes(self.tiles_needed(f)):
            counts = ps[h:, w:] - ps[:-h, w:] - ps[h:, :-w] + ps[:-h, :-w]
            ys, xs = np.nonzero(counts == 0)
            if len(ys):
                # np.nonzero is row-major already
                return Rect(int(xs[0]), int(ys[0]), w, h)
        raise NoFitError(f"no room for {f.name} ({self.tiles_needed(f)} tiles)")

    def place(self, f: Footprint, exclude: Rect | None = None) -> Placement:
        rect = self.find(f, exclude)
        p = Placement(self._next_id, f.name, rect)
        self._next_id += 1
        self.owner[rect.tiles()] = p.pid
        self.placements[p.pid] = p
        return p

    def damage(self, region: Rect) -> list[int]:
        """Mark tiles damaged; return ids of placements touching the region."""
        if region.x < 0 or region.y < 0 or region.x + region.w > self.width or region.y + region.h > self.height:
            raise ValueError(f"damage region {region} outside the {self.width}x{self.height} grid")
        self.damaged[region.tiles()] = True
        return sorted(pid for pid, p in self.placements.items() if p.rect.overlaps(region))

    def affected(self) -> list[int]:
        return sorted(pid for pid, p in self.placements.items() if self.damaged[p.rect.tiles()].any())

    def relocate(self, pid: int, footprints: dict[str, Footprint]) -> tuple[Placement, ReconfigCost]:
        """Move a placement to fresh healthy tiles, never back onto its old rectangle."""
        old = self.placements[pid]
        f = footprints[old.footprint]
        self.owner[old.rect.tiles()] = -1
        try:
            rect = self.find(f, exclude=old.rect)
        except NoFitError:
            self.owner[old.rect.tiles()] = pid
            raise
        new = Placement(pid, old.footprint, rect)
        self.owner[rect.tiles()] = pid
        self.placements[pid] = new
        return new, ReconfigCost(rect.area, rect.area * self.us_per_tile)

    def check(self) -> None:
        """Internal consistency: occupancy matches placements."""
        expect = np.full_like(self.owner, -1)
        for pid, p in self.placements.items():
            if (expect[p.rect.tiles()] >= 0).any():
                raise AssertionError(f"placement {pid} overlaps another")
            expect[p.rect.tiles()] = pid
        if not np.array_equal(expect, self.owner):
            raise AssertionError("occupancy map out of sync with placements")


def parse_grid(spec: str) -> tuple[int, int]:
    try:
        w, h = spec.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ValueError(f"grid must look like WxH, got {spec!r}") from None


def build(width: int = 40, height: int = 60, tile_luts: int = 50, tile_ffs: int = 100,
          us_per_tile: float = 1.0, footprints: dict[str, Footprint] | None = None,
          names=DEFAULT_PLACEMENTS) -> tuple[FabricGrid, dict[str, int]]:
    """A fresh grid with the named footprints placed in order."""
    footprints = footprints or REFERENCE_FOOTPRINTS
    g = FabricGrid(width, height, tile_luts, tile_ffs, us_per_tile)
    ids = {name: g.place(footprints[name]).pid for name in names}
    return g, ids
