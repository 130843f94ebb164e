"""Hierarchy construction: input tiling, lateral/superior wiring, context order.

Three input-level layouts are supported:

* uniform   -- a g0 x g0 grid of identical tiles,
* foveated  -- the central k x k block of that grid subdivided into 2x2
               smaller units (higher density in the center),
* uhr       -- every input unit subdivided (uniform high resolution).

Upper levels are square grids of units whose signal is the concatenation of
their inferior units' hidden vectors. The single topmost unit's hidden state
is broadcast to every unit as context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError
from .unit import Rect, UnitSpec

MODEL_KINDS = ("base", "foveated", "uhr")


@dataclass(frozen=True)
class ModelConfig:
    view_w: int = 32
    view_h: int = 32
    level_grids: tuple[int, ...] = (16, 8, 4, 3, 2, 1)
    fovea: str = "none"  # none | central | full
    fovea_k: int = 8
    hidden_dim: int = 8

    def __post_init__(self) -> None:
        g = self.level_grids
        if not g:
            raise ConfigurationError("level_grids must not be empty")
        if any(a <= b for a, b in zip(g, g[1:])):
            raise ConfigurationError("level_grids must be strictly decreasing")
        if g[-1] != 1:
            raise ConfigurationError("top level must have exactly 1 unit")
        if self.view_w % g[0] or self.view_h % g[0]:
            raise ConfigurationError(
                f"view {self.view_w}x{self.view_h} not divisible by input grid {g[0]}"
            )
        if self.fovea not in ("none", "central", "full"):
            raise ConfigurationError(f"unknown fovea mode {self.fovea!r}")
        if self.fovea == "central" and self.fovea_k > g[0]:
            raise ConfigurationError("fovea_k exceeds the input grid")
        if self.hidden_dim <= 0:
            raise ConfigurationError("hidden_dim must be positive")


@dataclass
class HierarchyTopology:
    view_w: int
    view_h: int
    hidden_dim: int
    units: list[UnitSpec]
    levels: list[list[int]]  # unit ids per level, construction order
    lateral: dict[int, list[int]]  # symmetric, irreflexive, sorted
    superior: dict[int, list[int]]  # sorted
    inferior: dict[int, list[int]]  # sorted (= ascending unit_id fan-in order)
    topmost_id: int
    context_sources: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.context_sources:
            self.context_sources = {
                u.unit_id: context_layout(self, u.unit_id) for u in self.units
            }

    @property
    def n_units(self) -> int:
        return len(self.units)

    def input_units(self) -> list[UnitSpec]:
        return [self.units[i] for i in self.levels[0]]


def context_layout(topology: HierarchyTopology, unit_id: int) -> list[int]:
    """Context source order: self, laterals asc, superiors asc, topmost.

    The topmost id is omitted when it already appears earlier, so the single
    unit of a one-level hierarchy gets just [self].
    """
    srcs = [unit_id]
    srcs += sorted(topology.lateral.get(unit_id, ()))
    srcs += sorted(topology.superior.get(unit_id, ()))
    if topology.topmost_id not in srcs:
        srcs.append(topology.topmost_id)
    return srcs


def _grid_block_bounds(n: int, m: int) -> list[int]:
    """Partition n inferior cells into m proportional index ranges."""
    return [(i * n) // m for i in range(m + 1)]


def _superior_of(a: int, n: int, m: int) -> int:
    bounds = _grid_block_bounds(n, m)
    # ranges are nonempty because n > m for all grid pairs
    for i in range(m):
        if bounds[i] <= a < bounds[i + 1]:
            return i
    raise AssertionError("cell not covered by block partition")


def _grid_lateral(ids: list[list[int]], lateral: dict[int, list[int]]) -> None:
    """4-neighbor lateral edges on a row-major grid of unit ids."""
    g = len(ids)
    for i in range(g):
        for j in range(g):
            a = ids[i][j]
            if j + 1 < g:
                _add_edge(lateral, a, ids[i][j + 1])
            if i + 1 < g:
                _add_edge(lateral, a, ids[i + 1][j])


def _add_edge(lateral: dict[int, list[int]], a: int, b: int) -> None:
    lateral.setdefault(a, []).append(b)
    lateral.setdefault(b, []).append(a)


def _build(config: ModelConfig, subdivide: set[tuple[int, int]]) -> HierarchyTopology:
    grids = config.level_grids
    g0 = grids[0]
    tw, th = config.view_w // g0, config.view_h // g0
    if subdivide and (tw % 2 or th % 2):
        raise ConfigurationError(
            f"cannot subdivide {tw}x{th}-pixel tiles into a 2x2 grid"
        )

    # --- input level: tiles + the parent grid cell each unit came from
    tiles: list[Rect] = []
    parent_cell: list[tuple[int, int]] = []
    for i in range(g0):
        for j in range(g0):
            x, y = j * tw, i * th
            if (i, j) in subdivide:
                hw, hh = tw // 2, th // 2
                for di in range(2):
                    for dj in range(2):
                        tiles.append(Rect(x + dj * hw, y + di * hh, hw, hh))
                        parent_cell.append((i, j))
            else:
                tiles.append(Rect(x, y, tw, th))
                parent_cell.append((i, j))
    n_input = len(tiles)

    # --- unit ids: input level first, then upper levels row-major
    levels: list[list[int]] = [list(range(n_input))]
    next_id = n_input
    for g in grids[1:]:
        levels.append(list(range(next_id, next_id + g * g)))
        next_id += g * g
    n_units = next_id

    lateral: dict[int, list[int]] = {}
    superior: dict[int, list[int]] = {}
    inferior: dict[int, list[int]] = {}

    # --- lateral wiring, input level
    if subdivide:
        # geometric rule: connected iff tile borders touch (corners included)
        for a in range(n_input):
            for b in range(a + 1, n_input):
                if tiles[a].touches(tiles[b]):
                    _add_edge(lateral, a, b)
    else:
        grid_ids = [[i * g0 + j for j in range(g0)] for i in range(g0)]
        _grid_lateral(grid_ids, lateral)

    # --- lateral wiring, upper levels (always 4-neighbor)
    for lvl, g in enumerate(grids[1:], start=1):
        base = levels[lvl][0]
        grid_ids = [[base + i * g + j for j in range(g)] for i in range(g)]
        _grid_lateral(grid_ids, lateral)

    # --- superior wiring between consecutive levels
    if len(grids) > 1:
        g1 = grids[1]
        base1 = levels[1][0]
        for uid in range(n_input):
            i, j = parent_cell[uid]
            si = _superior_of(i, g0, g1)
            sj = _superior_of(j, g0, g1)
            sup = base1 + si * g1 + sj
            superior.setdefault(uid, []).append(sup)
            inferior.setdefault(sup, []).append(uid)
        for lvl in range(1, len(grids) - 1):
            gn, gm = grids[lvl], grids[lvl + 1]
            base_n, base_m = levels[lvl][0], levels[lvl + 1][0]
            for i in range(gn):
                for j in range(gn):
                    uid = base_n + i * gn + j
                    sup = base_m + _superior_of(i, gn, gm) * gm + _superior_of(j, gn, gm)
                    superior.setdefault(uid, []).append(sup)
                    inferior.setdefault(sup, []).append(uid)

    for d in (lateral, superior, inferior):
        for k in d:
            d[k] = sorted(set(d[k]))

    topmost_id = levels[-1][0]

    # --- specs (context_dim depends on the wiring, so built last)
    h = config.hidden_dim
    shell = HierarchyTopology(
        view_w=config.view_w, view_h=config.view_h, hidden_dim=h,
        units=[], levels=levels, lateral=lateral, superior=superior,
        inferior=inferior, topmost_id=topmost_id, context_sources={0: []},
    )
    units: list[UnitSpec] = []
    for uid in range(n_units):
        n_ctx = len(context_layout(shell, uid))
        if uid < n_input:
            tile = tiles[uid]
            spec = UnitSpec(uid, 0, tile.w * tile.h * 3, h, h * n_ctx, tile)
        else:
            lvl = next(l for l, ids in enumerate(levels) if uid in range(ids[0], ids[-1] + 1))
            spec = UnitSpec(uid, lvl, h * len(inferior[uid]), h, h * n_ctx)
        units.append(spec)

    return HierarchyTopology(
        view_w=config.view_w, view_h=config.view_h, hidden_dim=h,
        units=units, levels=levels, lateral=lateral, superior=superior,
        inferior=inferior, topmost_id=topmost_id,
    )


def build_uniform(config: ModelConfig) -> HierarchyTopology:
    return _build(config, set())


def build_foveated(config: ModelConfig) -> HierarchyTopology:
    g0 = config.level_grids[0]
    k = config.fovea_k
    if k > g0:
        raise ConfigurationError("fovea_k exceeds the input grid")
    lo = (g0 - k) // 2
    cells = {(i, j) for i in range(lo, lo + k) for j in range(lo, lo + k)}
    return _build(config, cells)


def build_uhr(config: ModelConfig) -> HierarchyTopology:
    g0 = config.level_grids[0]
    cells = {(i, j) for i in range(g0) for j in range(g0)}
    return _build(config, cells)


def build_model_kind(config: ModelConfig, kind: str) -> HierarchyTopology:
    if kind == "base":
        return build_uniform(config)
    if kind == "foveated":
        return build_foveated(config)
    if kind == "uhr":
        return build_uhr(config)
    raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def dump_adjacency(topology: HierarchyTopology) -> str:
    """Human-readable listing of units and their wiring, for debugging."""
    lines = [
        f"view {topology.view_w}x{topology.view_h}, hidden_dim {topology.hidden_dim}, "
        f"{topology.n_units} units, topmost {topology.topmost_id}"
    ]
    for lvl, ids in enumerate(topology.levels):
        lines.append(f"level {lvl}: {len(ids)} units")
        for uid in ids:
            u = topology.units[uid]
            tile = f" tile=({u.tile.x},{u.tile.y},{u.tile.w},{u.tile.h})" if u.tile else ""
            lines.append(
                f"  unit {uid}{tile} signal={u.signal_dim} ctx={u.context_dim}"
                f" lat={topology.lateral.get(uid, [])}"
                f" sup={topology.superior.get(uid, [])}"
                f" inf={topology.inferior.get(uid, [])}"
            )
    return "\n".join(lines)
