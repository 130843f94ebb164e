"""Lockstep execution of the whole hierarchy plus checkpoint persistence.

Each timestep has barrier semantics: signals and contexts for every unit are
gathered from the previous step's immutable hidden snapshot before any unit
runs, every unit then updates only its own state and weights, and the new
hidden snapshot is published at the end. The result is bit-identical to
sequential execution in unit-id order for any worker-thread count.
"""

from __future__ import annotations

import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import CheckpointError, ConfigurationError, NumericFault
from .topology import HierarchyTopology
from .unit import LearningConfig, Rect, UnitSpec, UnitState, UnitWeights, init_state, init_weights

MODE_TRAINING = "training"
MODE_FROZEN = "frozen"

_MAGIC = b"PVMS"
_VERSION = 1


@dataclass
class StepOutput:
    prediction_map: np.ndarray  # [view_h, view_w, 3]
    error_map: np.ndarray  # [view_h, view_w, 3], per-pixel squared prediction error
    hidden_snapshot: np.ndarray  # [n_units, hidden_dim]


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("PVM_THREADS", "1")))
    except ValueError:
        return 1


class ModelState:
    """Topology plus per-unit weights/states and the derived runtime arrays."""

    def __init__(
        self,
        topology: HierarchyTopology,
        weights: list[UnitWeights],
        states: list[UnitState],
        learning: LearningConfig,
        frame_counter: int = 0,
        mode: str = MODE_TRAINING,
    ):
        if mode not in (MODE_TRAINING, MODE_FROZEN):
            raise ConfigurationError(f"unknown mode {mode!r}")
        if len(weights) != topology.n_units or len(states) != topology.n_units:
            raise ConfigurationError("weights/states length != number of units")
        self.topology = topology
        self.weights = weights
        self.states = states
        self.learning = learning
        self.frame_counter = frame_counter
        self.mode = mode
        self._prepare()

    def _prepare(self) -> None:
        topo = self.topology
        n, h = topo.n_units, topo.hidden_dim
        self._ctx_ids = [
            np.asarray(topo.context_sources[u.unit_id], dtype=np.intp) for u in topo.units
        ]
        self._inf_ids = [
            np.asarray(topo.inferior.get(u.unit_id, []), dtype=np.intp) for u in topo.units
        ]
        self._signal_buf = [np.empty(u.signal_dim, dtype=np.float64) for u in topo.units]
        self._err_buf = [np.empty(u.signal_dim, dtype=np.float64) for u in topo.units]
        self.hidden_snapshot = np.empty((n, h), dtype=np.float64)
        for i, st in enumerate(self.states):
            self.hidden_snapshot[i] = st.H
        self._level_of = np.empty(n, dtype=np.intp)
        for lvl, ids in enumerate(topo.levels):
            for uid in ids:
                self._level_of[uid] = lvl
        self.last_level_errors: list[float] = []
        self._executor: ThreadPoolExecutor | None = None
        self._executor_threads = 0

    def copy(self, *, fresh_states: bool = False, share_weights: bool = False) -> "ModelState":
        states = (
            [init_state(u) for u in self.topology.units]
            if fresh_states
            else [s.copy() for s in self.states]
        )
        weights = self.weights if share_weights else [w.copy() for w in self.weights]
        return ModelState(
            self.topology, weights, states, self.learning,
            0 if fresh_states else self.frame_counter, self.mode,
        )

    def _pool(self, n_threads: int) -> ThreadPoolExecutor:
        if self._executor is None or self._executor_threads != n_threads:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
            self._executor = ThreadPoolExecutor(max_workers=n_threads)
            self._executor_threads = n_threads
        return self._executor


def new_model(
    topology: HierarchyTopology,
    learning: LearningConfig,
    mode: str = MODE_TRAINING,
) -> ModelState:
    weights = [init_weights(u, learning.seed) for u in topology.units]
    states = [init_state(u) for u in topology.units]
    return ModelState(topology, weights, states, learning, 0, mode)


def step(
    model: ModelState,
    subframe: np.ndarray,
    n_threads: int | None = None,
    unit_order: list[int] | None = None,
) -> StepOutput:
    """Advance the whole hierarchy one frame.

    ``unit_order`` overrides the execution order of phase 2 (single-threaded
    only); output is independent of it by construction, which the test suite
    verifies.
    """
    topo = model.topology
    if subframe.shape != (topo.view_h, topo.view_w, 3):
        raise ConfigurationError(
            f"subframe shape {subframe.shape} != ({topo.view_h}, {topo.view_w}, 3)"
        )
    subframe = np.ascontiguousarray(subframe, dtype=np.float64)
    if n_threads is None:
        n_threads = default_threads()

    snap = model.hidden_snapshot
    n = topo.n_units
    training = model.mode == MODE_TRAINING
    lr = model.learning.learning_rate
    tau = model.learning.tau_integral

    # phase 1: gather every unit's signal and context from the previous
    # snapshot before anything mutates
    firsts = np.empty(n, dtype=bool)
    for i, spec in enumerate(topo.units):
        st = model.states[i]
        if spec.level == 0:
            t = spec.tile
            model._signal_buf[i][:] = subframe[t.y:t.y + t.h, t.x:t.x + t.w, :].reshape(-1)
        else:
            model._signal_buf[i][:] = snap.take(model._inf_ids[i], axis=0).reshape(-1)
        st.C[:] = snap.take(model._ctx_ids[i], axis=0).reshape(-1)
        firsts[i] = not st.initialized

    # phase 2: per-unit fused precompute/train/forward; unit-local writes only
    faults: list[int] = []

    def run_units(ids) -> None:
        for i in ids:
            st = model.states[i]
            w = model.weights[i]
            first = bool(firsts[i])
            rc = backend.unit_step(
                st.P, st.P_prev, st.I, st.D, st.E, st.C, st.H, st.P_star,
                st.input_prev,
                w.W_h, w.b_h, w.W_p, w.b_p,
                model._signal_buf[i], model._err_buf[i],
                tau, lr, training and not first, first,
            )
            st.initialized = True
            st.trainable = True
            if rc:
                faults.append(i)

    if unit_order is not None:
        run_units(unit_order)
    elif n_threads <= 1 or n < 2:
        run_units(range(n))
    else:
        pool = model._pool(n_threads)
        bounds = np.linspace(0, n, n_threads + 1).astype(int)
        futures = [
            pool.submit(run_units, range(int(lo), int(hi)))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for f in futures:
            f.result()
    if faults:
        raise NumericFault(f"non-finite activation in unit(s) {sorted(faults)}")

    # phase 3: publish the new hidden snapshot and assemble the output maps
    new_snap = np.empty_like(snap)
    for i in range(n):
        new_snap[i] = model.states[i].H
    model.hidden_snapshot = new_snap

    pred = np.zeros((topo.view_h, topo.view_w, 3), dtype=np.float64)
    err = np.zeros((topo.view_h, topo.view_w, 3), dtype=np.float64)
    for uid in topo.levels[0]:
        t = topo.units[uid].tile
        pred[t.y:t.y + t.h, t.x:t.x + t.w, :] = model.states[uid].P_star.reshape(t.h, t.w, 3)
        err[t.y:t.y + t.h, t.x:t.x + t.w, :] = model._err_buf[uid].reshape(t.h, t.w, 3)

    model.last_level_errors = [
        float(np.mean(np.concatenate([model._err_buf[uid] for uid in ids])))
        for ids in topo.levels
    ]
    model.frame_counter += 1
    return StepOutput(prediction_map=pred, error_map=err, hidden_snapshot=new_snap)


# ---------------------------------------------------------------------------
# checkpoint format: "PVMS" | u32 version | u64 payload_len | u32 crc32 | payload
# (all integers little-endian, floats little-endian f64)
# ---------------------------------------------------------------------------


def _pack_topology(topo: HierarchyTopology, out: list[bytes]) -> None:
    out.append(struct.pack("<5I", topo.view_w, topo.view_h, topo.hidden_dim,
                           len(topo.levels), topo.n_units))
    for ids in topo.levels:
        out.append(struct.pack(f"<I{len(ids)}I", len(ids), *ids))
    for u in topo.units:
        tile = u.tile or Rect(0, 0, 1, 1)
        out.append(struct.pack("<3IB4i", u.level, u.signal_dim, u.context_dim,
                               1 if u.tile else 0, tile.x, tile.y, tile.w, tile.h))
    edges = sorted(
        (a, b) for a, nbrs in topo.lateral.items() for b in nbrs if a < b
    )
    out.append(struct.pack("<I", len(edges)))
    for a, b in edges:
        out.append(struct.pack("<2I", a, b))
    for u in topo.units:
        sups = topo.superior.get(u.unit_id, [])
        out.append(struct.pack(f"<I{len(sups)}I", len(sups), *sups))
    out.append(struct.pack("<I", topo.topmost_id))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise CheckpointError("truncated checkpoint payload")
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return vals

    def f64(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.off + size > len(self.buf):
            raise CheckpointError("truncated checkpoint payload")
        arr = np.frombuffer(self.buf, dtype="<f8", count=count, offset=self.off).copy()
        self.off += size
        return arr


def _unpack_topology(r: _Reader) -> HierarchyTopology:
    view_w, view_h, hidden_dim, n_levels, n_units = r.unpack("<5I")
    levels = []
    for _ in range(n_levels):
        (count,) = r.unpack("<I")
        levels.append(list(r.unpack(f"<{count}I")))
    units: list[UnitSpec] = []
    for uid in range(n_units):
        level, signal_dim, context_dim, has_tile, x, y, w, h = r.unpack("<3IB4i")
        tile = Rect(x, y, w, h) if has_tile else None
        units.append(UnitSpec(uid, level, signal_dim, hidden_dim, context_dim, tile))
    (n_edges,) = r.unpack("<I")
    lateral: dict[int, list[int]] = {}
    for _ in range(n_edges):
        a, b = r.unpack("<2I")
        lateral.setdefault(a, []).append(b)
        lateral.setdefault(b, []).append(a)
    superior: dict[int, list[int]] = {}
    inferior: dict[int, list[int]] = {}
    for uid in range(n_units):
        (count,) = r.unpack("<I")
        sups = list(r.unpack(f"<{count}I"))
        if sups:
            superior[uid] = sups
            for s in sups:
                inferior.setdefault(s, []).append(uid)
    (topmost_id,) = r.unpack("<I")
    for d in (lateral, superior, inferior):
        for k in d:
            d[k] = sorted(set(d[k]))
    return HierarchyTopology(
        view_w=view_w, view_h=view_h, hidden_dim=hidden_dim, units=units,
        levels=levels, lateral=lateral, superior=superior, inferior=inferior,
        topmost_id=topmost_id,
    )


def _arr_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_checkpoint(model: ModelState, path: str) -> None:
    out: list[bytes] = []
    _pack_topology(model.topology, out)
    out.append(struct.pack("<ddQ", model.learning.learning_rate,
                           model.learning.tau_integral, model.learning.seed))
    for w in model.weights:
        out.extend(map(_arr_bytes, (w.W_h, w.b_h, w.W_p, w.b_p)))
    for st in model.states:
        out.append(struct.pack("<BB", int(st.initialized), int(st.trainable)))
        out.extend(map(_arr_bytes, (st.P, st.P_prev, st.I, st.D, st.E, st.C,
                                    st.H, st.P_star, st.input_prev)))
    out.append(struct.pack("<QB", model.frame_counter,
                           0 if model.mode == MODE_TRAINING else 1))
    payload = b"".join(out)
    header = _MAGIC + struct.pack("<IQI", _VERSION, len(payload), zlib.crc32(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path: str) -> ModelState:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(data) < 20 or data[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a PVMS checkpoint")
    version, payload_len, crc = struct.unpack_from("<IQI", data, 4)
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    payload = data[20:]
    if len(payload) != payload_len:
        raise CheckpointError(f"{path}: truncated checkpoint "
                              f"({len(payload)} of {payload_len} payload bytes)")
    if zlib.crc32(payload) != crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    r = _Reader(payload)
    topo = _unpack_topology(r)
    lr, tau, seed = r.unpack("<ddQ")
    learning = LearningConfig(learning_rate=lr, tau_integral=tau, seed=int(seed))
    weights: list[UnitWeights] = []
    for u in topo.units:
        W_h = r.f64(u.hidden_dim * u.input_dim).reshape(u.hidden_dim, u.input_dim)
        b_h = r.f64(u.hidden_dim)
        W_p = r.f64(u.signal_dim * u.hidden_dim).reshape(u.signal_dim, u.hidden_dim)
        b_p = r.f64(u.signal_dim)
        weights.append(UnitWeights(W_h, b_h, W_p, b_p))
    states: list[UnitState] = []
    for u in topo.units:
        initialized, trainable = r.unpack("<BB")
        s = u.signal_dim
        states.append(UnitState(
            P=r.f64(s), P_prev=r.f64(s), I=r.f64(s), D=r.f64(s), E=r.f64(s),
            C=r.f64(u.context_dim), H=r.f64(u.hidden_dim), P_star=r.f64(s),
            input_prev=r.f64(u.input_dim),
            initialized=bool(initialized), trainable=bool(trainable),
        ))
    frame_counter, mode_byte = r.unpack("<QB")
    if r.off != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - r.off} trailing bytes in payload")
    mode = MODE_TRAINING if mode_byte == 0 else MODE_FROZEN
    return ModelState(topo, weights, states, learning, int(frame_counter), mode)
