"""A single predictive unit: a three-layer sigmoid perceptron.

Each unit receives a signal vector (a raw pixel tile at the input level, or
the concatenated hidden states of its inferior units above that), augments it
with precomputed features (leaky integral, shifted derivative, shifted
previous prediction error) and a context vector, and predicts the next signal
it will receive. The prediction error is the only training signal.

The functions here are the plain-numpy reference implementation. The engine
runs the same math through the fused kernel in :mod:`pvm_saccade.backend`;
this module is the ground truth the kernels are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericFault


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, origin top-left, view-local coordinates."""

    x: int
    y: int
    w: int
    h: int

    def area(self) -> int:
        return self.w * self.h

    def touches(self, other: "Rect") -> bool:
        """True if the rectangle borders touch (edge or corner contact)."""
        if self is other or self == other:
            return False
        return (
            self.x <= other.x + other.w
            and other.x <= self.x + self.w
            and self.y <= other.y + other.h
            and other.y <= self.y + self.h
        )


@dataclass(frozen=True)
class UnitSpec:
    unit_id: int
    level: int
    signal_dim: int
    hidden_dim: int
    context_dim: int
    tile: Rect | None = None

    def __post_init__(self) -> None:
        if self.signal_dim <= 0 or self.hidden_dim <= 0:
            raise ConfigurationError(
                f"unit {self.unit_id}: signal_dim and hidden_dim must be positive"
            )
        if self.context_dim < self.hidden_dim:
            raise ConfigurationError(
                f"unit {self.unit_id}: context must at least include self "
                f"(context_dim={self.context_dim} < hidden_dim={self.hidden_dim})"
            )
        if self.level == 0 and (self.tile is None or self.tile.area() == 0):
            raise ConfigurationError(f"unit {self.unit_id}: input-level unit needs a tile")
        if self.level > 0 and self.tile is not None:
            raise ConfigurationError(f"unit {self.unit_id}: non-input unit must not have a tile")

    @property
    def input_dim(self) -> int:
        """Width of the hidden layer's input: [P; D; I; E; C]."""
        return 4 * self.signal_dim + self.context_dim


@dataclass
class UnitWeights:
    W_h: np.ndarray  # [hidden_dim, 4*signal_dim + context_dim]
    b_h: np.ndarray  # [hidden_dim]
    W_p: np.ndarray  # [signal_dim, hidden_dim]
    b_p: np.ndarray  # [signal_dim]

    def copy(self) -> "UnitWeights":
        return UnitWeights(self.W_h.copy(), self.b_h.copy(), self.W_p.copy(), self.b_p.copy())


@dataclass
class UnitState:
    P: np.ndarray
    P_prev: np.ndarray
    I: np.ndarray
    D: np.ndarray
    E: np.ndarray
    C: np.ndarray
    H: np.ndarray
    P_star: np.ndarray
    input_prev: np.ndarray
    initialized: bool = False
    trainable: bool = False  # becomes True once input_prev holds a real forward pass

    def copy(self) -> "UnitState":
        return UnitState(
            self.P.copy(), self.P_prev.copy(), self.I.copy(), self.D.copy(),
            self.E.copy(), self.C.copy(), self.H.copy(), self.P_star.copy(),
            self.input_prev.copy(), self.initialized, self.trainable,
        )


@dataclass(frozen=True)
class LearningConfig:
    learning_rate: float = 0.01
    tau_integral: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if not 0.0 <= self.tau_integral <= 1.0:
            raise ConfigurationError("tau_integral must be in [0, 1]")


def init_state(spec: UnitSpec) -> UnitState:
    s, h, c = spec.signal_dim, spec.hidden_dim, spec.context_dim
    z = lambda n: np.zeros(n, dtype=np.float64)
    st = UnitState(
        P=z(s), P_prev=z(s), I=z(s), D=np.full(s, 0.5), E=np.full(s, 0.5),
        C=z(c), H=np.full(h, 0.5), P_star=z(s), input_prev=z(4 * s + c),
    )
    return st


def init_weights(spec: UnitSpec, master_seed: int) -> UnitWeights:
    """Uniform +-1/sqrt(fan_in) per layer; biases drawn from the same range.

    Each unit draws from its own stream derived from (master_seed, unit_id),
    so units differ while the whole model stays reproducible.
    """
    rng = np.random.default_rng([master_seed, spec.unit_id])
    fan_h = spec.input_dim
    fan_p = spec.hidden_dim
    lim_h = 1.0 / np.sqrt(fan_h)
    lim_p = 1.0 / np.sqrt(fan_p)
    return UnitWeights(
        W_h=rng.uniform(-lim_h, lim_h, size=(spec.hidden_dim, fan_h)),
        b_h=rng.uniform(-lim_h, lim_h, size=spec.hidden_dim),
        W_p=rng.uniform(-lim_p, lim_p, size=(spec.signal_dim, spec.hidden_dim)),
        b_p=rng.uniform(-lim_p, lim_p, size=spec.signal_dim),
    )


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def precompute_features(spec: UnitSpec, state: UnitState, P_new: np.ndarray, tau: float) -> None:
    """Fold the newly arrived signal into the feature block, in place.

    I <- tau*I + (1-tau)*P_new
    D <- 0.5 + (P_new - P_prev)/2
    E <- 0.5 + (P_star - P_new)/2
    then shift P -> P_prev and store P_new as P.

    On the very first signal, P_prev, P_star and I are seeded with the signal
    itself so no spurious derivative or error transient is produced.
    """
    P_new = np.asarray(P_new, dtype=np.float64)
    if P_new.shape != (spec.signal_dim,):
        raise ConfigurationError(
            f"unit {spec.unit_id}: signal shape {P_new.shape} != ({spec.signal_dim},)"
        )
    if not state.initialized:
        state.P_prev[:] = P_new
        state.P_star[:] = P_new
        state.I[:] = P_new
        state.initialized = True
    else:
        state.P_prev[:] = state.P
    state.I[:] = tau * state.I + (1.0 - tau) * P_new
    state.D[:] = 0.5 + (P_new - state.P_prev) / 2.0
    state.E[:] = 0.5 + (state.P_star - P_new) / 2.0
    state.P[:] = P_new


def forward(spec: UnitSpec, weights: UnitWeights, state: UnitState) -> None:
    """Hidden and prediction pass; retains the assembled input for training."""
    x = np.concatenate([state.P, state.D, state.I, state.E, state.C])
    state.H[:] = sigmoid(weights.W_h @ x + weights.b_h)
    state.P_star[:] = sigmoid(weights.W_p @ state.H + weights.b_p)
    if not (np.all(np.isfinite(state.H)) and np.all(np.isfinite(state.P_star))):
        raise NumericFault(f"non-finite activation in unit {spec.unit_id}")
    state.input_prev[:] = x
    state.trainable = True


def train_step(
    spec: UnitSpec,
    weights: UnitWeights,
    state: UnitState,
    target: np.ndarray,
    lr: float,
) -> None:
    """One online SGD step on L = sum((P_star - target)^2) / 2.

    Uses the forward record (input_prev, H, P_star) from the step that
    produced the current prediction; `target` is the signal that actually
    arrived. Gradients are computed against the pre-update weights.
    """
    d_out = (state.P_star - target) * state.P_star * (1.0 - state.P_star)
    d_hid = (weights.W_p.T @ d_out) * state.H * (1.0 - state.H)
    weights.W_p -= lr * np.outer(d_out, state.H)
    weights.b_p -= lr * d_out
    weights.W_h -= lr * np.outer(d_hid, state.input_prev)
    weights.b_h -= lr * d_hid
