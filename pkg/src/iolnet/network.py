"""The radius-predicting MLP, its initialization, and the Adam optimizer.

Architecture is fixed at 6 -> 6 -> 6 -> 1 (two hidden layers of six,
leaky ReLU with slope 0.1): inputs are the five biometric lengths plus
the target refraction, the single output is the implant curvature
radius in millimeters. A smooth floor keeps the radius above the valid
region of the optical model regardless of the raw output, so the
focusing residual is always evaluable during training.

`NetParams` values are treated as immutable; every update produces new
arrays. The scalar-tape forward pass here mirrors the batched kernels
bit for bit in structure and is what the gradient-fidelity tests
differentiate.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .autodiff import LEAKY_ALPHA, Tape, Var
from .errors import ValidationError

#: Layer widths, input to output.
LAYER_DIMS = (6, 6, 6, 1)

#: Floor of the predicted radius (mm) and the seam where the floor engages.
R_MIN_MM = 5.5
SEAM_MM = R_MIN_MM + 1.0

#: Raw-output bias at initialization (mm), near a typical implant radius.
INIT_OUTPUT_MM = 12.0
INIT_OUTPUT_WEIGHT_SCALE = 0.01


@dataclass(frozen=True)
class ParamBlock:
    """Per-layer weight matrices and bias vectors (also used for moments)."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def check_shapes(self):
        dims = LAYER_DIMS
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValidationError("expected one weight matrix and bias per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ValidationError(
                    f"layer {i}: bad shapes {w.shape}, {b.shape} for dims {dims}")

    @staticmethod
    def zeros() -> "ParamBlock":
        dims = LAYER_DIMS
        return ParamBlock(
            tuple(np.zeros((dims[i + 1], dims[i])) for i in range(len(dims) - 1)),
            tuple(np.zeros(dims[i + 1]) for i in range(len(dims) - 1)),
        )


@dataclass(frozen=True)
class NetParams:
    """MLP weights plus the fixed input normalization.

    ``input_shift`` / ``input_scale`` map raw inputs
    [al, acd_iol, cct, k_max, k_min, ref_target] (meters / diopters) to
    the normalized coordinates the layers operate on. They come from the
    declared sampling ranges, never from batch statistics, so
    normalization is identical between pretraining and fine-tuning.
    """

    block: ParamBlock
    input_shift: np.ndarray
    input_scale: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.block.check_shapes()
        if self.input_shift.shape != (6,) or self.input_scale.shape != (6,):
            raise ValidationError("input normalization must carry 6 features")
        if not np.all(self.input_scale > 0):
            raise ValidationError("input_scale entries must be strictly positive")

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        return LAYER_DIMS

    @property
    def weights(self):
        return self.block.weights

    @property
    def biases(self):
        return self.block.biases


@dataclass(frozen=True)
class AdamState:
    """Adam accumulators with decoupled weight decay on weights only."""

    step: int
    m: ParamBlock
    v: ParamBlock
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.005


def init_adam(lr: float = 0.001, weight_decay: float = 0.005,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(step=0, m=ParamBlock.zeros(), v=ParamBlock.zeros(),
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                     weight_decay=weight_decay)


def init_network(seed: int, feature_bounds) -> NetParams:
    """Deterministically initialize weights and the input normalization.

    ``feature_bounds`` is a (6, 2) array of per-feature [low, high]
    sampling bounds; normalization maps each feature to roughly [-1, 1]
    via midpoint and half-width. Hidden layers draw uniform fan-in
    scaled weights; the output layer is shrunk and its bias set to a
    typical radius so that initial predictions sit safely inside the
    valid region.
    """
    bounds = np.asarray(feature_bounds, dtype=float)
    if bounds.shape != (6, 2):
        raise ValidationError(f"feature_bounds must be (6, 2), got {bounds.shape}")
    shift = bounds.mean(axis=1)
    scale = 0.5 * (bounds[:, 1] - bounds[:, 0])
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6e657477]))
    dims = LAYER_DIMS
    weights, biases = [], []
    for i in range(len(dims) - 1):
        lim = 1.0 / math.sqrt(dims[i])
        weights.append(rng.uniform(-lim, lim, size=(dims[i + 1], dims[i])))
        biases.append(rng.uniform(-lim, lim, size=dims[i + 1]))
    weights[-1] = weights[-1] * INIT_OUTPUT_WEIGHT_SCALE
    biases[-1] = np.array([INIT_OUTPUT_MM])
    return NetParams(block=ParamBlock(tuple(weights), tuple(biases)),
                     input_shift=shift, input_scale=scale, seed=int(seed))


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

def radius_floor_mm(u: float) -> float:
    """Smooth floor on the raw output: identity above the seam, an
    exponential easing to ``R_MIN_MM`` below it (continuously
    differentiable at the seam)."""
    if u >= SEAM_MM:
        return u
    return R_MIN_MM + math.exp(u - SEAM_MM)


def radius_floor_grad_mm(u: float) -> float:
    if u >= SEAM_MM:
        return 1.0
    return math.exp(u - SEAM_MM)


def mlp_forward(params: NetParams, x: Sequence[float]) -> float:
    """Predicted implant curvature radius in meters for one input vector.

    ``x`` is [al, acd_iol, cct, k_max, k_min, ref_target] in meters and
    diopters. The raw output is interpreted in millimeters, floored, and
    converted to meters.
    """
    xv = np.asarray(x, dtype=float)
    if xv.shape != (6,) or not np.all(np.isfinite(xv)):
        raise ValidationError("input must be 6 finite values")
    h = (xv - params.input_shift) / params.input_scale
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ h + b
        h = z if i == n_layers - 1 else np.where(z >= 0, z, LEAKY_ALPHA * z)
    return radius_floor_mm(float(h[0])) * 1e-3


@dataclass
class VarParams:
    """Tape-node view of NetParams used by the scalar autodiff path."""

    weights: List[List[List[Var]]]
    biases: List[List[Var]]
    input_shift: np.ndarray
    input_scale: np.ndarray


def lift_params(tape: Tape, params: NetParams) -> VarParams:
    """Wrap every weight and bias as a leaf node on ``tape``."""
    weights = [[[tape.var(w[i, j]) for j in range(w.shape[1])]
                for i in range(w.shape[0])] for w in params.weights]
    biases = [[tape.var(b[i]) for i in range(b.shape[0])] for b in params.biases]
    return VarParams(weights, biases, params.input_shift, params.input_scale)


def mlp_forward_vars(vp: VarParams, x: Sequence) -> Var:
    """Tape version of :func:`mlp_forward`; entries of ``x`` may be nodes."""
    h = [(x[i] - vp.input_shift[i]) / vp.input_scale[i] for i in range(6)]
    n_layers = len(vp.weights)
    for li, (w, b) in enumerate(zip(vp.weights, vp.biases)):
        z = []
        for i in range(len(w)):
            acc = b[i]
            for j, hj in enumerate(h):
                acc = acc + w[i][j] * hj
            z.append(acc if li == n_layers - 1 else acc.leaky_relu(LEAKY_ALPHA))
        h = z
    u = h[0]
    if u.value >= SEAM_MM:
        r_mm = u
    else:
        r_mm = (u - SEAM_MM).exp() + R_MIN_MM
    return r_mm * 1e-3


def tape_eval_grad(loss_builder: Callable[[VarParams], Var],
                   params: NetParams) -> Tuple[float, ParamBlock]:
    """Loss value and exact parameter gradients of a composed scalar graph.

    ``loss_builder`` receives the tape-node view of ``params`` and must
    return a single scalar node built from supported primitives.
    """
    tape = Tape()
    vp = lift_params(tape, params)
    loss = loss_builder(vp)
    adj = tape.grad(loss)
    gw = tuple(np.array([[adj[v.index] for v in row] for row in w])
               for w in vp.weights)
    gb = tuple(np.array([adj[v.index] for v in b]) for b in vp.biases)
    return loss.value, ParamBlock(gw, gb)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

def adam_step(state: AdamState, params: NetParams,
              grads: ParamBlock) -> Tuple[NetParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state.

    Weight decay is decoupled: weights (not biases) are multiplied by
    ``1 - lr * weight_decay`` before the moment update is applied.
    """
    grads.check_shapes()
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_w, new_b, m_w, m_b, v_w, v_b = [], [], [], [], [], []
    for kind in ("weights", "biases"):
        for p, g, m, v in zip(getattr(params.block, kind), getattr(grads, kind),
                              getattr(state.m, kind), getattr(state.v, kind)):
            m2 = b1 * m + (1.0 - b1) * g
            v2 = b2 * v + (1.0 - b2) * g * g
            step = state.lr * (m2 / c1) / (np.sqrt(v2 / c2) + state.eps)
            base = p * (1.0 - state.lr * state.weight_decay) if kind == "weights" else p
            (new_w if kind == "weights" else new_b).append(base - step)
            (m_w if kind == "weights" else m_b).append(m2)
            (v_w if kind == "weights" else v_b).append(v2)
    params2 = replace(params, block=ParamBlock(tuple(new_w), tuple(new_b)))
    state2 = replace(state, step=t, m=ParamBlock(tuple(m_w), tuple(m_b)),
                     v=ParamBlock(tuple(v_w), tuple(v_b)))
    return params2, state2
