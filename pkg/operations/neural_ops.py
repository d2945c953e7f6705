"""
Neural network operations for the AP deployment optimizer
Category 4: Fixed-topology MLPs with hand-written backprop, tanh-Gaussian policy head, Adam
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

HIDDEN_SIZES = (64, 32)
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
TANH_EPSILON = 1e-6
# Keeps tanh outputs strictly inside (-1, 1) in float64
ACTION_LIMIT = 1.0 - 1e-12
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class MlpParams:
    """Weights (in x out) and biases of a ReLU MLP with a linear output layer"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("MlpParams needs one bias per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"shape mismatch in layer {i}: weight {w.shape}, bias {b.shape}")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"shape mismatch between layers {i - 1} and {i}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "MlpParams":
        return cls(weights=[np.array(a) for a in arrays[0::2]], biases=[np.array(a) for a in arrays[1::2]])

    def copy(self) -> "MlpParams":
        return MlpParams.from_arrays(self.arrays())


@dataclass
class MlpGradients:
    """Parameter gradients plus the gradient with respect to the network input"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    inputs: np.ndarray

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


@dataclass
class PolicyOutput:
    """Pre-squash Gaussian parameters; log_std already clamped"""
    mean: np.ndarray
    log_std: np.ndarray


@dataclass
class AdamState:
    """Moment accumulators for one parameter list"""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def init_mlp(input_dim: int, output_dim: int, rng: np.random.Generator,
             hidden_sizes: Sequence[int] = HIDDEN_SIZES, output_scale: float = None) -> MlpParams:
    """
    Initialize an MLP input_dim -> hidden... -> output_dim

    Weights and biases are uniform in +-1/sqrt(fan_in); the output layer uses
    +-output_scale instead when given.

    Args:
        input_dim: Input width
        output_dim: Output width
        rng: Seeded generator
        hidden_sizes: Hidden widths (64, 32 by default)
        output_scale: Optional bound for the last layer

    Returns:
        MlpParams
    """
    sizes = [input_dim, *hidden_sizes, output_dim]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        if output_scale is not None and i == len(sizes) - 2:
            bound = output_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=(fan_out,)))
    return MlpParams(weights=weights, biases=biases)


def _as_batch(params: MlpParams, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"shape mismatch: expected input of width {params.input_dim}, got {x.shape}")
    return x, single


def _forward(params: MlpParams, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    acts = [x]
    pres = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pres.append(z)
        h = relu(z) if i < last else z
        acts.append(h)
    return h, acts, pres


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """
    Forward pass

    Args:
        params: Network parameters
        x: Input vector (input_dim,) or batch (B, input_dim)

    Returns:
        Output with the same batch layout as the input
    """
    xb, single = _as_batch(params, x)
    out, _, _ = _forward(params, xb)
    return out[0] if single else out


def backward(params: MlpParams, x: np.ndarray, upstream: np.ndarray) -> MlpGradients:
    """
    Reverse-mode gradients of sum(upstream * mlp_forward(params, x))

    Args:
        params: Network parameters
        x: Input vector or batch
        upstream: Gradient with respect to the output, same layout as the output

    Returns:
        MlpGradients (weights, biases and input gradient)
    """
    xb, single = _as_batch(params, x)
    _, acts, pres = _forward(params, xb)
    dh = np.asarray(upstream, dtype=float)
    if single:
        dh = dh[None, :]
    if dh.shape != (xb.shape[0], params.output_dim):
        raise ValueError(f"shape mismatch: upstream gradient {dh.shape}, output {(xb.shape[0], params.output_dim)}")

    n = len(params.weights)
    d_w: List[np.ndarray] = [None] * n
    d_b: List[np.ndarray] = [None] * n
    for i in reversed(range(n)):
        dz = dh if i == n - 1 else dh * (pres[i] > 0.0)
        d_w[i] = acts[i].T @ dz
        d_b[i] = dz.sum(axis=0)
        dh = dz @ params.weights[i].T
    return MlpGradients(weights=d_w, biases=d_b, inputs=dh[0] if single else dh)


def split_policy_output(raw: np.ndarray) -> PolicyOutput:
    """Split an actor output [mean | log_std] and clamp log_std to [-20, 2]"""
    raw = np.asarray(raw, dtype=float)
    d = raw.shape[-1] // 2
    return PolicyOutput(mean=raw[..., :d], log_std=np.clip(raw[..., d:], LOG_STD_MIN, LOG_STD_MAX))


def policy_output_backward(raw: np.ndarray, d_mean: np.ndarray, d_log_std: np.ndarray) -> np.ndarray:
    """Gradient with respect to the raw actor output; clamped log_std entries pass no gradient"""
    raw = np.asarray(raw, dtype=float)
    d = raw.shape[-1] // 2
    raw_ls = raw[..., d:]
    inside = (raw_ls >= LOG_STD_MIN) & (raw_ls <= LOG_STD_MAX)
    return np.concatenate([d_mean, d_log_std * inside], axis=-1)


def policy_sample(out: PolicyOutput, noise: np.ndarray) -> Tuple[np.ndarray, Union[float, np.ndarray]]:
    """
    Reparameterized tanh-Gaussian sample and its log-density

    Args:
        out: Policy output (mean, clamped log_std)
        noise: Standard normal draws with the shape of mean

    Returns:
        (action in (-1, 1), log_prob summed over action dimensions)
    """
    noise = np.asarray(noise, dtype=float)
    if noise.shape != out.mean.shape:
        raise ValueError(f"shape mismatch: noise {noise.shape}, mean {out.mean.shape}")
    std = np.exp(out.log_std)
    u = out.mean + std * noise
    action = np.clip(np.tanh(u), -ACTION_LIMIT, ACTION_LIMIT)
    # (u - mean) / std == noise
    log_normal = -0.5 * noise * noise - out.log_std - HALF_LOG_2PI
    log_prob = np.sum(log_normal - np.log(1.0 - action * action + TANH_EPSILON), axis=-1)
    if np.ndim(log_prob) == 0:
        log_prob = float(log_prob)
    return action, log_prob


def policy_sample_backward(out: PolicyOutput, noise: np.ndarray, d_action: np.ndarray,
                           d_log_prob: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pull gradients of (action, log_prob) back onto (mean, log_std)

    Args:
        out: Policy output used for the sample
        noise: The same noise passed to policy_sample
        d_action: Gradient with respect to the action
        d_log_prob: Gradient with respect to log_prob (one value per sample)

    Returns:
        (d_mean, d_log_std)
    """
    noise = np.asarray(noise, dtype=float)
    std = np.exp(out.log_std)
    a = np.clip(np.tanh(out.mean + std * noise), -ACTION_LIMIT, ACTION_LIMIT)
    one_minus = 1.0 - a * a
    d_lp = np.asarray(d_log_prob, dtype=float)[..., None]
    d_u = d_action * one_minus + d_lp * (2.0 * a * one_minus / (one_minus + TANH_EPSILON))
    d_mean = d_u
    d_log_std = d_u * std * noise - d_lp
    return d_mean, d_log_std


def adam_init(params: Union[MlpParams, Sequence[np.ndarray]], learning_rate: float = 1e-5,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    arrays = params.arrays() if isinstance(params, MlpParams) else list(params)
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
        step=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(state: AdamState, params: Union[MlpParams, Sequence[np.ndarray]],
              grads: Union[MlpGradients, Sequence[np.ndarray]]) -> Tuple[Any, AdamState]:
    """
    One bias-corrected Adam descent step

    Args:
        state: Optimizer state (not modified)
        params: MlpParams or list of arrays
        grads: Matching gradients

    Returns:
        (updated params of the same type, updated state)
    """
    p_arrays = params.arrays() if isinstance(params, MlpParams) else list(params)
    g_arrays = grads.arrays() if isinstance(grads, (MlpParams, MlpGradients)) else list(grads)
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise ValueError("Adam parameter, gradient and state lists differ in length")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch in Adam step: param {p.shape}, grad {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_p.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)

    new_state = AdamState(m=new_m, v=new_v, step=t, learning_rate=state.learning_rate,
                          beta1=b1, beta2=b2, epsilon=state.epsilon)
    if isinstance(params, MlpParams):
        return MlpParams.from_arrays(new_p), new_state
    return new_p, new_state


def params_to_dict(params: MlpParams) -> Dict[str, Any]:
    """Checkpoint layout: one entry per layer with explicit shape headers"""
    return {
        "layers": [
            {
                "weight_shape": list(w.shape),
                "weight": w.reshape(-1).tolist(),
                "bias_shape": list(b.shape),
                "bias": b.tolist(),
            }
            for w, b in zip(params.weights, params.biases)
        ]
    }


def params_from_dict(doc: Dict[str, Any]) -> MlpParams:
    weights, biases = [], []
    for i, layer in enumerate(doc["layers"]):
        w = np.asarray(layer["weight"], dtype=float)
        b = np.asarray(layer["bias"], dtype=float)
        if w.size != int(np.prod(layer["weight_shape"])) or b.size != int(np.prod(layer["bias_shape"])):
            raise ValueError(f"Checkpoint layer {i} does not match its shape header")
        weights.append(w.reshape(layer["weight_shape"]))
        biases.append(b.reshape(layer["bias_shape"]))
    return MlpParams(weights=weights, biases=biases)
