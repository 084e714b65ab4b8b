"""Small fully-connected networks with manual backprop, Adam, and soft target updates.

No autograd graph: exactly the fixed feed-forward shape the scheduler needs.
Forward passes cache layer outputs; backward recovers activation derivatives
from those outputs.  All arithmetic is float64.

Weight files are binary with an ASCII header::

    hemsim-mlp v1
    layers 7 300 600 2
    hidden relu
    output tanh sigmoid
    adam_t 0
    moments 0

followed by raw little-endian float64 values, row-major: W then b per layer
(then, when ``moments 1``, per layer the Adam m/v arrays for W and b).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from ._kernels import ACT_IDENTITY, ACT_RELU, ACT_SIGMOID, ACT_TANH  # noqa: F401

ACTIVATION_CODES = {
    "identity": ACT_IDENTITY,
    "relu": ACT_RELU,
    "tanh": ACT_TANH,
    "sigmoid": ACT_SIGMOID,
}
ACTIVATION_NAMES = {v: k for k, v in ACTIVATION_CODES.items()}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class NumericError(RuntimeError):
    """A NaN or infinity reached an optimizer or loss."""


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output) and activations."""

    layer_sizes: tuple[int, ...]
    output_activations: tuple[str, ...]
    hidden_activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if len(self.layer_sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer widths must be >= 1")
        if self.hidden_activation not in ACTIVATION_CODES:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        n_out = self.layer_sizes[-1]
        if len(self.output_activations) not in (1, n_out):
            raise ValueError(f"need 1 or {n_out} output activations")
        for name in self.output_activations:
            if name not in ACTIVATION_CODES:
                raise ValueError(f"unknown output activation {name!r}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


class Gradients(NamedTuple):
    weights: list
    biases: list


class Mlp:
    """Weights, biases, and Adam state for one network."""

    def __init__(self, spec: MlpSpec, weights, biases, adam_t: int = 0, moments=None):
        self.spec = spec
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        expected = list(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))
        shapes = [w.shape for w in self.weights]
        if shapes != expected:
            raise ValueError(f"weight shapes {shapes} do not match spec {expected}")
        for b, (_, n) in zip(self.biases, expected):
            if b.shape != (n,):
                raise ValueError(f"bias shape {b.shape} does not match layer width {n}")
        self.adam_t = adam_t
        if moments is None:
            self.m_w = [np.zeros_like(w) for w in self.weights]
            self.v_w = [np.zeros_like(w) for w in self.weights]
            self.m_b = [np.zeros_like(b) for b in self.biases]
            self.v_b = [np.zeros_like(b) for b in self.biases]
        else:
            self.m_w, self.v_w, self.m_b, self.v_b = moments
        self._act_codes = _layer_act_codes(spec)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        """Fresh network with the same weights and zeroed optimizer state."""
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _layer_act_codes(spec: MlpSpec) -> list:
    hidden = ACTIVATION_CODES[spec.hidden_activation]
    codes = []
    for width in spec.layer_sizes[1:-1]:
        codes.append(np.full(width, hidden, dtype=np.int8))
    names = spec.output_activations
    if len(names) == 1:
        names = names * spec.n_outputs
    codes.append(np.array([ACTIVATION_CODES[n] for n in names], dtype=np.int8))
    return codes


def init_mlp(spec: MlpSpec) -> Mlp:
    """Uniform +/- 1/sqrt(fan_in) weights, zero biases; deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec, weights, biases)


class ForwardCache(NamedTuple):
    layers: list          # [input, h1, ..., output], all 2-D
    squeeze: bool         # True when the caller passed a single vector


def forward(net: Mlp, x: np.ndarray):
    """Evaluate the network.  Accepts a single input vector or a batch
    (rows are samples); returns (output, cache) with the cache feeding
    :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = np.ascontiguousarray(x.reshape(1, -1) if squeeze else x)
    if h.shape[1] != net.spec.n_inputs:
        raise ValueError(f"input width {h.shape[1]}, expected {net.spec.n_inputs}")
    layers = [h]
    for w, b, act in zip(net.weights, net.biases, net._act_codes):
        h = _kernels.affine_forward(h, w, b, act)
        layers.append(h)
    out = h[0] if squeeze else h
    return out, ForwardCache(layers, squeeze)


def backward(net: Mlp, cache: ForwardCache, d_out: np.ndarray,
             need_param_grads: bool = True, need_input_grad: bool = True):
    """Reverse-mode gradients from an output cotangent.

    Returns (grads, d_input); either entry is None when not requested.
    Weight gradients for the first layer never require an input gradient and
    vice versa, so both flags can be dropped independently.
    """
    layers = cache.layers
    if len(layers) != net.n_layers + 1:
        raise ValueError("cache does not match this network")
    d = np.asarray(d_out, dtype=np.float64)
    if cache.squeeze:
        d = d.reshape(1, -1)
    if d.shape != layers[-1].shape:
        raise ValueError(f"output gradient shape {d.shape}, expected {layers[-1].shape}")
    d = np.ascontiguousarray(d)

    d_weights = [None] * net.n_layers
    d_biases = [None] * net.n_layers
    for i in range(net.n_layers - 1, -1, -1):
        want_dx = need_input_grad or i > 0
        d_w, d_b, d = _kernels.affine_backward(
            d, layers[i + 1], layers[i], net.weights[i], net._act_codes[i],
            need_param_grads, want_dx)
        d_weights[i] = d_w
        d_biases[i] = d_b
    grads = Gradients(d_weights, d_biases) if need_param_grads else None
    d_input = None
    if need_input_grad:
        d_input = d[0] if cache.squeeze else d
    return grads, d_input


def adam_update(net: Mlp, grads: Gradients, learning_rate: float,
                beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                eps: float = ADAM_EPS) -> None:
    """One Adam step over every parameter array, in place."""
    net.adam_t += 1
    t = net.adam_t
    for i in range(net.n_layers):
        bad = _kernels.adam_step(net.weights[i].ravel(), grads.weights[i].ravel(),
                                 net.m_w[i].ravel(), net.v_w[i].ravel(),
                                 t, learning_rate, beta1, beta2, eps)
        bad |= _kernels.adam_step(net.biases[i], grads.biases[i],
                                  net.m_b[i], net.v_b[i],
                                  t, learning_rate, beta1, beta2, eps)
        if bad:
            raise NumericError(f"non-finite gradient in layer {i}")


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if target.spec.layer_sizes != online.spec.layer_sizes:
        raise ValueError("target and online networks have different shapes")
    for i in range(target.n_layers):
        _kernels.blend(target.weights[i].ravel(), online.weights[i].ravel(), tau)
        _kernels.blend(target.biases[i], online.biases[i], tau)


def save_mlp(net: Mlp, path: str | Path, include_moments: bool = False) -> None:
    """Write the documented header + raw-float64 weight file."""
    path = Path(path)
    out_names = net.spec.output_activations
    if len(out_names) == 1:
        out_names = out_names * net.spec.n_outputs
    header = (
        "hemsim-mlp v1\n"
        f"layers {' '.join(str(n) for n in net.spec.layer_sizes)}\n"
        f"hidden {net.spec.hidden_activation}\n"
        f"output {' '.join(out_names)}\n"
        f"adam_t {net.adam_t}\n"
        f"moments {1 if include_moments else 0}\n"
    )
    with path.open("wb") as fh:
        fh.write(header.encode("ascii"))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        if include_moments:
            for arrs in (net.m_w, net.v_w, net.m_b, net.v_b):
                for a in arrs:
                    fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_mlp(path: str | Path) -> Mlp:
    path = Path(path)
    with path.open("rb") as fh:
        lines = [fh.readline().decode("ascii").strip() for _ in range(6)]
        if lines[0] != "hemsim-mlp v1":
            raise ValueError(f"{path}: not a weight file (header {lines[0]!r})")
        sizes = tuple(int(v) for v in lines[1].split()[1:])
        hidden = lines[2].split()[1]
        outputs = tuple(lines[3].split()[1:])
        adam_t = int(lines[4].split()[1])
        has_moments = bool(int(lines[5].split()[1]))
        spec = MlpSpec(layer_sizes=sizes, output_activations=outputs, hidden_activation=hidden)

        def read_array(shape) -> np.ndarray:
            n = int(np.prod(shape))
            buf = fh.read(n * 8)
            if len(buf) != n * 8:
                raise ValueError(f"{path}: truncated weight file")
            return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

        shapes = list(zip(sizes[:-1], sizes[1:]))
        weights, biases = [], []
        for m, n in shapes:
            weights.append(read_array((m, n)))
            biases.append(read_array((n,)))
        moments = None
        if has_moments:
            m_w = [read_array(s) for s in shapes]
            v_w = [read_array(s) for s in shapes]
            m_b = [read_array((n,)) for _, n in shapes]
            v_b = [read_array((n,)) for _, n in shapes]
            moments = (m_w, v_w, m_b, v_b)
    return Mlp(spec, weights, biases, adam_t=adam_t, moments=moments)
