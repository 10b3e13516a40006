"""Feed-forward policy network with a 2-way softmax head.

Small enough to run on plain numpy: rectified-linear hidden layers, exact
hand-written backprop, and an adaptive-moment parameter update. Keeping the
arithmetic in-process makes training runs bit-reproducible and lets
checkpoints round-trip through plain text exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "stowrl-policy-v1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

HIDDEN_ACTIVATIONS = ("relu",)


class CheckpointError(ValueError):
    """Base class for unreadable checkpoint files."""


class CheckpointVersionError(CheckpointError):
    """The file is not a recognized checkpoint version."""


class CheckpointTruncatedError(CheckpointError):
    """The file ends before all declared content was read."""


class CheckpointShapeError(CheckpointError):
    """Stored tensors do not match the declared or expected layer sizes."""


@dataclass
class NetSpec:
    layer_sizes: tuple[int, ...] = (144, 128, 64, 32, 2)
    hidden_activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        self.layer_sizes = tuple(int(w) for w in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output width")
        if any(w < 1 for w in self.layer_sizes):
            raise ValueError(f"zero or negative layer width in {self.layer_sizes}")
        if self.layer_sizes[-1] != 2:
            raise ValueError("output layer must have width 2 (agree / disagree)")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")


@dataclass
class TrainBatch:
    """Observations with the action taken and its advantage weight."""

    observations: np.ndarray  # (n, input_width) float64
    actions: np.ndarray  # (n,) int, 0 = agree, 1 = disagree
    advantages: np.ndarray  # (n,) float64

    @classmethod
    def from_samples(cls, samples) -> "TrainBatch":
        """Build from objects exposing .observation, .action and .v."""
        obs = np.stack([np.asarray(s.observation, dtype=np.float64) for s in samples])
        actions = np.array([s.action for s in samples], dtype=np.int64)
        adv = np.array([s.v for s in samples], dtype=np.float64)
        return cls(obs, actions, adv)

    def validate(self, input_width: int) -> None:
        if self.observations.ndim != 2 or len(self.observations) == 0:
            raise ValueError("batch must be a non-empty (n, width) matrix")
        if self.observations.shape[1] != input_width:
            raise ValueError(
                f"observation width {self.observations.shape[1]} does not match "
                f"network input width {input_width}"
            )
        if len(self.actions) != len(self.observations) or len(self.advantages) != len(
            self.observations
        ):
            raise ValueError("observations, actions and advantages must align")
        if not np.all((self.actions == 0) | (self.actions == 1)):
            raise ValueError("actions must be 0 (agree) or 1 (disagree)")
        if not np.all(np.isfinite(self.observations)) or not np.all(
            np.isfinite(self.advantages)
        ):
            raise ValueError("batch holds non-finite observations or advantages")


class PolicyNet:
    """Weights, biases and optimizer moments for the policy."""

    def __init__(self, spec: NetSpec, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.spec = spec
        self.weights = weights
        self.biases = biases
        self.m_w = [np.zeros_like(w) for w in weights]
        self.v_w = [np.zeros_like(w) for w in weights]
        self.m_b = [np.zeros_like(b) for b in biases]
        self.v_b = [np.zeros_like(b) for b in biases]
        self.update_count = 0

    @property
    def input_width(self) -> int:
        return self.spec.layer_sizes[0]

    def forward(self, observation) -> np.ndarray:
        return forward(self, observation)


def init_net(spec: NetSpec) -> PolicyNet:
    """Fresh network: uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    rng = np.random.default_rng(spec.seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(spec.layer_sizes, spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return PolicyNet(spec, weights, biases)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(net: PolicyNet, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Activations per layer (input first) and output probabilities."""
    activations = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if i < last:
            z = np.maximum(z, 0.0)
        activations.append(z)
        h = z
    return activations, _softmax(activations[-1])


def forward(net: PolicyNet, observation) -> np.ndarray:
    """Action probabilities (agree, disagree) for one observation."""
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != net.input_width:
        raise ValueError(
            f"observation of length {obs.shape} does not match input width "
            f"{net.input_width}"
        )
    _, probs = _forward_batch(net, obs[None, :])
    return probs[0]


def loss_and_gradients(
    net: PolicyNet, batch: TrainBatch, center_advantages: bool = False
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Advantage-weighted cross entropy and its exact parameter gradients.

    loss = -sum_i advantage_i * log p(action_i | observation_i), summed (not
    averaged) over the batch, so scaling every advantage scales the gradient
    by the same factor. With center_advantages the batch mean is subtracted
    from every advantage first (off by default).
    """
    batch.validate(net.input_width)
    advantages = batch.advantages
    if center_advantages:
        advantages = advantages - advantages.mean()
    activations, probs = _forward_batch(net, batch.observations)
    n = len(batch.actions)
    rows = np.arange(n)
    # floor keeps a saturated policy from turning the report into -inf * 0
    picked = np.maximum(probs[rows, batch.actions], 1e-300)
    loss = float(-(advantages * np.log(picked)).sum())

    delta = probs.copy()
    delta[rows, batch.actions] -= 1.0
    delta *= advantages[:, None]

    grads_w: list[np.ndarray] = [None] * len(net.weights)
    grads_b: list[np.ndarray] = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (activations[i] > 0.0)
    return loss, grads_w, grads_b


def train_batch(
    net: PolicyNet, batch: TrainBatch, lr: float, center_advantages: bool = False
) -> float:
    """One adaptive-moment descent step; returns the pre-update loss.

    Rejects non-finite inputs before touching the network and refuses to
    commit a step that would leave any parameter non-finite.
    """
    if not (lr > 0.0):
        raise ValueError(f"learning rate must be positive, got {lr}")
    loss, grads_w, grads_b = loss_and_gradients(net, batch, center_advantages)

    t = net.update_count + 1
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    new_params = []
    for params, grads, ms, vs in (
        (net.weights, grads_w, net.m_w, net.v_w),
        (net.biases, grads_b, net.m_b, net.v_b),
    ):
        for i, g in enumerate(grads):
            ms[i] = ADAM_BETA1 * ms[i] + (1.0 - ADAM_BETA1) * g
            vs[i] = ADAM_BETA2 * vs[i] + (1.0 - ADAM_BETA2) * g * g
            step = lr * (ms[i] / bias1) / (np.sqrt(vs[i] / bias2) + ADAM_EPS)
            new_params.append((params, i, params[i] - step))
    for params, i, value in new_params:
        if not np.all(np.isfinite(value)):
            raise ArithmeticError("update would produce non-finite parameters")
    for params, i, value in new_params:
        params[i] = value
    net.update_count = t
    return loss


# ---------------------------------------------------------------------------
# Checkpoints: plain text, format version 1. Floats are written with repr so
# they round-trip bit-exactly; optimizer moments are not persisted.


def save(net: PolicyNet, path) -> None:
    lines = [
        CHECKPOINT_MAGIC,
        "layer_sizes " + " ".join(str(w) for w in net.spec.layer_sizes),
        f"hidden_activation {net.spec.hidden_activation}",
        f"seed {net.spec.seed}",
        f"update_count {net.update_count}",
    ]
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"tensor W{i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(float(x)) for x in row))
        lines.append(f"tensor b{i} {b.shape[0]}")
        lines.append(" ".join(repr(float(x)) for x in b))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_floats(line: str, count: int, what: str) -> np.ndarray:
    parts = line.split()
    if len(parts) != count:
        raise CheckpointShapeError(f"{what}: expected {count} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise CheckpointTruncatedError(f"{what}: unreadable value ({exc})") from exc


def load(path, expect_layer_sizes: tuple[int, ...] | None = None) -> PolicyNet:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    pos = 0

    def next_line(what: str) -> str:
        nonlocal pos
        if pos >= len(lines):
            raise CheckpointTruncatedError(f"file ends before {what}")
        line = lines[pos]
        pos += 1
        return line

    if next_line("header") != CHECKPOINT_MAGIC:
        raise CheckpointVersionError(
            f"not a {CHECKPOINT_MAGIC} checkpoint: {lines[0][:40]!r}"
        )

    def header_field(name: str) -> str:
        line = next_line(name)
        key, _, value = line.partition(" ")
        if key != name:
            raise CheckpointTruncatedError(f"expected {name} line, got {line[:40]!r}")
        return value

    try:
        layer_sizes = tuple(int(w) for w in header_field("layer_sizes").split())
        activation = header_field("hidden_activation")
        seed = int(header_field("seed"))
        update_count = int(header_field("update_count"))
    except ValueError as exc:
        raise CheckpointTruncatedError(f"bad header value ({exc})") from exc

    spec = NetSpec(layer_sizes, activation, seed)
    if expect_layer_sizes is not None and tuple(expect_layer_sizes) != layer_sizes:
        raise CheckpointShapeError(
            f"checkpoint stores layers {layer_sizes}, expected {tuple(expect_layer_sizes)}"
        )

    weights = []
    biases = []
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes, layer_sizes[1:])):
        tag = next_line(f"tensor W{i}").split()
        if len(tag) != 4 or tag[:2] != ["tensor", f"W{i}"]:
            raise CheckpointTruncatedError(f"expected tensor W{i} header")
        if tag[2:] != [str(fan_in), str(fan_out)]:
            raise CheckpointShapeError(
                f"W{i} is {tag[2]}x{tag[3]}, layer sizes say {fan_in}x{fan_out}"
            )
        rows = [
            _parse_floats(next_line(f"W{i} row {r}"), fan_out, f"W{i} row {r}")
            for r in range(fan_in)
        ]
        weights.append(np.stack(rows))
        tag = next_line(f"tensor b{i}").split()
        if len(tag) != 3 or tag[:2] != ["tensor", f"b{i}"]:
            raise CheckpointTruncatedError(f"expected tensor b{i} header")
        if tag[2] != str(fan_out):
            raise CheckpointShapeError(f"b{i} has {tag[2]} values, expected {fan_out}")
        biases.append(_parse_floats(next_line(f"b{i}"), fan_out, f"b{i}"))
    if next_line("end marker") != "end":
        raise CheckpointTruncatedError("missing end marker")

    net = PolicyNet(spec, weights, biases)
    net.update_count = update_count
    return net
