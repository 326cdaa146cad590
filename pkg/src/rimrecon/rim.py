"""The recurrent inference network: three convolution stages interleaved with
two recurrent layers (GRU, MGU, or IndRNN), unrolled over t time-steps.

The recurrent input and hidden maps are dense over the F features and shared
across pixels; convolutions carry the spatial context.  Channel order into the
first convolution is (Re x, Im x, Re grad, Im grad) and is frozen for
checkpoint compatibility.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, ParseError, ShapeError
from .mri import adjoint_op, loglik_gradient
from .numcore import tape
from .numcore.tape import Var, value_of

CELL_KINDS = ("GRU", "MGU", "IndRNN")

KERNEL_SIZES = (5, 3, 3)
IN_CHANNELS = 4
OUT_CHANNELS = 2


@dataclass
class RimConfig:
    features: int = 64
    time_steps: int = 8
    cell_kind: str = "GRU"

    def __post_init__(self):
        if self.features < 1 or self.time_steps < 1:
            raise ConfigError(f"features and time_steps must be >= 1, got {self}")
        if self.cell_kind not in CELL_KINDS:
            raise ConfigError(f"unknown cell kind {self.cell_kind!r}, expected one of {CELL_KINDS}")


def _cell_block_shapes(kind, f):
    if kind == "GRU":
        names = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")
    elif kind == "MGU":
        names = ("wf", "uf", "bf", "wh", "uh", "bh")
    else:  # IndRNN
        return [("w", (f, f)), ("u", (f,)), ("b", (f,))]
    return [(n, (f, f) if n[0] in "wu" else (f,)) for n in names]


def param_shapes(config):
    """Ordered (name, shape) pairs of every learnable block."""
    f = config.features
    k1, k2, k3 = KERNEL_SIZES
    shapes = [
        ("conv1_w", (f, IN_CHANNELS, k1, k1)),
        ("conv1_b", (f,)),
    ]
    shapes += [(f"cell1_{n}", s) for n, s in _cell_block_shapes(config.cell_kind, f)]
    shapes += [
        ("conv2_w", (f, f, k2, k2)),
        ("conv2_b", (f,)),
    ]
    shapes += [(f"cell2_{n}", s) for n, s in _cell_block_shapes(config.cell_kind, f)]
    shapes += [
        ("conv3_w", (OUT_CHANNELS, f, k3, k3)),
        ("conv3_b", (OUT_CHANNELS,)),
    ]
    return shapes


def param_count(config):
    """Exact number of learnable scalars for a configuration."""
    return int(sum(np.prod(s) for _, s in param_shapes(config)))


def _xavier(rng, shape):
    if len(shape) == 4:
        fan_in = shape[1] * shape[2] * shape[3]
        fan_out = shape[0] * shape[2] * shape[3]
    else:
        fan_in, fan_out = shape[1], shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


@dataclass
class RimModel:
    config: RimConfig
    params: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, config, seed=0):
        """Xavier-uniform weights, zero biases, IndRNN recurrence in [0, 1]."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in param_shapes(config):
            base = name.split("_", 1)[1]
            if base.startswith("b") or name.endswith("_b"):
                params[name] = np.zeros(shape)
            elif config.cell_kind == "IndRNN" and base == "u":
                params[name] = rng.uniform(0.0, 1.0, shape)
            else:
                params[name] = _xavier(rng, shape)
        return cls(config, params)

    @classmethod
    def zeros(cls, config):
        return cls(config, {n: np.zeros(s) for n, s in param_shapes(config)})

    def param_names(self):
        return [n for n, _ in param_shapes(self.config)]

    def as_vars(self):
        """A copy of the model whose parameters are tape nodes, for training."""
        return RimModel(self.config, {n: Var(v) for n, v in self.params.items()})

    def copy(self):
        return RimModel(self.config, {n: np.array(v) for n, v in self.params.items()})


@dataclass
class RimState:
    x: object  # complex (H, W) image estimate, ndarray or tape node
    s1: object  # (F, H, W) hidden state of the first recurrent layer
    s2: object  # (F, H, W) hidden state of the second recurrent layer

    @classmethod
    def initial(cls, x0, features):
        h, w = value_of(x0).shape
        return cls(x0, np.zeros((features, h, w)), np.zeros((features, h, w)))


def cell_step(kind, params, prefix, inp, hidden):
    """One recurrent update on per-pixel feature vectors.

    GRU:    z = sig(Wz a + Uz h + bz); r = sig(Wr a + Ur h + br)
            hc = tanh(Wh a + Uh (r*h) + bh); h' = (1-z)*h + z*hc
    MGU:    f = sig(Wf a + Uf h + bf)
            hc = tanh(Wh a + Uh (f*h) + bh); h' = (1-f)*h + f*hc
    IndRNN: h' = relu(W a + u*h + b) with an elementwise recurrence vector u.
    """
    p = lambda n: params[f"{prefix}_{n}"]
    if value_of(inp).shape != value_of(hidden).shape:
        raise ShapeError(
            f"cell input {value_of(inp).shape} != hidden {value_of(hidden).shape}"
        )
    if kind == "GRU":
        z = tape.sigmoid(tape.add(tape.dense_pixelwise(p("wz"), inp, p("bz")),
                                  tape.dense_pixelwise(p("uz"), hidden)))
        r = tape.sigmoid(tape.add(tape.dense_pixelwise(p("wr"), inp, p("br")),
                                  tape.dense_pixelwise(p("ur"), hidden)))
        hc = tape.tanh(tape.add(tape.dense_pixelwise(p("wh"), inp, p("bh")),
                                tape.dense_pixelwise(p("uh"), tape.mul(r, hidden))))
        keep = tape.mul(tape.sub(np.float64(1.0), z), hidden)
        return tape.add(keep, tape.mul(z, hc))
    if kind == "MGU":
        f = tape.sigmoid(tape.add(tape.dense_pixelwise(p("wf"), inp, p("bf")),
                                  tape.dense_pixelwise(p("uf"), hidden)))
        hc = tape.tanh(tape.add(tape.dense_pixelwise(p("wh"), inp, p("bh")),
                                tape.dense_pixelwise(p("uh"), tape.mul(f, hidden))))
        keep = tape.mul(tape.sub(np.float64(1.0), f), hidden)
        return tape.add(keep, tape.mul(f, hc))
    if kind == "IndRNN":
        rec = _indrnn_recurrence(p("u"), hidden)
        drive = tape.dense_pixelwise(p("w"), inp, p("b"))
        return tape.relu(tape.add(drive, rec))
    raise ConfigError(f"unknown cell kind {kind!r}")


def _indrnn_recurrence(u, hidden):
    uv, hv = value_of(u), value_of(hidden)
    out = uv[:, None, None] * hv
    if not (isinstance(u, Var) or isinstance(hidden, Var)):
        return out
    return tape._node(
        out,
        (u, lambda g: np.einsum("fhw,fhw->f", g, hv)),
        (hidden, lambda g: g * uv[:, None, None]),
    )


def rim_step(model, state, gradient):
    """One unrolled update: conv/cell pipeline emitting an additive image step."""
    params = model.params
    kind = model.config.cell_kind
    x = state.x
    stacked = tape.stack_channels([
        tape.real(x), tape.imag(x), tape.real(gradient), tape.imag(gradient)
    ])
    h1 = tape.relu(tape.conv2d(stacked, params["conv1_w"], params["conv1_b"]))
    s1 = cell_step(kind, params, "cell1", h1, state.s1)
    h2 = tape.relu(tape.conv2d(s1, params["conv2_w"], params["conv2_b"]))
    s2 = cell_step(kind, params, "cell2", h2, state.s2)
    delta = tape.conv2d(s2, params["conv3_w"], params["conv3_b"])
    dx = tape.make_complex(tape.channel(delta, 0), tape.channel(delta, 1))
    return RimState(tape.add(x, dx), s1, s2)


def rim_forward(model, coils, mask, sigma=1.0):
    """Unrolled reconstruction from the zero-filled start; returns x_1..x_t."""
    if coils.measurements is None:
        raise ContractError("coils carry no measurements")
    x0 = adjoint_op(coils.measurements, coils, mask)
    state = RimState.initial(x0, model.config.features)
    estimates = []
    for _ in range(model.config.time_steps):
        grad = loglik_gradient(state.x, coils, mask, sigma)
        state = rim_step(model, state, grad)
        estimates.append(state.x)
    return estimates


def reconstruct(model, coils, mask, sigma=1.0):
    """Final estimate of the unrolled network (no tape recording)."""
    return value_of(rim_forward(model, coils, mask, sigma)[-1])


# ---------------------------------------------------------------------------
# checkpoint I/O

_CKPT_MAGIC = b"RIMC"
_CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sBBIIBBB")
_KIND_CODES = {k: i for i, k in enumerate(CELL_KINDS)}


def save_checkpoint(model, path, sidecar=None):
    """Versioned binary checkpoint plus a key-value text sidecar."""
    cfg = model.config
    header = _CKPT_HEADER.pack(
        _CKPT_MAGIC, _CKPT_VERSION, _KIND_CODES[cfg.cell_kind],
        cfg.features, cfg.time_steps, *KERNEL_SIZES,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name, shape in param_shapes(cfg):
            block = np.ascontiguousarray(model.params[name], dtype="<f8")
            if block.shape != shape:
                raise ShapeError(f"parameter {name} has shape {block.shape}, expected {shape}")
            fh.write(block.tobytes())
    meta = dict(sidecar or {})
    meta.setdefault("cell_kind", cfg.cell_kind)
    meta.setdefault("features", cfg.features)
    meta.setdefault("time_steps", cfg.time_steps)
    with open(str(path) + ".meta", "w") as fh:
        for key in meta:
            fh.write(f"{key} = {meta[key]}\n")


def load_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise ParseError("truncated checkpoint header", len(raw))
    magic, version, kind_code, features, steps, k1, k2, k3 = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != _CKPT_MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != _CKPT_VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", 4)
    if (k1, k2, k3) != KERNEL_SIZES:
        raise ParseError(f"unexpected kernel sizes {(k1, k2, k3)}", 13)
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if kind_code not in kinds:
        raise ParseError(f"unknown cell kind code {kind_code}", 5)
    config = RimConfig(features, steps, kinds[kind_code])
    offset = _CKPT_HEADER.size
    params = {}
    for name, shape in param_shapes(config):
        n = int(np.prod(shape))
        end = offset + 8 * n
        if end > len(raw):
            raise ParseError(f"truncated parameter block {name}", len(raw))
        params[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise ParseError("trailing bytes after parameter blocks", offset)
    return RimModel(config, params)
