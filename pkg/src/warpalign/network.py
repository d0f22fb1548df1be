"""Convolutional warper network with hand-rolled reverse-mode gradients.

Three conv/relu/average-pool stages feed a flatten layer and two parallel
rectified dense heads emitting the warp slopes and raw segment durations.
The forward pass records a tape of intermediates; ``backward`` replays it
to produce parameter gradients that are checked against finite differences
in the test suite.

Parameters are stored as float32 (so checkpoints round-trip bit-exactly)
while all arithmetic runs in float64 for gradient fidelity.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import Series
from .errors import (
    CheckpointIntegrityError,
    CheckpointVersionError,
    ConfigError,
    ContractViolation,
    FormatError,
    TrainingError,
)

__all__ = [
    "NetConfig",
    "WarperNetwork",
    "Checkpoint",
    "init_network",
    "save_checkpoint",
    "load_checkpoint",
    "reduced_test_config",
]

CHECKPOINT_MAGIC = b"WRPN"
CHECKPOINT_VERSION = 1

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

# serialization order of the parameter payload
PARAM_ORDER = (
    "conv1_w", "conv1_b",
    "conv2_w", "conv2_b",
    "conv3_w", "conv3_b",
    "head_a_w", "head_a_b",
    "head_t_w", "head_t_b",
)


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters: three conv/pool stages plus two heads."""

    input_len: int
    input_dim: int = 1
    conv_filter_sizes: tuple[int, int, int] = (13, 7, 3)
    conv_filter_counts: tuple[int, int, int] = (128, 64, 32)
    pool_sizes: tuple[int, int, int] = (6, 4, 2)
    pool_stride: int = 1
    k_segments: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_filter_sizes", tuple(self.conv_filter_sizes))
        object.__setattr__(self, "conv_filter_counts", tuple(self.conv_filter_counts))
        object.__setattr__(self, "pool_sizes", tuple(self.pool_sizes))
        if len(self.conv_filter_sizes) != 3 or len(self.conv_filter_counts) != 3 \
                or len(self.pool_sizes) != 3:
            raise ConfigError("exactly three conv/pool stages are supported")
        if self.pool_stride != 1:
            raise ConfigError("pooling uses stride 1")
        if self.k_segments < 1:
            raise ConfigError("head width must be >= 1")
        if any(s < 1 or s % 2 == 0 for s in self.conv_filter_sizes):
            raise ConfigError("conv filter sizes must be odd and >= 1")
        if self.input_dim < 1:
            raise ConfigError("input dim must be >= 1")
        if self.flatten_len <= 0:
            raise ConfigError(
                f"input length {self.input_len} is too short for pool sizes "
                f"{self.pool_sizes} (flatten length would be <= 0)"
            )

    @property
    def stage_lengths(self) -> tuple[int, int, int]:
        """Output length after each conv(same)+pool(valid) stage."""
        length = self.input_len
        out = []
        for p in self.pool_sizes:
            length = length - p + 1
            out.append(length)
        return tuple(out)

    @property
    def flatten_len(self) -> int:
        return self.conv_filter_counts[-1] * self.stage_lengths[-1]

    def to_dict(self) -> dict:
        return {
            "input_len": self.input_len,
            "input_dim": self.input_dim,
            "conv_filter_sizes": list(self.conv_filter_sizes),
            "conv_filter_counts": list(self.conv_filter_counts),
            "pool_sizes": list(self.pool_sizes),
            "pool_stride": self.pool_stride,
            "k_segments": self.k_segments,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NetConfig":
        return cls(
            input_len=int(payload["input_len"]),
            input_dim=int(payload["input_dim"]),
            conv_filter_sizes=tuple(payload["conv_filter_sizes"]),
            conv_filter_counts=tuple(payload["conv_filter_counts"]),
            pool_sizes=tuple(payload["pool_sizes"]),
            pool_stride=int(payload["pool_stride"]),
            k_segments=int(payload["k_segments"]),
        )


def reduced_test_config(input_len: int, input_dim: int = 1, k_segments: int = 4) -> NetConfig:
    """Narrow configuration for fast tests; same topology as the default."""
    return NetConfig(
        input_len=input_len,
        input_dim=input_dim,
        conv_filter_counts=(8, 4, 2),
        k_segments=k_segments,
    )


@dataclass
class Tape:
    """Intermediates recorded by a forward pass, consumed once by backward."""

    params: dict[str, np.ndarray]
    cols: list[np.ndarray]
    pre_acts: list[np.ndarray]
    relu_outs: list[np.ndarray]
    pool_ins: list[np.ndarray]
    flat: np.ndarray
    head_a_pre: np.ndarray
    head_t_pre: np.ndarray
    version: int


def _conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-padded 1-D convolution preserving length; returns (out, im2col)."""
    c_out, c_in, k = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=1)  # (c_in, L, k)
    cols = win.transpose(0, 2, 1).reshape(c_in * k, x.shape[1])
    out = w.reshape(c_out, c_in * k) @ cols + b[:, None]
    return out, cols


def _conv1d_same_backward(
    g_out: np.ndarray, cols: np.ndarray, w: np.ndarray, in_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (g_w, g_b, g_x) for :func:`_conv1d_same`."""
    c_out, c_in, k = w.shape
    pad = k // 2
    g_w = (g_out @ cols.T).reshape(c_out, c_in, k)
    g_b = g_out.sum(axis=1)
    g_cols = (w.reshape(c_out, c_in * k).T @ g_out).reshape(c_in, k, in_len)
    g_xp = np.zeros((c_in, in_len + 2 * pad))
    for kk in range(k):
        g_xp[:, kk : kk + in_len] += g_cols[:, kk, :]
    return g_w, g_b, g_xp[:, pad : pad + in_len]


def _avgpool1d(x: np.ndarray, size: int) -> np.ndarray:
    """Stride-1 average pooling over valid windows."""
    return sliding_window_view(x, size, axis=1).mean(axis=2)


def _avgpool1d_backward(g_out: np.ndarray, size: int, in_len: int) -> np.ndarray:
    g_x = np.zeros((g_out.shape[0], in_len))
    share = g_out / size
    for kk in range(size):
        g_x[:, kk : kk + g_out.shape[1]] += share
    return g_x


class WarperNetwork:
    """Owns the parameters, optimizer state, and forward/backward passes."""

    def __init__(
        self,
        config: NetConfig,
        params: dict[str, np.ndarray],
        seed: int = 0,
        opt_m: dict[str, np.ndarray] | None = None,
        opt_v: dict[str, np.ndarray] | None = None,
        opt_step: int = 0,
    ) -> None:
        self.config = config
        self.params = {k: np.asarray(v, dtype=np.float32) for k, v in params.items()}
        self.seed = seed
        self.opt_m = opt_m or {k: np.zeros_like(v) for k, v in self.params.items()}
        self.opt_v = opt_v or {k: np.zeros_like(v) for k, v in self.params.items()}
        self.opt_step = opt_step
        self._version = 0

    def param_items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_ORDER:
            yield name, self.params[name]

    def params64(self) -> dict[str, np.ndarray]:
        return {k: v.astype(np.float64) for k, v in self.params.items()}

    def forward(self, series: Series) -> tuple[np.ndarray, np.ndarray, Tape]:
        """Run the network on one series; returns (slopes, raw_durations, tape)."""
        if series.length != self.config.input_len:
            raise ContractViolation(
                f"series length {series.length} != configured {self.config.input_len}"
            )
        if series.dims != self.config.input_dim:
            raise ContractViolation(
                f"series dims {series.dims} != configured {self.config.input_dim}"
            )
        slopes, raw_t, tape = run_forward(self.params64(), self.config, series.values)
        tape.version = self._version
        return slopes, raw_t, tape

    def backward(
        self, tape: Tape, upstream: tuple[np.ndarray, np.ndarray]
    ) -> dict[str, np.ndarray]:
        """Parameter gradients for upstream (d_slopes, d_raw_durations)."""
        if tape.version != self._version:
            raise ContractViolation("tape is stale: parameters were updated since forward")
        return run_backward(tape, self.config, upstream)

    def step(self, grads: dict[str, np.ndarray], lr: float) -> "WarperNetwork":
        """Adaptive-moment update, applied in place."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {name}")
        self.opt_step += 1
        t = self.opt_step
        for name, _ in self.param_items():
            g = np.asarray(grads[name], dtype=np.float64)
            m = self.opt_m[name].astype(np.float64)
            v = self.opt_v[name].astype(np.float64)
            m = _ADAM_BETA1 * m + (1.0 - _ADAM_BETA1) * g
            v = _ADAM_BETA2 * v + (1.0 - _ADAM_BETA2) * g * g
            m_hat = m / (1.0 - _ADAM_BETA1**t)
            v_hat = v / (1.0 - _ADAM_BETA2**t)
            update = lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
            self.params[name] = (self.params[name].astype(np.float64) - update).astype(
                np.float32
            )
            self.opt_m[name] = m.astype(np.float32)
            self.opt_v[name] = v.astype(np.float32)
        self._version += 1
        return self

    def clone(self) -> "WarperNetwork":
        net = WarperNetwork(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            seed=self.seed,
            opt_m={k: v.copy() for k, v in self.opt_m.items()},
            opt_v={k: v.copy() for k, v in self.opt_v.items()},
            opt_step=self.opt_step,
        )
        return net


def run_forward(
    params: dict[str, np.ndarray], cfg: NetConfig, values: np.ndarray
) -> tuple[np.ndarray, np.ndarray, Tape]:
    """Functional forward pass in float64 over explicit parameters.

    Kept separate from the class so gradient checks can evaluate the exact
    same computation at perturbed parameter values.
    """
    x = np.asarray(values, dtype=np.float64)
    cols_list, pre_list, relu_list, pool_in_list = [], [], [], []
    h = x
    for stage in range(3):
        w = params[f"conv{stage + 1}_w"]
        b = params[f"conv{stage + 1}_b"]
        pre, cols = _conv1d_same(h, w, b)
        act = np.maximum(pre, 0.0)
        pooled = _avgpool1d(act, cfg.pool_sizes[stage])
        cols_list.append(cols)
        pre_list.append(pre)
        relu_list.append(act)
        pool_in_list.append(h)
        h = pooled
    flat = h.reshape(-1)
    head_a_pre = params["head_a_w"] @ flat + params["head_a_b"]
    head_t_pre = params["head_t_w"] @ flat + params["head_t_b"]
    slopes = np.maximum(head_a_pre, 0.0)
    raw_t = np.maximum(head_t_pre, 0.0)
    tape = Tape(
        params=params,
        cols=cols_list,
        pre_acts=pre_list,
        relu_outs=relu_list,
        pool_ins=pool_in_list,
        flat=flat,
        head_a_pre=head_a_pre,
        head_t_pre=head_t_pre,
        version=-1,
    )
    return slopes, raw_t, tape


def run_backward(
    tape: Tape, cfg: NetConfig, upstream: tuple[np.ndarray, np.ndarray]
) -> dict[str, np.ndarray]:
    """Reverse pass over a tape; rectifier subgradient is 0 at exactly 0."""
    g_a, g_t = (np.asarray(g, dtype=np.float64).reshape(-1) for g in upstream)
    params = tape.params
    grads: dict[str, np.ndarray] = {}

    g_a_pre = g_a * (tape.head_a_pre > 0)
    g_t_pre = g_t * (tape.head_t_pre > 0)
    grads["head_a_w"] = np.outer(g_a_pre, tape.flat)
    grads["head_a_b"] = g_a_pre
    grads["head_t_w"] = np.outer(g_t_pre, tape.flat)
    grads["head_t_b"] = g_t_pre
    g_flat = params["head_a_w"].T @ g_a_pre + params["head_t_w"].T @ g_t_pre

    g_h = g_flat.reshape(cfg.conv_filter_counts[-1], cfg.stage_lengths[-1])
    for stage in (2, 1, 0):
        act = tape.relu_outs[stage]
        g_act = _avgpool1d_backward(g_h, cfg.pool_sizes[stage], act.shape[1])
        g_pre = g_act * (tape.pre_acts[stage] > 0)
        w = params[f"conv{stage + 1}_w"]
        g_w, g_b, g_h = _conv1d_same_backward(
            g_pre, tape.cols[stage], w, tape.pool_ins[stage].shape[1]
        )
        grads[f"conv{stage + 1}_w"] = g_w
        grads[f"conv{stage + 1}_b"] = g_b
    return grads


def init_network(cfg: NetConfig, seed: int) -> WarperNetwork:
    """Fan-in scaled uniform weights, zero conv biases, identity-warp head biases.

    Head biases start at slope 1 and duration ``input_len / k`` so a fresh
    network emits a near-identity warp; head weights are additionally
    damped so random inputs only perturb that slightly.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    c_in = cfg.input_dim
    for stage in range(3):
        c_out = cfg.conv_filter_counts[stage]
        k = cfg.conv_filter_sizes[stage]
        bound = 1.0 / np.sqrt(c_in * k)
        params[f"conv{stage + 1}_w"] = rng.uniform(-bound, bound, size=(c_out, c_in, k))
        params[f"conv{stage + 1}_b"] = np.zeros(c_out)
        c_in = c_out
    flat = cfg.flatten_len
    head_bound = 0.5 / np.sqrt(flat)
    params["head_a_w"] = rng.uniform(-head_bound, head_bound, size=(cfg.k_segments, flat))
    params["head_a_b"] = np.ones(cfg.k_segments)
    params["head_t_w"] = rng.uniform(-head_bound, head_bound, size=(cfg.k_segments, flat))
    params["head_t_b"] = np.full(cfg.k_segments, cfg.input_len / cfg.k_segments)
    return WarperNetwork(cfg, params, seed=seed)


@dataclass(frozen=True)
class Checkpoint:
    """Loaded checkpoint: header metadata plus the reconstructed network."""

    format_version: int
    dataset: str
    label: int
    epoch: int
    loss: float
    network: WarperNetwork


def save_checkpoint(
    net: WarperNetwork,
    path: str | Path,
    *,
    dataset: str = "",
    label: int = -1,
    epoch: int = 0,
    loss: float = float("nan"),
) -> None:
    """Serialize network + optimizer state.

    Layout: magic, u16 version, u32 header length, canonical JSON header,
    then little-endian float32 payload (parameters in declaration order,
    then first moments, then second moments).
    """
    header = {
        "dataset": dataset,
        "label": int(label),
        "epoch": int(epoch),
        "loss": None if np.isnan(loss) else float(loss),
        "net_config": net.config.to_dict(),
        "opt_step": int(net.opt_step),
        "seed": int(net.seed),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<H", CHECKPOINT_VERSION),
              struct.pack("<I", len(header_bytes)), header_bytes]
    for store in (net.params, net.opt_m, net.opt_v):
        for name in PARAM_ORDER:
            chunks.append(np.ascontiguousarray(store[name], dtype="<f4").tobytes())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def _param_shapes(cfg: NetConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = cfg.input_dim
    for stage in range(3):
        c_out = cfg.conv_filter_counts[stage]
        shapes[f"conv{stage + 1}_w"] = (c_out, c_in, cfg.conv_filter_sizes[stage])
        shapes[f"conv{stage + 1}_b"] = (c_out,)
        c_in = c_out
    shapes["head_a_w"] = (cfg.k_segments, cfg.flatten_len)
    shapes["head_a_b"] = (cfg.k_segments,)
    shapes["head_t_w"] = (cfg.k_segments, cfg.flatten_len)
    shapes["head_t_b"] = (cfg.k_segments,)
    return shapes


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint, validating magic, version, and payload size."""
    blob = Path(path).read_bytes()
    if len(blob) < 10 or blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a warper checkpoint")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    (header_len,) = struct.unpack_from("<I", blob, 6)
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise CheckpointIntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(blob[10:header_end].decode("utf-8"))
        cfg = NetConfig.from_dict(header["net_config"])
    except (ValueError, KeyError, ConfigError) as exc:
        raise CheckpointIntegrityError(f"{path}: bad header ({exc})") from None

    shapes = _param_shapes(cfg)
    total = sum(int(np.prod(s)) for s in shapes.values())
    expected = 3 * total * 4
    payload = blob[header_end:]
    if len(payload) != expected:
        raise CheckpointIntegrityError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    stores: list[dict[str, np.ndarray]] = []
    offset = 0
    for _ in range(3):
        store: dict[str, np.ndarray] = {}
        for name in PARAM_ORDER:
            size = int(np.prod(shapes[name]))
            store[name] = flat[offset : offset + size].reshape(shapes[name]).copy()
            offset += size
        stores.append(store)
    net = WarperNetwork(
        cfg,
        stores[0],
        seed=int(header.get("seed", 0)),
        opt_m=stores[1],
        opt_v=stores[2],
        opt_step=int(header.get("opt_step", 0)),
    )
    loss = header.get("loss")
    return Checkpoint(
        format_version=version,
        dataset=str(header.get("dataset", "")),
        label=int(header.get("label", -1)),
        epoch=int(header.get("epoch", 0)),
        loss=float("nan") if loss is None else float(loss),
        network=net,
    )
