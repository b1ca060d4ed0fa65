"""Dual-path match/mismatch network: forward pass and analytic gradients.

The EEG path runs a 1-D convolution over time followed by a time-distributed
dense layer; each speech input runs a variant-specific front (1-D conv for
features with two or more channels, nothing for one-channel features, or a
stride-3 max-pool for word embeddings), a time-distributed dense layer and a
shared LSTM. Per-step cosine similarity between the EEG and each speech
representation gives two similarity sequences; the head applies one shared
time-distributed dense to each sequence and subtracts, so its bias cancels
and the output probability is exactly antisymmetric in the two speech
inputs. Everything is computed in 64-bit floats unless the architecture
selects 32-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidSpecError

COSINE_EPS = 1e-8
PROB_CLAMP = 1e-7
POOL = 3  # max-pool window and stride for the word-embedding variant

VARIANTS = ("conv", "no-conv", "maxpool")


@dataclass(frozen=True)
class SpeechPart:
    """One concatenated speech feature: its channel count and front variant."""

    dim: int
    variant: str

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidSpecError(f"unknown speech-path variant {self.variant!r}")
        if self.dim < 1:
            raise InvalidSpecError("feature dimension must be >= 1")
        if self.variant == "conv" and self.dim < 2:
            raise InvalidSpecError("conv variant requires >= 2 feature channels")
        if self.variant == "no-conv" and self.dim != 1:
            raise InvalidSpecError("no-conv variant is for one-channel features")


def default_variant(dim: int) -> str:
    return "no-conv" if dim == 1 else "conv"


@dataclass(frozen=True)
class ArchitectureConfig:
    eeg_channels: int = 64
    frames: int = 320
    eeg_conv_filters: int = 16
    eeg_conv_kernel: int = 8
    embed_dim: int = 16
    lstm_units: int = 16
    speech_conv_filters: int = 16
    speech_conv_kernel: int = 8
    parts: tuple[SpeechPart, ...] = (SpeechPart(28, "conv"),)
    dtype: str = "float64"

    def __post_init__(self) -> None:
        for name in (
            "eeg_channels", "frames", "eeg_conv_filters", "eeg_conv_kernel",
            "embed_dim", "lstm_units", "speech_conv_filters", "speech_conv_kernel",
        ):
            if getattr(self, name) < 1:
                raise InvalidSpecError(f"{name} must be >= 1")
        if not self.parts:
            raise InvalidSpecError("at least one speech part is required")
        if self.dtype not in ("float64", "float32"):
            raise InvalidSpecError(f"dtype must be float64|float32, got {self.dtype!r}")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    @property
    def feature_dim(self) -> int:
        return sum(p.dim for p in self.parts)

    @property
    def pooled(self) -> bool:
        return any(p.variant == "maxpool" for p in self.parts)

    @property
    def out_frames(self) -> int:
        return self.frames // POOL if self.pooled else self.frames

    @property
    def lstm_input_dim(self) -> int:
        return self.embed_dim * len(self.parts)

    def with_dtype(self, dtype: str) -> "ArchitectureConfig":
        return replace(self, dtype=dtype)


def config_for_feature(dims: Sequence[int], wordemb_flags: Sequence[bool] | None = None,
                       **overrides) -> ArchitectureConfig:
    """Architecture for a (possibly concatenated) feature given part dims."""
    if wordemb_flags is None:
        wordemb_flags = [False] * len(dims)
    parts = tuple(
        SpeechPart(d, "maxpool" if w else default_variant(d))
        for d, w in zip(dims, wordemb_flags)
    )
    return ArchitectureConfig(parts=parts, **overrides)


@dataclass
class ModelParams:
    """All trainable tensors keyed by name, plus the architecture."""

    config: ArchitectureConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def __getitem__(self, key: str) -> np.ndarray:
        return self.tensors[key]


def init_params(config: ArchitectureConfig, rng: np.random.Generator) -> ModelParams:
    """He/Glorot-style initialization; LSTM forget bias starts at 1."""
    dt = config.np_dtype
    t: dict[str, np.ndarray] = {}

    def he(shape, fan_in):
        return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dt)

    c, k, f = config.eeg_channels, config.eeg_conv_kernel, config.eeg_conv_filters
    d, h = config.embed_dim, config.lstm_units
    t["eeg_conv_w"] = he((f, c, k), c * k)
    t["eeg_conv_b"] = np.zeros(f, dtype=dt)
    t["eeg_dense_w"] = he((d, f), f)
    t["eeg_dense_b"] = np.zeros(d, dtype=dt)
    for i, part in enumerate(config.parts):
        width = part.dim
        if part.variant == "conv":
            fs, ks = config.speech_conv_filters, config.speech_conv_kernel
            t[f"sp{i}_conv_w"] = he((fs, part.dim, ks), part.dim * ks)
            t[f"sp{i}_conv_b"] = np.zeros(fs, dtype=dt)
            width = fs
        t[f"sp{i}_dense_w"] = he((d, width), width)
        t[f"sp{i}_dense_b"] = np.zeros(d, dtype=dt)
    i_dim = config.lstm_input_dim
    t["lstm_wx"] = (rng.standard_normal((4 * h, i_dim)) / np.sqrt(i_dim)).astype(dt)
    t["lstm_wh"] = (rng.standard_normal((4 * h, h)) / np.sqrt(h)).astype(dt)
    b = np.zeros(4 * h, dtype=dt)
    b[h : 2 * h] = 1.0
    t["lstm_b"] = b
    t["head_w"] = np.ones(1, dtype=dt)
    t["head_b"] = np.zeros(1, dtype=dt)
    return ModelParams(config, t)


def zeros_like_params(params: ModelParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


# ---------------------------------------------------------------------------
# layer primitives (batched, channels x time)
# ---------------------------------------------------------------------------

def _conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """'same'-padded 1-D convolution over time. x: (B,C,T), w: (F,C,K)."""
    n_b, _, n_t = x.shape
    n_f, _, k = w.shape
    pad_l = (k - 1) // 2
    xpad = np.pad(x, ((0, 0), (0, 0), (pad_l, k - 1 - pad_l)))
    out = np.zeros((n_f, n_b, n_t), dtype=x.dtype)
    for j in range(k):
        out += np.tensordot(w[:, :, j], xpad[:, :, j : j + n_t], axes=([1], [1]))
    out = out.transpose(1, 0, 2) + b[None, :, None]
    return out, (xpad, x.shape)


def _conv1d_same_bwd(dout: np.ndarray, cache, w: np.ndarray):
    xpad, x_shape = cache
    n_t = x_shape[2]
    k = w.shape[2]
    pad_l = (k - 1) // 2
    dw = np.empty_like(w)
    dxpad = np.zeros_like(xpad)
    for j in range(k):
        dw[:, :, j] = np.tensordot(dout, xpad[:, :, j : j + n_t], axes=([0, 2], [0, 2]))
        dxpad[:, :, j : j + n_t] += np.tensordot(
            dout, w[:, :, j], axes=([1], [0])
        ).transpose(0, 2, 1)
    db = dout.sum(axis=(0, 2))
    return dxpad[:, :, pad_l : pad_l + n_t], dw, db


def _td_dense(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Dense layer applied to every time step. x: (B,F,T), w: (D,F)."""
    out = np.tensordot(w, x, axes=([1], [1])).transpose(1, 0, 2) + b[None, :, None]
    return out, x


def _td_dense_bwd(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    dw = np.tensordot(dout, x, axes=([0, 2], [0, 2]))
    db = dout.sum(axis=(0, 2))
    dx = np.tensordot(w, dout, axes=([0], [1])).transpose(1, 0, 2)
    return dx, dw, db


def _relu(x: np.ndarray):
    return np.maximum(x, 0.0), x > 0


def _relu_bwd(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def _maxpool(x: np.ndarray):
    """Window-3 stride-3 max over time, remainder frames dropped."""
    n_b, n_c, n_t = x.shape
    j = n_t // POOL
    xw = x[:, :, : j * POOL].reshape(n_b, n_c, j, POOL)
    arg = xw.argmax(axis=3)
    out = np.take_along_axis(xw, arg[..., None], axis=3)[..., 0]
    return out, (arg, x.shape)


def _maxpool_bwd(dout: np.ndarray, cache):
    arg, x_shape = cache
    n_b, n_c, n_t = x_shape
    j = n_t // POOL
    dxw = np.zeros((n_b, n_c, j, POOL), dtype=dout.dtype)
    np.put_along_axis(dxw, arg[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, : j * POOL] = dxw.reshape(n_b, n_c, j * POOL)
    return dx


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _lstm(x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """Full sequence LSTM. x: (B,T,I); returns hidden stack (B,T,H)."""
    n_b, n_t, _ = x.shape
    h_units = wh.shape[1]
    pre_x = np.tensordot(x, wx, axes=([2], [1]))  # (B,T,4H)
    h = np.zeros((n_b, h_units), dtype=x.dtype)
    c = np.zeros((n_b, h_units), dtype=x.dtype)
    hs = np.empty((n_b, n_t, h_units), dtype=x.dtype)
    cache = {
        "x": x,
        "h_prev": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "c_prev": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "i": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "f": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "g": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "o": np.empty((n_t, n_b, h_units), dtype=x.dtype),
        "tanh_c": np.empty((n_t, n_b, h_units), dtype=x.dtype),
    }
    for t in range(n_t):
        z = pre_x[:, t] + h @ wh.T + b
        i = _sigmoid(z[:, :h_units])
        f = _sigmoid(z[:, h_units : 2 * h_units])
        g = np.tanh(z[:, 2 * h_units : 3 * h_units])
        o = _sigmoid(z[:, 3 * h_units :])
        cache["h_prev"][t] = h
        cache["c_prev"][t] = c
        c = f * c + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        cache["i"][t], cache["f"][t], cache["g"][t] = i, f, g
        cache["o"][t], cache["tanh_c"][t] = o, tanh_c
        hs[:, t] = h
    return hs, cache


def _lstm_bwd(dhs: np.ndarray, cache, wx: np.ndarray, wh: np.ndarray):
    x = cache["x"]
    n_b, n_t, _ = x.shape
    h_units = wh.shape[1]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * h_units, dtype=x.dtype)
    dx = np.empty_like(x)
    dh_next = np.zeros((n_b, h_units), dtype=x.dtype)
    dc_next = np.zeros((n_b, h_units), dtype=x.dtype)
    for t in range(n_t - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        tanh_c = cache["tanh_c"][t]
        dh = dhs[:, t] + dh_next
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
        df = dc * cache["c_prev"][t]
        di = dc * g
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)],
            axis=1,
        )
        dwx += dz.T @ x[:, t]
        dwh += dz.T @ cache["h_prev"][t]
        db += dz.sum(axis=0)
        dx[:, t] = dz @ wx
        dh_next = dz @ wh
    return dx, dwx, dwh, db


def _cosine_seq(u: np.ndarray, v: np.ndarray):
    """Per-step cosine similarity of two (B,D,T) stacks -> (B,T)."""
    dot = (u * v).sum(axis=1)
    nu = np.sqrt((u * u).sum(axis=1))
    nv = np.sqrt((v * v).sum(axis=1))
    nuc = np.maximum(nu, COSINE_EPS)
    nvc = np.maximum(nv, COSINE_EPS)
    s = dot / (nuc * nvc)
    return s, (u, v, dot, nu, nv, nuc, nvc)


def _cosine_seq_bwd(ds: np.ndarray, cache):
    u, v, dot, nu, nv, nuc, nvc = cache
    mu = (nu > COSINE_EPS).astype(u.dtype)
    mv = (nv > COSINE_EPS).astype(u.dtype)
    du = ds[:, None, :] * (
        v / (nuc * nvc)[:, None, :] - (mu * dot / (nuc**3 * nvc))[:, None, :] * u
    )
    dv = ds[:, None, :] * (
        u / (nuc * nvc)[:, None, :] - (mv * dot / (nvc**3 * nuc))[:, None, :] * v
    )
    return du, dv


# ---------------------------------------------------------------------------
# spec-level single-step operations
# ---------------------------------------------------------------------------

def cosine_step(u: np.ndarray, v: np.ndarray, eps: float = COSINE_EPS) -> float:
    """Epsilon-guarded cosine similarity of two vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return float(u @ v / (max(np.linalg.norm(u), eps) * max(np.linalg.norm(v), eps)))


def lstm_step(
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    wx: np.ndarray,
    wh: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM recurrence step (gate order: input, forget, cell, output)."""
    h_units = h_prev.shape[-1]
    z = wx @ x_t + wh @ h_prev + b
    i = _sigmoid(z[:h_units])
    f = _sigmoid(z[h_units : 2 * h_units])
    g = np.tanh(z[2 * h_units : 3 * h_units])
    o = _sigmoid(z[3 * h_units :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def loss(p: float | np.ndarray, label: float | np.ndarray) -> float | np.ndarray:
    """Binary cross-entropy with probability clamping at 1e-7."""
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    label = np.asarray(label, dtype=np.float64)
    out = -(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))
    return float(out) if np.isscalar(p) or out.ndim == 0 else out


def loss_grad(p: float | np.ndarray, label: float | np.ndarray) -> np.ndarray:
    """d(loss)/dp with the same clamping as :func:`loss`."""
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    label = np.asarray(label, dtype=np.float64)
    return (pc - label) / (pc * (1.0 - pc))


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Cached activations of one forward call; consumed once by backward."""

    batch: int
    eeg: dict = field(default_factory=dict)
    branches: tuple = ()
    sims: tuple = ()
    head: dict = field(default_factory=dict)
    p: np.ndarray = field(default_factory=lambda: np.empty(0))
    consumed: bool = False


def _split_parts(x: np.ndarray, config: ArchitectureConfig) -> list[np.ndarray]:
    out = []
    lo = 0
    for part in config.parts:
        out.append(x[:, lo : lo + part.dim, :])
        lo += part.dim
    return out


def _check_batch_shapes(config: ArchitectureConfig, eeg, sa, sb) -> None:
    want_eeg = (config.eeg_channels, config.frames)
    want_sp = (config.feature_dim, config.frames)
    if eeg.shape[1:] != want_eeg:
        raise InvalidInputError(f"EEG batch shape {eeg.shape[1:]} != {want_eeg}")
    for name, arr in (("speech_a", sa), ("speech_b", sb)):
        if arr.shape[1:] != want_sp:
            raise InvalidInputError(f"{name} batch shape {arr.shape[1:]} != {want_sp}")
    if not (eeg.shape[0] == sa.shape[0] == sb.shape[0]):
        raise InvalidInputError("batch sizes disagree")


def _eeg_path(params: ModelParams, eeg: np.ndarray):
    t = params.tensors
    conv, conv_cache = _conv1d_same(eeg, t["eeg_conv_w"], t["eeg_conv_b"])
    act1, mask1 = _relu(conv)
    dense, dense_x = _td_dense(act1, t["eeg_dense_w"], t["eeg_dense_b"])
    act2, mask2 = _relu(dense)
    cache = {"conv": conv_cache, "mask1": mask1, "dense_x": dense_x, "mask2": mask2}
    if params.config.pooled:
        pooled, pool_cache = _maxpool(act2)
        cache["pool"] = pool_cache
        return pooled, cache
    return act2, cache


def _eeg_path_bwd(params: ModelParams, dout: np.ndarray, cache, grads: dict) -> None:
    t = params.tensors
    if params.config.pooled:
        dout = _maxpool_bwd(dout, cache["pool"])
    dout = _relu_bwd(dout, cache["mask2"])
    dout, dw, db = _td_dense_bwd(dout, cache["dense_x"], t["eeg_dense_w"])
    grads["eeg_dense_w"] += dw
    grads["eeg_dense_b"] += db
    dout = _relu_bwd(dout, cache["mask1"])
    _, dw, db = _conv1d_same_bwd(dout, cache["conv"], t["eeg_conv_w"])
    grads["eeg_conv_w"] += dw
    grads["eeg_conv_b"] += db


def _speech_branch(params: ModelParams, parts_x: list[np.ndarray]):
    """Front + dense per part, concatenation, LSTM. Returns (B,H,T_out)."""
    cfg = params.config
    t = params.tensors
    part_caches = []
    outs = []
    for i, part in enumerate(cfg.parts):
        x = parts_x[i]
        cache: dict = {"variant": part.variant}
        if part.variant == "conv":
            conv, conv_cache = _conv1d_same(x, t[f"sp{i}_conv_w"], t[f"sp{i}_conv_b"])
            x, mask = _relu(conv)
            cache["conv"] = conv_cache
            cache["conv_mask"] = mask
        elif part.variant == "maxpool":
            x, pool_cache = _maxpool(x)
            cache["pool_in"] = pool_cache
        dense, dense_x = _td_dense(x, t[f"sp{i}_dense_w"], t[f"sp{i}_dense_b"])
        act, mask2 = _relu(dense)
        cache["dense_x"] = dense_x
        cache["dense_mask"] = mask2
        if cfg.pooled and part.variant != "maxpool":
            act, pool_cache = _maxpool(act)
            cache["pool_out"] = pool_cache
        part_caches.append(cache)
        outs.append(act)
    concat = np.concatenate(outs, axis=1)  # (B, n_parts*D, T_out)
    lstm_in = concat.transpose(0, 2, 1)
    hs, lstm_cache = _lstm(lstm_in, t["lstm_wx"], t["lstm_wh"], t["lstm_b"])
    rep = hs.transpose(0, 2, 1)  # (B, H, T_out)
    return rep, {"parts": part_caches, "lstm": lstm_cache, "widths": [o.shape[1] for o in outs]}


def _speech_branch_bwd(params: ModelParams, drep: np.ndarray, cache, grads: dict) -> None:
    cfg = params.config
    t = params.tensors
    dhs = drep.transpose(0, 2, 1)
    dlstm_in, dwx, dwh, db = _lstm_bwd(dhs, cache["lstm"], t["lstm_wx"], t["lstm_wh"])
    grads["lstm_wx"] += dwx
    grads["lstm_wh"] += dwh
    grads["lstm_b"] += db
    dconcat = dlstm_in.transpose(0, 2, 1)
    lo = 0
    for i, part in enumerate(cfg.parts):
        width = cache["widths"][i]
        dact = dconcat[:, lo : lo + width, :]
        lo += width
        pc = cache["parts"][i]
        if cfg.pooled and part.variant != "maxpool":
            dact = _maxpool_bwd(dact, pc["pool_out"])
        dact = _relu_bwd(dact, pc["dense_mask"])
        dx, dw, db2 = _td_dense_bwd(dact, pc["dense_x"], t[f"sp{i}_dense_w"])
        grads[f"sp{i}_dense_w"] += dw
        grads[f"sp{i}_dense_b"] += db2
        if part.variant == "conv":
            dx = _relu_bwd(dx, pc["conv_mask"])
            _, dw, db2 = _conv1d_same_bwd(dx, pc["conv"], t[f"sp{i}_conv_w"])
            grads[f"sp{i}_conv_w"] += dw
            grads[f"sp{i}_conv_b"] += db2
        # maxpool-variant input gradients stop at the data


def forward_batch(
    params: ModelParams, eeg: np.ndarray, speech_a: np.ndarray, speech_b: np.ndarray
) -> tuple[np.ndarray, ForwardTrace]:
    """Probabilities that each sample's input ``a`` is the matched segment."""
    cfg = params.config
    dt = cfg.np_dtype
    eeg = np.ascontiguousarray(eeg, dtype=dt)
    speech_a = np.ascontiguousarray(speech_a, dtype=dt)
    speech_b = np.ascontiguousarray(speech_b, dtype=dt)
    _check_batch_shapes(cfg, eeg, speech_a, speech_b)

    r_eeg, eeg_cache = _eeg_path(params, eeg)
    rep_a, cache_a = _speech_branch(params, _split_parts(speech_a, cfg))
    rep_b, cache_b = _speech_branch(params, _split_parts(speech_b, cfg))
    sim_a, cos_a = _cosine_seq(r_eeg, rep_a)
    sim_b, cos_b = _cosine_seq(r_eeg, rep_b)
    # Shared head dense on each sequence; the difference cancels the bias, so
    # p is exactly antisymmetric under swapping the speech inputs.
    w = params.tensors["head_w"][0]
    diff = sim_a - sim_b
    m = w * diff.mean(axis=1)
    p = _sigmoid(m)
    trace = ForwardTrace(
        batch=eeg.shape[0],
        eeg=eeg_cache,
        branches=(cache_a, cache_b),
        sims=(cos_a, cos_b, diff),
        head={"m": m, "p": p},
        p=p,
    )
    return p, trace


def backward_batch(params: ModelParams, trace: ForwardTrace, dloss: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given d(loss)/dp per sample. Consumes the trace."""
    if trace.consumed:
        raise InvalidInputError("forward trace already consumed by a backward call")
    trace.consumed = True
    cfg = params.config
    dloss = np.asarray(dloss, dtype=cfg.np_dtype)
    if dloss.shape != (trace.batch,):
        raise InvalidInputError(f"dloss shape {dloss.shape} != ({trace.batch},)")
    grads = zeros_like_params(params)
    cos_a, cos_b, diff = trace.sims
    p = trace.head["p"]
    t_out = diff.shape[1]
    w = params.tensors["head_w"][0]

    dm = dloss * p * (1.0 - p)
    ddiff = (dm / t_out)[:, None] * np.ones_like(diff)
    grads["head_w"][0] = float((dm * diff.mean(axis=1)).sum())
    # head bias cancels structurally; its gradient is identically zero
    dsim_a = ddiff * w
    dsim_b = -ddiff * w

    du_a, dv_a = _cosine_seq_bwd(dsim_a, cos_a)
    du_b, dv_b = _cosine_seq_bwd(dsim_b, cos_b)
    _speech_branch_bwd(params, dv_a, trace.branches[0], grads)
    _speech_branch_bwd(params, dv_b, trace.branches[1], grads)
    _eeg_path_bwd(params, du_a + du_b, trace.eeg, grads)
    return grads


def forward(
    params: ModelParams, eeg: np.ndarray, speech_a: np.ndarray, speech_b: np.ndarray
) -> tuple[float, ForwardTrace]:
    """Single-triple forward; see :func:`forward_batch`."""
    p, trace = forward_batch(params, eeg[None], speech_a[None], speech_b[None])
    return float(p[0]), trace


def backward(params: ModelParams, trace: ForwardTrace, dloss: float) -> dict[str, np.ndarray]:
    """Single-triple backward matching :func:`forward`."""
    return backward_batch(params, trace, np.array([dloss]))


def predict(params: ModelParams, triple: tuple[np.ndarray, np.ndarray, np.ndarray]) -> int:
    """1 when input ``a`` is called the match (ties break toward ``a``)."""
    eeg, speech_a, speech_b = triple
    p, _ = forward(params, eeg, speech_a, speech_b)
    return int(p >= 0.5)


def predict_batch(params: ModelParams, eeg, speech_a, speech_b) -> np.ndarray:
    p, _ = forward_batch(params, eeg, speech_a, speech_b)
    return (p >= 0.5).astype(np.int64)
