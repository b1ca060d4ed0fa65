"""Shared fixtures and the finite-difference gradient oracle."""

from __future__ import annotations

import numpy as np
import pytest

from eegmatch.model import ArchitectureConfig, forward, init_params


def generic_params(cfg: ArchitectureConfig, seed: int = 0):
    """Random parameters with biases moved off the exact ReLU kink.

    Zero-initialized biases put dead time steps exactly on the rectifier
    kink, where central differences are undefined; gradients are checked at
    a generic point instead.
    """
    rng = np.random.default_rng(seed)
    params = init_params(cfg, rng)
    for key, tensor in params.tensors.items():
        if key.endswith("_b"):
            tensor += rng.uniform(0.05, 0.3, size=tensor.shape) * rng.choice(
                [-1.0, 1.0], size=tensor.shape
            )
    return params, rng


def numeric_gradients(params, eeg, sa, sb, key: str, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of forward probability w.r.t. one tensor."""
    tensor = params.tensors[key]
    num = np.zeros_like(tensor)
    it = np.nditer(tensor, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        orig = tensor[ix]
        tensor[ix] = orig + step
        p_hi, _ = forward(params, eeg, sa, sb)
        tensor[ix] = orig - step
        p_lo, _ = forward(params, eeg, sa, sb)
        tensor[ix] = orig
        num[ix] = (p_hi - p_lo) / (2.0 * step)
        it.iternext()
    return num


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())


@pytest.fixture(scope="session")
def tiny_config_kwargs():
    return dict(
        eeg_channels=4,
        frames=20,
        eeg_conv_filters=3,
        eeg_conv_kernel=4,
        embed_dim=3,
        lstm_units=3,
        speech_conv_filters=3,
        speech_conv_kernel=4,
    )
