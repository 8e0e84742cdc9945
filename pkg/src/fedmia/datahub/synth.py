"""Synthetic multi-client accelerometer-like corpora with per-client signatures.

Class ``c`` on channel ``ch`` is a sinusoid with a class-specific frequency and
channel gain shared by every client. Each client then applies its own
signature: amplitude scale, frequency offset (cycles per window), baseline
shift and Gaussian noise level. In iid mode every client uses the same
signature, so all clients sample one distribution.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import ConfigurationError
from .dataset import WindowedDataset


@dataclass(frozen=True)
class ClientSignature:
    amplitude: float = 1.0
    freq_offset: float = 0.0
    baseline: float = 0.0
    noise: float = 0.3


@dataclass(frozen=True)
class SynthSpec:
    n_clients: int = 5
    classes: int = 6
    channels: int = 3
    window_len: int = 128
    windows_per_class: int = 100
    heterogeneous: bool = True
    rng_seed: int = 0
    amplitude_range: tuple[float, float] = (0.5, 1.8)
    freq_offset_range: tuple[float, float] = (-1.0, 1.0)
    baseline_range: tuple[float, float] = (-0.8, 0.8)
    noise_range: tuple[float, float] = (0.2, 0.7)
    base_frequency: float = 2.0
    frequency_step: float = 1.5
    signatures: tuple[ClientSignature, ...] | None = field(default=None)

    def __post_init__(self):
        if self.n_clients < 1 or self.classes < 2 or self.channels < 1:
            raise ConfigurationError("need n_clients >= 1, classes >= 2, channels >= 1")
        if self.window_len < 8 or self.windows_per_class < 1:
            raise ConfigurationError("window_len must be >= 8 and windows_per_class >= 1")
        for name in ("amplitude_range", "freq_offset_range", "baseline_range", "noise_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigurationError(f"{name} must be (low, high), got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.noise_range[0] < 0:
            raise ConfigurationError("noise must be nonnegative")
        if self.signatures is not None:
            sigs = tuple(s if isinstance(s, ClientSignature) else ClientSignature(**s) for s in self.signatures)
            if len(sigs) != self.n_clients:
                raise ConfigurationError(
                    f"got {len(sigs)} explicit signatures for {self.n_clients} clients"
                )
            object.__setattr__(self, "signatures", sigs)

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("amplitude_range", "freq_offset_range", "baseline_range", "noise_range"):
            d[name] = list(d[name])
        if self.signatures is not None:
            d["signatures"] = [asdict(s) for s in self.signatures]
        return d


def client_signatures(spec: SynthSpec) -> list[ClientSignature]:
    """Signatures actually used by :func:`generate_synthetic`."""
    if spec.signatures is not None:
        sigs = list(spec.signatures)
        return [sigs[0]] * spec.n_clients if not spec.heterogeneous else sigs
    rng = np.random.default_rng([spec.rng_seed, 1])
    n = spec.n_clients if spec.heterogeneous else 1
    # stratified draws keep the clients spread across each range
    def spread(lo, hi):
        cells = (rng.permutation(n) + rng.random(n)) / n
        return lo + (hi - lo) * cells

    amp = spread(*spec.amplitude_range)
    freq = spread(*spec.freq_offset_range)
    base = spread(*spec.baseline_range)
    noise = spread(*spec.noise_range)
    sigs = [ClientSignature(float(a), float(f), float(b), float(s)) for a, f, b, s in zip(amp, freq, base, noise)]
    if not spec.heterogeneous:
        sigs = sigs * spec.n_clients
    return sigs


def class_templates(spec: SynthSpec):
    """(frequency per class, gain per class x channel, phase per class x channel)."""
    rng = np.random.default_rng([spec.rng_seed, 2])
    freqs = spec.base_frequency + spec.frequency_step * np.arange(spec.classes)
    gains = rng.uniform(0.5, 1.5, size=(spec.classes, spec.channels))
    phases = rng.uniform(0.0, 2 * np.pi, size=(spec.classes, spec.channels))
    return freqs, gains, phases


def generate_synthetic(spec: SynthSpec) -> dict[int, WindowedDataset]:
    freqs, gains, phases = class_templates(spec)
    sigs = client_signatures(spec)
    t = np.arange(spec.window_len) / spec.window_len
    n_per_client = spec.classes * spec.windows_per_class
    clients = {}
    for cid, sig in enumerate(sigs):
        rng = np.random.default_rng([spec.rng_seed, 3, cid])
        labels = np.repeat(np.arange(spec.classes), spec.windows_per_class)
        labels = labels[rng.permutation(n_per_client)]
        shift = rng.uniform(0.0, 2 * np.pi, size=(n_per_client, 1, 1))
        jitter = rng.uniform(0.9, 1.1, size=(n_per_client, 1, 1))
        f = (freqs[labels] + sig.freq_offset)[:, None, None]
        arg = 2 * np.pi * f * t[None, None, :] + phases[labels][:, :, None] + shift
        clean = sig.amplitude * jitter * gains[labels][:, :, None] * np.sin(arg)
        windows = sig.baseline + clean + sig.noise * rng.standard_normal(clean.shape)
        ids = np.arange(cid * n_per_client, (cid + 1) * n_per_client)
        clients[cid] = WindowedDataset(windows, labels, np.full(n_per_client, cid), ids)
    return clients
