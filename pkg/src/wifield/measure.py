"""CSI-like measurement simulation and the amplitude preprocessing chain.

Simulated samples carry the WiFi impairments that motivate the phaseless
pipeline: unknown per-link gains, AGC multipliers, fresh per-packet
phase (CFO), and additive complex noise. Everything downstream of the
simulator consumes amplitudes only; phase exists solely inside
`simulate_csi`.

Gain calibration inverts the empty-scene link budget: with no targets
the received amplitude is gain * |E_i(tx -> rx)|, so the lumped gain is
recovered per link from smoothed empty-scene amplitudes and the known
incident law.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .greens import AntennaModel, ArrayLayout, GeometryError, incident_field
from .scene import SensingDomain


@dataclass
class GainTable:
    """Lumped tx*rx gains (P, Q) plus per-receiver AGC multipliers (Q,)."""

    g: np.ndarray
    agc: np.ndarray | None = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.agc is None:
            self.agc = np.ones(self.g.shape[1])
        self.agc = np.asarray(self.agc, dtype=float)
        if (self.g <= 0).any() or (self.agc <= 0).any():
            raise ValueError("gains and AGC multipliers must be strictly positive")

    def effective(self) -> np.ndarray:
        """Per-link multiplier applied to fields, shape (P, Q)."""
        return self.g * self.agc[None, :]


@dataclass(frozen=True)
class NoiseConfig:
    """amp_noise_sigma is the std of the additive circular complex noise
    (components sigma/sqrt(2) each); packet_phase draws a fresh uniform
    rotation per (link, sample); agc_jitter is a relative per-sample sigma."""

    amp_noise_sigma: float = 0.0
    packet_phase: str = "uniform"  # "uniform" | "none"
    agc_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.amp_noise_sigma < 0 or self.agc_jitter < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.packet_phase not in ("uniform", "none"):
            raise ValueError(f"unknown packet_phase {self.packet_phase!r}")


@dataclass
class MeasurementSet:
    """Sample series per (tone, tx, rx); complex IQ or amplitude-only."""

    data: np.ndarray  # (T, P, Q, S)
    amplitude_only: bool
    sample_rate: float = 100.0
    empty_scene: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ValueError("measurement data must be (tones, tx, rx, samples)")
        if self.amplitude_only and (np.asarray(self.data) < 0).any():
            raise ValueError("amplitudes must be >= 0")

    @property
    def n_samples(self) -> int:
        return self.data.shape[-1]

    def amplitudes(self) -> np.ndarray:
        return np.abs(self.data) if not self.amplitude_only else np.asarray(self.data)


def simulate_csi(
    e_total_rx: np.ndarray,
    gain_table: GainTable,
    noise: NoiseConfig,
    n_samples: int,
    sample_rate: float = 100.0,
    empty_scene: bool = False,
) -> MeasurementSet:
    """Simulate an IQ sample series from total receiver fields (T, P, Q).

    Y[s] = g * agc_s * E_total * exp(j phi_s) + n_s, deterministic under
    the config seed. The packet phase is shared across tones of a link
    at one sample instant (one oscillator per packet).
    """
    e = np.asarray(e_total_rx, dtype=np.complex128)
    T, P, Q = e.shape
    rng = np.random.default_rng(noise.seed)
    base = gain_table.effective()[None, :, :, None] * e[..., None]
    base = np.broadcast_to(base, (T, P, Q, n_samples)).copy()
    if noise.agc_jitter > 0:
        jit = 1.0 + noise.agc_jitter * rng.standard_normal((Q, n_samples))
        base *= np.clip(jit, 1e-6, None)[None, None, :, :]
    if noise.packet_phase == "uniform":
        phi = rng.uniform(0.0, 2.0 * np.pi, size=(P, Q, n_samples))
        base *= np.exp(1j * phi)[None, ...]
    if noise.amp_noise_sigma > 0:
        s = noise.amp_noise_sigma / np.sqrt(2.0)
        base += s * (
            rng.standard_normal(base.shape) + 1j * rng.standard_normal(base.shape)
        )
    return MeasurementSet(
        data=base,
        amplitude_only=False,
        sample_rate=sample_rate,
        empty_scene=empty_scene,
        meta={"seed": noise.seed},
    )


def mean_filter(series: np.ndarray, window: int = 50) -> np.ndarray:
    """Centered moving average along the last axis with edge truncation
    (edges average over the samples actually present)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.shape[-1] == 0:
        raise ValueError("empty series")
    if window == 1:
        return x.copy()
    n = x.shape[-1]
    lo, hi = (window - 1) // 2, window // 2
    csum = np.cumsum(x, axis=-1)
    csum = np.concatenate([np.zeros_like(csum[..., :1]), csum], axis=-1)
    idx_hi = np.minimum(np.arange(n) + hi + 1, n)
    idx_lo = np.maximum(np.arange(n) - lo, 0)
    return (csum[..., idx_hi] - csum[..., idx_lo]) / (idx_hi - idx_lo)


def remove_outliers(series: np.ndarray, window: int = 50, n_sigmas: float = 3.0) -> np.ndarray:
    """Hampel rule along the last axis: replace samples farther than
    n_sigmas * 1.4826 * MAD from the rolling median (window truncated at
    the edges) by that median. Processes leading dimensions in chunks to
    bound the rolling-window work buffer."""
    x = np.asarray(series, dtype=float)
    n = x.shape[-1]
    if n < 3:
        raise ValueError("need at least 3 samples for outlier removal")
    lo, hi = (window - 1) // 2, window // 2
    flat = x.reshape(-1, n)
    out = np.empty_like(flat)
    chunk = max(1, int(8e6 / (n * window)))  # ~64 MB of float64 windows
    for start in range(0, flat.shape[0], chunk):
        blk = flat[start : start + chunk]
        padded = np.concatenate(
            [
                np.full(blk.shape[:-1] + (lo,), np.nan),
                blk,
                np.full(blk.shape[:-1] + (hi,), np.nan),
            ],
            axis=-1,
        )
        win = np.lib.stride_tricks.sliding_window_view(padded, window, axis=-1)
        med = np.nanmedian(win, axis=-1)
        mad = np.nanmedian(np.abs(win - med[..., None]), axis=-1)
        thresh = n_sigmas * 1.4826 * mad
        cleaned = blk.copy()
        bad = np.abs(blk - med) > thresh
        cleaned[bad] = med[bad]
        out[start : start + chunk] = cleaned
    return out.reshape(x.shape)


def preprocess_amplitudes(measurements: MeasurementSet, window: int = 50) -> np.ndarray:
    """Amplitude chain: |Y| -> Hampel -> mean filter. Returns (T, P, Q, S)."""
    return mean_filter(remove_outliers(measurements.amplitudes(), window), window)


def calibrate_gains(
    empty_measurements: MeasurementSet,
    layout: ArrayLayout,
    model: AntennaModel | None = None,
    window: int = 50,
) -> GainTable:
    """Estimate lumped per-link gains from empty-scene measurements.

    Per link and tone: g = mean(filtered |Y|) / |E_i(tx -> rx)|; the
    per-tone estimates are averaged. For the thin-antenna law with unit
    amplitude this is exactly g = r * mean(|Y|). AGC cannot be separated
    from the link gain and is absorbed into it.
    """
    if not empty_measurements.empty_scene:
        raise ValueError("calibration requires empty-scene measurements")
    model = model or AntennaModel()
    amp = preprocess_amplitudes(empty_measurements, window).mean(axis=-1)  # (T,P,Q)
    if (amp <= 0).any():
        raise ValueError("zero-amplitude link; cannot calibrate")
    k0s = layout.wavenumbers()
    rx = layout.rx_array()
    inc = np.stack(
        [
            np.stack(
                [np.abs(incident_field(model, tx, rx, k0)) for tx in layout.tx_array()]
            )
            for k0 in k0s
        ]
    )  # (T, P, Q)
    return GainTable(g=(amp / inc).mean(axis=0))


def normalize_total_field(
    measurements: MeasurementSet, gain_table: GainTable, window: int = 50
) -> np.ndarray:
    """Amplitude-only normalized total field per (tone, tx, rx).

    a = mean(filtered |Y|) / g. Phase is deliberately not estimated.
    """
    amp = preprocess_amplitudes(measurements, window).mean(axis=-1)
    g = gain_table.effective()
    if g.shape != amp.shape[1:]:
        raise ValueError(
            f"gain table shape {g.shape} does not match links {amp.shape[1:]}"
        )
    return amp / g[None, :, :]


def incident_at_cells(
    layout: ArrayLayout, domain: SensingDomain, model: AntennaModel | None = None,
    tone_index: int = 0,
) -> np.ndarray:
    """Incident field of every transmitter at the cell centers (P, n^2);
    mirrors the final calibration step of the measurement pipeline."""
    model = model or AntennaModel()
    k0 = float(layout.wavenumbers()[tone_index])
    centers = domain.cell_centers()
    return np.stack([incident_field(model, tx, centers, k0) for tx in layout.tx_array()])


# --- JSON wire format ----------------------------------------------------
# {"sample_rate": 100, "empty_scene": bool,
#  "links": [{"tx": p, "rx": q, "tone": t, "amp": [...]} |
#            {"tx": p, "rx": q, "tone": t, "iq": [[re, im], ...]}]}


def measurements_to_dict(ms: MeasurementSet) -> dict:
    links = []
    T, P, Q, _ = ms.data.shape
    for t in range(T):
        for p in range(P):
            for q in range(Q):
                entry = {"tx": p, "rx": q, "tone": t}
                series = ms.data[t, p, q]
                if ms.amplitude_only:
                    entry["amp"] = np.asarray(series, dtype=float).tolist()
                else:
                    entry["iq"] = np.stack([series.real, series.imag], -1).tolist()
                links.append(entry)
    return {
        "sample_rate": ms.sample_rate,
        "empty_scene": ms.empty_scene,
        "links": links,
    }


def measurements_from_dict(data: dict) -> MeasurementSet:
    try:
        links = data["links"]
        T = max(l["tone"] for l in links) + 1
        P = max(l["tx"] for l in links) + 1
        Q = max(l["rx"] for l in links) + 1
        amplitude_only = "amp" in links[0]
        key = "amp" if amplitude_only else "iq"
        S = len(links[0][key])
        shape = (T, P, Q, S)
        arr = np.zeros(shape, dtype=float if amplitude_only else np.complex128)
        seen = np.zeros((T, P, Q), dtype=bool)
        for l in links:
            series = np.asarray(l[key], dtype=float)
            if amplitude_only:
                arr[l["tone"], l["tx"], l["rx"]] = series
            else:
                arr[l["tone"], l["tx"], l["rx"]] = series[:, 0] + 1j * series[:, 1]
            seen[l["tone"], l["tx"], l["rx"]] = True
        if not seen.all():
            raise ValueError("missing links in measurements JSON")
        return MeasurementSet(
            data=arr,
            amplitude_only=amplitude_only,
            sample_rate=float(data.get("sample_rate", 100.0)),
            empty_scene=bool(data.get("empty_scene", False)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise GeometryError(f"malformed measurements JSON: {exc}") from exc


def save_measurements(ms: MeasurementSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(measurements_to_dict(ms), fh)


def load_measurements(path) -> MeasurementSet:
    with open(path) as fh:
        return measurements_from_dict(json.load(fh))


def save_gains(gt: GainTable, path) -> None:
    with open(path, "w") as fh:
        json.dump({"g": gt.g.tolist(), "agc": gt.agc.tolist()}, fh)


def load_gains(path) -> GainTable:
    with open(path) as fh:
        data = json.load(fh)
    agc = np.asarray(data["agc"]) if data.get("agc") is not None else None
    return GainTable(g=np.asarray(data["g"]), agc=agc)
