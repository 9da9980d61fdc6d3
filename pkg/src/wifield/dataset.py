"""Synthetic dataset generation: material/position sampling and the full
simulate -> preprocess -> pre-identify pipeline emitting training pairs.

The combination table mirrors the measurement protocol: 12 material
multisets with fixed position-combination counts totaling 197 scenes;
each scene is measured `reps` times with fresh noise. Pre-images are
per-tone phaseless inversions (labels drive the support prior during
generation) with additive complex Gaussian noise applied to the final
tensors before they are written.

Tone map: WiFi channel 11 (2.462 GHz) OFDM subcarriers at 312.5 kHz
spacing, using the 30-entry CSI-report subcarrier index set
(-28, -26, ..., -2, -1, 1, 3, ..., 27, 28) decimated from the standard
+/-28-subcarrier layout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import measure
from .forward import mimo_sweep
from .greens import AntennaModel, ArrayLayout, OperatorSet
from .invert import InversionConfig, PreImage, pre_identify, save_labels, save_preimage
from .measure import GainTable, NoiseConfig
from .scene import (
    Material,
    Rect,
    Scene,
    SceneError,
    SensingDomain,
    Target,
    default_material_table,
    rasterize,
    save_scene,
)

CHANNEL11_CENTER_HZ = 2.462e9
SUBCARRIER_SPACING_HZ = 312.5e3
CSI_SUBCARRIER_INDICES = (
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1,
    1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 28,
)

# (material names, position-combination count); totals 197
DEFAULT_COMBINATION_TABLE = (
    (("wood",), 15),
    (("rubber",), 15),
    (("glass",), 15),
    (("rubber", "rubber"), 15),
    (("glass", "wood"), 15),
    (("glass", "rubber"), 15),
    (("glass", "glass"), 15),
    (("wood", "wood"), 20),
    (("rubber", "wood"), 15),
    (("rubber", "rubber", "rubber"), 15),
    (("wood", "wood", "wood"), 22),
    (("rubber", "wood", "glass"), 20),
)

# footprint (m); glass is the small square target
TARGET_SIZES = {
    "wood": (0.05, 0.10),
    "rubber": (0.05, 0.10),
    "glass": (0.05, 0.05),
}

MATERIAL_LABELS = {"wood": 1, "glass": 2, "rubber": 3}


def channel11_tones(n_tones: int = 30) -> tuple[float, ...]:
    """Frequencies (Hz) of the first ``n_tones`` CSI subcarriers."""
    if not 1 <= n_tones <= len(CSI_SUBCARRIER_INDICES):
        raise ValueError(f"n_tones must be in [1, {len(CSI_SUBCARRIER_INDICES)}]")
    idx = CSI_SUBCARRIER_INDICES[:n_tones]
    return tuple(CHANNEL11_CENTER_HZ + i * SUBCARRIER_SPACING_HZ for i in sorted(idx))


def default_layout(
    domain: SensingDomain, tones_hz, n_tx: int = 4, n_rx: int = 40
) -> ArrayLayout:
    """Transmit/receive rings around the domain (tx slightly farther out)."""
    cx = domain.origin[0] + domain.side / 2
    cy = domain.origin[1] + domain.side / 2
    r_rx = domain.side * 0.905
    r_tx = domain.side * 1.0
    rx = tuple(
        (cx + r_rx * np.cos(2 * np.pi * q / n_rx), cy + r_rx * np.sin(2 * np.pi * q / n_rx))
        for q in range(n_rx)
    )
    tx = tuple(
        (
            cx + r_tx * np.cos(np.pi / 4 + 2 * np.pi * p / n_tx),
            cy + r_tx * np.sin(np.pi / 4 + 2 * np.pi * p / n_tx),
        )
        for p in range(n_tx)
    )
    return ArrayLayout(tx=tx, rx=rx, tones_hz=tuple(tones_hz))


@dataclass(frozen=True)
class DatasetConfig:
    table: tuple = DEFAULT_COMBINATION_TABLE
    reps: int = 20
    preimage_noise_var: float = 0.2  # total variance of complex noise
    n_tones: int = 30
    n_class: int = 4
    split_mode: str = "iid"  # "iid" | "position_held_out"
    train_fraction: float = 0.8
    seed: int = 0
    domain: SensingDomain = field(default_factory=SensingDomain)
    n_tx: int = 4
    n_rx: int = 40
    n_samples: int = 100
    calib_samples: int = 1400
    amp_noise_sigma: float = 0.01
    gain_range: tuple[float, float] = (0.5, 2.0)
    inversion: InversionConfig = field(
        default_factory=lambda: InversionConfig(alpha=3.0, max_iters=500, step_size=1e-2)
    )
    material_eps: tuple = ()  # ((label, re, im), ...) overrides

    def __post_init__(self):
        if not self.table:
            raise SceneError("combination table is empty")
        for names, count in self.table:
            if len(names) == 0:
                raise SceneError("zero-target combination is not permitted")
            if count <= 0:
                raise SceneError(f"combination count must be positive, got {count}")
            for nm in names:
                if nm not in MATERIAL_LABELS:
                    raise SceneError(f"unknown material {nm!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise SceneError("train_fraction must be in (0, 1)")
        if self.split_mode not in ("iid", "position_held_out"):
            raise SceneError(f"unknown split mode {self.split_mode!r}")
        max_label = max(MATERIAL_LABELS[nm] for names, _ in self.table for nm in names)
        if self.n_class < max_label + 1:
            raise SceneError(
                f"n_class={self.n_class} too small for material label {max_label}"
            )
        if self.reps < 1:
            raise SceneError("reps must be >= 1")

    def materials(self) -> dict[int, Material]:
        overrides = {int(l): complex(re, im) for l, re, im in self.material_eps}
        return default_material_table(overrides)

    def tones(self) -> tuple[float, ...]:
        return channel11_tones(self.n_tones)

    def layout(self) -> ArrayLayout:
        return default_layout(self.domain, self.tones(), self.n_tx, self.n_rx)

    def n_combos(self) -> int:
        return sum(count for _, count in self.table)


def config_hash(config: DatasetConfig) -> str:
    blob = json.dumps(_config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _config_to_dict(config: DatasetConfig) -> dict:
    return {
        "table": [[list(names), count] for names, count in config.table],
        "reps": config.reps,
        "preimage_noise_var": config.preimage_noise_var,
        "n_tones": config.n_tones,
        "n_class": config.n_class,
        "split_mode": config.split_mode,
        "train_fraction": config.train_fraction,
        "seed": config.seed,
        "domain": {"origin": list(config.domain.origin), "side": config.domain.side,
                   "n": config.domain.n},
        "n_tx": config.n_tx,
        "n_rx": config.n_rx,
        "n_samples": config.n_samples,
        "calib_samples": config.calib_samples,
        "amp_noise_sigma": config.amp_noise_sigma,
        "gain_range": list(config.gain_range),
        "inversion": {
            "alpha": config.inversion.alpha,
            "max_iters": config.inversion.max_iters,
            "step_size": config.inversion.step_size,
            "optimizer": config.inversion.optimizer,
            "tol": config.inversion.tol,
        },
        "material_eps": [list(t) for t in config.material_eps],
    }


def config_from_dict(data: dict) -> DatasetConfig:
    inv = data.get("inversion", {})
    return DatasetConfig(
        table=tuple((tuple(names), int(count)) for names, count in data["table"]),
        reps=int(data["reps"]),
        preimage_noise_var=float(data["preimage_noise_var"]),
        n_tones=int(data["n_tones"]),
        n_class=int(data["n_class"]),
        split_mode=data["split_mode"],
        train_fraction=float(data["train_fraction"]),
        seed=int(data["seed"]),
        domain=SensingDomain(
            tuple(data["domain"]["origin"]), float(data["domain"]["side"]),
            int(data["domain"]["n"]),
        ),
        n_tx=int(data["n_tx"]),
        n_rx=int(data["n_rx"]),
        n_samples=int(data["n_samples"]),
        calib_samples=int(data["calib_samples"]),
        amp_noise_sigma=float(data["amp_noise_sigma"]),
        gain_range=tuple(data["gain_range"]),
        inversion=InversionConfig(
            alpha=float(inv.get("alpha", 3.0)),
            max_iters=int(inv.get("max_iters", 500)),
            step_size=float(inv.get("step_size", 1e-2)),
            optimizer=inv.get("optimizer", "adam"),
            tol=float(inv.get("tol", 0.0)),
        ),
        material_eps=tuple(tuple(t) for t in data.get("material_eps", [])),
    )


def _place_targets(names, domain: SensingDomain, rng, max_attempts=10_000):
    """Uniform non-overlapping placements with >= 1 cell-pitch separation."""
    d = domain.cell_size
    placed: list[Target] = []
    boxes: list[tuple[float, float, float, float]] = []
    for nm in names:
        w, h = TARGET_SIZES[nm]
        for attempt in range(max_attempts):
            if rng.random() < 0.5:
                tw, th = w, h
            else:
                tw, th = h, w
            cx = domain.origin[0] + 0.5 * tw + rng.random() * (domain.side - tw)
            cy = domain.origin[1] + 0.5 * th + rng.random() * (domain.side - th)
            # inflate by half a cell pitch per side: boxes closer than one
            # pitch count as overlapping
            box = (cx - tw / 2 - d / 2, cy - th / 2 - d / 2,
                   cx + tw / 2 + d / 2, cy + th / 2 + d / 2)
            clash = any(
                box[0] < b[2] and b[0] < box[2] and box[1] < b[3] and b[1] < box[3]
                for b in boxes
            )
            if not clash:
                placed.append(Target(MATERIAL_LABELS[nm], Rect((cx, cy), tw, th)))
                boxes.append(box)
                break
        else:
            raise SceneError(
                f"could not place target {nm!r} after {max_attempts} attempts"
            )
    return placed


def sample_scenes(config: DatasetConfig, rng=None) -> list[tuple[int, Scene]]:
    """One scene per combination record (combo_id, Scene); deterministic
    under the config seed."""
    rng = rng or np.random.default_rng(config.seed)
    materials = config.materials()
    out = []
    combo_id = 0
    for names, count in config.table:
        for _ in range(count):
            targets = _place_targets(names, config.domain, rng)
            out.append((combo_id, Scene(config.domain, targets, dict(materials))))
            combo_id += 1
    return out


@dataclass
class DatasetManifest:
    records: list[dict]
    config: DatasetConfig
    complete: bool = True

    def split(self, tag: str) -> list[dict]:
        return [r for r in self.records if r["split"] == tag]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "config_hash": config_hash(self.config),
            "config": _config_to_dict(self.config),
            "complete": self.complete,
            "records": self.records,
        }


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)


def load_manifest(path) -> DatasetManifest:
    with open(path) as fh:
        data = json.load(fh)
    return DatasetManifest(
        records=data["records"],
        config=config_from_dict(data["config"]),
        complete=bool(data["complete"]),
    )


def _assign_splits(config: DatasetConfig, n_combos: int, rng) -> list[str]:
    """Per-combo split tags; iid mode re-draws per rep downstream."""
    return ["train" if rng.random() < config.train_fraction else "test"
            for _ in range(n_combos)]


def build_dataset(
    config: DatasetConfig,
    out_dir,
    limit_records: int | None = None,
    progress=None,
) -> DatasetManifest:
    """Run the full pipeline and write manifest + scenes/pre/labels trees.

    ``limit_records`` caps how many (combo, rep) records are materialized
    (manifest still covers them all only when unlimited); use it for
    desk-scale runs. Reproducible bit-identically under a fixed seed.
    """
    out = Path(out_dir)
    for sub in ("scenes", "pre", "labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    master = np.random.SeedSequence(config.seed)
    sq_scene, sq_split, sq_gain, sq_noise, sq_calib = master.spawn(5)
    scenes = sample_scenes(config, np.random.default_rng(sq_scene))
    layout = config.layout()
    model = AntennaModel()
    rng_split = np.random.default_rng(sq_split)
    combo_split = _assign_splits(config, len(scenes), rng_split)
    rep_split = np.random.default_rng(sq_split.spawn(1)[0])

    # one gain table + one empty-scene calibration shared by the dataset
    rng_gain = np.random.default_rng(sq_gain)
    lo, hi = config.gain_range
    true_gains = GainTable(g=lo + (hi - lo) * rng_gain.random((config.n_tx, config.n_rx)))
    empty = Scene(config.domain, [], config.materials())
    empty_fields = mimo_sweep(empty, layout, model)
    calib_noise = NoiseConfig(
        amp_noise_sigma=config.amp_noise_sigma,
        packet_phase="uniform",
        seed=int(np.random.default_rng(sq_calib).integers(2**31)),
    )
    empty_ms = measure.simulate_csi(
        empty_fields.e_total_rx, true_gains, calib_noise,
        config.calib_samples, empty_scene=True,
    )
    gains_est = measure.calibrate_gains(empty_ms, layout, model)

    opset = OperatorSet(config.domain, layout, model)
    tone_ops = [opset.tone(t, with_gs=False) for t in range(config.n_tones)]
    noise_rng = np.random.default_rng(sq_noise)
    chash = config_hash(config)

    records: list[dict] = []
    complete = True
    n_done = 0
    for combo_id, scene in scenes:
        if limit_records is not None and n_done >= limit_records:
            break
        scene_path = out / "scenes" / f"combo{combo_id:03d}.json"
        label_path = out / "labels" / f"combo{combo_id:03d}.wlbl"
        save_scene(scene, scene_path)
        _, labels = rasterize(scene)
        save_labels(labels, label_path)
        indicator = (labels.ravel() > 0).astype(float)
        fields = mimo_sweep(scene, layout, model)
        for rep in range(config.reps):
            if limit_records is not None and n_done >= limit_records:
                break
            rec = {
                "combo": combo_id,
                "rep": rep,
                "scene": f"scenes/combo{combo_id:03d}.json",
                "labels": f"labels/combo{combo_id:03d}.wlbl",
                "pre": f"pre/combo{combo_id:03d}_rep{rep:02d}.wfld",
                "split": (
                    combo_split[combo_id]
                    if config.split_mode == "position_held_out"
                    else ("train" if rep_split.random() < config.train_fraction else "test")
                ),
                "error": None,
            }
            try:
                seed_rep = int(noise_rng.integers(2**31))
                ms = measure.simulate_csi(
                    fields.e_total_rx,
                    true_gains,
                    NoiseConfig(
                        amp_noise_sigma=config.amp_noise_sigma,
                        packet_phase="uniform",
                        seed=seed_rep,
                    ),
                    config.n_samples,
                )
                amps = measure.normalize_total_field(ms, gains_est)
                pre = pre_identify(
                    amps, tone_ops, config.inversion, labels=indicator,
                    meta={"config_hash": chash, "combo": combo_id, "rep": rep},
                )
                pre = _add_preimage_noise(pre, config.preimage_noise_var, seed_rep)
                save_preimage(pre, out / rec["pre"])
            except Exception as exc:  # noqa: BLE001 - per-record fault isolation
                rec["error"] = f"{type(exc).__name__}: {exc}"
                complete = False
            records.append(rec)
            n_done += 1
            if progress:
                progress(n_done, combo_id, rep)

    manifest = DatasetManifest(records=records, config=config, complete=complete)
    save_manifest(manifest, out / "manifest.json")
    return manifest


def _add_preimage_noise(pre: PreImage, variance: float, seed: int) -> PreImage:
    if variance <= 0:
        return pre
    rng = np.random.default_rng(seed + 101)
    s = np.sqrt(variance / 2.0)
    noise = s * (
        rng.standard_normal(pre.chi.shape) + 1j * rng.standard_normal(pre.chi.shape)
    )
    return PreImage(pre.chi + noise, pre.domain, dict(pre.meta, noise_var=variance))


def desk_scale_config(**overrides) -> DatasetConfig:
    """Small config for tests and demos: reduced table/reps/tones."""
    base = dict(
        table=(
            (("wood",), 2),
            (("glass",), 2),
            (("rubber",), 2),
            (("rubber", "wood", "glass"), 2),
        ),
        reps=2,
        n_tones=4,
        inversion=InversionConfig(alpha=3.0, max_iters=300, step_size=1e-2),
    )
    base.update(overrides)
    return DatasetConfig(**base)
