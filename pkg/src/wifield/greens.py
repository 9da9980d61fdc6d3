"""Discretized scattering operators and incident fields.

Time convention e^{+j omega t}; the outgoing 2D Green's function is
g(R) = -(j/4) H0^(2)(k0 R). Operator entries follow the midpoint rule
G[m, n] = k0^2 A g(|r_m - r_n|) with A the cell area; the singular
self-cell integral is replaced by analytic integration of g over the
equal-area disc (radius a = dx / sqrt(pi)):

    k0^2 * integral_cell g dA = -(j/2) [pi k0 a H1^(2)(k0 a) - 2j]

The interior operator is translation-invariant on the equispaced grid,
so assembly evaluates the kernel once per distinct cell displacement
((2n-1)^2 values) and gathers; the same kernel block drives the
FFT-convolution matvec used by the iterative solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .scene import SceneError, SensingDomain


class GeometryError(ValueError):
    """Antenna/domain geometry violates an operator precondition."""


@dataclass(frozen=True)
class AntennaModel:
    """Incident-field law.

    ``antenna3d``: thin-antenna far field C e^{-j k0 r} / r (the default;
    what gain calibration assumes). ``line2d``: 2D line source
    -(j/4) H0^(2)(k0 r), dimensionally matched to the domain kernel and
    used for self-consistent validation (reciprocity, cylinder oracle).
    """

    incident_mode: str = "antenna3d"
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.incident_mode not in ("antenna3d", "line2d"):
            raise GeometryError(f"unknown incident mode {self.incident_mode!r}")
        if self.amplitude == 0:
            raise GeometryError("antenna amplitude constant must be nonzero")


@dataclass(frozen=True)
class ArrayLayout:
    """Transmitter/receiver positions (m) and tone frequencies (Hz)."""

    tx: tuple[tuple[float, float], ...]
    rx: tuple[tuple[float, float], ...]
    tones_hz: tuple[float, ...]

    def __post_init__(self):
        if len(self.tx) < 1 or len(self.rx) < 1:
            raise GeometryError("need at least one transmitter and one receiver")
        tones = np.asarray(self.tones_hz, dtype=float)
        if tones.ndim != 1 or len(tones) < 1:
            raise GeometryError("need at least one tone")
        if not (np.diff(tones) > 0).all():
            raise GeometryError("tones must be strictly increasing")

    @property
    def n_tx(self) -> int:
        return len(self.tx)

    @property
    def n_rx(self) -> int:
        return len(self.rx)

    @property
    def n_tones(self) -> int:
        return len(self.tones_hz)

    def wavenumbers(self) -> np.ndarray:
        c0 = 299792458.0
        return 2.0 * np.pi * np.asarray(self.tones_hz, dtype=float) / c0

    def tx_array(self) -> np.ndarray:
        return np.asarray(self.tx, dtype=float)

    def rx_array(self) -> np.ndarray:
        return np.asarray(self.rx, dtype=float)


def green2d(k0: float, r: np.ndarray) -> np.ndarray:
    """Outgoing 2D free-space Green's function -(j/4) H0^(2)(k0 r), r > 0."""
    return -0.25j * specfun.hankel2(0, k0 * np.asarray(r, dtype=float))


def self_term(k0: float, cell_size: float) -> complex:
    """Analytic self-cell integral over the equal-area disc."""
    a = cell_size / np.sqrt(np.pi)
    return -0.5j * (np.pi * k0 * a * specfun.hankel2(1, k0 * a) - 2.0j)


def incident_field(model: AntennaModel, source, eval_points, k0: float) -> np.ndarray:
    """Incident field of a unit-driven antenna at ``source`` on ``eval_points``.

    The amplitude constant scales both modes (default 1).
    """
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    src = np.asarray(source, dtype=float)
    r = np.hypot(pts[:, 0] - src[0], pts[:, 1] - src[1])
    if (r == 0).any():
        raise GeometryError("evaluation point coincides with the source")
    if model.incident_mode == "antenna3d":
        return model.amplitude * np.exp(-1j * k0 * r) / r
    return model.amplitude * (-0.25j) * specfun.hankel2(0, k0 * r)


def kernel_block_grid(n_rows: int, n_cols: int, cell_size: float, k0: float) -> np.ndarray:
    """(2 n_rows - 1, 2 n_cols - 1) kernel with
    K[dr + n_rows - 1, dc + n_cols - 1] = k0^2 dx^2 g(R(dr, dc)).

    The center entry carries the regularized self-term. A dense operator
    is a gather from this block; the FFT matvec convolves with it.
    """
    d = cell_size
    ir = np.arange(-(n_rows - 1), n_rows)
    ic = np.arange(-(n_cols - 1), n_cols)
    rr = d * np.hypot(ir[:, None], ic[None, :])
    block = np.empty((2 * n_rows - 1, 2 * n_cols - 1), dtype=np.complex128)
    mask = rr > 0
    block[mask] = (k0 * d) ** 2 * green2d(k0, rr[mask])
    block[n_rows - 1, n_cols - 1] = self_term(k0, d)
    return block


def kernel_block(domain: SensingDomain, k0: float) -> np.ndarray:
    """Square-domain kernel block (see `kernel_block_grid`)."""
    return kernel_block_grid(domain.n, domain.n, domain.cell_size, k0)


def assemble_gs(domain: SensingDomain, k0: float) -> np.ndarray:
    """Dense (n^2, n^2) domain operator G_S."""
    if k0 <= 0:
        raise GeometryError(f"k0 must be > 0, got {k0}")
    lam = 2.0 * np.pi / k0
    if domain.cell_size >= lam / 4:
        warnings.warn(
            f"cell size {domain.cell_size:.4g} m >= lambda/4 = {lam / 4:.4g} m; "
            "discretization is too coarse for reliable fields",
            stacklevel=2,
        )
    n = domain.n
    block = kernel_block(domain, k0)
    rows = np.arange(n * n, dtype=np.int32)
    ri, ci = rows // n, rows % n
    return block[
        ri[:, None] - ri[None, :] + n - 1,
        ci[:, None] - ci[None, :] + n - 1,
    ]


def assemble_go(domain: SensingDomain, rx_positions, k0: float) -> np.ndarray:
    """Dense (Q, n^2) observation operator G_O; receivers must lie outside."""
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    if domain.contains_points(rx).any():
        raise GeometryError("receivers must lie outside the sensing domain")
    centers = domain.cell_centers()
    rr = np.hypot(
        rx[:, 0:1] - centers[None, :, 0], rx[:, 1:2] - centers[None, :, 1]
    )
    return (k0 * domain.cell_size) ** 2 * green2d(k0, rr)


@dataclass
class ToneOperators:
    """All per-tone operators shared by forward solves and inversion."""

    k0: float
    domain: SensingDomain
    go: np.ndarray  # (Q, n^2)
    e_i_cells: np.ndarray  # (P, n^2)
    e_i_rx: np.ndarray  # (P, Q)
    gs: np.ndarray | None = None  # (n^2, n^2), materialized on demand
    block: np.ndarray | None = None  # (2n-1, 2n-1) kernel for FFT matvec

    def require_gs(self) -> np.ndarray:
        if self.gs is None:
            raise ValueError("ToneOperators built without dense G_S")
        return self.gs


@dataclass
class OperatorSet:
    """Factory for per-tone operators over a fixed (domain, array, antenna).

    Construction validates geometry; `tone(t)` assembles operators for
    tone index t. Assembly is deterministic (pure function of inputs).
    """

    domain: SensingDomain
    layout: ArrayLayout
    model: AntennaModel = field(default_factory=AntennaModel)

    def __post_init__(self):
        inside = self.domain.contains_points(self.layout.tx_array()).any() or (
            self.domain.contains_points(self.layout.rx_array()).any()
        )
        if inside:
            raise GeometryError("all antennas must lie outside the sensing domain")

    @property
    def n_tones(self) -> int:
        return self.layout.n_tones

    def tone(self, t: int, with_gs: bool = True, with_block: bool = False) -> ToneOperators:
        k0 = float(self.layout.wavenumbers()[t])
        centers = self.domain.cell_centers()
        tx = self.layout.tx_array()
        rx = self.layout.rx_array()
        e_i_cells = np.stack(
            [incident_field(self.model, s, centers, k0) for s in tx]
        )
        e_i_rx = np.stack([incident_field(self.model, s, rx, k0) for s in tx])
        return ToneOperators(
            k0=k0,
            domain=self.domain,
            go=assemble_go(self.domain, rx, k0),
            e_i_cells=e_i_cells,
            e_i_rx=e_i_rx,
            gs=assemble_gs(self.domain, k0) if with_gs else None,
            block=kernel_block(self.domain, k0) if with_block else None,
        )


# --- JSON wire format ----------------------------------------------------
# {"tx": [[x, y], ...], "rx": [[x, y], ...], "tones_hz": [...]}


def layout_to_dict(layout: ArrayLayout) -> dict:
    return {
        "tx": [list(p) for p in layout.tx],
        "rx": [list(p) for p in layout.rx],
        "tones_hz": list(layout.tones_hz),
    }


def layout_from_dict(data: dict) -> ArrayLayout:
    try:
        return ArrayLayout(
            tuple(tuple(map(float, p)) for p in data["tx"]),
            tuple(tuple(map(float, p)) for p in data["rx"]),
            tuple(float(f) for f in data["tones_hz"]),
        )
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed array JSON: {exc}") from exc
