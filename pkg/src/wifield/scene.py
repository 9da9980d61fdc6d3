"""Sensing domain, materials, targets, and scene rasterization.

A scene is a square N x N cell grid plus an ordered list of shaped
targets with material labels. Rasterization assigns a cell to a target
iff the cell center lies inside the shape (last target wins on overlap)
and produces the complex contrast vector chi = eps_r - 1 alongside the
integer label grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAX_TARGETS = 8

# Material permittivities are configurable inputs, not ground truth: the
# defaults below are plausible WiFi-band values for the shipped labels.
DEFAULT_MATERIALS = {
    0: ("air", 1.0 + 0.0j),
    1: ("wood", 2.2 - 0.1j),
    2: ("glass", 5.5 - 0.05j),
    3: ("rubber", 3.0 - 0.3j),
}


class SceneError(ValueError):
    """Invalid scene construction (bad geometry, labels, or materials)."""


@dataclass(frozen=True)
class Material:
    name: str
    label: int
    eps: complex  # relative permittivity, e^{+j omega t} convention

    def __post_init__(self):
        if self.label < 0:
            raise SceneError(f"label must be >= 0, got {self.label}")
        if self.label == 0 and self.eps != 1.0 + 0.0j:
            raise SceneError("label 0 is reserved for air with eps exactly 1+0j")
        if self.eps.imag > 0:
            raise SceneError(
                f"material {self.name!r}: Im(eps) must be <= 0 (lossy or lossless)"
            )
        if not (np.isfinite(self.eps.real) and np.isfinite(self.eps.imag)):
            raise SceneError(f"material {self.name!r}: eps must be finite")


@dataclass(frozen=True)
class SensingDomain:
    """Square sensing region tiled by N x N equal cells.

    Cell i (row-major, i = row * n + col) has its center at
    origin + ((col + 0.5) dx, (row + 0.5) dx) with dx = side / n.
    """

    origin: tuple[float, float] = (0.0, 0.0)
    side: float = 1.05
    n: int = 40

    def __post_init__(self):
        if self.n < 2:
            raise SceneError(f"n must be >= 2, got {self.n}")
        if self.side <= 0:
            raise SceneError(f"side must be > 0, got {self.side}")

    @property
    def cell_size(self) -> float:
        return self.side / self.n

    @property
    def cell_area(self) -> float:
        return self.cell_size**2

    def cell_centers(self) -> np.ndarray:
        """(n^2, 2) array of cell-center coordinates, row-major."""
        d = self.cell_size
        ax = self.origin[0] + d * (np.arange(self.n) + 0.5)
        ay = self.origin[1] + d * (np.arange(self.n) + 0.5)
        xx, yy = np.meshgrid(ax, ay)  # yy varies along rows
        return np.column_stack([xx.ravel(), yy.ravel()])

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x0, y0 = self.origin
        return (
            (pts[:, 0] >= x0)
            & (pts[:, 0] <= x0 + self.side)
            & (pts[:, 1] >= y0)
            & (pts[:, 1] <= y0 + self.side)
        )


@dataclass(frozen=True)
class Rect:
    center: tuple[float, float]
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneError("rectangle width/height must be > 0")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        hx, hy = 0.5 * self.width, 0.5 * self.height
        return (np.abs(pts[:, 0] - self.center[0]) <= hx) & (
            np.abs(pts[:, 1] - self.center[1]) <= hy
        )

    def bounds(self):
        cx, cy = self.center
        return (cx - 0.5 * self.width, cy - 0.5 * self.height,
                cx + 0.5 * self.width, cy + 0.5 * self.height)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneError("circle radius must be > 0")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (pts[:, 0] - self.center[0]) ** 2 + (
            pts[:, 1] - self.center[1]
        ) ** 2 <= self.radius**2

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)


@dataclass(frozen=True)
class Target:
    material_label: int
    shape: Rect | Circle


@dataclass
class Scene:
    domain: SensingDomain
    targets: list[Target] = field(default_factory=list)
    materials: dict[int, Material] = field(default_factory=dict)

    def __post_init__(self):
        if 0 not in self.materials:
            self.materials[0] = Material("air", 0, 1.0 + 0.0j)
        if len(self.targets) > MAX_TARGETS:
            raise SceneError(f"at most {MAX_TARGETS} targets supported")
        x0, y0 = self.domain.origin
        x1, y1 = x0 + self.domain.side, y0 + self.domain.side
        for t in self.targets:
            if t.material_label not in self.materials:
                raise SceneError(f"target label {t.material_label} not in material table")
            bx0, by0, bx1, by1 = t.shape.bounds()
            if bx0 < x0 or by0 < y0 or bx1 > x1 or by1 > y1:
                raise SceneError(f"target {t} extends outside the sensing domain")


@dataclass
class ContrastGrid:
    """Complex contrast chi[i] = eps_r(cell i) - 1, flat row-major length n^2."""

    chi: np.ndarray
    domain: SensingDomain

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=np.complex128)
        if self.chi.shape != (self.domain.n**2,):
            raise SceneError(
                f"chi must have shape ({self.domain.n ** 2},), got {self.chi.shape}"
            )
        if not np.isfinite(self.chi).all():
            raise SceneError("chi entries must be finite")

    def as_image(self) -> np.ndarray:
        n = self.domain.n
        return self.chi.reshape(n, n)


def rasterize(scene: Scene) -> tuple[ContrastGrid, np.ndarray]:
    """Rasterize a scene to (ContrastGrid, label grid).

    Cell membership is by cell-center inclusion; overlapping targets
    resolve last-writer-wins. Returns labels as an (n, n) uint8 array.
    """
    n = scene.domain.n
    centers = scene.domain.cell_centers()
    labels = np.zeros(n * n, dtype=np.uint8)
    chi = np.zeros(n * n, dtype=np.complex128)
    for t in scene.targets:
        mask = t.shape.contains(centers)
        labels[mask] = t.material_label
        chi[mask] = scene.materials[t.material_label].eps - 1.0
    return ContrastGrid(chi, scene.domain), labels.reshape(n, n)


def default_material_table(overrides: dict | None = None) -> dict[int, Material]:
    table = {}
    for label, (name, eps) in DEFAULT_MATERIALS.items():
        if overrides and label in overrides:
            eps = overrides[label]
        table[label] = Material(name, label, eps)
    return table


# --- JSON wire format ----------------------------------------------------
# {"domain": {"origin": [x, y], "side": 1.05, "n": 40},
#  "materials": [{"name": "wood", "label": 1, "eps": [2.2, -0.1]}, ...],
#  "targets": [{"label": 1, "rect": {"center": [x, y], "w": 0.05, "h": 0.10}} |
#              {"label": 2, "circle": {"center": [x, y], "r": 0.03}}, ...]}


def scene_to_dict(scene: Scene) -> dict:
    targets = []
    for t in scene.targets:
        if isinstance(t.shape, Rect):
            targets.append(
                {
                    "label": t.material_label,
                    "rect": {
                        "center": list(t.shape.center),
                        "w": t.shape.width,
                        "h": t.shape.height,
                    },
                }
            )
        else:
            targets.append(
                {
                    "label": t.material_label,
                    "circle": {"center": list(t.shape.center), "r": t.shape.radius},
                }
            )
    return {
        "domain": {
            "origin": list(scene.domain.origin),
            "side": scene.domain.side,
            "n": scene.domain.n,
        },
        "materials": [
            {"name": m.name, "label": m.label, "eps": [m.eps.real, m.eps.imag]}
            for m in sorted(scene.materials.values(), key=lambda m: m.label)
        ],
        "targets": targets,
    }


def scene_from_dict(data: dict) -> Scene:
    try:
        dom = SensingDomain(
            tuple(data["domain"]["origin"]),
            float(data["domain"]["side"]),
            int(data["domain"]["n"]),
        )
        materials = {
            int(m["label"]): Material(m["name"], int(m["label"]),
                                      complex(m["eps"][0], m["eps"][1]))
            for m in data["materials"]
        }
        targets = []
        for t in data["targets"]:
            if "rect" in t:
                shape = Rect(tuple(t["rect"]["center"]), float(t["rect"]["w"]),
                             float(t["rect"]["h"]))
            elif "circle" in t:
                shape = Circle(tuple(t["circle"]["center"]), float(t["circle"]["r"]))
            else:
                raise SceneError(f"target needs 'rect' or 'circle': {t}")
            targets.append(Target(int(t["label"]), shape))
    except (KeyError, TypeError, IndexError) as exc:
        raise SceneError(f"malformed scene JSON: {exc}") from exc
    return Scene(dom, targets, materials)


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=1, sort_keys=True)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
