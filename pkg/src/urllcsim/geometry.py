"""Factory-hall layouts and (optionally toroidal) distance computation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigurationError, ScenarioConfig


@dataclass
class Layout:
    """Positions of controllers (cell centers) and their actuators.

    ``actuator_positions`` is indexed cell-major: actuator (c, k) sits at row
    c * K + k.  With ``wraparound`` set, every distance is measured on the
    torus of side ``hall_side_m``.
    """

    hall_side_m: float
    controller_positions: np.ndarray  # (C, 2)
    actuator_positions: np.ndarray  # (C*K, 2)
    actuator_cell: np.ndarray  # (C*K,) int, cell index of each actuator
    wraparound: bool

    @property
    def num_cells(self) -> int:
        return len(self.controller_positions)

    @property
    def num_actuators(self) -> int:
        return len(self.actuator_positions)


def _cell_origins(num_cells: int, pitch: float) -> np.ndarray:
    """Lower-left corners of the cell squares, x varying fastest."""
    n = math.isqrt(num_cells)
    ij = [(i, j) for j in range(n) for i in range(n)]
    return np.array([(i * pitch, j * pitch) for i, j in ij], dtype=float)


def _scatter_actuators(origins: np.ndarray, per_cell: int, side: float, rng) -> tuple:
    cells = np.repeat(np.arange(len(origins)), per_cell)
    offsets = rng.uniform(0.0, side, size=(len(cells), 2))
    return origins[cells] + offsets, cells


def build_dense_grid(config: ScenarioConfig, rng: np.random.Generator) -> Layout:
    """sqrt(C) x sqrt(C) tiling of cell squares; controllers at tile centers."""
    if config.layout_kind != "dense_grid":
        raise ConfigurationError("build_dense_grid requires layout_kind=dense_grid")
    side = config.cell_side_m
    origins = _cell_origins(config.num_cells, side)
    actuators, cells = _scatter_actuators(origins, config.actuators_per_cell, side, rng)
    return Layout(
        hall_side_m=side * math.isqrt(config.num_cells),
        controller_positions=origins + side / 2.0,
        actuator_positions=actuators,
        actuator_cell=cells,
        wraparound=False,
    )


def build_wraparound_grid(config: ScenarioConfig, rng: np.random.Generator) -> Layout:
    """3x3 cells spread at pitch D on a torus of side 3D.

    Models frequency reuse at cell distance D inside an unbounded deployment:
    each cell square [off, off+side]^2 sits at offsets {0, D, 2D}^2 and all
    distances wrap around.
    """
    if config.layout_kind != "wraparound_grid":
        raise ConfigurationError(
            "build_wraparound_grid requires layout_kind=wraparound_grid"
        )
    if config.num_cells != 9:
        raise ConfigurationError("wraparound_grid is defined for num_cells=9")
    d = config.cell_separation_m
    side = config.cell_side_m
    origins = _cell_origins(9, d)
    actuators, cells = _scatter_actuators(origins, config.actuators_per_cell, side, rng)
    return Layout(
        hall_side_m=3.0 * d,
        controller_positions=origins + side / 2.0,
        actuator_positions=actuators,
        actuator_cell=cells,
        wraparound=True,
    )


def build_layout(config: ScenarioConfig, rng: np.random.Generator) -> Layout:
    if config.layout_kind == "dense_grid":
        return build_dense_grid(config, rng)
    return build_wraparound_grid(config, rng)


def pairwise_distances(
    a: np.ndarray,
    b: np.ndarray,
    layout: Layout,
    min_distance_m: float = 1.0,
) -> np.ndarray:
    """Distance matrix (len(a), len(b)), toroidal if the layout wraps.

    Distances are clamped below at ``min_distance_m`` before any path-loss
    use; positions themselves are never moved.
    """
    delta = np.abs(a[:, None, :] - b[None, :, :])
    if layout.wraparound:
        delta = np.minimum(delta, layout.hall_side_m - delta)
    d = np.hypot(delta[..., 0], delta[..., 1])
    return np.maximum(d, min_distance_m)


def torus_distance(p: np.ndarray, q: np.ndarray, side: float) -> float:
    """Scalar wraparound distance between two points on a square torus."""
    delta = np.abs(np.asarray(p, float) - np.asarray(q, float))
    delta = np.minimum(delta, side - delta)
    return float(np.hypot(delta[0], delta[1]))


def layout_to_csv(layout: Layout) -> str:
    """CSV export with columns kind,cell,index,x_m,y_m."""
    buf = io.StringIO()
    buf.write("kind,cell,index,x_m,y_m\n")
    for c, (x, y) in enumerate(layout.controller_positions):
        buf.write(f"controller,{c},0,{x:.6f},{y:.6f}\n")
    k_within = np.zeros(layout.num_cells, dtype=int)
    for (x, y), c in zip(layout.actuator_positions, layout.actuator_cell):
        buf.write(f"actuator,{c},{k_within[c]},{x:.6f},{y:.6f}\n")
        k_within[c] += 1
    return buf.getvalue()
