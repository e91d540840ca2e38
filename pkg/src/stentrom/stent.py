"""Braided stent lattice: nodes, beam connectivity, crossings and rings.

Two opposite-handed wire families are wound on a cylinder of radius
R_s + R_w. Nodes of opposite families that coincide are recorded as crossing
pairs and kept as distinct degrees of freedom; the solver joins them with a
penalty spring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

#: Phynox (cobalt-chromium) defaults
DEFAULT_E_GPA = 225.0
DEFAULT_NU = 0.33
DEFAULT_RHO = 9.13e3  # kg/m^3


@dataclass(frozen=True)
class StentSpec:
    """Geometry and material of the braided device. Lengths in mm."""

    N_w: int = 48
    R_s: float = 2.6
    R_w: float = 0.014
    L_s: float = 15.0
    N_cells: int = 70
    E: float = DEFAULT_E_GPA  # GPa
    nu: float = DEFAULT_NU
    rho: float = DEFAULT_RHO  # kg/m^3

    def __post_init__(self):
        if self.N_w < 4 or self.N_w % 2 != 0:
            raise GeometryError("N_w must be even and >= 4")
        if min(self.R_s, self.R_w, self.L_s) <= 0 or self.N_cells < 1:
            raise GeometryError("stent lengths must be positive and N_cells >= 1")
        if not 0.0 < self.nu < 0.5:
            raise GeometryError("Poisson ratio must be in (0, 0.5)")

    @property
    def n_nodes(self) -> int:
        return self.N_w * (self.N_cells + 1)

    @property
    def n_beams(self) -> int:
        return self.N_w * self.N_cells


@dataclass
class StentMesh:
    """Node lattice of a braided stent plus connectivity metadata."""

    spec: StentSpec
    nodes: np.ndarray  # (n_nodes, 3)
    beams: np.ndarray  # (n_beams, 2) node index pairs
    crossings: np.ndarray  # (n_cross, 2) coincident node pairs
    rings: list = field(default_factory=list)  # node index arrays per axial station

    @property
    def n_rings(self) -> int:
        return len(self.rings)

    def ring_centers(self, positions: np.ndarray | None = None) -> np.ndarray:
        """Arithmetic mean of each ring's nodes (optionally on deformed positions)."""
        pos = self.nodes if positions is None else np.asarray(positions, dtype=float)
        centers = np.empty((len(self.rings), 3))
        for i, ring in enumerate(self.rings):
            if len(ring) == 0:
                raise GeometryError(f"ring {i} is empty")
            centers[i] = pos[ring].mean(axis=0)
        return centers


def generate_stent(spec: StentSpec) -> StentMesh:
    """Build the lattice from the helical winding rule.

    For each family (orient = +1/-1) and wire n, node i sits at angle
    orient*i*dtheta + Theta_n on the cylinder of radius R_s + R_w at axial
    station z = i * L_s / N_cells.
    """
    half = spec.N_w // 2
    dtheta = 2 * np.pi / half
    radius = spec.R_s + spec.R_w
    pitch = spec.L_s / spec.N_cells
    n_per_wire = spec.N_cells + 1

    nodes = np.empty((spec.n_nodes, 3))
    beams = np.empty((spec.n_beams, 2), dtype=np.int64)

    def node_id(family: int, n: int, i: int) -> int:
        # family 0 = clockwise (+1), family 1 = counter-clockwise (-1)
        return (family * half + n) * n_per_wire + i

    b = 0
    for family, orient in enumerate((1, -1)):
        for n in range(half):
            theta_n = n * dtheta
            for i in range(n_per_wire):
                ang = orient * i * dtheta + theta_n
                nodes[node_id(family, n, i)] = (radius * np.cos(ang), radius * np.sin(ang), i * pitch)
            for i in range(spec.N_cells):
                beams[b] = (node_id(family, n, i), node_id(family, n, i + 1))
                b += 1

    # crossing pairs: node (+1, n, i) coincides with (-1, m, i) where
    # m = (n + 2 i) mod N_w/2 -- the angles match modulo 2*pi
    crossings = []
    for n in range(half):
        for i in range(n_per_wire):
            m = (n + 2 * i) % half
            a = node_id(0, n, i)
            c = node_id(1, m, i)
            if np.linalg.norm(nodes[a] - nodes[c]) < 1e-9:
                crossings.append((a, c))
    crossings = np.asarray(crossings, dtype=np.int64)

    rings = []
    for i in range(n_per_wire):
        ring = [node_id(f, n, i) for f in (0, 1) for n in range(half)]
        rings.append(np.asarray(ring, dtype=np.int64))

    return StentMesh(spec=spec, nodes=nodes, beams=beams, crossings=crossings, rings=rings)


def ring_centers(mesh: StentMesh, positions: np.ndarray | None = None) -> np.ndarray:
    return mesh.ring_centers(positions)
