"""Field containers for the staggered placements.

Edge vector fields store covariant components at edge midpoints; face vector
fields store contravariant components at face centers; node vector fields are
collocated (contravariant, used by the pointwise algebra).  Scalars live on
nodes or cells.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PlacementError
from .grid import AXES


@dataclass
class ScalarField:
    values: np.ndarray
    placement: str  # "node" or "cell"

    def check(self, grid):
        want = grid.node_shape if self.placement == "node" else grid.cell_shape
        if self.values.shape != want:
            raise PlacementError(
                f"{self.placement} scalar has shape {self.values.shape}, expected {want}"
            )
        if not np.all(np.isfinite(self.values)):
            raise PlacementError("scalar field contains non-finite values")
        return self


@dataclass
class VectorField:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    placement: str  # "edge", "face" or "node"

    @property
    def components(self):
        return (self.x, self.y, self.z)

    def check(self, grid):
        for a, comp in enumerate(self.components):
            if self.placement == "edge":
                want = grid.edge_shape(a)
            elif self.placement == "face":
                want = grid.face_shape(a)
            elif self.placement == "node":
                want = grid.node_shape
            else:
                raise PlacementError(f"unknown placement {self.placement!r}")
            if comp.shape != want:
                raise PlacementError(
                    f"{self.placement} component {a} has shape {comp.shape}, expected {want}"
                )
            if not np.all(np.isfinite(comp)):
                raise PlacementError("vector field contains non-finite values")
        return self

    def copy(self):
        return VectorField(self.x.copy(), self.y.copy(), self.z.copy(), self.placement)

    def __add__(self, other):
        assert self.placement == other.placement
        return VectorField(
            self.x + other.x, self.y + other.y, self.z + other.z, self.placement
        )

    def __sub__(self, other):
        assert self.placement == other.placement
        return VectorField(
            self.x - other.x, self.y - other.y, self.z - other.z, self.placement
        )

    def __mul__(self, s):
        return VectorField(self.x * s, self.y * s, self.z * s, self.placement)

    __rmul__ = __mul__


def zeros_edge(grid):
    return VectorField(*(np.zeros(grid.edge_shape(a)) for a in AXES), "edge")


def zeros_face(grid):
    return VectorField(*(np.zeros(grid.face_shape(a)) for a in AXES), "face")


def zeros_node_vector(grid):
    return VectorField(*(np.zeros(grid.node_shape) for a in AXES), "node")


def random_edge(grid, rng):
    return VectorField(
        *(rng.standard_normal(grid.edge_shape(a)) for a in AXES), "edge"
    )


def random_face(grid, rng):
    return VectorField(
        *(rng.standard_normal(grid.face_shape(a)) for a in AXES), "face"
    )


def edge_dof_count(grid):
    return sum(int(np.prod(grid.edge_shape(a))) for a in AXES)


def flatten_edge(field):
    return np.concatenate([c.ravel() for c in field.components])


def unflatten_edge(grid, vec):
    out = []
    pos = 0
    for a in AXES:
        n = int(np.prod(grid.edge_shape(a)))
        out.append(vec[pos : pos + n].reshape(grid.edge_shape(a)))
        pos += n
    return VectorField(*out, "edge")


def edge_mass_vector(grid):
    return np.concatenate([grid.mass_edge(a).ravel() for a in AXES])


def node_eval(grid, fn):
    """Sample an analytic function f(x, y, z) on the node lattice."""
    c = grid.node_coords()
    return fn(c[..., 0], c[..., 1], c[..., 2])


def edge_eval(grid, fns):
    """Sample three analytic covariant components at edge midpoints."""
    comps = []
    for a in AXES:
        ax = [np.arange(grid.dims[b] + 1) * grid.spacing[b] for b in AXES]
        ax[a] = (np.arange(grid.dims[a]) + 0.5) * grid.spacing[a]
        grids = np.meshgrid(*ax, indexing="ij")
        comps.append(fns[a](*grids))
    return VectorField(*comps, "edge")


def face_eval(grid, fns):
    """Sample three analytic contravariant components at face centers."""
    comps = []
    for a in AXES:
        ax = [(np.arange(grid.dims[b]) + 0.5) * grid.spacing[b] for b in AXES]
        ax[a] = np.arange(grid.dims[a] + 1) * grid.spacing[a]
        grids = np.meshgrid(*ax, indexing="ij")
        comps.append(fns[a](*grids))
    return VectorField(*comps, "face")
