"""Metric-equipped box grid with staggered (node/edge/face/cell) placements.

The domain is the box [0, L1] x [0, L2] x [0, L3] split into dims[i] cells of
size spacing[i].  Scalars live on nodes or cells; vector fields live either on
edges (covariant components sampled at edge midpoints) or on faces
(contravariant components sampled at face centers).  This split makes the
discrete curl and divergence exact cochain differentials, so div(curl .) and
curl(grad .) vanish to machine precision for any metric.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MetricError

AXES = (0, 1, 2)


def _axis_coords(n, h):
    return np.arange(n + 1) * h


def metric_from_spec(spec, coords):
    """Evaluate a named metric spec on the node lattice.

    `spec` is a dict with a "name" key; `coords` is the (N1,N2,N3,3) array of
    node positions.  All named specs produce diagonal tensors, which is what
    the staggered Hodge weights support.
    """
    name = spec.get("name", "identity")
    shape = coords.shape[:3]
    g = np.zeros(shape + (3, 3))
    if name in ("identity", "flat"):
        for a in AXES:
            g[..., a, a] = 1.0
    elif name == "conformal_sine":
        # g = (1 + amp * sin(pi * x_axis / L_axis)) * Id
        amp = float(spec.get("amplitude", 0.2))
        axis = int(spec.get("axis", 0))
        x = coords[..., axis]
        span = x.max() if x.max() > 0 else 1.0
        c = 1.0 + amp * np.sin(np.pi * x / span)
        for a in AXES:
            g[..., a, a] = c
    elif name == "diagonal_sine":
        # independent per-axis profiles g_aa = 1 + amp_a * sin(pi x_a / L_a)
        amps = spec.get("amplitudes", (0.1, 0.1, 0.1))
        for a in AXES:
            x = coords[..., a]
            span = x.max() if x.max() > 0 else 1.0
            g[..., a, a] = 1.0 + float(amps[a]) * np.sin(np.pi * x / span)
    else:
        raise ConfigError(f"unknown metric spec name: {name!r}")
    return g


class MetricGrid:
    """Discretized box with a node-sampled symmetric metric tensor."""

    def __init__(self, dims, spacing, metric, metric_spec=None):
        dims = tuple(int(d) for d in dims)
        spacing = tuple(float(h) for h in spacing)
        if any(d < 4 for d in dims):
            raise ConfigError(f"dims must be >= 4 per axis, got {dims}")
        if any(h <= 0 for h in spacing):
            raise ConfigError(f"spacing must be positive, got {spacing}")
        self.dims = dims
        self.spacing = spacing
        nshape = tuple(d + 1 for d in dims)
        metric = np.asarray(metric, dtype=float)
        if metric.shape != nshape + (3, 3):
            raise ConfigError(
                f"metric shape {metric.shape} does not match node lattice {nshape + (3, 3)}"
            )
        self.metric = metric
        self.metric_spec = metric_spec
        self._validate_metric()
        self._build_hodge()

    @property
    def node_shape(self):
        return tuple(d + 1 for d in self.dims)

    @property
    def cell_shape(self):
        return self.dims

    def edge_shape(self, axis):
        return tuple(d if a == axis else d + 1 for a, d in enumerate(self.dims))

    def face_shape(self, axis):
        return tuple(d + 1 if a == axis else d for a, d in enumerate(self.dims))

    @property
    def lengths(self):
        return tuple(d * h for d, h in zip(self.dims, self.spacing))

    @property
    def hmin(self):
        return min(self.spacing)

    def node_coords(self):
        ax = [_axis_coords(d, h) for d, h in zip(self.dims, self.spacing)]
        grids = np.meshgrid(*ax, indexing="ij")
        return np.stack(grids, axis=-1)

    # -- metric validation ------------------------------------------------

    def _validate_metric(self):
        g = self.metric
        sym = np.abs(g - np.swapaxes(g, -1, -2)).max()
        if sym > 1e-12 * max(1.0, np.abs(g).max()):
            raise MetricError(f"metric tensor not symmetric (max asymmetry {sym:.3e})")
        eigs = np.linalg.eigvalsh(g)
        if eigs.min() <= 0:
            bad = np.unravel_index(np.argmin(eigs.min(axis=-1)), g.shape[:3])
            raise MetricError(f"metric not positive definite at node {bad}")
        # smoothness proxy: adjacent nodes must agree within 50 percent
        for a in AXES:
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            da = np.abs(np.diagonal(g, axis1=-2, axis2=-1))
            ratio = da[tuple(hi)] / np.maximum(da[tuple(lo)], 1e-300)
            if ratio.max() > 1.5 or ratio.min() < 1 / 1.5:
                raise MetricError(
                    f"metric varies more than 50% between adjacent nodes along axis {a}"
                )
        self._diag_only = np.abs(g - g * np.eye(3)).max() <= 1e-14 * max(1.0, np.abs(g).max())

    def require_diagonal(self, what):
        if not self._diag_only:
            raise MetricError(
                f"{what} requires a diagonal metric tensor; "
                "off-diagonal metrics are only supported by the pointwise node operations"
            )

    # -- placement-sampled metric quantities -------------------------------

    def _avg_to_edge(self, arr, axis):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        return 0.5 * (arr[tuple(lo)] + arr[tuple(hi)])

    def _avg_to_face(self, arr, axis):
        out = arr
        for a in AXES:
            if a != axis:
                out = self._avg_to_edge(out, a)
        return out

    def _avg_to_cell(self, arr):
        out = arr
        for a in AXES:
            out = self._avg_to_edge(out, a)
        return out

    def _build_hodge(self):
        g = self.metric
        det_node = np.linalg.det(g)
        self.sqrtdet_node = np.sqrt(det_node)
        gdiag = {a: g[..., a, a] for a in AXES}

        # edge placement: g_aa and sqrt(det g) averaged onto axis-a edge midpoints
        self.g_edge = {a: self._avg_to_edge(gdiag[a], a) for a in AXES}
        self.sqrtdet_edge = {a: self._avg_to_edge(self.sqrtdet_node, a) for a in AXES}
        # face placement (face normal to axis a)
        self.g_face = {a: self._avg_to_face(gdiag[a], a) for a in AXES}
        self.sqrtdet_face = {a: self._avg_to_face(self.sqrtdet_node, a) for a in AXES}
        self.sqrtdet_cell = self._avg_to_cell(self.sqrtdet_node)

    def _boundary_halved(self, shape, parallel_axis=None):
        """Trapezoid ownership volume factors: 1 interior, 1/2 on lattice ends.

        Axes whose extent equals dims[a] (staggered axis) carry no halving;
        axes with dims[a]+1 entries are node-aligned and get endpoint halving.
        """
        w = np.ones(shape)
        for a in AXES:
            if shape[a] == self.dims[a] + 1:
                sl = [slice(None)] * 3
                sl[a] = 0
                w[tuple(sl)] *= 0.5
                sl[a] = -1
                w[tuple(sl)] *= 0.5
        return w

    def mass_node(self):
        dv = np.prod(self.spacing)
        return self.sqrtdet_node * self._boundary_halved(self.node_shape) * dv

    def mass_cell(self):
        return self.sqrtdet_cell * np.prod(self.spacing)

    def mass_edge(self, axis):
        """Weight of covariant edge component: g^{aa} sqrt(det g) dV."""
        self.require_diagonal("edge mass weights")
        dv = np.prod(self.spacing)
        w = self._boundary_halved(self.edge_shape(axis))
        return self.sqrtdet_edge[axis] / self.g_edge[axis] * w * dv

    def mass_face(self, axis):
        """Weight of contravariant face component: g_aa sqrt(det g) dV."""
        self.require_diagonal("face mass weights")
        dv = np.prod(self.spacing)
        w = self._boundary_halved(self.face_shape(axis))
        return self.g_face[axis] * self.sqrtdet_face[axis] * w * dv

    def cfl_dt(self, factor=0.9):
        """Largest stable step: factor * hmin / sqrt(3 * lambda_max(g^-1))."""
        lam_max = np.linalg.eigvalsh(np.linalg.inv(self.metric)).max()
        return factor * self.hmin / np.sqrt(3.0 * lam_max)

    def geodesic_spacing(self, axis):
        """Per-axis effective spacings h_a sqrt(g_aa) on nodes (eikonal solves)."""
        self.require_diagonal("geodesic spacings")
        return self.spacing[axis] * np.sqrt(self.metric[..., axis, axis])


def build_grid(dims, spacing, metric_spec):
    """Construct a MetricGrid from a named metric spec.

    `metric_spec` may be "identity", a spec dict (see metric_from_spec), or an
    explicit (N1,N2,N3,3,3) tensor array.
    """
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(h) for h in spacing)
    if isinstance(metric_spec, str):
        metric_spec = {"name": metric_spec}
    if isinstance(metric_spec, np.ndarray):
        return MetricGrid(dims, spacing, metric_spec)
    probe = MetricGrid.__new__(MetricGrid)
    probe.dims = dims
    probe.spacing = spacing
    coords = probe.node_coords()
    g = metric_from_spec(metric_spec, coords)
    return MetricGrid(dims, spacing, g, metric_spec=dict(metric_spec))


# -- boundary patches ------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPatch:
    """Axis-aligned rectangle on one box side.

    `axis` is the normal axis, `side` is 0 (low) or 1 (high), and lo/hi give
    the covered fraction of the face along the two transverse axes (sorted
    ascending order of axis index).
    """

    pid: str
    axis: int
    side: int
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)
    empty: bool = False

    def __post_init__(self):
        if self.empty:
            return
        if self.axis not in AXES or self.side not in (0, 1):
            raise ConfigError(f"bad patch spec {self}")
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ConfigError(f"patch {self.pid} has empty extent")

    @staticmethod
    def empty_patch(pid="empty"):
        return BoundaryPatch(pid, 0, 0, empty=True)

    def transverse_axes(self):
        return tuple(a for a in AXES if a != self.axis)

    def face_index_ranges(self, grid):
        """Half-open index ranges of the boundary squares covered by the patch."""
        rngs = []
        for a, l, h in zip(self.transverse_axes(), self.lo, self.hi):
            n = grid.dims[a]
            i0 = int(round(l * n))
            i1 = int(round(h * n))
            rngs.append((i0, max(i1, i0 + 1)))
        return rngs

    def face_count(self, grid):
        if self.empty:
            return 0
        (a0, b0), (a1, b1) = self.face_index_ranges(grid)
        return (b0 - a0) * (b1 - a1)

    def seed_node_mask(self, grid):
        """Boolean node mask: nodes of the closed patch rectangle (FMM seeds)."""
        mask = np.zeros(grid.node_shape, dtype=bool)
        if self.empty:
            return mask
        sl = [slice(None)] * 3
        sl[self.axis] = -1 if self.side else 0
        (a0, b0), (a1, b1) = self.face_index_ranges(grid)
        t0, t1 = self.transverse_axes()
        sl[t0] = slice(a0, b0 + 1)
        sl[t1] = slice(a1, b1 + 1)
        mask[tuple(sl)] = True
        return mask

    def face_centers(self, grid):
        """Physical coordinates of covered boundary-square centers."""
        if self.empty:
            return np.zeros((0, 3))
        (a0, b0), (a1, b1) = self.face_index_ranges(grid)
        t0, t1 = self.transverse_axes()
        h = grid.spacing
        u = (np.arange(a0, b0) + 0.5) * h[t0]
        v = (np.arange(a1, b1) + 0.5) * h[t1]
        uu, vv = np.meshgrid(u, v, indexing="ij")
        out = np.zeros(uu.shape + (3,))
        out[..., t0] = uu
        out[..., t1] = vv
        out[..., self.axis] = grid.lengths[self.axis] if self.side else 0.0
        return out.reshape(-1, 3)

    def inward_normals(self, grid):
        """Contravariant inward unit normals at covered face centers."""
        centers = self.face_centers(grid)
        sign = -1.0 if self.side else 1.0
        # sample g_aa at face centers by trilinear interpolation of node values
        gaa = _interp_nodes(grid, grid.metric[..., self.axis, self.axis], centers)
        normals = np.zeros_like(centers)
        normals[:, self.axis] = sign / np.sqrt(gaa)
        return normals

    def rect_bounds(self, grid):
        """Physical (lo, hi) corners of the patch rectangle (3-vectors)."""
        lo = np.zeros(3)
        hi = np.array(grid.lengths, dtype=float)
        wall = grid.lengths[self.axis] if self.side else 0.0
        lo[self.axis] = hi[self.axis] = wall
        for a, l, h in zip(self.transverse_axes(), self.lo, self.hi):
            lo[a] = l * grid.lengths[a]
            hi[a] = h * grid.lengths[a]
        return lo, hi


def _interp_nodes(grid, values, points):
    """Trilinear interpolation of a node field at physical points."""
    pts = np.atleast_2d(points)
    idx = []
    frac = []
    for a in AXES:
        x = pts[:, a] / grid.spacing[a]
        i = np.clip(np.floor(x).astype(int), 0, grid.dims[a] - 1)
        idx.append(i)
        frac.append(x - i)
    out = np.zeros(len(pts))
    for da in (0, 1):
        for db in (0, 1):
            for dc in (0, 1):
                w = (
                    (frac[0] if da else 1 - frac[0])
                    * (frac[1] if db else 1 - frac[1])
                    * (frac[2] if dc else 1 - frac[2])
                )
                out += w * values[idx[0] + da, idx[1] + db, idx[2] + dc]
    return out


def face_patch(axis, side):
    names = "xyz"
    pid = f"{names[axis]}{side}"
    return BoundaryPatch(pid, axis, side)


def quarter_patches(axis, side):
    names = "xyz"
    out = []
    for qa in (0, 1):
        for qb in (0, 1):
            pid = f"{names[axis]}{side}q{qa}{qb}"
            lo = (0.5 * qa, 0.5 * qb)
            hi = (0.5 * qa + 0.5, 0.5 * qb + 0.5)
            out.append(BoundaryPatch(pid, axis, side, lo, hi))
    return out


def default_patch_family():
    """Six full faces followed by their four quarter subpatches each."""
    fam = []
    for axis in AXES:
        for side in (0, 1):
            fam.append(face_patch(axis, side))
    for axis in AXES:
        for side in (0, 1):
            fam.extend(quarter_patches(axis, side))
    return fam


@dataclass
class InfluenceMask:
    """Node indicator of the influence region within distance s of a patch."""

    patch: BoundaryPatch
    radius: float
    indicator: np.ndarray

    def as_operator_diag(self):
        return self.indicator.astype(float)
