"""Ground-truth embedding, cloud comparison, and the separation/density audits.

The ground truth maps every grid node of the boundary layer (depth < T) to its
tuple of truncated boundary-distance values over the patch family.  Recovered
spectrum clouds are compared against this image with the exact symmetric
Hausdorff distance in the max norm on tuples.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .distance import (
    boundary_distance,
    dijkstra_from_nodes,
    geodesic_distance,
    point_source_distance,
)
from .errors import ConfigError


@dataclass
class EmbeddingImage:
    points: np.ndarray  # (n_nodes, m) tuples
    node_ids: np.ndarray  # flat node indices into the grid lattice
    patch_ids: list
    T: float


def patch_distance_fields(grid, patches):
    """Distance fields tau[sigma] for every patch, stacked (m, nodes)."""
    return np.stack([geodesic_distance(grid, p).values.ravel() for p in patches])


def ground_truth_embedding(grid, patches, T, tau_fields=None, tau_gamma=None):
    """Tuples (tau~[sigma_1](x) .. tau~[sigma_m](x)) on nodes with depth < T."""
    if tau_gamma is None:
        tau_gamma = boundary_distance(grid).values
    max_depth = tau_gamma.max()
    h = max(grid.spacing)
    if max_depth < T + h:
        raise ConfigError(
            f"T={T} fails the proper-layer condition: max boundary depth "
            f"{max_depth:.4f} must be at least T + h = {T + h:.4f}"
        )
    if tau_fields is None:
        tau_fields = patch_distance_fields(grid, patches)
    inside = tau_gamma.ravel() < T
    node_ids = np.flatnonzero(inside)
    tuples = np.maximum(T - tau_fields[:, node_ids], 0.0).T
    return EmbeddingImage(
        tuples, node_ids, [p.pid for p in patches], T
    )


@dataclass
class ComparisonReport:
    hausdorff: float
    directed_ab: float
    directed_ba: float
    nn_quantiles_ab: dict
    nn_quantiles_ba: dict
    config_hash: str = ""


def hausdorff(cloud_a, cloud_b, config_hash=""):
    """Exact symmetric Hausdorff distance in the max norm on tuples."""
    a = np.asarray(cloud_a, dtype=float)
    b = np.asarray(cloud_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ConfigError(
            f"tuple dimensions differ: {a.shape} vs {b.shape}"
        )
    d_ab = _directed_linf(a, b)
    d_ba = _directed_linf(b, a)
    qs = (0.5, 0.9, 1.0)
    return ComparisonReport(
        max(d_ab[0], d_ba[0]),
        d_ab[0],
        d_ba[0],
        {q: v for q, v in zip(qs, d_ab[1])},
        {q: v for q, v in zip(qs, d_ba[1])},
        config_hash,
    )


def _directed_linf(a, b, chunk=512):
    """max over a of min over b of linf distance, plus NN quantiles."""
    nn = np.empty(len(a))
    for i0 in range(0, len(a), chunk):
        blk = a[i0 : i0 + chunk]
        d = np.abs(blk[:, None, :] - b[None, :, :]).max(axis=2)
        nn[i0 : i0 + chunk] = d.min(axis=1)
    return float(nn.max()), [float(np.quantile(nn, q)) for q in (0.5, 0.9, 1.0)]


# -- audits -------------------------------------------------------------------


@dataclass
class SeparationReport:
    pairs_tested: int
    pairs_separated: int
    excluded_near_cut: int
    min_margin: float
    threshold: float

    @property
    def fraction(self):
        return self.pairs_separated / max(self.pairs_tested, 1)


def separation_audit(grid, T, sample_count=500, rng=None, pool_size=None,
                     tau_gamma=None):
    """Boundary-distance separation of interior node pairs (point version).

    Samples a pool of interior nodes of the layer (excluding the 2h band at
    the inner cut), forms `sample_count` random pairs at least 2h apart, and
    searches all boundary nodes for a coordinate separating each pair by at
    least h/2.  Distances from each pooled node to the boundary come from one
    eikonal solve per node (exact near-source initialization).
    """
    rng = rng or np.random.default_rng(0)
    h = max(grid.spacing)
    if tau_gamma is None:
        tau_gamma = boundary_distance(grid).values
    depth = tau_gamma
    eligible = (depth > 0) & (depth <= T - 2 * h)
    excluded = int(np.sum((depth > T - 2 * h) & (depth < T)))
    ids = np.argwhere(eligible)
    if len(ids) < 2:
        raise ConfigError("no eligible interior nodes for the separation audit")
    if pool_size is None:
        pool_size = min(max(40, int(np.sqrt(2 * sample_count)) * 3), len(ids))
    pick = rng.choice(len(ids), size=pool_size, replace=False)
    pool = ids[pick]
    coords = grid.node_coords()
    pts = np.stack([coords[tuple(p)] for p in pool])

    bmask = np.zeros(grid.node_shape, dtype=bool)
    for a in range(3):
        sl = [slice(None)] * 3
        sl[a] = 0
        bmask[tuple(sl)] = True
        sl[a] = -1
        bmask[tuple(sl)] = True
    bflat = np.flatnonzero(bmask.ravel())

    fields = np.stack(
        [point_source_distance(grid, tuple(p)).values.ravel()[bflat] for p in pool]
    )
    tt = np.maximum(T - fields, 0.0)  # (pool, boundary nodes)

    cand = []
    for i in range(pool_size):
        for j in range(i + 1, pool_size):
            if np.linalg.norm(pts[i] - pts[j]) >= 2 * h:
                cand.append((i, j))
    if not cand:
        raise ConfigError("pool produced no admissible pairs")
    order = rng.permutation(len(cand))[: min(sample_count, len(cand))]
    separated = 0
    min_margin = np.inf
    for idx in order:
        i, j = cand[idx]
        margin = np.abs(tt[i] - tt[j]).max()
        min_margin = min(min_margin, margin)
        if margin >= 0.5 * h:
            separated += 1
    return SeparationReport(len(order), separated, excluded, float(min_margin),
                            0.5 * h)


@dataclass
class DensityReport:
    injective: bool
    colliding_pairs: int
    pairs_checked: int
    excluded_near_cut: int
    minimal_family: list
    minimal_size: int


def density_audit(grid, patches, T, tau_fields=None, tau_gamma=None,
                  greedy=True):
    """Injectivity of the patch family's tuple map at resolution h.

    Nodes of the layer (2h cut band excluded) at mutual distance >= 2h must
    have tuples differing by >= h/2 in some coordinate.  Greedy removal then
    reports a minimal subfamily that still separates.
    """
    h = max(grid.spacing)
    if tau_gamma is None:
        tau_gamma = boundary_distance(grid).values
    if tau_fields is None:
        tau_fields = patch_distance_fields(grid, patches)
    inside = tau_gamma.ravel() < T - 2 * h
    excluded = int(np.sum((tau_gamma.ravel() >= T - 2 * h) & (tau_gamma.ravel() < T)))
    node_ids = np.flatnonzero(inside)
    coords = grid.node_coords().reshape(-1, 3)[node_ids]
    tuples_all = np.maximum(T - tau_fields[:, node_ids], 0.0).T

    def collisions(cols):
        tup = np.ascontiguousarray(tuples_all[:, cols])
        tree = cKDTree(tup)
        close = tree.query_pairs(r=0.5 * h * (1 - 1e-12), p=np.inf,
                                 output_type="ndarray")
        if len(close) == 0:
            return 0
        far = (
            np.linalg.norm(coords[close[:, 0]] - coords[close[:, 1]], axis=1)
            >= 2 * h
        )
        return int(np.sum(far))

    all_cols = list(range(len(patches)))
    bad = collisions(all_cols)
    injective = bad == 0
    minimal = list(all_cols)
    if injective and greedy:
        # drop patches while injectivity survives (first-fit order)
        for c in all_cols:
            trial = [x for x in minimal if x != c]
            if trial and collisions(trial) == 0:
                minimal = trial
    n_pairs = len(node_ids) * (len(node_ids) - 1) // 2
    return DensityReport(
        injective,
        bad,
        n_pairs,
        excluded,
        [patches[i].pid for i in minimal],
        len(minimal),
    )
