"""Mimetic vector calculus on the staggered metric grid.

curl maps edge fields to face fields, div maps face fields to cell scalars,
grad maps node scalars to edge fields.  The metric enters only through
sqrt(det g) scalings sampled at face and cell centers, which cancel exactly in
div(curl .); grad is purely topological, so curl(grad .) telescopes to zero.
The continuum formulas these discretize are

    (curl y)^j = det(g)^(-1/2) eps^{jmn} d_m (g_{nk} y^k)
    div y      = det(g)^(-1/2) d_k (det(g)^(1/2) y^k)
    (grad p)^j = g^{jk} d_k p
    (u x v)^j  = det(g)^(-1/2) eps^{jmn} g_{mk} u^k g_{nl} v^l
"""

import numpy as np

from .errors import PlacementError
from .fields import ScalarField, VectorField
from .grid import AXES


def _diff(arr, axis, h):
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return (arr[tuple(hi)] - arr[tuple(lo)]) / h


def _require(field, placement):
    if field.placement != placement:
        raise PlacementError(f"expected {placement} field, got {field.placement}")


def curl(grid, field):
    """Edge field (covariant) -> face field (contravariant)."""
    _require(field, "edge")
    field.check(grid)
    a = field.components
    h = grid.spacing
    out = []
    for j in AXES:
        m, n = (j + 1) % 3, (j + 2) % 3
        circ = _diff(a[n], m, h[m]) - _diff(a[m], n, h[n])
        out.append(circ / grid.sqrtdet_face[j])
    return VectorField(*out, "face")


def div(grid, field):
    """Face field (contravariant) -> cell scalar."""
    _require(field, "face")
    field.check(grid)
    h = grid.spacing
    acc = np.zeros(grid.cell_shape)
    for j in AXES:
        acc += _diff(field.components[j] * grid.sqrtdet_face[j], j, h[j])
    return ScalarField(acc / grid.sqrtdet_cell, "cell")


def grad(grid, scalar):
    """Node scalar -> edge field (covariant gradient, metric free)."""
    if scalar.placement != "node":
        raise PlacementError("grad expects a node scalar")
    scalar.check(grid)
    comps = [_diff(scalar.values, a, grid.spacing[a]) for a in AXES]
    return VectorField(*comps, "edge")


def dual_curl(grid, field):
    """Face field -> covariant edge increments: M1^-1 C^T M2 restricted to
    interior edges (boundary-tangential edges get zero; they are prescribed
    by the boundary condition, never evolved)."""
    _require(field, "face")
    h = grid.spacing
    dv = np.prod(grid.spacing)
    # p_j = M2_j w^j / sqrtdet_face = g_jj dV w^j  (interior dofs only are used)
    p = [grid.g_face[j] * dv * field.components[j] for j in AXES]
    out = []
    for j in AXES:
        m, n = (j + 1) % 3, (j + 2) % 3
        res = np.zeros(grid.edge_shape(j))
        interior = [slice(None)] * 3
        interior[m] = slice(1, -1)
        interior[n] = slice(1, -1)
        # d/da_j of (curl a)^n is +1/(h_m); of (curl a)^m is -1/(h_n)
        res[tuple(interior)] = _diff(p[n], m, h[m])[
            tuple(_mid(interior, m, keep=n))
        ] - _diff(p[m], n, h[n])[tuple(_mid(interior, n, keep=m))]
        me = grid.mass_edge(j)
        res[tuple(interior)] /= me[tuple(interior)]
        out.append(res)
    return VectorField(*out, "edge")


def _mid(interior, diffed_axis, keep):
    """Index the differenced face array onto interior edge positions."""
    sl = list(interior)
    sl[diffed_axis] = slice(None)
    sl[keep] = slice(1, -1)
    return sl


def metric_inner(grid, u, v):
    """Pointwise metric inner product of node-collocated vector fields."""
    _require(u, "node")
    _require(v, "node")
    g = grid.metric
    acc = np.zeros(grid.node_shape)
    for j in AXES:
        for k in AXES:
            acc += g[..., j, k] * u.components[j] * np.conj(v.components[k])
    return ScalarField(acc, "node")


def vector_product(grid, u, v):
    """Pointwise metric cross product of node-collocated vector fields."""
    _require(u, "node")
    _require(v, "node")
    g = grid.metric
    ul = [sum(g[..., m, k] * u.components[k] for k in AXES) for m in AXES]
    vl = [sum(g[..., n, k] * v.components[k] for k in AXES) for n in AXES]
    inv_sd = 1.0 / grid.sqrtdet_node
    out = []
    for j in AXES:
        m, n = (j + 1) % 3, (j + 2) % 3
        out.append(inv_sd * (ul[m] * vl[n] - ul[n] * vl[m]))
    return VectorField(*out, "node")


def inner_edge(grid, u, v):
    """L2 inner product of edge fields (diagonal metric Hodge weights)."""
    _require(u, "edge")
    _require(v, "edge")
    return sum(
        float(np.sum(grid.mass_edge(a) * u.components[a] * v.components[a]))
        for a in AXES
    )


def inner_face(grid, u, v):
    _require(u, "face")
    _require(v, "face")
    return sum(
        float(np.sum(grid.mass_face(a) * u.components[a] * v.components[a]))
        for a in AXES
    )


def inner_node(grid, p, q):
    return float(np.sum(grid.mass_node() * p * q))


def norm_edge(grid, u):
    return np.sqrt(max(inner_edge(grid, u, u), 0.0))


def avg_node_to_edge(grid, values, axis):
    return grid._avg_to_edge(values, axis)


def avg_node_to_face(grid, values, axis):
    return grid._avg_to_face(values, axis)


def scalar_to_edge_field(grid, values):
    """Average a node scalar onto the three edge-midpoint lattices."""
    return [avg_node_to_edge(grid, values, a) for a in AXES]


def multiply_edge_by_scalar(grid, field, node_values):
    """Pointwise multiply an edge field by a node scalar (midpoint averaged)."""
    _require(field, "edge")
    phis = scalar_to_edge_field(grid, node_values)
    return VectorField(
        *(field.components[a] * phis[a] for a in AXES), "edge"
    )


def cross_edge_edge_to_face(grid, a, b):
    """Cross product of two covariant edge fields sampled at face centers.

    (a x b)^j = det(g)^(-1/2) (a_m b_n - a_n b_m) with the transverse
    components averaged onto the face-center lattice.
    """
    _require(a, "edge")
    _require(b, "edge")
    out = []
    for j in AXES:
        m, n = (j + 1) % 3, (j + 2) % 3
        am = _edge_to_face(grid, a.components[m], m, j)
        an = _edge_to_face(grid, a.components[n], n, j)
        bm = _edge_to_face(grid, b.components[m], m, j)
        bn = _edge_to_face(grid, b.components[n], n, j)
        out.append((am * bn - an * bm) / grid.sqrtdet_face[j])
    return VectorField(*out, "face")


def _edge_to_face(grid, comp, comp_axis, face_axis):
    """Average an axis-`comp_axis` edge component onto axis-`face_axis` faces."""
    other = next(a for a in AXES if a not in (comp_axis, face_axis))
    # edge lattice is staggered along comp_axis; face lattice is staggered along
    # both transverse axes of face_axis, so average along `other`.
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[other] = slice(None, -1)
    hi[other] = slice(1, None)
    return 0.5 * (comp[tuple(lo)] + comp[tuple(hi)])


def multiply_face_by_scalar(grid, field, node_values):
    _require(field, "face")
    out = []
    for a in AXES:
        vals = avg_node_to_face(grid, node_values, a)
        out.append(field.components[a] * vals)
    return VectorField(*out, "face")
