"""Response operator assembly and the data-side identities.

For each basis control f_k the solver is run over [0, 2T] with the odd
continuation S f_k; the recorded boundary trace is paired against every S f_l
in the F^{2T} quadrature, giving the response matrix

    R[k, l] = (R^{2T} S f_k, S f_l)_{F^{2T}}.

The connecting form c[f_k, f_l] = (W f_k, W f_l) is half of that (the
Blagoveshchenskii identity), and |W| is the square root of the resulting Gram
form taken in the control-basis metric.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .controls import odd_continuation, trapezoid_weights
from .errors import ConfigError, DataError
from .grid import AXES


@dataclass
class BasisQuadrature:
    """Per-face spatial profile matrices and the separable F^T Gram factors."""

    spatial: dict  # (axis, side) -> (E_F, n_spatial) matrix, weights folded in
    spatial_cols: dict  # control index -> (face key, spatial column)
    temporal_T: np.ndarray  # (K, N+1) temporal samples on the [0,T] lattice
    temporal_2T: np.ndarray  # (K, 2N+1) odd-continued samples
    delay_of: np.ndarray  # control index -> delay row
    gram: np.ndarray  # F^T Gram matrix of the basis

    @property
    def n(self):
        return len(self.delay_of)


def build_basis_quadrature(solver, basis):
    """Precompute spatial/temporal factors shared by G and R assembly."""
    dt = solver.dt
    n_t = solver.steps_per_T
    tgrid = np.arange(n_t + 1) * dt
    kind = basis.kind

    # distinct temporal rows: one per delay index (all controls of one delay
    # share the window by construction)
    windows = {}
    for c in basis.controls:
        windows.setdefault(c.delay_index, c.window)
    delay_rows = sorted(windows)
    temporal_T = np.stack([windows[k](tgrid) for k in delay_rows])
    temporal_2T = np.stack([odd_continuation(row) for row in temporal_T])

    spatial = {}
    cols = {}
    col_of_profile = {}
    delay_of = np.zeros(len(basis), dtype=int)
    for i, c in enumerate(basis.controls):
        key = (c.face_axis, c.face_side)
        wall = solver.walls[key]
        pk = (key, c.cell_lo, c.cell_hi, getattr(c, "pol_axis", None), c.spatial_kind)
        if pk not in col_of_profile:
            if kind == "maxwell":
                vec = wall.spatial_profile_edges(c)
            else:
                vec = wall.spatial_profile_nodes(c)
            spatial.setdefault(key, []).append(vec)
            col_of_profile[pk] = (key, len(spatial[key]) - 1)
        cols[i] = col_of_profile[pk]
        delay_of[i] = delay_rows.index(c.delay_index)

    spatial = {k: np.stack(v, axis=1) for k, v in spatial.items()}

    # F^T Gram: block per face, kron of spatial and temporal Grams in the
    # basis ordering (delay varies fastest within a spatial profile)
    wt = trapezoid_weights(n_t + 1, dt)
    tgram = temporal_T @ (wt[None, :] * temporal_T).T
    n = len(basis)
    gram = np.zeros((n, n))
    for i in range(n):
        ki, si = cols[i]
        for j in range(i, n):
            kj, sj = cols[j]
            if ki != kj:
                continue
            wall_w = None
            sp = spatial[ki]
            wall = solver.walls[ki]
            sgram = sp[:, si] @ (wall.weight_vec * sp[:, sj])
            val = sgram * tgram[delay_of[i], delay_of[j]]
            gram[i, j] = val
            gram[j, i] = val
    return BasisQuadrature(spatial, cols, temporal_T, temporal_2T, delay_of, gram)


@dataclass
class ResponseMatrix:
    entries: np.ndarray
    config_hash: str = ""


@dataclass
class GramMatrix:
    entries: np.ndarray
    asymmetry: float = 0.0


@dataclass
class ModelOperator:
    """|W| and the basis-metric data needed to work in orthonormal model
    coordinates: coordinates are c_hat = R c with G = R^T R, in which the
    connecting form becomes the plain symmetric matrix C_hat."""

    w_abs: np.ndarray  # |W| in orthonormal model coordinates
    chol: np.ndarray  # R (upper triangular), maps basis coeffs to coords
    clamped: int  # eigenvalues clamped to zero
    eigenvalues: np.ndarray


def assemble_response(solver, basis, quad=None, progress=None, oracle_gram=False,
                      keep_snapshots=False):
    """Run all 2T solves and assemble the response matrix.

    Returns (ResponseMatrix, snapshots, oracle_gram_matrix). Snapshots are the
    e(., T) fields (flattened with their mass weights applied separately);
    the oracle Gram is their pairwise L2(Omega) inner-product matrix.
    """
    if quad is None:
        quad = build_basis_quadrature(solver, basis)
    n = len(basis)
    dt = solver.dt
    n2 = 2 * solver.steps_per_T
    w2 = trapezoid_weights(n2 + 1, dt)
    R = np.zeros((n, n))
    snaps = []
    kind = basis.kind
    if kind == "maxwell":
        from .fields import edge_mass_vector, flatten_edge

        mass = edge_mass_vector(solver.grid)
    else:
        mass = solver.grid.mass_node().ravel()

    for k, ctl in enumerate(basis.controls):
        sctl = _odd_control(ctl, basis.T)
        res = solver.solve(sctl, 2 * basis.T, record_trace=True,
                           snapshot_time=basis.T)
        # reduce the trace against every basis control: per face,
        # M = SP^T W (trace^T weighted by time) gives (n_spatial, K) blocks
        for key, sp in quad.spatial.items():
            tr = res.traces[key]  # (2N+1, E_F)
            wall = solver.walls[key]
            m = (sp * wall.weight_vec[:, None]).T @ (
                tr.T @ (w2[:, None] * quad.temporal_2T.T)
            )  # (n_spatial, K)
            for l in range(n):
                kl, sl = quad.spatial_cols[l]
                if kl == key:
                    R[k, l] += m[sl, quad.delay_of[l]]
        if kind == "maxwell":
            snaps.append(flatten_edge(res.snapshot))
        else:
            snaps.append(res.snapshot.ravel())
        if progress:
            progress(k, n)
    snaps = np.stack(snaps)
    og = (snaps * mass[None, :]) @ snaps.T if oracle_gram else None
    if not keep_snapshots:
        snaps = None
    return ResponseMatrix(R), snaps, og


def _odd_control(ctl, T):
    """Control whose temporal profile is the odd continuation of ctl's."""
    from .controls import ControlSignal

    base = ctl.window

    class _OddWindow:
        def __call__(self, t):
            t = np.asarray(t, dtype=float)
            return np.where(t < T, base(t), -base(2 * T - t))

    return ControlSignal(
        ctl.cid + "_odd",
        ctl.face_axis,
        ctl.face_side,
        ctl.cell_lo,
        ctl.cell_hi,
        ctl.pol_axis,
        ctl.delay_index,
        ctl.delay,
        _OddWindow(),
        ctl.kind,
        ctl.spatial_kind,
    )


def connecting_form(resp, k=None, l=None):
    """c[f_k, f_l] = (R^{2T} S f_k, S f_l) / 2 (Blagoveshchenskii identity)."""
    c = 0.5 * resp.entries
    if k is None:
        return c
    return float(c[k, l])


def gram_matrix(resp):
    """Symmetrized connecting-form matrix with the recorded asymmetry."""
    c = connecting_form(resp)
    sym = 0.5 * (c + c.T)
    denom = np.linalg.norm(sym)
    asym = np.linalg.norm(c - c.T) / denom if denom > 0 else 0.0
    if asym > 0.2:
        raise DataError(
            f"connecting form asymmetry {asym:.2%} exceeds 20%; "
            "the forward data look mis-assembled"
        )
    return GramMatrix(sym, asym)


def sqrt_operator(gram, basis_gram, clamp_tol=0.0):
    """|W| from the generalized symmetric eigenproblem C v = lambda G v.

    Works in orthonormal model coordinates c_hat = R c (G = R^T R): there the
    form C becomes C_hat = R^-T C R^-1, whose clamped matrix square root is
    |W|.  Returns a ModelOperator carrying R for the coordinate changes.
    """
    G = np.asarray(basis_gram, dtype=float)
    C = np.asarray(gram.entries if isinstance(gram, GramMatrix) else gram, dtype=float)
    evg = np.linalg.eigvalsh(G)
    if evg.min() <= 1e-10 * evg.max():
        raise ConfigError(
            f"control basis nearly dependent: Gram eigenvalue ratio "
            f"{evg.min() / evg.max():.3e}"
        )
    R = scipy.linalg.cholesky(G, lower=False)
    Rinv = scipy.linalg.solve_triangular(R, np.eye(len(G)), lower=False)
    Chat = Rinv.T @ C @ Rinv
    Chat = 0.5 * (Chat + Chat.T)
    lam, V = np.linalg.eigh(Chat)
    clamped = int(np.sum(lam < clamp_tol))
    lam_cl = np.maximum(lam, 0.0)
    w_abs = (V * np.sqrt(lam_cl)) @ V.T
    return ModelOperator(w_abs, R, clamped, lam)


def model_control_vectors(model, indices=None):
    """Orthonormal-coordinate vectors of the basis controls (columns of R)."""
    if indices is None:
        return model.chol
    return model.chol[:, indices]
