"""Nested reachable subspaces, their projections, and operator eikonals.

The model space is the control space F^T expressed in orthonormal coordinates
(Cholesky of the basis Gram).  For a patch sigma the chain of subspaces is

    U_sigma^{s_k} = span{ |W| f : f in the delayed class of (sigma, s_k) },

built cumulatively over the delay grid so nesting is exact by construction.
The eikonal operator is the midpoint-rule integral of the projection family,
I[sigma] = ds * sum_k E^{s_k}, evaluated without materializing each
projection: a chain column admitted at step k carries weight ds * (K - k + 1).

The oracle side runs the same construction on interior snapshot fields; both
sides are plain symmetric matrices afterward, so everything downstream is
shared.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .grid import AXES


@dataclass
class SubspaceChain:
    patch_id: str
    delays: np.ndarray  # s_1 < ... < s_K
    q: np.ndarray  # (dim, r_K) orthonormal columns, nested by construction
    entry_step: np.ndarray  # column j entered the chain at delay index entry_step[j]
    ranks: list  # r_k per delay
    sigma_ref: float  # singular-value scale the rank threshold was applied to

    @property
    def dim(self):
        return self.q.shape[0]

    def rank_at(self, k):
        return int(np.sum(self.entry_step <= k))


def build_chain(class_vectors, delays, eps_rank, patch_id=""):
    """Cumulative rank-revealing chain.

    `class_vectors(k)` returns the matrix of reached vectors for delay index
    k (1-based, cumulative classes).  Columns are admitted when their residual
    singular value is >= eps_rank times the largest singular value of the
    full-delay matrix.
    """
    K = len(delays)
    v_full = class_vectors(K)
    if v_full.size == 0:
        dim = v_full.shape[0]
        return SubspaceChain(
            patch_id, np.asarray(delays), np.zeros((dim, 0)),
            np.zeros(0, dtype=int), [0] * K, 0.0,
        )
    sigma_ref = np.linalg.svd(v_full, compute_uv=False)[0]
    dim = v_full.shape[0]
    q = np.zeros((dim, 0))
    entry = []
    ranks = []
    for k in range(1, K + 1):
        v = class_vectors(k)
        if v.size:
            r = v - q @ (q.T @ v) if q.shape[1] else v
            u, s, _ = np.linalg.svd(r, full_matrices=False)
            keep = s >= eps_rank * sigma_ref
            if np.any(keep):
                new = u[:, keep]
                # one reorthogonalization pass for numerical hygiene
                if q.shape[1]:
                    new = new - q @ (q.T @ new)
                    new, rr = np.linalg.qr(new)
                    good = np.abs(np.diag(rr)) > 1e-12
                    new = new[:, good]
                q = np.hstack([q, new])
                entry.extend([k] * new.shape[1])
        ranks.append(q.shape[1])
    return SubspaceChain(
        patch_id, np.asarray(delays), q, np.asarray(entry, dtype=int), ranks,
        float(sigma_ref),
    )


def model_chain(model, basis, patch, eps_rank):
    """Chain of U_{sigma#}^{s} = clos |W| F_{0,sigma}^{T,s} in model coords."""
    def vectors(k):
        idx = (
            basis.delayed_class_all(k)
            if patch == "gamma"
            else basis.delayed_class(patch, k)
        )
        if not idx:
            return np.zeros((model.w_abs.shape[0], 0))
        return model.w_abs @ model.chol[:, idx]

    pid = patch if isinstance(patch, str) else patch.pid
    return build_chain(vectors, basis.delays, eps_rank, pid)


def projection(chain, s=None, delay_index=None):
    """Orthogonal projection onto the chain subspace at radius s.

    s <= 0 gives the zero operator, s >= s_K the full-chain projection;
    between grid radii the chain is the step function of the delay grid.
    """
    if delay_index is None:
        if s is None:
            raise ConfigError("projection needs s or delay_index")
        delay_index = int(np.searchsorted(chain.delays, s + 1e-15, side="right"))
    k = max(0, min(delay_index, len(chain.delays)))
    cols = chain.entry_step <= k
    q = chain.q[:, cols]
    return q @ q.T


def eikonal(chain, quad_K=None):
    """Operator eikonal by the midpoint step rule on the delay grid.

    With quad_K > len(delays), the quadrature grid is refined while the chain
    remains the same step function (Eq.-27 convergence diagnostic).
    """
    K = len(chain.delays)
    T = float(chain.delays[-1])
    if quad_K is None:
        quad_K = K
    ds = T / quad_K
    radii = np.arange(1, quad_K + 1) * ds
    # chain step at radius s: number of delay nodes <= s
    steps = np.searchsorted(chain.delays, radii + 1e-12, side="right")
    weights = np.zeros(chain.q.shape[1])
    for j, kj in enumerate(chain.entry_step):
        weights[j] = ds * np.sum(steps >= kj)
    return (chain.q * weights) @ chain.q.T


@dataclass
class EikonalOperator:
    matrix: np.ndarray
    patch_id: str
    delays: np.ndarray

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def eikonal_operator(chain, quad_K=None):
    return EikonalOperator(eikonal(chain, quad_K), chain.patch_id, chain.delays)


# -- oracle side -------------------------------------------------------------


@dataclass
class OracleSpace:
    """Span of interior snapshot fields, orthonormalized in L2(Omega).

    Vectors are stored in mass-weighted coordinates: v_tilde = sqrt(m) * v,
    so plain Euclidean algebra downstream matches the metric inner product.
    """

    basis: np.ndarray  # (D, r) orthonormal columns
    sqrt_mass: np.ndarray  # (D,)
    snapshot_coords: np.ndarray  # (r, n) snapshot coefficients in the basis
    kind: str
    grid: object

    @property
    def rank(self):
        return self.basis.shape[1]

    def coords(self, field_dofs):
        """Coefficients of a raw dof vector in the oracle basis."""
        return self.basis.T @ (self.sqrt_mass * field_dofs)

    def field(self, coeffs):
        """Raw dof vector of a coefficient vector."""
        return (self.basis @ coeffs) / self.sqrt_mass

    def mult_operator(self, dof_values):
        """E^T[f]: multiply pointwise by f (per-dof values), reproject."""
        return self.basis.T @ (dof_values[:, None] * self.basis)


def build_oracle_space(grid, snapshots, mass, eps_rank, kind):
    """Orthonormalize snapshot rows (n, D) against the mass inner product."""
    tilde = snapshots * np.sqrt(mass)[None, :]
    u, s, vt = np.linalg.svd(tilde.T, full_matrices=False)
    keep = s >= eps_rank * s[0]
    rank = int(np.sum(keep))
    if rank < 3:
        raise DataError(f"oracle space rank {rank} too poor to test")
    basis = u[:, keep]
    coords = basis.T @ tilde.T
    return OracleSpace(basis, np.sqrt(mass), coords, kind, grid)


def oracle_chain(oracle, basis, patch, eps_rank):
    """Chain of U_sigma^s spanned by snapshots of delayed-class controls."""
    def vectors(k):
        idx = (
            basis.delayed_class_all(k)
            if patch == "gamma"
            else basis.delayed_class(patch, k)
        )
        if not idx:
            return np.zeros((oracle.rank, 0))
        return oracle.snapshot_coords[:, idx]

    pid = patch if isinstance(patch, str) else patch.pid
    return build_chain(vectors, basis.delays, eps_rank, pid)


def oracle_eikonal(oracle, basis, patch, eps_rank, quad_K=None):
    chain = oracle_chain(oracle, basis, patch, eps_rank)
    return EikonalOperator(eikonal(chain, quad_K), chain.patch_id, chain.delays)


def node_values_to_dofs(grid, node_values, kind):
    """Interpolate a node scalar onto the dof lattice (edge midpoints for the
    Maxwell oracle space, nodes for the scalar one)."""
    if kind == "scalar":
        return node_values.ravel()
    parts = []
    for a in AXES:
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        parts.append((0.5 * (node_values[tuple(lo)] + node_values[tuple(hi)])).ravel())
    return np.concatenate(parts)


def mult_project(oracle, node_values):
    """E^T[f] on the oracle space for a node scalar f."""
    dofs = node_values_to_dofs(oracle.grid, node_values, oracle.kind)
    return oracle.mult_operator(dofs)
