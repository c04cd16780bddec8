"""Operator-family diagnostics and spectrum extraction.

The family of eikonal operators is nearly commutative; its joint approximate
eigenbasis realizes the multiplicative functionals of the (approximately)
commutative algebra they generate.  Each joint basis vector yields the tuple
of diagonal values, one per patch, which is the recovered point of the
spectrum cloud.  Jacobi-type sweeps minimize the summed off-diagonal energy
over all members simultaneously; the off-diagonal energy is non-increasing
sweep by sweep.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError


@njit(cache=True)
def _jd_core(A, V, tol, max_sweeps, rot_eps):
    m, n, _ = A.shape
    total = 0.0
    for im in range(m):
        for i in range(n):
            for j in range(n):
                total += A[im, i, j] * A[im, i, j]
    if total == 0.0:
        return 0, np.zeros(1)
    energies = np.empty(max_sweeps)
    sweeps = 0
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ton = 0.0
                toff = 0.0
                for im in range(m):
                    am = A[im, p, p] - A[im, q, q]
                    ap = A[im, p, q] + A[im, q, p]
                    ton += am * am - ap * ap
                    toff += 2.0 * am * ap
                theta = 0.5 * np.arctan2(
                    toff, ton + np.sqrt(ton * ton + toff * toff)
                )
                c = np.cos(theta)
                s = np.sin(theta)
                if abs(s) > rot_eps:
                    rotated = True
                    for im in range(m):
                        for r in range(n):
                            tp = A[im, r, p]
                            tq = A[im, r, q]
                            A[im, r, p] = c * tp + s * tq
                            A[im, r, q] = -s * tp + c * tq
                        for r in range(n):
                            tp = A[im, p, r]
                            tq = A[im, q, r]
                            A[im, p, r] = c * tp + s * tq
                            A[im, q, r] = -s * tp + c * tq
                    for r in range(n):
                        tp = V[r, p]
                        tq = V[r, q]
                        V[r, p] = c * tp + s * tq
                        V[r, q] = -s * tp + c * tq
        off = 0.0
        for im in range(m):
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += A[im, i, j] * A[im, i, j]
        energies[sweep] = off / total
        sweeps = sweep + 1
        if off / total < tol or not rotated:
            break
    return sweeps, energies[:sweeps]


@dataclass
class JointDiagonalization:
    basis: np.ndarray  # (n, n) orthogonal
    diagonals: np.ndarray  # (m, n) diagonal values per member
    residual: float  # final relative off-diagonal energy
    energies: np.ndarray  # per-sweep trajectory
    converged: bool
    sweeps: int


def joint_diagonalize(family, tol=1e-6, max_sweeps=200, rot_eps=1e-7):
    """Jacobi-type simultaneous diagonalization of symmetric matrices."""
    if tol <= 0:
        raise ConfigError("joint diagonalization tolerance must be positive")
    mats = [np.asarray(a, dtype=float) for a in family]
    n = mats[0].shape[0]
    for a in mats:
        if a.shape != (n, n):
            raise ConfigError("family members must share one dimension")
        if np.abs(a - a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
            raise ConfigError("family members must be symmetric")
    A = np.ascontiguousarray(np.stack(mats))
    V = np.eye(n)
    sweeps, energies = _jd_core(A, V, float(tol), int(max_sweeps), float(rot_eps))
    if sweeps == 0:
        # zero family: identity basis, zero residual
        return JointDiagonalization(V, np.zeros((len(mats), n)), 0.0,
                                    np.zeros(0), True, 0)
    diags = np.stack([np.diag(A[i]) for i in range(len(mats))])
    residual = float(energies[-1])
    return JointDiagonalization(
        V, diags, residual, energies, residual < tol, sweeps
    )


@dataclass
class SpectrumCloud:
    points: np.ndarray  # (n_points, m) eikonal value tuples
    weights: np.ndarray
    residual: float
    patch_ids: list

    def to_rows(self):
        out = np.zeros((len(self.points), 2 + self.points.shape[1]))
        out[:, 0] = self.weights
        out[:, 1] = self.residual
        out[:, 2:] = self.points
        return out


def spectrum_cloud(family, patch_ids, T, tol=1e-6, max_sweeps=200):
    """Joint diagonalization followed by clamping of the tuples to [0, T]."""
    jd = joint_diagonalize(family, tol, max_sweeps)
    pts = np.clip(jd.diagonals.T, 0.0, T)
    return (
        SpectrumCloud(pts, np.ones(pts.shape[0]), jd.residual, list(patch_ids)),
        jd,
    )


def commutator_profile(family, labels=None, with_singular_values=False):
    """Pairwise normalized commutator norms (and optional sv lists)."""
    m = len(family)
    norms = np.zeros((m, m))
    svs = {}
    mags = [np.linalg.norm(a, 2) for a in family]
    for i in range(m):
        for j in range(i + 1, m):
            comm = family[i] @ family[j] - family[j] @ family[i]
            denom = mags[i] * mags[j]
            sv = np.linalg.svd(comm, compute_uv=False)
            norms[i, j] = norms[j, i] = sv[0] / denom if denom > 0 else 0.0
            if with_singular_values:
                svs[(i, j)] = sv / denom if denom > 0 else sv
    return (norms, svs) if with_singular_values else (norms, None)


def algebra_closure(family, degree_max, dedupe_tol=1e-10, max_members=10**4):
    """Symmetrized products of family members up to the given length."""
    if degree_max < 1:
        raise ConfigError("degree_max must be >= 1")
    n = family[0].shape[0]
    members = [np.eye(n)] + [np.asarray(a, dtype=float) for a in family]
    current = list(members[1:])
    out = list(members)
    for _ in range(2, degree_max + 1):
        nxt = []
        for a in current:
            for b in family:
                p = a @ b
                nxt.append(p)
        sym = [0.5 * (p + p.T) for p in nxt]
        out.extend(sym)
        current = nxt
        if len(out) > max_members:
            raise ConfigError(
                f"algebra closure exceeded {max_members} members; "
                "reduce degree_max"
            )
    # dedupe by relative Frobenius distance
    kept = []
    for a in out:
        na = np.linalg.norm(a)
        dup = False
        for b in kept:
            if np.linalg.norm(a - b) <= dedupe_tol * max(na, np.linalg.norm(b), 1e-300):
                dup = True
                break
        if not dup:
            kept.append(a)
    return kept


# -- compact-defect diagnostics ----------------------------------------------


@dataclass
class DefectProfile:
    singular_values: np.ndarray
    k0: int  # first index (1-based) past which sv <= 0.1 * sv[0]
    identity30_residuals: np.ndarray  # per sample field
    identity30_bound: float
    curl_ratios: np.ndarray  # |curl K u| / |u| over sample fields (Maxwell)


def defect_k0(svals, frac=0.1):
    if svals.size == 0 or svals[0] == 0:
        return 1
    tails = svals > frac * svals[0]
    # smallest k such that all j >= k satisfy the bound (1-based)
    nz = np.flatnonzero(tails)
    return int(nz[-1]) + 2 if nz.size else 1


def compact_defect(oracle, chain, tau_tilde_nodes, masks_nodes, rng,
                   n_samples=20, grid=None):
    """Defect D = I[sigma] - E^T[tau~] on the oracle space, the staircase
    identity residuals, and the curl bound of the K operator.

    masks_nodes[k] is the node indicator of Omega_sigma^{s_k}; the staircase
    sum ds * sum_k X^{s_k} matches tau~ up to ds, which bounds the identity
    residual on any oracle field.  The projection-side sum is evaluated
    explicitly from the chain, so it also cross-checks the eikonal assembly.
    """
    from .model_space import eikonal, mult_project, node_values_to_dofs, projection

    r = oracle.rank
    i_oracle = eikonal(chain)
    e_tau = mult_project(oracle, tau_tilde_nodes)
    d = i_oracle - e_tau
    sv = np.linalg.svd(d, compute_uv=False)
    k0 = defect_k0(sv)

    delays = chain.delays
    T = float(delays[-1])
    ds = T / len(delays)
    tau_dofs = node_values_to_dofs(oracle.grid, tau_tilde_nodes, oracle.kind)
    stair_dofs = np.zeros_like(tau_dofs)
    for mk in masks_nodes:
        stair_dofs += ds * node_values_to_dofs(oracle.grid, mk.astype(float),
                                               oracle.kind)
    projs = [projection(chain, delay_index=k) for k in range(1, len(delays) + 1)]
    residuals = []
    curl_ratios = []
    for _ in range(n_samples):
        c = rng.standard_normal(r)
        c /= np.linalg.norm(c)
        y_t = oracle.basis @ c  # weighted coordinates, unit norm
        lhs = tau_dofs * y_t - oracle.basis @ (i_oracle @ c)
        ec = sum(ds * (p @ c) for p in projs)
        rhs = stair_dofs * y_t - oracle.basis @ ec
        residuals.append(np.linalg.norm(lhs - rhs))
        if oracle.kind == "maxwell" and grid is not None:
            from . import calculus as vc
            from .fields import unflatten_edge

            ku = stair_dofs * y_t - oracle.basis @ ec
            field = unflatten_edge(grid, ku / oracle.sqrt_mass)
            cf = vc.curl(grid, field)
            curl_ratios.append(np.sqrt(max(vc.inner_face(grid, cf, cf), 0.0)))
    return DefectProfile(
        sv, k0, np.asarray(residuals), ds, np.asarray(curl_ratios)
    )
