"""Time-domain solvers: Maxwell leapfrog on the staggered grid and the scalar
wave baseline, with boundary control injection and response-trace recording.

Maxwell scheme: e (covariant edge field) and h (contravariant face field) are
staggered half a step apart in time,

    h^{n+1/2} = h^{n-1/2} - dt * curl e^n
    e^{n+1}   = e^n + dt * dual_curl h^{n+1/2}     (interior edges)
    e^{n+1}|tangential boundary = control(t_{n+1}) on sigma, 0 elsewhere.

dual_curl is the exact M1-adjoint of curl, so the scheme conserves the
discrete energy |e|^2/2 + (h^-, h^+)/2 exactly once the control shuts off,
and snapshots launched from zero data stay exactly solenoidal.

The response trace is the tangential record -nu x h on the boundary, obtained
by one-sided interpolation of the first interior face layers, sampled on the
integer time lattice (average of the two adjacent half-step h values).
"""

from dataclasses import dataclass

import numpy as np

from . import calculus as vc
from .errors import ConfigError, InstabilityError
from .fields import VectorField, zeros_edge, zeros_face
from .grid import AXES

NAN_CHECK_EVERY = 25

def _axpy(dst, alpha, src):
    """dst += alpha * src for vector fields, in place."""
    dst.x += alpha * src.x
    dst.y += alpha * src.y
    dst.z += alpha * src.z



def _perm_sign(i, j, k):
    if (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        return 1.0
    if (i, j, k) in ((0, 2, 1), (2, 1, 0), (1, 0, 2)):
        return -1.0
    return 0.0


def _wall_slice(axis, side, ndim=3):
    sl = [slice(None)] * ndim
    sl[axis] = -1 if side else 0
    return sl


def _edge_wall_metric(grid, face_axis, side, comp_axis):
    """Node metric quantities averaged onto comp-axis edge midpoints on the wall."""
    idx = _wall_slice(face_axis, side)
    out = {}
    for name, arr in (
        ("sqrtdet", grid.sqrtdet_node),
        ("g_aa", grid.metric[..., face_axis, face_axis]),
        ("g_bb", grid.metric[..., comp_axis, comp_axis]),
    ):
        wall = arr[tuple(idx)]
        # average along the staggered (comp) axis; wall array axes follow the
        # two non-face axes in increasing order
        taxes = [a for a in AXES if a != face_axis]
        stag = taxes.index(comp_axis)
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[stag] = slice(None, -1)
        hi[stag] = slice(1, None)
        out[name] = 0.5 * (wall[tuple(lo)] + wall[tuple(hi)])
    return out


class FaceWallLayout:
    """Per-face boundary dof layout shared by controls, traces and quadrature.

    For the Maxwell system the dofs are the tangential edge midpoints of the
    wall (both tangential components, concatenated); for the scalar system
    they are the wall nodes.
    """

    def __init__(self, grid, face_axis, side, kind):
        self.grid = grid
        self.axis = face_axis
        self.side = side
        self.kind = kind
        self.taxes = tuple(a for a in AXES if a != face_axis)
        if kind == "maxwell":
            self._build_maxwell()
        else:
            self._build_scalar()

    # -- layouts ------------------------------------------------------------

    def _build_maxwell(self):
        grid = self.grid
        a = self.axis
        self.comp_shapes = []
        self.comp_offsets = []
        self.weights = []
        off = 0
        for b in self.taxes:
            c = next(t for t in self.taxes if t != b)
            shape = tuple(np.delete(grid.edge_shape(b), a))
            m = _edge_wall_metric(grid, a, self.side, b)
            gbb = m["g_bb"]
            gcc_nodes = grid.metric[..., c, c][tuple(_wall_slice(a, self.side))]
            stag = self.taxes.index(b)
            lo = [slice(None)] * 2
            hi = [slice(None)] * 2
            lo[stag] = slice(None, -1)
            hi[stag] = slice(1, None)
            gcc = 0.5 * (gcc_nodes[tuple(lo)] + gcc_nodes[tuple(hi)])
            # F-inner-product weight of the covariant b component on the wall:
            # g^{bb} sqrt(g_bb g_cc) dA = sqrt(g_cc / g_bb) dA
            dA = grid.spacing[b] * grid.spacing[c]
            w = np.sqrt(gcc / gbb) * dA
            # trapezoid halving along the aligned (c) axis
            aligned = self.taxes.index(c)
            sl = [slice(None)] * 2
            sl[aligned] = 0
            w[tuple(sl)] *= 0.5
            sl[aligned] = -1
            w[tuple(sl)] *= 0.5
            self.comp_shapes.append(shape)
            self.comp_offsets.append(off)
            self.weights.append(w.ravel())
            off += int(np.prod(shape))
        self.size = off
        self.weight_vec = np.concatenate(self.weights)
        self._build_trace_factors()

    def _build_trace_factors(self):
        """Sign and metric factors mapping first-layer h components to the
        covariant components of -nu x h at wall edge midpoints."""
        grid = self.grid
        a = self.axis
        sigma = 1.0 if self.side == 0 else -1.0
        self.trace_ops = []
        for b in self.taxes:
            c = next(t for t in self.taxes if t != b)
            m = _edge_wall_metric(grid, a, self.side, b)
            fac = -_perm_sign(b, a, c) * sigma * m["sqrtdet"] / np.sqrt(m["g_aa"])
            # first two interior layers of the c-face component along axis a
            if self.side == 0:
                i0, i1 = 0, 1
            else:
                i0, i1 = grid.face_shape(c)[a] - 1, grid.face_shape(c)[a] - 2
            self.trace_ops.append((c, i0, i1, fac))

    def _build_scalar(self):
        grid = self.grid
        a = self.axis
        b, c = self.taxes
        shape = tuple(np.delete(grid.node_shape, a))
        self.comp_shapes = [shape]
        self.comp_offsets = [0]
        self.size = int(np.prod(shape))
        wall = tuple(_wall_slice(a, self.side))
        gbb = grid.metric[..., b, b][wall]
        gcc = grid.metric[..., c, c][wall]
        w = np.sqrt(gbb * gcc) * grid.spacing[b] * grid.spacing[c]
        for ax2 in (0, 1):
            sl = [slice(None)] * 2
            sl[ax2] = 0
            w[tuple(sl)] *= 0.5
            sl[ax2] = -1
            w[tuple(sl)] *= 0.5
        self.weight_vec = w.ravel()
        # boundary node area (same quantity; kept under a second name for the
        # flux normalization)
        self.node_area = w

    # -- extraction and injection -------------------------------------------

    def extract_trace(self, h, order=2):
        """Covariant -nu x h at the wall dofs from the interior face layers."""
        vals = []
        for (c, i0, i1, fac) in self.trace_ops:
            comp = h.components[c]
            lay0 = np.take(comp, i0, axis=self.axis)
            if order == 2:
                lay1 = np.take(comp, i1, axis=self.axis)
                w = 1.5 * lay0 - 0.5 * lay1
            else:
                w = lay0
            vals.append((fac * w).ravel())
        return np.concatenate(vals)

    def spatial_profile_edges(self, control):
        """Wall-dof vector of the control's covariant spatial profile."""
        grid = self.grid
        vec = np.zeros(self.size)
        for idx_b, b in enumerate(self.taxes):
            if self.kind == "maxwell" and b != control.pol_axis:
                continue
            shape = self.comp_shapes[idx_b]
            c = next(t for t in self.taxes if t != b)
            # physical coordinates of wall b-edge midpoints
            ub = (np.arange(grid.dims[b]) + 0.5) * grid.spacing[b]
            vc_ = np.arange(grid.dims[c] + 1) * grid.spacing[c]
            prof = self._cell_bump(control, b, c, ub, vc_)
            stag = self.taxes.index(b)
            if stag == 1:
                prof = prof.T
            block = prof.ravel()
            off = self.comp_offsets[idx_b]
            vec[off : off + block.size] = block
        return vec

    def spatial_profile_nodes(self, control):
        grid = self.grid
        b, c = self.taxes
        ub = np.arange(grid.dims[b] + 1) * grid.spacing[b]
        vc_ = np.arange(grid.dims[c] + 1) * grid.spacing[c]
        return self._cell_bump(control, b, c, ub, vc_).ravel()

    def _cell_bump(self, control, b, c, ub, vc_):
        from .controls import bump

        grid = self.grid
        if getattr(control, "spatial_kind", "bump") == "constant":
            return np.ones((ub.size, vc_.size))
        lob = control.cell_lo[self.taxes.index(b)] * grid.lengths[b]
        hib = control.cell_hi[self.taxes.index(b)] * grid.lengths[b]
        loc = control.cell_lo[self.taxes.index(c)] * grid.lengths[c]
        hic = control.cell_hi[self.taxes.index(c)] * grid.lengths[c]
        pb = bump((ub - lob) / (hib - lob))
        pc = bump((vc_ - loc) / (hic - loc))
        return np.outer(pb, pc)


class MaxwellSolver:
    def __init__(self, grid, T, cfl_factor=0.9, steps_per_T=None, trace_order=1,
                 trace_shift=False):
        self.grid = grid
        self.T = float(T)
        self.cfl_factor = float(cfl_factor)
        self.trace_shift = trace_shift
        dt_max = grid.cfl_dt(cfl_factor)
        if steps_per_T is None:
            n = int(np.ceil(self.T / dt_max))
            if n % 2:
                n += 1
            steps_per_T = n
        if steps_per_T % 2:
            raise ConfigError("steps_per_T must be even (odd continuation lattice)")
        self.steps_per_T = int(steps_per_T)
        self.dt = self.T / self.steps_per_T
        if self.dt > dt_max * (1 + 1e-12):
            raise ConfigError(
                f"dt={self.dt:.3e} violates the CFL bound {dt_max:.3e} "
                f"(factor {cfl_factor})"
            )
        self.trace_order = trace_order
        self.walls = {
            (a, s): FaceWallLayout(grid, a, s, "maxwell")
            for a in AXES
            for s in (0, 1)
        }

    def _apply_control(self, e, control, profile_cache, value):
        wall = self.walls[(control.face_axis, control.face_side)]
        b = control.pol_axis
        idx_b = wall.taxes.index(b)
        vec = profile_cache
        off = wall.comp_offsets[idx_b]
        shape = wall.comp_shapes[idx_b]
        block = vec[off : off + int(np.prod(shape))].reshape(shape)
        comp = e.components[b]
        sl = _wall_slice(control.face_axis, control.face_side)
        comp[tuple(sl)] = value * block

    def step(self, e, h, control=None, profile=None, t_next=None):
        """One leapfrog step; mutates e and h in place."""
        ce = vc.curl(self.grid, e)
        _axpy(h, -self.dt, ce)
        de = vc.dual_curl(self.grid, h)
        _axpy(e, self.dt, de)
        if control is not None:
            self._apply_control(e, control, profile, control.temporal(t_next))

    def solve(
        self,
        control,
        T_sim,
        record_trace=False,
        snapshot_time=None,
        record_energy=False,
    ):
        grid = self.grid
        dt = self.dt
        n_steps = int(round(T_sim / dt))
        if abs(n_steps * dt - T_sim) > 1e-9 * self.T:
            raise ConfigError("T_sim must be a multiple of the time step")
        snap_step = None
        if snapshot_time is not None:
            snap_step = int(round(snapshot_time / dt))
        e = zeros_edge(grid)
        h = zeros_face(grid)
        wall = self.walls[(control.face_axis, control.face_side)]
        profile = wall.spatial_profile_edges(control)
        traces = None
        if record_trace:
            traces = {
                key: np.zeros((n_steps + 1, w.size)) for key, w in self.walls.items()
            }
        energies = [] if record_energy else None
        snapshot = None
        for n in range(n_steps):
            if record_energy:
                h_prev = h.copy()
            ce = vc.curl(grid, e)
            _axpy(h, -dt, ce)
            if record_trace:
                for key, w in self.walls.items():
                    tr = w.extract_trace(h, self.trace_order)
                    if self.trace_shift:
                        # assign the half-step h record to the left lattice
                        # point; the +dt/2 bias partly cancels the half-cell
                        # interpolation lag of outgoing waves
                        traces[key][n] += tr
                    else:
                        traces[key][n] += 0.5 * tr
                        traces[key][n + 1] += 0.5 * tr
            if record_energy:
                energies.append(self.energy(e, h_prev, h))
            de = vc.dual_curl(grid, h)
            _axpy(e, dt, de)
            self._apply_control(e, control, profile, control.temporal((n + 1) * dt))
            if (n + 1) % NAN_CHECK_EVERY == 0 and not np.isfinite(
                e.components[0]
            ).all():
                raise InstabilityError(n + 1)
            if snap_step is not None and n + 1 == snap_step:
                snapshot = e.copy()
        # one extra half-step of h to center the final trace sample
        if record_trace:
            ce = vc.curl(grid, e)
            h_extra = h.copy()
            _axpy(h_extra, -dt, ce)
            for key, w in self.walls.items():
                tr = w.extract_trace(h_extra, self.trace_order)
                traces[key][n_steps] += tr if self.trace_shift else 0.5 * tr
        if snapshot is None:
            snapshot = e.copy()
        if not np.isfinite(snapshot.components[0]).all():
            raise InstabilityError(n_steps)
        return SolveResult(snapshot, e, h, traces, energies)

    def energy(self, e, h_prev, h_next):
        """Leapfrog-conserved energy: |e|^2/2 + (h^-, h^+)/2."""
        return 0.5 * vc.inner_edge(self.grid, e, e) + 0.5 * vc.inner_face(
            self.grid, h_prev, h_next
        )


@dataclass
class SolveResult:
    snapshot: VectorField  # e(., snapshot_time), defaults to final time
    e_final: VectorField
    h_final: VectorField
    traces: dict | None
    energies: list | None


class ScalarWaveSolver:
    """Leapfrog for u_tt = Laplace_g u with Dirichlet control on sigma.

    The recorded response is the time integral of the inward Neumann flux,
    assembled variationally: area * d_nu u = -[K u]_b - M0_b * u_tt(b) with
    K = G^T M1 G, which mirrors the Maxwell trace -nu x h (h is a time
    integral of curl e).
    """

    def __init__(self, grid, T, cfl_factor=0.9, steps_per_T=None):
        self.grid = grid
        self.T = float(T)
        dt_max = grid.cfl_dt(cfl_factor)
        if steps_per_T is None:
            n = int(np.ceil(self.T / dt_max))
            if n % 2:
                n += 1
            steps_per_T = n
        if steps_per_T % 2:
            raise ConfigError("steps_per_T must be even")
        self.steps_per_T = int(steps_per_T)
        self.dt = self.T / self.steps_per_T
        if self.dt > dt_max * (1 + 1e-12):
            raise ConfigError("scalar CFL violated")
        self.mass_node = grid.mass_node()
        self.mass_edge = [grid.mass_edge(a) for a in AXES]
        self.walls = {
            (a, s): FaceWallLayout(grid, a, s, "scalar") for a in AXES for s in (0, 1)
        }
        self._interior = np.ones(grid.node_shape, dtype=bool)
        for a in AXES:
            sl = [slice(None)] * 3
            sl[a] = 0
            self._interior[tuple(sl)] = False
            sl[a] = -1
            self._interior[tuple(sl)] = False

    def stiffness_apply(self, u):
        """[G^T M1 G u] on nodes (PSD; the variational -Laplacian times M0)."""
        grid = self.grid
        out = np.zeros(grid.node_shape)
        for a in AXES:
            w = np.diff(u, axis=a) / grid.spacing[a] * self.mass_edge[a]
            sl_lo = [slice(None)] * 3
            sl_hi = [slice(None)] * 3
            sl_lo[a] = slice(None, -1)
            sl_hi[a] = slice(1, None)
            out[tuple(sl_lo)] -= w / grid.spacing[a]
            out[tuple(sl_hi)] += w / grid.spacing[a]
        return out

    def solve(self, control, T_sim, record_trace=False, snapshot_time=None,
              record_energy=False):
        grid = self.grid
        dt = self.dt
        n_steps = int(round(T_sim / dt))
        snap_step = int(round(snapshot_time / dt)) if snapshot_time else None
        wall = self.walls[(control.face_axis, control.face_side)]
        profile = wall.spatial_profile_nodes(control).reshape(wall.comp_shapes[0])
        wall_sl = tuple(_wall_slice(control.face_axis, control.face_side))
        u_prev = np.zeros(grid.node_shape)
        u_cur = np.zeros(grid.node_shape)
        traces = None
        flux_prev = None
        if record_trace:
            traces = {
                key: np.zeros((n_steps + 1, w.size)) for key, w in self.walls.items()
            }
        energies = [] if record_energy else None
        snapshot = None
        fvals = control.temporal(np.arange(n_steps + 1) * dt)
        ctrl_key = (control.face_axis, control.face_side)
        for n in range(n_steps):
            ku = self.stiffness_apply(u_cur)
            if record_trace:
                utt = self._control_utt(fvals, n, dt) * profile
                flux = self._boundary_flux(ku, ctrl_key, utt)
                if flux_prev is not None:
                    for key in traces:
                        traces[key][n] = traces[key][n - 1] + 0.5 * dt * (
                            flux[key] + flux_prev[key]
                        )
                flux_prev = flux
            u_next = np.where(
                self._interior,
                2.0 * u_cur - u_prev - dt * dt * ku / self.mass_node,
                0.0,
            )
            u_next[wall_sl] = fvals[n + 1] * profile
            if record_energy and n > 0:
                energies.append(self.energy(u_cur, u_next))
            u_prev, u_cur = u_cur, u_next
            if (n + 1) % NAN_CHECK_EVERY == 0 and not np.isfinite(u_cur).all():
                raise InstabilityError(n + 1)
            if snap_step is not None and n + 1 == snap_step:
                snapshot = u_cur.copy()
        if record_trace:
            ku = self.stiffness_apply(u_cur)
            utt = self._control_utt(fvals, n_steps, dt) * profile
            flux = self._boundary_flux(ku, ctrl_key, utt)
            if flux_prev is not None:
                for key in traces:
                    traces[key][n_steps] = traces[key][n_steps - 1] + 0.5 * dt * (
                        flux[key] + flux_prev[key]
                    )
        if snapshot is None:
            snapshot = u_cur.copy()
        if not np.isfinite(snapshot).all():
            raise InstabilityError(n_steps)
        return ScalarSolveResult(snapshot, u_cur, traces, energies)

    @staticmethod
    def _control_utt(fvals, n, dt):
        """Boundary acceleration from the prescribed data (leapfrog stencil)."""
        f_m = fvals[n - 1] if n >= 1 else 0.0
        f_p = fvals[n + 1] if n + 1 < len(fvals) else 0.0
        return (f_p - 2.0 * fvals[n] + f_m) / (dt * dt)

    def _boundary_flux(self, ku, ctrl_key, utt_ctrl):
        """Inward-flux density -d_nu u at wall nodes, per unit area.

        area * d_nu u = -[K u]_b - M0_b u_tt(b); the acceleration term is
        nonzero only on the controlled wall, where u is prescribed.
        """
        out = {}
        for key, w in self.walls.items():
            axis, side = key
            sl = tuple(_wall_slice(axis, side))
            kub = ku[sl].copy()
            if key == ctrl_key:
                kub += self.mass_node[sl] * utt_ctrl
            out[key] = (kub / w.node_area).ravel()
        return out

    def energy(self, u_a, u_b):
        """Leapfrog energy |du/dt|^2/2 + (G u^n, G u^{n+1})/2."""
        grid = self.grid
        dv = (u_b - u_a) / self.dt
        kin = 0.5 * float(np.sum(self.mass_node * dv * dv))
        pot = 0.0
        for a in AXES:
            ga = np.diff(u_a, axis=a) / grid.spacing[a]
            gb = np.diff(u_b, axis=a) / grid.spacing[a]
            pot += 0.5 * float(np.sum(self.mass_edge[a] * ga * gb))
        return kin + pot


@dataclass
class ScalarSolveResult:
    snapshot: np.ndarray
    u_final: np.ndarray
    traces: dict | None
    energies: list | None
