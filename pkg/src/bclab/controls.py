"""Boundary control basis: spatial tangent bumps times delayed temporal bumps.

Every control is supported on one bump cell inside one quarter of one box
face, with a C2 temporal window contained in (T - s_k, T] for its delay s_k,
vanishing at both window ends.  Delayed classes nest by construction: the
discrete class F_{0,sigma}^{T,s_k} is the span of all basis controls whose
bump cell lies inside sigma and whose delay index is <= k.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import AXES, BoundaryPatch

FACE_NAMES = "xyz"


def bump(u):
    """C2 bump on [0,1], peak 1 at 1/2, third-order zeros at the ends."""
    u = np.asarray(u, dtype=float)
    out = 64.0 * (u * (1.0 - u)) ** 3
    return np.where((u > 0.0) & (u < 1.0), out, 0.0)


@dataclass(frozen=True)
class TemporalWindow:
    t0: float
    t1: float

    def __call__(self, t):
        return bump((np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0))


@dataclass
class ControlSignal:
    """One basis control: bump cell on a face, polarization, delayed window.

    cell_lo/cell_hi is the nominal cell used for delayed-class membership;
    bump_lo/bump_hi is the (slightly larger) evaluation window of the spatial
    bump, which may overlap neighboring cells and reach the face rim so that
    the finite family covers the whole face.
    """

    cid: str
    face_axis: int
    face_side: int
    cell_lo: tuple  # fractions of the face along the transverse axes
    cell_hi: tuple
    pol_axis: int  # tangential axis carrying the bump (ignored for scalar)
    delay_index: int
    delay: float  # s_k: support lies in (T - s_k, T]
    window: TemporalWindow
    kind: str = "maxwell"  # or "scalar"
    spatial_kind: str = "bump"  # "constant" gives a uniform profile (tests)
    bump_lo: tuple = None
    bump_hi: tuple = None

    def __post_init__(self):
        if self.bump_lo is None:
            self.bump_lo = self.cell_lo
        if self.bump_hi is None:
            self.bump_hi = self.cell_hi

    def patch(self):
        return BoundaryPatch(
            self.cid, self.face_axis, self.face_side, self.cell_lo, self.cell_hi
        )

    def temporal(self, t):
        return self.window(t)


def delay_grid(T, K):
    return np.arange(1, K + 1) * (T / K)


def _window_for_delay(T, s, ds, mode):
    if mode == "slot":
        w = min(ds, s)
    elif mode == "double":
        w = min(2.0 * ds, s)
    elif mode == "full":
        w = s
    else:
        raise ConfigError(f"unknown delay window mode {mode!r}")
    return TemporalWindow(T - s, T - s + w)


def _bump_cells(bumps_per_quarter):
    """Bump cell rectangles (fractions of the face) and a slot index.

    Quarters tile the face 2x2; each quarter is split into bumps_per_quarter
    strips along alternating transverse axes so neighboring quarters resolve
    different tangential directions.
    """
    cells = []
    for qa in (0, 1):
        for qb in (0, 1):
            split_first = (qa + qb) % 2 == 0
            nb = bumps_per_quarter
            for c in range(nb):
                if split_first:
                    lo = (0.5 * qa + 0.5 * c / nb, 0.5 * qb)
                    hi = (0.5 * qa + 0.5 * (c + 1) / nb, 0.5 * qb + 0.5)
                else:
                    lo = (0.5 * qa, 0.5 * qb + 0.5 * c / nb)
                    hi = (0.5 * qa + 0.5, 0.5 * qb + 0.5 * (c + 1) / nb)
                cells.append(((qa, qb), c, lo, hi))
    return cells


@dataclass
class ControlBasis:
    controls: list
    T: float
    K: int
    delays: np.ndarray
    kind: str

    def __len__(self):
        return len(self.controls)

    def delayed_class(self, patch, delay_index):
        """Indices of basis controls spanning F_{0,sigma}^{T, s_k}."""
        if patch.empty or delay_index < 1:
            return []
        out = []
        for i, c in enumerate(self.controls):
            if c.face_axis != patch.axis or c.face_side != patch.side:
                continue
            if c.delay_index > delay_index:
                continue
            inside = all(
                pl - 1e-12 <= cl and ch <= ph + 1e-12
                for pl, ph, cl, ch in zip(patch.lo, patch.hi, c.cell_lo, c.cell_hi)
            )
            if inside:
                out.append(i)
        return out

    def delayed_class_all(self, delay_index):
        """Class for sigma = Gamma (all controls up to the delay)."""
        return [i for i, c in enumerate(self.controls) if c.delay_index <= delay_index]


def make_control_basis(T, K, bumps_per_quarter=2, window_mode="double", kind="maxwell"):
    if K < 1 or T <= 0:
        raise ConfigError("control basis needs K >= 1 and T > 0")
    delays = delay_grid(T, K)
    ds = T / K
    controls = []
    for axis in AXES:
        taxes = tuple(a for a in AXES if a != axis)
        for side in (0, 1):
            for (qa, qb), slot, lo, hi in _bump_cells(bumps_per_quarter):
                pol = taxes[(qa + qb + slot) % 2]
                for k in range(1, K + 1):
                    cid = (
                        f"{FACE_NAMES[axis]}{side}q{qa}{qb}b{slot}d{k}"
                    )
                    controls.append(
                        ControlSignal(
                            cid=cid,
                            face_axis=axis,
                            face_side=side,
                            cell_lo=lo,
                            cell_hi=hi,
                            pol_axis=pol,
                            delay_index=k,
                            delay=float(delays[k - 1]),
                            window=_window_for_delay(T, float(delays[k - 1]), ds, window_mode),
                            kind=kind,
                        )
                    )
    return ControlBasis(controls, T, K, delays, kind)


# -- time lattice: odd continuation and its adjoint --------------------------


def time_lattice(T, steps_per_T):
    if steps_per_T % 2 != 0:
        raise ConfigError(
            f"steps per T must be even for an exact odd continuation, got {steps_per_T}"
        )
    dt = T / steps_per_T
    return dt


def trapezoid_weights(n_points, dt):
    w = np.full(n_points, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def odd_continuation(samples):
    """Map samples on t_0..t_N (lattice of [0,T]) to S f on t_0..t_2N.

    (S f)(t) = f(t) on [0,T) and -f(2T - t) on [T, 2T]; at the shared lattice
    point t_N = T the reflected branch -f(T) is used.
    """
    f = np.asarray(samples, dtype=float)
    n = f.shape[0] - 1
    if n < 1:
        raise ConfigError("odd continuation needs at least two samples")
    out = np.concatenate([f[:-1], -f[::-1]])
    return out


def s_star_apply(record, dt):
    """Adjoint of the odd continuation on the time lattice.

    record has 2N+1 samples with trapezoid weights; the result lives on the
    [0,T] lattice and satisfies (S* r, f)_{T,trap} = (r, S f)_{2T,trap}.
    """
    r = np.asarray(record, dtype=float)
    m = r.shape[0] - 1
    if m % 2 != 0:
        raise ConfigError("record length must be 2N+1")
    n = m // 2
    w2 = trapezoid_weights(m + 1, dt)
    w1 = trapezoid_weights(n + 1, dt)
    out = np.zeros(n + 1)
    for j in range(n + 1):
        acc = w2[j] * r[j]
        if j < n:
            acc -= w2[2 * n - j] * r[2 * n - j]
        else:
            acc = -w2[n] * r[n]
        out[j] = acc / w1[j]
    return out
