"""Projective-space geometry: points, duals, the group action, the bracket
``delta`` and the norm cocycle.

Points of P^{d-1} are stored as unit vectors whose first coordinate of
magnitude above ``SIGN_TOL`` is positive.  Dual points use the same
canonical form; the adjoint action of ``g`` on functionals is the
transpose, which is what the Euclidean pairing gives.

Most functions accept either :class:`ProjPoint` objects or plain arrays of
shape ``(..., d)`` so the Monte Carlo code can call them on whole batches.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair, IllConditioned, ZeroVector

COND_MAX = 1e12
SIGN_TOL = 1e-9
ZERO_NORM = 1e-300
LOG_FLOOR = -745.0  # below log of the smallest subnormal double

__all__ = [
    "ProjPoint", "DualProjPoint", "as_matrix", "n_norm", "canonical",
    "project", "project_dual", "act", "dual_act", "delta", "log_delta",
    "dist", "cocycle", "dual_cocycle", "cohomology_residual",
    "rotation", "basis",
]


def as_matrix(g, check=True):
    """Return ``g`` as a float (d, d) array, enforcing the condition guard."""
    a = np.array(g, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise ValueError(f"expected a square d x d matrix with d >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if check:
        c = np.linalg.cond(a)
        if not np.isfinite(c) or c > COND_MAX:
            raise IllConditioned(f"condition number {c:.3g} exceeds {COND_MAX:g}")
    return a


def n_norm(g):
    """N(g) = max(||g||, ||g^{-1}||) in operator 2-norm."""
    a = as_matrix(g)
    return max(np.linalg.norm(a, 2), np.linalg.norm(np.linalg.inv(a), 2))


def canonical(v):
    """Normalize rows of ``v`` and fix the sign of each representative.

    Works on a single vector or a stack of shape ``(..., d)``.
    """
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(nrm < ZERO_NORM):
        raise ZeroVector("cannot project the zero vector")
    u = v / nrm
    big = np.abs(u) > SIGN_TOL
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(u, first[..., None], axis=-1)
    return np.where(lead < 0, -u, u)


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """A line R v in R^d, stored by its canonical unit representative."""

    rep: np.ndarray

    def __post_init__(self):
        r = canonical(self.rep)
        r.setflags(write=False)
        object.__setattr__(self, "rep", r)

    @property
    def d(self):
        return self.rep.shape[0]

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.rep.shape == other.rep.shape and bool(
            np.all(np.abs(self.rep - other.rep) <= 1e-12))

    def __hash__(self):
        return hash((type(self).__name__, tuple(np.round(self.rep, 12) + 0.0)))

    def __repr__(self):
        return f"{type(self).__name__}({np.array2string(self.rep, precision=6)})"


class DualProjPoint(ProjPoint):
    """A line R f of linear functionals, same canonical form as ProjPoint."""


def _rep(p):
    return p.rep if isinstance(p, ProjPoint) else np.asarray(p, dtype=float)


def project(v):
    return ProjPoint(np.asarray(v, dtype=float))


def project_dual(f):
    return DualProjPoint(np.asarray(f, dtype=float))


def basis(d, i, dual=False):
    e = np.zeros(d)
    e[i] = 1.0
    return project_dual(e) if dual else project(e)


def rotation(angle, d=2, i=0, j=1):
    """Rotation by ``angle`` in the (i, j) coordinate plane of R^d."""
    g = np.eye(d)
    c, s = np.cos(angle), np.sin(angle)
    g[i, i] = c
    g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g


def act(g, x):
    g = np.asarray(g, dtype=float)
    out = canonical(_rep(x) @ g.T)
    return ProjPoint(out) if isinstance(x, ProjPoint) else out


def dual_act(g, y):
    g = np.asarray(g, dtype=float)
    out = canonical(_rep(y) @ g)  # rows times g == (g^T f) for each row f
    return DualProjPoint(out) if isinstance(y, ProjPoint) else out


def delta(y, x):
    """|<f, v>| / (|f| |v|).  Symmetric in value, so argument order is free."""
    f, v = _rep(y), _rep(x)
    num = np.abs(np.sum(f * v, axis=-1))
    den = np.linalg.norm(f, axis=-1) * np.linalg.norm(v, axis=-1)
    out = np.minimum(num / den, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def log_delta(y, x):
    """log delta(y, x), clamped at LOG_FLOOR where the bracket vanishes."""
    d = np.asarray(delta(y, x))
    with np.errstate(divide="ignore"):
        out = np.maximum(np.log(d), LOG_FLOOR)
    return float(out) if out.ndim == 0 else out


def dist(x, x2):
    """Sine of the angle between two lines."""
    u, w = _rep(x), _rep(x2)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    w = w / np.linalg.norm(w, axis=-1, keepdims=True)
    # |u ^ w|^2 = 1/2 sum_ij (u_i w_j - u_j w_i)^2, stable near 0 unlike 1 - <u,w>^2
    wedge = u[..., :, None] * w[..., None, :]
    wedge = wedge - np.swapaxes(wedge, -1, -2)
    out = np.minimum(np.sqrt(0.5 * np.sum(wedge ** 2, axis=(-1, -2))), 1.0)
    return float(out) if np.ndim(out) == 0 else out


def cocycle(g, x):
    """sigma(g, x) = log(|g v| / |v|)."""
    v = _rep(x)
    g = np.asarray(g, dtype=float)
    out = np.log(np.linalg.norm(v @ g.T, axis=-1) / np.linalg.norm(v, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def dual_cocycle(g, y):
    return cocycle(np.asarray(g, dtype=float).T, y)


def _log_bracket_ld(f, w):
    f = np.asarray(f, dtype=np.longdouble)
    w = np.asarray(w, dtype=np.longdouble)
    num = abs(np.sum(f * w))
    if num < ZERO_NORM:
        return None
    return np.log(num) - np.log(np.sqrt(np.sum(f * f))) - np.log(np.sqrt(np.sum(w * w)))


def cohomology_residual(g, x, y):
    """LHS - RHS of  log delta(y, gx) + sigma(g, x) = log delta(x, g*y) + sigma(g*, y).

    Both sides are evaluated independently in extended precision.  Returns 0
    when both brackets vanish; raises DegeneratePair when exactly one does.
    """
    g = np.asarray(g, dtype=np.longdouble)
    v = np.asarray(_rep(x), dtype=np.longdouble)
    f = np.asarray(_rep(y), dtype=np.longdouble)
    gv = g @ v
    gf = g.T @ f
    lb = _log_bracket_ld(f, gv)
    rb = _log_bracket_ld(gf, v)
    if lb is None and rb is None:
        return 0.0
    if lb is None or rb is None:
        raise DegeneratePair("exactly one bracket vanishes")
    nv = np.sqrt(np.sum(v * v))
    nf = np.sqrt(np.sum(f * f))
    lhs = lb + np.log(np.sqrt(np.sum(gv * gv)) / nv)
    rhs = rb + np.log(np.sqrt(np.sum(gf * gf)) / nf)
    return float(lhs - rhs)


def cohomology_residuals(gs, xs, ys):
    """Vectorized cohomology_residual over stacks (k, d, d), (k, d), (k, d).

    Same conventions: 0 where both brackets vanish, DegeneratePair if any
    triple has exactly one vanishing bracket.
    """
    g = np.asarray(gs, dtype=np.longdouble)
    v = np.asarray(xs, dtype=np.longdouble)
    f = np.asarray(ys, dtype=np.longdouble)
    gv = np.einsum("kij,kj->ki", g, v)
    gf = np.einsum("kji,kj->ki", g, f)
    lnum = np.abs(np.sum(f * gv, axis=1))
    rnum = np.abs(np.sum(gf * v, axis=1))
    lz, rz = lnum < ZERO_NORM, rnum < ZERO_NORM
    if np.any(lz != rz):
        raise DegeneratePair(f"exactly one bracket vanishes at index {int(np.argmax(lz != rz))}")
    nrm = lambda a: np.sqrt(np.sum(a * a, axis=1))
    ok = ~lz
    lnum, rnum = np.where(ok, lnum, 1), np.where(ok, rnum, 1)
    nv, nf, ngv, ngf = nrm(v), nrm(f), nrm(gv), nrm(gf)
    lhs = (np.log(lnum) - np.log(nf) - np.log(ngv)) + np.log(ngv / nv)
    rhs = (np.log(rnum) - np.log(ngf) - np.log(nv)) + np.log(ngf / nf)
    return np.where(ok, lhs - rhs, 0).astype(float)
