"""Grid discretizations of the transfer operators and the checks built on them.

For d = 2 the projective line is the angle circle [0, pi) with m equally
spaced nodes and linear interpolation of the image points.  For d >= 3 the
space is replaced by a point cloud with nearest-neighbour transport, which
is only first-order accurate.

Every operator is kept as one sparse interpolation matrix per support
element plus the cocycle values at the nodes, so the real operator for any
s and the complex operators for a whole block of Fourier frequencies are
cheap to assemble.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, sparse, special
from scipy.linalg import circulant
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs
from scipy.spatial import cKDTree

from .errors import DegenerateSigma, NoGap, SingularBracket, UnresolvedPhase
from .projgeom import canonical, delta
from .rng import stream

S_RANGE = (-0.5, 2.0)
SNAP = 1e-9
GAP_MAX = 0.999
SINGULAR_DELTA = 1e-8
SINGULAR_MASS = 0.01


# ----------------------------------------------------------------------- grids

def _fibonacci_hemisphere(m):
    i = np.arange(m) + 0.5
    z = i / m  # uniform in height over the upper hemisphere
    phi = np.pi * (1 + 5 ** 0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.stack([z, rho * np.cos(phi), rho * np.sin(phi)], axis=1)


@dataclass(frozen=True, eq=False)
class ProjGrid:
    """Quadrature nodes on P^{d-1}; weights sum to the measure of the space
    (half the unit sphere area, so pi for the projective line)."""

    d: int
    m: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    _tree: object = field(default=None, repr=False)

    @classmethod
    def angles(cls, m):
        if m < 2:
            raise ValueError("need at least two nodes")
        th = np.arange(m) * np.pi / m
        pts = np.stack([np.cos(th), np.sin(th)], axis=1)
        pts[0] = (1.0, 0.0)
        return cls(2, m, canonical(pts), np.full(m, np.pi / m))

    @classmethod
    def cloud(cls, d, m, seed=0, hits_per_cell=200):
        if d < 3:
            raise ValueError("use ProjGrid.angles for d = 2")
        if d == 3:
            pts = canonical(_fibonacci_hemisphere(m))
        else:
            pts = canonical(stream(seed, 11).standard_normal((m, d)))
        tree = cKDTree(np.concatenate([pts, -pts]))
        probe = stream(seed, 12).standard_normal((hits_per_cell * m, d))
        _, idx = tree.query(probe / np.linalg.norm(probe, axis=1, keepdims=True))
        counts = np.bincount(idx % m, minlength=m)
        if np.any(counts == 0):
            raise ValueError("empty Voronoi cell; raise hits_per_cell")
        total = math.pi ** (d / 2) / math.gamma(d / 2)
        return cls(d, m, pts, counts / counts.sum() * total, tree)

    @property
    def total(self):
        return float(self.weights.sum())

    @property
    def spacing(self):
        """Grid-error model: the node spacing pi/m on the projective line."""
        if self.d == 2:
            return np.pi / self.m
        return math.sqrt(self.total / self.m)

    def angle_of(self, v):
        return np.mod(np.arctan2(v[..., 1], v[..., 0]), np.pi)

    def locate(self, v):
        """Interpolation stencil of points ``v``: (left index, right index, right weight)."""
        v = np.atleast_2d(v)
        if self.d == 2:
            pos = self.angle_of(v) / (np.pi / self.m)
            i0 = np.floor(pos)
            fr = pos - i0
            up = fr > 1 - SNAP
            i0 = np.where(up, i0 + 1, i0).astype(int) % self.m
            fr = np.where(up | (fr < SNAP), 0.0, fr)
            return i0, (i0 + 1) % self.m, fr
        _, idx = self._tree.query(v / np.linalg.norm(v, axis=-1, keepdims=True))
        i0 = idx % self.m
        return i0, i0, np.zeros(len(i0))

    def interp_matrix(self, v):
        i0, i1, fr = self.locate(v)
        n = len(i0)
        rows = np.repeat(np.arange(n), 2)
        cols = np.stack([i0, i1], axis=1).ravel()
        vals = np.stack([1 - fr, fr], axis=1).ravel()
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, self.m))

    def interpolate(self, values, v):
        i0, i1, fr = self.locate(v)
        values = np.asarray(values)
        return (1 - fr) * values[i0] + fr * values[i1]


# -------------------------------------------------------------------- operators

@dataclass(frozen=True, eq=False)
class Transport:
    """Per-support-element images of the nodes: interpolation matrices and
    cocycle values sigma(g, x_i) (of g^T for the dual action)."""

    grid: ProjGrid
    probs: np.ndarray
    interp: tuple
    sigma: np.ndarray
    dual: bool


def transport(ensemble, grid, dual=False):
    if ensemble.d != grid.d:
        raise ValueError(f"ensemble is {ensemble.d}-dimensional, grid is {grid.d}")
    mats = ensemble.matrices
    interp, sig = [], []
    for g in mats:
        h = g.T if dual else g
        img = grid.points @ h.T
        nrm = np.linalg.norm(img, axis=1)
        sig.append(np.log(nrm))
        interp.append(grid.interp_matrix(img / nrm[:, None]))
    return Transport(grid, ensemble.probs, tuple(interp), np.array(sig), dual)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse m x m discretization; entry (i, j) is
    sum_g mu(g) e^{s sigma(g, x_i)} w_j(g x_i)."""

    matrix: object = field(repr=False)
    s: complex
    transport: Transport = field(repr=False)

    @property
    def grid(self):
        return self.transport.grid

    @property
    def dual(self):
        return self.transport.dual

    def dense(self):
        return self.matrix.toarray()

    def __matmul__(self, phi):
        return self.matrix @ phi


def _assemble(tr, weights):
    total = None
    for W, w in zip(tr.interp, weights):
        part = sparse.diags(w) @ W
        total = part if total is None else total + part
    return sparse.csr_matrix(total)


def build_operator(ensemble, grid, s, dual=False, s_range=S_RANGE, tr=None):
    """Discretized P_s (or P_s* with ``dual=True``)."""
    if not s_range[0] <= s <= s_range[1]:
        raise ValueError(f"s = {s} outside the configured range {s_range}")
    tr = tr or transport(ensemble, grid, dual)
    w = [p * np.exp(s * sg) for p, sg in zip(tr.probs, tr.sigma)]
    return OperatorMatrix(_assemble(tr, w), s, tr)


def build_perturbed(ensemble, grid, t, lam, tr=None):
    """Discretized P_{it}: phases e^{it(sigma - lam)} in place of e^{s sigma}."""
    tr = tr or transport(ensemble, grid)
    w = [p * np.exp(1j * t * (sg - lam)) for p, sg in zip(tr.probs, tr.sigma)]
    return OperatorMatrix(_assemble(tr, w), 1j * t, tr)


# ------------------------------------------------------------------- spectrum

@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Dominant eigentriple with nu(1) = 1 and nu(r) = 1."""

    s: float
    kappa: float
    r: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    gap: float
    operator: OperatorMatrix = field(repr=False, default=None)
    grid: ProjGrid = field(repr=False, default=None)
    dual: bool = False
    residual_r: float = 0.0
    residual_nu: float = 0.0
    iterations: int = 0

    @property
    def spectral_gap(self):
        return self.gap

    def r_at(self, v):
        return self.grid.interpolate(self.r, v)

    def integrate(self, phi):
        return math.fsum(self.nu * np.asarray(phi, dtype=float))


def _power(apply, x, norm, tol, max_iter):
    """Normalized power iteration; returns (eigenvalue, vector, iterations)."""
    x = x / norm(x)
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = apply(x)
        lam = norm(y)
        y = y / lam
        if abs(lam - lam_old) <= tol * lam and np.max(np.abs(y - x)) <= tol:
            return lam, y, it
        x, lam_old = y, lam
    raise NoGap(f"power iteration did not settle in {max_iter} steps")


def _second_modulus(M, kappa, r, nu):
    """|lambda_2| from the operator with the dominant pair projected out."""
    m = M.shape[0]

    def mv(x):
        return M @ x - kappa * r * (nu @ x)

    if m <= 64:
        B = M.toarray() - kappa * np.outer(r, nu)
        return float(np.max(np.abs(np.linalg.eigvals(B))))
    op = LinearOperator((m, m), matvec=mv, dtype=float)
    v0 = np.cos(np.arange(m) * 0.7) + 1.5
    try:
        vals = eigs(op, k=1, which="LM", v0=v0, tol=1e-10, maxiter=20 * m,
                    return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            B = M.toarray() - kappa * np.outer(r, nu)
            return float(np.max(np.abs(np.linalg.eigvals(B))))
        vals = exc.eigenvalues
    return float(np.max(np.abs(vals)))


def dominant_eigen(A, tol=1e-12, max_iter=100_000, gap_max=GAP_MAX, require_gap=True):
    """Power iteration for (kappa, r, nu) and a deflated solve for the gap.

    ``require_gap=False`` accepts operators whose top eigenvalue is not
    isolated (a scalar law makes every vector an eigenvector); the iteration
    still has to settle and the reported gap may then equal 1.
    """
    M = A.matrix
    m = M.shape[0]
    MT = M.T.tocsr()
    sup = lambda x: np.max(np.abs(x))
    kap, r, it1 = _power(lambda x: M @ x, np.ones(m), sup, tol, max_iter)
    kap2, nu, it2 = _power(lambda x: MT @ x, np.ones(m), np.sum, tol, max_iter)
    r = r / (nu @ r)
    res_r = sup(M @ r - kap * r)
    res_nu = float(np.sum(np.abs(MT @ nu - kap * nu)))
    ratio = _second_modulus(M, kap, r, nu) / kap
    if require_gap and ratio > gap_max:
        raise NoGap(f"second eigenvalue ratio {ratio:.6f} exceeds {gap_max}")
    return SpectralResult(float(A.s.real if np.iscomplexobj(A.s) else A.s), float(kap), r, nu,
                          ratio, A, A.grid, A.dual, float(res_r), res_nu, max(it1, it2))


def spectrum(ensemble, grid, s, dual=False, **kw):
    return dominant_eigen(build_operator(ensemble, grid, s, dual=dual), **kw)


def dual_spectral(ensemble, grid, s, **kw):
    return spectrum(ensemble, grid, s, dual=True, **kw)


def kappa_derivative(ensemble, grid, s, h=1e-3):
    """Centered differences of kappa at s: returns (kappa, kappa', kappa'/kappa)."""
    tr = transport(ensemble, grid)
    k = [dominant_eigen(build_operator(ensemble, grid, s + dh, tr=tr)).kappa
         for dh in (-h, 0.0, h)]
    dk = (k[2] - k[0]) / (2 * h)
    return k[1], dk, dk / k[1]


# ------------------------------------------------------- eigenfunction formula

def _hat_kernel(m, s):
    """k[j] = (1/h) int_{-h}^{h} (1 - |u|/h) |cos(j h + u)|^s du, h = pi/m.

    Averaging delta^s against the hat function of each node is the quadrature
    consistent with reading grid masses as linear-interpolation weights.
    """
    h = np.pi / m
    out = np.empty(m)
    for j in range(m):
        a = j * h
        pts = [u for u in (np.pi / 2 - a, -np.pi / 2 - a, 3 * np.pi / 2 - a)
               if -h < u < h]

        def f(u):
            c = abs(math.cos(a + u))
            return (1 - abs(u) / h) * (c ** s if c > 0 else (0.0 if s > 0 else math.inf))

        val = 0.0
        edges = sorted([-h, *pts, h])
        for lo, hi in zip(edges[:-1], edges[1:]):
            with warnings.catch_warnings():
                # the |cos|^s endpoint singularity is integrable; quad still complains
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val += integrate.quad(f, lo, hi, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
        out[j] = val / h
    return out


def delta_power_integral(dual_spec, points, s, quadrature="hat"):
    """x -> sum_j nu*_j delta(x, y_j)^s, with the singular-mass diagnostic.

    Returns (values, largest dual mass within delta < 1e-8 of a point).
    """
    grid = dual_spec.grid
    dl = delta(points[:, None, :], grid.points[None, :, :])
    near = (dl < SINGULAR_DELTA) @ dual_spec.nu
    worst = float(near.max())
    if s < 0 and worst > SINGULAR_MASS:
        raise SingularBracket(f"{worst:.3g} of the dual mass sits where delta < {SINGULAR_DELTA}")
    if quadrature == "hat" and grid.d == 2 and points is grid.points:
        vals = circulant(_hat_kernel(grid.m, s)) @ dual_spec.nu
    else:
        with np.errstate(divide="ignore"):
            vals = np.where(dl > 0, dl, 0.0) ** s @ dual_spec.nu
    return vals, worst


@dataclass
class EigenfunctionCheck:
    residual: float
    scale: float
    grid_error: float
    singular_mass: float
    formula: np.ndarray = field(repr=False)

    @property
    def bound(self):
        return 10 * self.grid_error

    @property
    def passed(self):
        return self.residual < self.bound


def match_scale(target, approx):
    """min over c of max|c approx - target| / max|target| (minimax fit)."""
    top = np.max(np.abs(target))
    c0 = float(target @ approx / (approx @ approx))
    obj = lambda c: np.max(np.abs(c * approx - target)) / top
    res = minimize_scalar(obj, bounds=(0.5 * c0, 2 * c0), method="bounded",
                          options={"xatol": 1e-14 * abs(c0)})
    c = res.x if obj(res.x) < obj(c0) else c0
    return float(obj(c)), float(c)


def eigenfunction_consistency(primal, dual, quadrature="hat"):
    """Compare r_s with x -> int delta(x, y)^s nu*_s(dy) up to a constant."""
    if primal.grid.m != dual.grid.m or not math.isclose(primal.s, dual.s):
        raise ValueError("primal and dual results must share s and the grid")
    vals, worst = delta_power_integral(dual, primal.grid.points, primal.s, quadrature)
    res, c = match_scale(primal.r, vals)
    return EigenfunctionCheck(res, c, primal.grid.spacing, worst, vals)


# ------------------------------------------------------------ Markov operator Q

def pi_s(spec, phi):
    """Stationary mean of Q_s: nu(phi r) / nu(r)."""
    return math.fsum(spec.nu * spec.r * phi) / math.fsum(spec.nu * spec.r)


def markov_Q(spec, phi, n=1):
    """Q_s^n phi with Q_s phi = P_s(r phi) / (kappa r)."""
    M, r, k = spec.operator.matrix, spec.r, spec.kappa
    out = np.asarray(phi, dtype=float)
    for _ in range(n):
        out = (M @ (r * out)) / (k * r)
    return out


def q_decay_rate(spec, phi, n_max=200, floor=1e-11):
    """Geometric rate of sup|Q^n phi - pi(phi)|, fitted by least squares on log."""
    target = pi_s(spec, phi)
    out = np.asarray(phi, dtype=float)
    norms = []
    for _ in range(n_max):
        out = markov_Q(spec, out, 1)
        e = np.max(np.abs(out - target))
        if e < floor:
            break
        norms.append(e)
    k = np.arange(1, len(norms) + 1)
    keep = k > len(k) // 3  # skip the transient from faster modes
    slope = np.polyfit(k[keep], np.log(norms)[keep], 1)[0]
    return float(np.exp(slope)), np.array(norms)


# ------------------------------------------------------------------- tilting

def tilt_density(dual_spec, g, y):
    """q*_s(g, y) = e^{s sigma(g^T, y)} r*(g^T y) / (kappa r*(y)), y one or many points."""
    y = np.atleast_2d(getattr(y, "rep", y))
    g = np.asarray(g, dtype=float)
    img = y @ g
    nrm = np.linalg.norm(img, axis=1)
    num = np.exp(dual_spec.s * np.log(nrm)) * dual_spec.r_at(img / nrm[:, None])
    out = num / (dual_spec.kappa * dual_spec.r_at(y))
    return out if len(out) > 1 else float(out[0])


def tilt_normalization(ensemble, dual_spec, y=None):
    """sup over y of |sum_g mu(g) q*(g, y) - 1| (all grid nodes by default)."""
    y = dual_spec.grid.points if y is None else y
    tot = sum(p * tilt_density(dual_spec, g, y)
              for g, p in zip(ensemble.matrices, ensemble.probs))
    return float(np.max(np.abs(tot - 1)))


@dataclass
class TiltedPath:
    states: np.ndarray = field(repr=False)
    cocycle: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    mode: str = "weight"

    def mean(self, values):
        """Weighted mean and a 95% normal half-width."""
        v = self.weights * np.asarray(values, dtype=float)
        return float(v.mean()), float(1.96 * v.std(ddof=1) / math.sqrt(len(v)))


def tilted_sample(ensemble, spec, x0, n, rng, replicas=1, mode="weight"):
    """Paths of length n under the s-tilted law.

    ``weight`` samples under mu^n and records q_n = e^{s sigma} r(G_n x) /
    (kappa^n r(x)); ``direct`` draws each step from the kernel
    mu(g) e^{s sigma(g, x)} r(g x) / (kappa r(x)) and sets weights to 1.
    """
    v = np.asarray(getattr(x0, "rep", x0), dtype=float)
    V = np.tile(v / np.linalg.norm(v), (replicas, 1))
    cum = np.zeros(replicas)
    r0 = spec.r_at(V[:1])[0]
    mats_t = np.transpose(ensemble.matrices, (0, 2, 1))
    for _ in range(n):
        imgs = np.einsum("rj,kjl->krl", V, mats_t)
        nrm = np.linalg.norm(imgs, axis=2)
        imgs = imgs / nrm[..., None]
        if mode == "weight":
            idx = rng.choice(ensemble.size, size=replicas, p=ensemble.probs)
        elif mode == "direct":
            rv = np.stack([spec.r_at(im) for im in imgs])
            w = ensemble.probs[:, None] * nrm ** spec.s * rv
            cdf = np.cumsum(w / w.sum(axis=0), axis=0)
            idx = np.minimum((rng.random(replicas) > cdf).sum(axis=0), ensemble.size - 1)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rows = np.arange(replicas)
        V = imgs[idx, rows]
        cum += np.log(nrm[idx, rows])
    if mode == "weight":
        if spec.s == 0:
            weights = np.ones(replicas)
        else:
            weights = np.exp(spec.s * cum - n * math.log(spec.kappa)) * spec.r_at(V) / r0
    else:
        weights = np.ones(replicas)
    return TiltedPath(canonical(V), cum, weights, mode)


# ---------------------------------------------------------------- harmonicity

@dataclass
class HarmonicityCheck:
    lhs: float
    rhs: float
    snap_distance: float
    grid_error: float

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def bound(self):
        return 10 * (self.grid_error + self.snap_distance)


def harmonicity_residual(ensemble, primal, dual, y_index, phi):
    """Both sides of  u^y(phi) = sum_g mu(g) q*(g, y) (g u^{g* y})(phi),
    u^y(phi) = int phi(x) delta(x, y)^s / r*(y) nu_s(dx).

    g* y is transported exactly (no snapping); r* and phi are read off the
    grid by linear interpolation.
    """
    s = primal.s
    grid = primal.grid
    X = grid.points
    phi = np.asarray(phi, dtype=float)
    y = dual.grid.points[y_index]
    # for s < 0 brackets below SINGULAR_DELTA are floored; the mass there is
    # bounded by SINGULAR_MASS or the call raises
    floor = SINGULAR_DELTA if s < 0 else 0.0
    dl = np.maximum(delta(y, X), floor)
    if s < 0 and primal.nu @ (dl < SINGULAR_DELTA) > SINGULAR_MASS:
        raise SingularBracket("primal mass on the hyperplane of y")
    with np.errstate(divide="ignore"):
        lhs = math.fsum(primal.nu * phi * dl ** s) / dual.r[y_index]
    rhs = 0.0
    for g, p in zip(ensemble.matrices, ensemble.probs):
        gy = canonical(y @ g)
        gx = X @ g.T
        gx = gx / np.linalg.norm(gx, axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            inner = math.fsum(primal.nu * grid.interpolate(phi, gx)
                              * np.maximum(delta(gy, X), floor) ** s)
        inner /= dual.r_at(gy[None, :])[0]
        rhs += p * tilt_density(dual, g, y) * inner
    return HarmonicityCheck(lhs, rhs, 0.0, grid.spacing)


# ----------------------------------------------------------- Fourier LLT check

def perturbed_power(ensemble, grid, t, lam, n, phi, tr=None, checkpoints=None):
    """P_{it}^n phi on the grid, for a scalar t or an array of t values.

    With an array, returns shape (m, len(t)).  ``checkpoints`` (a set of step
    counts) makes the function return a dict {k: P_{it}^k phi}.
    """
    tr = tr or transport(ensemble, grid)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    phases = [p * np.exp(1j * np.outer(sg - lam, ts)) for p, sg in zip(tr.probs, tr.sigma)]
    if np.all(ts == 0):
        phases = [np.full((grid.m, len(ts)), p, dtype=complex) for p in tr.probs]
    cur = np.repeat(np.asarray(phi, dtype=complex)[:, None], len(ts), axis=1)
    saved = {}
    for k in range(1, n + 1):
        cur = sum(ph * (W @ cur) for ph, W in zip(phases, tr.interp))
        if checkpoints and k in checkpoints:
            saved[k] = cur if np.ndim(t) else cur[:, 0]
    if checkpoints:
        return saved
    return cur if np.ndim(t) else cur[:, 0]


def triangle(t, half_width=1.0):
    """Triangular bump (1 - |t|/T)_+ with value 1 at 0."""
    return np.maximum(0.0, 1.0 - np.abs(t) / half_width)


@dataclass
class FourierCheck:
    n: int
    value: complex
    target: float
    nodes: int

    @property
    def error(self):
        return abs(self.value - self.target)


def llt_fourier_check(ensemble, grid, phi, psi, ns, l, lam, sigma, x_index=0,
                      support=1.0, nu_phi=None, memory_budget=2 ** 29):
    """sigma sqrt(n) e^{n l^2 / (2 sigma^2)} int e^{-itln} P_{it}^n phi(x) psi(t) dt
    against sqrt(2 pi) nu(phi) psi(0) for every n in ``ns``.

    One composite Simpson grid serves all n; its step is set by the largest n.
    """
    if ensemble.kind == "isometry" or sigma <= 1e-12:
        raise DegenerateSigma("the Fourier check needs a non-degenerate sigma")
    ns = sorted({int(k) for k in np.atleast_1d(ns)})
    n_top = ns[-1]
    if any(abs(l) > 1 / math.sqrt(k) for k in ns):
        raise ValueError("need |l| <= 1/sqrt(n)")
    step = math.pi / (8 * max(n_top * abs(l), n_top * sigma))
    count = 2 * math.ceil(support / step) + 1
    if count * grid.m * 16 * 3 > memory_budget:
        raise UnresolvedPhase(f"{count} Fourier nodes on {grid.m} grid points exceed the memory budget")
    ts = np.linspace(-support, support, count)
    if nu_phi is None:
        nu_phi = spectrum(ensemble, grid, 0.0).integrate(phi)
    out = perturbed_power(ensemble, grid, ts, lam, n_top, phi, checkpoints=set(ns))
    w = psi(ts)
    checks = []
    for k in ns:
        integrand = np.exp(-1j * ts * l * k) * out[k][x_index] * w
        val = sigma * math.sqrt(k) * math.exp(k * l * l / (2 * sigma ** 2)) \
            * integrate.simpson(integrand, x=ts)
        checks.append(FourierCheck(k, complex(val), math.sqrt(2 * math.pi) * nu_phi * float(psi(0.0)), count))
    return checks


def fit_power_law(ns, errors):
    """Least-squares fit errors ~ C n^p on log scale; returns (C, p)."""
    p, logc = np.polyfit(np.log(ns), np.log(errors), 1)
    return float(np.exp(logc)), float(p)


# ------------------------------------------------------------------- smoothing

def fejer_density(u):
    """(1/2pi) (sin(u/2) / (u/2))^2, whose Fourier transform is the triangle on [-1, 1]."""
    u = np.asarray(u, dtype=float)
    return np.sinc(u / (2 * np.pi)) ** 2 / (2 * np.pi)


def fejer_cdf(x):
    """1/2 + (Si(x) - (1 - cos x)/x) / pi."""
    x = np.asarray(x, dtype=float)
    si, _ = special.sici(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        tail = np.where(x == 0, 0.0, 2 * np.sin(x / 2) ** 2 / np.where(x == 0, 1, x))
    out = 0.5 + (si - tail) / np.pi
    return float(out) if out.ndim == 0 else out


def fejer_tail(r):
    """Mass of the Fejer density outside [-r, r]."""
    return 2 * (1 - fejer_cdf(r))


def smoothing_constant(eps):
    """C(eps) = tail/(1 - tail), tail = mass of rho_{eps^2} outside [-eps, eps]."""
    t = fejer_tail(1 / eps)
    return t / (1 - t)


def triangular_kernel(u, eps1):
    """(1/eps1) (1 - |u|/eps1)_+."""
    return np.maximum(0.0, 1 - np.abs(np.asarray(u, dtype=float)) / eps1) / eps1


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of closed intervals, stored merged and sorted."""

    intervals: tuple

    def __post_init__(self):
        iv = sorted((float(a), float(b)) for a, b in self.intervals if a <= b)
        merged = []
        for a, b in iv:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        for a, b in self.intervals:
            out[(u >= a) & (u <= b)] = 1.0
        return out

    @property
    def length(self):
        return sum(b - a for a, b in self.intervals)


def smoothing_pair(psi, eps):
    """(sup, inf) of an interval-union indicator over closed eps-balls."""
    plus = IntervalSet(tuple((a - eps, b + eps) for a, b in psi.intervals))
    minus = IntervalSet(tuple((a + eps, b - eps) for a, b in psi.intervals if b - a >= 2 * eps))
    return plus, minus


def _conv(ivs, u, scale, window=None):
    """int 1_ivs(u - w) rho_scale(w) dw, optionally only over |w| < window."""
    out = np.zeros_like(u)
    for a, b in ivs.intervals:
        lo, hi = u - b, u - a  # w range hitting [a, b]
        if window is not None:
            lo, hi = np.maximum(lo, -window), np.minimum(hi, window)
        out += np.where(hi > lo, fejer_cdf(hi / scale) - fejer_cdf(lo / scale), 0.0)
    return out


@dataclass
class SandwichCheck:
    u: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    constant: float

    @property
    def holds(self):
        slack = 1e-12
        return bool(np.all(self.lower <= self.psi + slack) and np.all(self.psi <= self.upper + slack))


def smoothing_sandwich_check(psi, eps, u):
    """Pointwise two-sided bound of psi by Fejer-smoothed psi^- and psi^+."""
    u = np.asarray(u, dtype=float)
    plus, minus = smoothing_pair(psi, eps)
    c = smoothing_constant(eps)
    scale = eps ** 2
    upper = (1 + c) * _conv(plus, u, scale)
    lower = _conv(minus, u, scale, window=eps)
    return SandwichCheck(u, lower, psi(u), upper, c)
