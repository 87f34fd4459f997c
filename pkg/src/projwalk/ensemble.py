"""Finite-support laws on GL(d, R), the O(q) generator ensembles, and
diagnostics for the moment and proximality conditions.

The ensemble file format is a small line-oriented text format, documented
in ``docs/formats.md``::

    d = 2
    variant = finite
    matrix 1/2 : 2 0 ; 0 1/2
    matrix 1/2 : 0 -1 ; 1 0

Numbers may be decimals or fractions; both go through ``fractions.Fraction``
so the conversion to double is correctly rounded.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import BadEnsemble, BadSignature, FormatError
from .projgeom import as_matrix, rotation

PROB_TOL = 1e-12
ISOMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MatrixEnsemble:
    """Probability law on finitely many invertible matrices.

    ``kind`` is ``"finite"`` for an arbitrary list or ``"isometry"`` for
    generators of O(p, d - p); the latter also records ``signature`` (= p)
    and a description of each generator.
    """

    matrices: np.ndarray
    probs: np.ndarray
    kind: str = "finite"
    signature: int = None
    generators: tuple = ()
    inverses: np.ndarray = field(init=False, repr=False)
    norms: np.ndarray = field(init=False, repr=False)
    inv_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mats = np.array([as_matrix(g) for g in self.matrices])
        probs = np.asarray(self.probs, dtype=float).copy()
        if mats.ndim != 3 or len(mats) == 0:
            raise BadEnsemble("ensemble needs at least one d x d matrix")
        if probs.shape != (len(mats),):
            raise BadEnsemble(f"{len(mats)} matrices but {probs.size} probabilities")
        if np.any(probs <= 0):
            raise BadEnsemble("probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise BadEnsemble(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        if self.kind not in ("finite", "isometry"):
            raise BadEnsemble(f"unknown ensemble kind {self.kind!r}")
        for a in (mats, probs):
            a.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "probs", probs)
        inv = np.linalg.inv(mats)
        inv.setflags(write=False)
        object.__setattr__(self, "inverses", inv)
        object.__setattr__(self, "norms", np.linalg.norm(mats, 2, axis=(1, 2)))
        object.__setattr__(self, "inv_norms", np.linalg.norm(inv, 2, axis=(1, 2)))
        if self.kind == "isometry":
            if self.signature is None:
                raise BadEnsemble("isometry ensembles need a signature p")
            res = isometry_residual(mats, self.signature)
            if res >= ISOMETRY_TOL:
                raise BadEnsemble(f"generator breaks the form q: residual {res:.3g}")

    @property
    def d(self):
        return self.matrices.shape[1]

    @property
    def size(self):
        return len(self.probs)

    @property
    def n_norms(self):
        return np.maximum(self.norms, self.inv_norms)

    def transposed(self):
        """The law of g* (transposes) with the same weights."""
        return MatrixEnsemble(np.transpose(self.matrices, (0, 2, 1)), self.probs,
                              kind=self.kind, signature=self.signature,
                              generators=self.generators)

    def q(self, v):
        """The quadratic form preserved by an isometry ensemble."""
        return quadratic_form(v, self.signature)


def finite_support(matrices, probs=None):
    matrices = list(matrices)
    if probs is None:
        probs = np.full(len(matrices), 1.0 / len(matrices))
    return MatrixEnsemble(np.asarray(matrices, dtype=float), probs)


def point_mass(g):
    return finite_support([g], [1.0])


def quadratic_form(v, p):
    v = np.asarray(v, dtype=float)
    return np.sum(v[..., :p] ** 2, axis=-1) - np.sum(v[..., p:] ** 2, axis=-1)


def form_matrix(d, p):
    return np.diag([1.0] * p + [-1.0] * (d - p))


def isometry_residual(matrices, p):
    """max over matrices of max_v |q(gv) - q(v)| on basis vectors and pairwise sums."""
    mats = np.atleast_3d(np.asarray(matrices, dtype=float))
    if mats.ndim == 2:
        mats = mats[None]
    d = mats.shape[-1]
    tests = [np.eye(d)[i] for i in range(d)]
    tests += [np.eye(d)[i] + np.eye(d)[j] for i, j in combinations(range(d), 2)]
    tests = np.array(tests)
    out = 0.0
    for g in mats:
        out = max(out, float(np.max(np.abs(quadratic_form(tests @ g.T, p) - quadratic_form(tests, p)))))
    return out


def boost(rapidity, d, i, j):
    """Hyperbolic rotation mixing coordinate i (positive block) with j (negative block)."""
    g = np.eye(d)
    c, s = np.cosh(rapidity), np.sinh(rapidity)
    g[i, i] = c
    g[j, j] = c
    g[i, j] = s
    g[j, i] = s
    return g


def _planes(d, p):
    rot = [(i, j) for i, j in combinations(range(p), 2)]
    rot += [(i, j) for i, j in combinations(range(p, d), 2)]
    bst = [(i, j) for i in range(p) for j in range(p, d)]
    return rot, bst


def oq_generators(p, d, angles, rapidities, probs=None):
    """Ensemble of block rotations and boosts preserving
    q(v) = v_1^2 + ... + v_p^2 - v_{p+1}^2 - ... - v_d^2.

    ``angles`` and ``rapidities`` are either numbers, assigned to the
    available planes in cyclic order, or ``(i, j, value)`` triples with
    0-based coordinates.  Probabilities default to uniform.
    """
    if d < 3:
        raise BadSignature(f"need d >= 3, got {d}")
    if not 1 <= p <= d - 1:
        raise BadSignature(f"signature p={p} outside [1, {d - 1}]")
    rot_planes, boost_planes = _planes(d, p)
    mats, gens = [], []
    for k, a in enumerate(angles):
        i, j, a = a if np.ndim(a) else (*rot_planes[k % len(rot_planes)], a)
        if not ((i < p and j < p) or (i >= p and j >= p)):
            raise BadSignature(f"rotation plane ({i}, {j}) mixes the two blocks")
        mats.append(rotation(float(a), d, i, j))
        gens.append(("rotation", int(i), int(j), float(a)))
    for k, r in enumerate(rapidities):
        i, j, r = r if np.ndim(r) else (*boost_planes[k % len(boost_planes)], r)
        if (i < p) == (j < p):
            raise BadSignature(f"boost plane ({i}, {j}) must mix the two blocks")
        mats.append(boost(float(r), d, i, j))
        gens.append(("boost", int(i), int(j), float(r)))
    if probs is None:
        probs = np.full(len(mats), 1.0 / len(mats))
    return MatrixEnsemble(np.array(mats), probs, kind="isometry", signature=p,
                          generators=tuple(gens))


def sample_indices(ensemble, rng, size=None):
    return rng.choice(ensemble.size, size=size, p=ensemble.probs)


def sample(ensemble, rng, size=None):
    """Draw i.i.d. matrices with law mu; a (size, d, d) stack when size is given."""
    return ensemble.matrices[sample_indices(ensemble, rng, size)]


@dataclass
class MomentReport:
    s_grid: np.ndarray
    norm_moment: np.ndarray      # int ||g||^s dmu
    inverse_moment: np.ndarray   # int N(g)^{-s} dmu
    n_moment: float              # int N(g)^alpha dmu
    alpha: float
    in_plus: np.ndarray
    in_minus: np.ndarray

    @property
    def a3(self):
        return bool(np.isfinite(self.n_moment))


def moment_diagnostic(ensemble, s_grid, alpha=0.5):
    """Exact moment sums for a finite-support law."""
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    w = ensemble.probs
    nm = np.array([math.fsum(w * ensemble.norms ** s) for s in s_grid])
    im = np.array([math.fsum(w * ensemble.n_norms ** (-s)) for s in s_grid])
    n_alpha = math.fsum(w * ensemble.n_norms ** alpha)
    return MomentReport(s_grid, nm, im, n_alpha, alpha,
                        in_plus=(s_grid >= 0) & np.isfinite(nm),
                        in_minus=(s_grid <= 0) & np.isfinite(im))


@dataclass
class ProximalityReport:
    n: int
    ratios: np.ndarray
    max_ratio: float
    evidence: bool


def proximality_diagnostic(ensemble, n, trials, rng, threshold=1e-6):
    """Top-two eigenvalue modulus ratio on sampled words of length ``n``.

    A ratio above 1 + threshold is evidence (not proof) that the generated
    semigroup contains a proximal element.
    """
    if n < 1:
        raise ValueError("word length must be >= 1")
    ratios = np.empty(trials)
    for k in range(trials):
        idx = sample_indices(ensemble, rng, n)
        prod = np.eye(ensemble.d)
        for i in idx:
            prod = ensemble.matrices[i] @ prod
            prod /= np.linalg.norm(prod, 2)
        mods = np.sort(np.abs(np.linalg.eigvals(prod)))[::-1]
        ratios[k] = mods[0] / mods[1] if mods[1] > 0 else np.inf
    mx = float(np.max(ratios))
    return ProximalityReport(n, ratios, mx, bool(mx > 1 + threshold))


# ---------------------------------------------------------------- file format

def _num(tok, lineno):
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"not a number: {tok!r}", lineno) from None


def parse_ensemble(text):
    header = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and ":" not in line:
            key, val = (t.strip() for t in line.split("=", 1))
            header[key] = val
            continue
        if ":" not in line:
            raise FormatError(f"expected 'key = value' or '<kind> <prob> : ...', got {raw!r}", lineno)
        left, right = line.split(":", 1)
        head = left.split()
        if len(head) != 2:
            raise FormatError("entry needs a kind and a probability before ':'", lineno)
        kind, prob = head[0], _num(head[1], lineno)
        vals = [_num(t, lineno) for t in right.replace(";", " ").split()]
        entries.append((kind, prob, vals, lineno))
    try:
        d = int(header["d"])
    except (KeyError, ValueError):
        raise FormatError("missing or invalid 'd = <int>' header") from None
    variant = header.get("variant", "finite")
    probs = [e[1] for e in entries]
    if not entries:
        raise FormatError("no matrix entries")
    if variant == "finite":
        mats = []
        for kind, _, vals, lineno in entries:
            if kind != "matrix":
                raise FormatError(f"finite ensembles take 'matrix' entries, got {kind!r}", lineno)
            if len(vals) != d * d:
                raise FormatError(f"expected {d * d} entries, got {len(vals)}", lineno)
            mats.append(np.array(vals).reshape(d, d))
        return MatrixEnsemble(np.array(mats), probs)
    if variant == "isometry":
        try:
            p = int(header["p"])
        except (KeyError, ValueError):
            raise FormatError("isometry ensembles need 'p = <int>'") from None
        angles, raps, order = [], [], []
        for kind, _, vals, lineno in entries:
            if len(vals) != 3 or kind not in ("rotation", "boost"):
                raise FormatError("isometry entries are 'rotation|boost <prob> : i j value'", lineno)
            trip = (int(vals[0]), int(vals[1]), vals[2])
            (angles if kind == "rotation" else raps).append(trip)
            order.append(kind)
        # oq_generators lists rotations first, then boosts
        rot_p = [pr for k, pr in zip(order, probs) if k == "rotation"]
        bst_p = [pr for k, pr in zip(order, probs) if k == "boost"]
        return oq_generators(p, d, angles, raps, probs=rot_p + bst_p)
    raise FormatError(f"unknown variant {variant!r}")


def read_ensemble(path):
    with open(path) as fh:
        return parse_ensemble(fh.read())


def format_ensemble(ensemble):
    lines = [f"d = {ensemble.d}", f"variant = {ensemble.kind}"]
    if ensemble.kind == "isometry":
        lines.append(f"p = {ensemble.signature}")
        for (kind, i, j, val), pr in zip(ensemble.generators, ensemble.probs):
            lines.append(f"{kind} {float(pr)!r} : {i} {j} {float(val)!r}")
    else:
        for g, pr in zip(ensemble.matrices, ensemble.probs):
            rows = " ; ".join(" ".join(repr(float(a)) for a in row) for row in g)
            lines.append(f"matrix {float(pr)!r} : {rows}")
    return "\n".join(lines) + "\n"


def write_ensemble(ensemble, path):
    with open(path, "w") as fh:
        fh.write(format_ensemble(ensemble))


# ------------------------------------------------------------ stock ensembles

def two_matrix():
    """{diag(2, 1/2), rotation(pi/2)} with equal weights."""
    return finite_support([np.diag([2.0, 0.5]), np.array([[0.0, -1.0], [1.0, 0.0]])])


def example_one(rapidity=0.5, angles=(1.0, 2.5)):
    """d = 3, p = 1: two rotations of the negative block and two boosts."""
    return oq_generators(1, 3, list(angles), [rapidity, rapidity])
