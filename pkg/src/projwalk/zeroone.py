"""Band-mass probes of the zero-one dichotomy for algebraic subsets.

A set Y is approached through shrinking bands around it; the band masses
are fitted by ``a + b h^c`` and the intercept ``a`` is read as the mass of
Y itself.  The verdict thresholds are heuristics: the dichotomy is exact,
but samples only ever see it in the limit.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .errors import NoValidOffset
from .montecarlo import EmpiricalMeasure, wilson
from .projgeom import delta

ONE = 0.99
ZERO = 0.01
MIN_POINTS = 10_000


def default_bands(top=0.1, count=8):
    return top / 2.0 ** np.arange(count)


@dataclass(frozen=True)
class LevelSetQuery:
    """Band {x : |log delta(y, x) - t| <= h} for each h in ``bands``."""

    y: np.ndarray
    t: float
    bands: np.ndarray = field(default_factory=default_bands)

    def __post_init__(self):
        h = np.asarray(self.bands, dtype=float)
        if np.any(h <= 0) or np.any(np.diff(h) >= 0):
            raise ValueError("band half-widths must be positive and strictly decreasing")
        object.__setattr__(self, "bands", h)
        object.__setattr__(self, "y", np.asarray(getattr(self.y, "rep", self.y), dtype=float))


@dataclass
class AtomFit:
    atom: float
    scale: float
    alpha: float
    atom_ci: tuple


@dataclass
class MassCurve:
    bands: np.ndarray
    masses: np.ndarray
    ci: list
    fit: AtomFit
    verdict: str

    @property
    def atom(self):
        return self.fit.atom

    @property
    def alpha(self):
        return self.fit.alpha

    def rows(self):
        return [(float(h), float(m), lo, hi) for h, m, (lo, hi) in zip(self.bands, self.masses, self.ci)]


C_MIN = 0.1  # below this a + b h^c is nearly flat and a stops being identifiable


def fit_atom(h, mass):
    """Least squares of log mass against log(a + b h^c), a, b >= 0, c in [C_MIN, 10]."""
    h = np.asarray(h, dtype=float)
    mass = np.asarray(mass, dtype=float)
    if np.all(mass == 0):
        return AtomFit(0.0, 0.0, math.inf, (0.0, 0.0))
    pos = mass > 0
    hh, mm = h[pos], mass[pos]
    if len(mm) < 3:
        # too few nonzero bands to pin three parameters: read off the smallest band
        return AtomFit(float(mass[-1]), 0.0, math.inf if mass[-1] == 0 else 0.0,
                       (0.0, float(mass[0])))

    def resid(p):
        a, b, c = p
        return np.log(mm) - np.log(a + b * hh ** c + 1e-300)

    a0 = float(mm.min()) * 0.5
    slope = np.polyfit(np.log(hh), np.log(mm), 1)[0]
    c0 = min(max(slope, C_MIN), 9.0)
    x0 = [a0, max(float(mm.max()) - a0, 1e-12) / hh.max() ** c0, c0]
    sol = least_squares(resid, x0, bounds=([0, 0, C_MIN], [1.5, np.inf, 10]), x_scale="jac")
    a, b, c = sol.x
    dof = max(len(mm) - 3, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    try:
        cov = np.linalg.pinv(sol.jac.T @ sol.jac) * s2
        se = math.sqrt(max(cov[0, 0], 0.0))
    except np.linalg.LinAlgError:
        se = math.inf
    return AtomFit(float(a), float(b), float(c), (max(0.0, a - 1.96 * se), a + 1.96 * se))


def _verdict(fit, size):
    if size < MIN_POINTS:
        return "inconclusive"
    if fit.atom >= ONE:
        return "one"
    if fit.atom <= ZERO and fit.alpha > 0:
        return "zero"
    return "inconclusive"


def _effective_size(measure):
    return 1.0 / float(np.sum(measure.weights ** 2))


def _curve(measure, inside, bands):
    """``inside`` is a list of boolean masks, one per band."""
    n_eff = _effective_size(measure)
    masses = np.array([measure.integrate(m) for m in inside])
    masses = np.minimum.accumulate(masses)  # nested bands; guards roundoff in the weighted sums
    ci = [wilson(round(m * n_eff), round(n_eff)) for m in masses]
    fit = fit_atom(bands, masses)
    return MassCurve(np.asarray(bands), masses, ci, fit, _verdict(fit, measure.size))


def level_set_mass(measure, query):
    dl = delta(query.y, measure.points)
    with np.errstate(divide="ignore"):
        dev = np.abs(np.log(dl) - query.t)
    return _curve(measure, [dev <= h for h in query.bands], query.bands)


@dataclass
class HyperplaneReport:
    ts: np.ndarray
    masses: np.ndarray
    constant: float
    alpha: float
    curve: MassCurve
    a1_violation: bool
    single_atom: bool

    @property
    def verdict(self):
        return self.curve.verdict


def hyperplane_mass(measure, y, ts=None):
    """Masses of {delta(y, .) <= t} for t decreasing to 0, with a power-law fit C t^alpha."""
    ts = default_bands() if ts is None else np.asarray(ts, dtype=float)
    dl = delta(np.asarray(getattr(y, "rep", y), dtype=float), measure.points)
    curve = _curve(measure, [dl <= t for t in ts], ts)
    m = curve.masses
    pos = m > 0
    if pos.sum() >= 2 and np.ptp(m[pos]) > 0:
        alpha, logc = np.polyfit(np.log(ts[pos]), np.log(m[pos]), 1)
        const = math.exp(logc)
    elif pos.any():
        alpha, const = 0.0, float(m[pos][0])
    else:
        alpha, const = math.inf, 0.0
    support = np.unique(np.round(measure.support(), 12), axis=0)
    return HyperplaneReport(ts, m, const, float(alpha), curve,
                            a1_violation=bool(curve.atom >= ONE or m[-1] >= ONE),
                            single_atom=len(support) == 1)


@dataclass(frozen=True)
class PolynomialSet:
    """Homogeneous polynomial given as {exponent tuple: coefficient}."""

    d: int
    terms: tuple

    def __post_init__(self):
        items = self.terms.items() if isinstance(self.terms, dict) else self.terms
        terms = tuple((tuple(int(e) for e in exp), float(c)) for exp, c in items if c != 0)
        if not terms:
            raise ValueError("polynomial is identically zero")
        degs = {sum(e) for e, _ in terms}
        if len(degs) != 1:
            raise ValueError(f"not homogeneous: monomial degrees {sorted(degs)}")
        if any(len(e) != self.d or min(e) < 0 for e, _ in terms):
            raise ValueError(f"exponents must be {self.d} nonnegative integers")
        object.__setattr__(self, "terms", terms)

    @property
    def degree(self):
        return sum(self.terms[0][0])

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = 0.0
        for exp, c in self.terms:
            out = out + c * np.prod(v ** np.array(exp), axis=-1)
        return out

    @classmethod
    def linear(cls, coeffs):
        d = len(coeffs)
        return cls(d, {tuple(int(i == j) for j in range(d)): c for i, c in enumerate(coeffs)})

    @classmethod
    def quadratic_form(cls, d, p):
        """v_1^2 + ... + v_p^2 - v_{p+1}^2 - ... - v_d^2."""
        return cls(d, {tuple(2 * int(i == j) for j in range(d)): (1.0 if i < p else -1.0)
                       for i in range(d)})


def algebraic_mass(measure, pset, bands=None):
    """Band masses of {|p(v)| <= h |v|^deg} on unit representatives."""
    bands = default_bands() if bands is None else np.asarray(bands, dtype=float)
    vals = np.abs(pset(measure.points))
    return _curve(measure, [vals <= h for h in bands], bands)


def choose_offset(atoms, candidates, k_max, gap, detect=0.5):
    """First candidate eta with |-eta k - t0| > gap for k = 1..k_max and every
    atom (t0, mass) whose mass reaches ``detect``."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    found = [t0 for t0, mass in atoms if mass >= detect]
    if not found:
        return candidates[0]
    k = np.arange(1, k_max + 1)
    for eta in candidates:
        if all(np.min(np.abs(-eta * k - t0)) > gap for t0 in found):
            return eta
    raise NoValidOffset(f"every candidate lands within {gap} of an atom for some k <= {k_max}")


def resample(measure, size, rng):
    """Equal-weight cloud drawn from a weighted measure."""
    idx = rng.choice(measure.size, size=size, p=measure.weights / measure.weights.sum())
    return EmpiricalMeasure(measure.points[idx])


def support_compare(m1, m2):
    """Symmetric Hausdorff distance between the two supports under dist."""
    a, b = m1.support(), m2.support()

    def one_way(p, q):
        chord, _ = cKDTree(np.concatenate([q, -q])).query(p)
        half = np.clip(chord / 2, 0, 1)
        # chord 2 sin(angle/2) between nearest representatives -> sin(angle)
        return float(np.max(2 * half * np.sqrt(1 - half ** 2)))

    return max(one_way(a, b), one_way(b, a))
