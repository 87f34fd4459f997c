"""Simulation of G_n x and the statistical estimators built on it.

All replica-level work goes through :func:`projwalk.rng.map_blocks`, so a
fixed (seed, replicas) pair gives the same numbers for any worker count.
The running vector is renormalized every step; the log-norm increments are
accumulated separately (the projective action does not see the scale).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .ensemble import sample_indices
from .errors import DegenerateSigma, InsufficientCounts
from .projgeom import canonical, delta
from .rng import map_blocks, stream

N_BATCHES = 30
MIN_BURN_IN = 200

# salts keep the streams of different estimators apart for a shared seed
_SALT = {"lyapunov": 1, "variance": 2, "stationary": 3, "tail": 4, "llt": 5,
         "path": 6, "bl": 7, "tilt": 8}


@dataclass
class PathConfig:
    n: int
    replicas: int = 1
    burn_in: int = 0
    seed: int = 0
    x0: np.ndarray = None
    workers: int = 1

    def __post_init__(self):
        if self.n < 1 or self.replicas < 1 or self.burn_in < 0:
            raise ValueError("need n >= 1, replicas >= 1, burn_in >= 0")

    def start(self, d):
        if self.x0 is None:
            e = np.zeros(d)
            e[0] = 1.0
            return e
        return canonical(np.asarray(self.x0, dtype=float))


@dataclass
class EmpiricalMeasure:
    """Weighted point cloud on projective space."""

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        raw = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts = canonical(raw)
        # rows that are already unit representatives are kept bit for bit, so
        # a save/load cycle is a fixed point
        keep = np.all(np.abs(pts) == np.abs(raw), axis=1) | (
            np.abs(np.linalg.norm(raw, axis=1) - 1.0) <= 2e-16 * raw.shape[1])
        pts = np.where(keep[:, None], np.copysign(raw, pts), pts)
        if not np.all(np.isfinite(pts)):
            raise ValueError("measure has NaN points")
        if self.weights is None:
            w = np.full(len(pts), 1.0 / len(pts))
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(pts),) or np.any(w < 0):
                raise ValueError("weights must be nonnegative, one per point")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        self.points = pts
        self.weights = w

    @property
    def size(self):
        return len(self.weights)

    @property
    def d(self):
        return self.points.shape[1]

    def integrate(self, values):
        return math.fsum(self.weights * np.asarray(values, dtype=float))

    def support(self, rel_tol=0.0):
        """Points carrying weight above ``rel_tol * max weight``."""
        keep = self.weights > rel_tol * self.weights.max()
        return self.points[keep]


def uniform_measure(size, d, rng):
    """i.i.d. sample of the rotation-invariant probability on P^{d-1}."""
    return EmpiricalMeasure(rng.standard_normal((size, d)))


# --------------------------------------------------------------------- engine

def _step(mats_t, V, idx):
    W = np.matmul(V[:, None, :], mats_t[idx])[:, 0, :]
    nrm = np.sqrt(np.einsum("ij,ij->i", W, W))
    return W / nrm[:, None], np.log(nrm)


def run_block(ensemble, V, n, rng, on_step=None):
    """Advance the unit rows ``V`` by ``n`` random steps.

    Returns (final V, cumulative cocycle per row).  ``on_step(k, V, cum)``
    is called after step k (1-based) when given.
    """
    mats_t = np.ascontiguousarray(np.transpose(ensemble.matrices, (0, 2, 1)))
    V = np.array(V, dtype=float)
    cum = np.zeros(len(V))
    for k in range(1, n + 1):
        idx = sample_indices(ensemble, rng, len(V))
        V, inc = _step(mats_t, V, idx)
        cum += inc
        if on_step is not None:
            on_step(k, V, cum)
    return V, cum


def simulate_path(ensemble, x0, n, rng):
    """One trajectory: the points G_k x0 and sigma(G_k, x0) for k = 1..n."""
    v = np.asarray(getattr(x0, "rep", x0), dtype=float)
    v = v / np.linalg.norm(v)
    pts = np.empty((n, ensemble.d))
    cums = np.empty(n)

    def record(k, V, cum):
        pts[k - 1] = V[0]
        cums[k - 1] = cum[0]

    run_block(ensemble, v[None, :], n, rng, record)
    return canonical(pts), cums


def _start_block(ensemble, config, rng, count):
    V = np.tile(config.start(ensemble.d), (count, 1))
    if config.burn_in:
        V, _ = run_block(ensemble, V, config.burn_in, rng)
    return V


def _t_halfwidth(batch_means, level=0.95):
    b = len(batch_means)
    if b < 2:
        return float("nan")
    q = stats.t.ppf(0.5 + level / 2, b - 1)
    return float(q * np.std(batch_means, ddof=1) / np.sqrt(b))


@dataclass
class Estimate:
    value: float
    half_width: float
    batches: np.ndarray = field(repr=False, default=None)

    @property
    def ci(self):
        return (self.value - self.half_width, self.value + self.half_width)


def _chunk_sums(ensemble, config, salt):
    """Per-replica cocycle increments over N_BATCHES time chunks of the n steps."""
    edges = np.linspace(0, config.n, N_BATCHES + 1).round().astype(int)

    def work(rng, start, count):
        V = _start_block(ensemble, config, rng, count)
        out = np.zeros((count, N_BATCHES))
        marks = {e: i for i, e in enumerate(edges[1:])}
        prev = np.zeros(count)

        def rec(k, V, cum):
            nonlocal prev
            if k in marks:
                out[:, marks[k]] = cum - prev
                prev = cum.copy()
        run_block(ensemble, V, config.n, rng, rec)
        return out

    return np.concatenate(map_blocks(work, config.replicas, config.seed, salt,
                                     config.workers))


def _batch(values_by_replica, chunks=None):
    """Batch means over replicas when there are enough, else over time chunks."""
    if len(values_by_replica) >= N_BATCHES:
        groups = np.array_split(values_by_replica, N_BATCHES)
        return np.array([g.mean() for g in groups])
    return chunks


def estimate_lyapunov(ensemble, config):
    """Ergodic average sigma(G_n, x)/n pooled over replicas, with a
    batch-means 95% confidence interval."""
    chunks = _chunk_sums(ensemble, config, _SALT["lyapunov"])
    per_rep = chunks.sum(axis=1) / config.n
    lengths = np.diff(np.linspace(0, config.n, N_BATCHES + 1).round())
    time_means = chunks.mean(axis=0) / np.maximum(lengths, 1)
    b = _batch(per_rep, time_means)
    return Estimate(float(per_rep.mean()), _t_halfwidth(b), b)


@dataclass
class VarianceEstimate(Estimate):
    near_zero: bool = False


def estimate_variance(ensemble, config, lam):
    """(1/n) E (sigma(G_n, x) - n lam)^2 over replicas."""
    def work(rng, start, count):
        V = _start_block(ensemble, config, rng, count)
        _, cum = run_block(ensemble, V, config.n, rng)
        return (cum - config.n * lam) ** 2 / config.n

    sq = np.concatenate(map_blocks(work, config.replicas, config.seed,
                                   _SALT["variance"], config.workers))
    b = _batch(sq)
    hw = _t_halfwidth(b) if b is not None else float("nan")
    val = float(sq.mean())
    return VarianceEstimate(val, hw, b, near_zero=bool(val <= hw) if np.isfinite(hw) else val == 0)


def empirical_stationary(ensemble, config, min_burn_in=MIN_BURN_IN):
    """Pool the chain states after burn-in: ``replicas * n`` points."""
    if config.burn_in < min_burn_in:
        raise ValueError(f"burn_in {config.burn_in} below the minimum {min_burn_in}")

    def work(rng, start, count):
        V = _start_block(ensemble, config, rng, count)
        out = np.empty((config.n, count, ensemble.d))

        def rec(k, V, cum):
            out[k - 1] = V
        run_block(ensemble, V, config.n, rng, rec)
        return out.transpose(1, 0, 2).reshape(-1, ensemble.d)

    pts = np.concatenate(map_blocks(work, config.replicas, config.seed,
                                    _SALT["stationary"], config.workers))
    return EmpiricalMeasure(pts)


def _test_directions(d, count=32):
    if d == 2:
        a = np.arange(count) * np.pi / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    rng = stream(0, _SALT["bl"])
    return canonical(rng.standard_normal((count, d)))


def bl_distance(m1, m2, directions=None):
    """Lower bound on the bounded-Lipschitz distance from the test functions
    x -> delta(y, x) / sqrt(2), which are bounded by 1 and 1-Lipschitz for dist."""
    ys = _test_directions(m1.d) if directions is None else np.asarray(directions)
    best = 0.0
    for y in ys:
        a = m1.integrate(delta(y, m1.points))
        b = m2.integrate(delta(y, m2.points))
        best = max(best, abs(a - b) / np.sqrt(2.0))
    return best


def one_step_distance(ensemble, measure, seed=0):
    """bl_distance between a measure and its push-forward by one mu-step."""
    rng = stream(seed, _SALT["bl"], 1)
    V, _ = run_block(ensemble, measure.points, 1, rng)
    return bl_distance(measure, EmpiricalMeasure(V, measure.weights))


@dataclass
class TailReport:
    k: np.ndarray
    eps: float
    counts: np.ndarray
    total: int
    probs: np.ndarray
    fit_k: np.ndarray
    rate: float
    rate_se: float

    @property
    def t_stat(self):
        return self.rate / self.rate_se if self.rate_se > 0 else float("inf")


def tail_report(deltas, eps, k_max, fit_kmin=None, min_count=100):
    """Exceedance probabilities P(delta <= e^{-eps k}) and a fitted decay rate.

    The rate is the negated slope of a weighted least-squares line through
    log P_k over the fitted k range, weighting each k by its count.
    """
    deltas = np.asarray(deltas, dtype=float)
    k = np.arange(k_max + 1)
    srt = np.sort(deltas)
    counts = np.searchsorted(srt, np.exp(-eps * k), side="right")
    counts = np.minimum.accumulate(counts)
    total = len(deltas)
    probs = counts / total
    if fit_kmin is None:
        fit_kmin = max(1, k_max // 4)
    fit = k[fit_kmin:]
    c = counts[fit_kmin:]
    if len(fit) < 2:
        raise ValueError("fit range needs at least two k values")
    if np.any(c < min_count):
        bad = fit[c < min_count][0]
        raise InsufficientCounts(f"only {c[c < min_count][0]} exceedances at k={bad}")
    y = np.log(c / total)
    w = c * 1.0 / np.maximum(1.0 - c / total, 1e-12)  # 1 / var(log p_hat)
    xm = np.sum(w * fit) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (fit - xm) ** 2)
    slope = np.sum(w * (fit - xm) * (y - ym)) / sxx
    return TailReport(k, eps, counts, total, probs, fit, float(-slope),
                      float(np.sqrt(1.0 / sxx)))


def final_states(ensemble, config, salt):
    """Final unit vectors and cumulative cocycles of all replicas."""
    def work(rng, start, count):
        V = _start_block(ensemble, config, rng, count)
        return run_block(ensemble, V, config.n, rng)

    parts = map_blocks(work, config.replicas, config.seed, salt, config.workers)
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))


def regularity_tail(ensemble, y, n, eps, k_max, replicas, seed=0, x0=None,
                    fit_kmin=None, workers=1):
    if not n >= k_max >= 1:
        raise ValueError("need n >= k_max >= 1")
    cfg = PathConfig(n=n, replicas=replicas, seed=seed, x0=x0, workers=workers)
    V, _ = final_states(ensemble, cfg, _SALT["tail"])
    return tail_report(delta(getattr(y, "rep", y), V), eps, k_max, fit_kmin)


def wilson(count, total, z=1.96):
    if total == 0:
        return (0.0, 1.0)
    p = count / total
    den = 1 + z * z / total
    mid = (p + z * z / (2 * total)) / den
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


@dataclass
class LLTCount:
    n: int
    count: int
    replicas: int
    p_hat: float
    target: float
    ratio: float
    p_ci: tuple
    ratio_ci: tuple

    @property
    def binomial_sd(self):
        return math.sqrt(max(self.p_hat * (1 - self.p_hat), 1e-300) / self.replicas)


def coefficient_llt_count(ensemble, f, v, a1, a2, n, replicas, lam, sigma,
                          seed=0, workers=1):
    """Fraction of replicas with log|<f, G_n v>| - n lam in [a1, a2].

    ``n`` may be a list of step counts; all of them are read off the same
    trajectories and a list of results is returned.
    """
    if sigma <= 0:
        raise DegenerateSigma(f"sigma = {sigma} must be positive")
    if a1 > a2:
        raise ValueError("need a1 <= a2")
    f = np.asarray(getattr(f, "rep", f), dtype=float)
    v = np.asarray(getattr(v, "rep", v), dtype=float)
    if abs(np.linalg.norm(f) - 1) > 1e-12 or abs(np.linalg.norm(v) - 1) > 1e-12:
        raise ValueError("f and v must be unit vectors")
    ns = sorted({int(k) for k in np.atleast_1d(n)})
    want = set(ns)

    def work(rng, start, count):
        hits = {k: 0 for k in ns}

        def rec(k, V, cum):
            if k in want:
                with np.errstate(divide="ignore"):
                    coef = cum + np.log(np.abs(V @ f))  # identity: log|<f,G v>| = sigma + log delta
                u = coef - k * lam
                hits[k] = int(np.count_nonzero((u >= a1) & (u <= a2)))
        run_block(ensemble, np.tile(v, (count, 1)), ns[-1], rng, rec)
        return hits

    parts = map_blocks(work, replicas, seed, _SALT["llt"], workers)
    out = []
    for k in ns:
        c = sum(p[k] for p in parts)
        target = (a2 - a1) / (sigma * math.sqrt(2 * math.pi * k))
        lo, hi = wilson(c, replicas)
        ph = c / replicas
        if target > 0:
            ratio, rci = ph / target, (lo / target, hi / target)
        else:
            ratio, rci = float("nan"), (float("nan"), float("nan"))
        out.append(LLTCount(k, c, replicas, ph, target, ratio, (lo, hi), rci))
    return out if np.ndim(n) else out[0]


def holder_moment(measure, y, alpha):
    """(sum_i w_i delta(y, x_i)^{-alpha}, weight fraction with delta < 1e-8)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    dl = delta(getattr(y, "rep", y), measure.points)
    small = measure.integrate(dl < 1e-8)
    if alpha == 0:
        return measure.integrate(np.ones_like(dl)), small
    with np.errstate(divide="ignore"):
        vals = dl ** (-alpha)
    return measure.integrate(vals), small
