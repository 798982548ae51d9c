"""Probability measures on the extended real line, stored on a uniform grid.

A :class:`GridMeasure` keeps the distribution function ``F`` at the grid points
``x_i = grid_min + i*step`` together with explicit masses at ``-inf`` and
``+inf``. Between grid points ``F`` is read as piecewise linear, which is what
sampling and the interpolated quantile use; :meth:`GridMeasure.quantile` is
the discrete left inverse (smallest grid point reaching ``p``).

>>> g = Grid(-10.0, 10.0, 0.01)
>>> mu = dirac(0.0, g)
>>> float(mu.quantile(0.5))
0.0
>>> d_weak(mu, translate(mu, 0.3))
0.3
"""
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import EmptySample, GridMismatch, WindowOverflow

INF = float("inf")


@dataclass(frozen=True)
class Grid:
    grid_min: float
    grid_max: float
    step: float

    def __post_init__(self):
        if not (self.step > 0 and self.grid_max > self.grid_min):
            raise ValueError("invalid grid %r" % (self,))
        n = (self.grid_max - self.grid_min) / self.step
        if abs(n - round(n)) > 1e-6:
            raise ValueError("grid range is not a multiple of the step")

    @property
    def size(self):
        return int(round((self.grid_max - self.grid_min) / self.step)) + 1

    @property
    def points(self):
        return self.grid_min + self.step * np.arange(self.size)

    def index(self, x):
        """Index of the nearest grid point (not clipped)."""
        return int(np.round((x - self.grid_min) / self.step))

    def snap(self, x):
        return self.grid_min + self.step * self.index(x)

    def contains(self, x):
        return self.grid_min - 0.5 * self.step <= x <= self.grid_max + 0.5 * self.step

    @property
    def symmetric(self):
        return abs(self.grid_min + self.grid_max) < 1e-9 * self.step

    def to_dict(self):
        return {"grid_min": self.grid_min, "grid_max": self.grid_max, "step": self.step}


METRIC_GRID = Grid(-40.0, 40.0, 0.01)
CAVITY_GRID = Grid(-30.0, 30.0, 0.005)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    grid_min: float
    grid_max: float
    step: float
    cdf: np.ndarray
    atom_neg_inf: float = 0.0
    atom_pos_inf: float = 0.0
    # sub-grid part of translations that the grid could not represent
    snap_residual: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cdf = np.asarray(self.cdf, dtype=float)
        if cdf.ndim != 1 or cdf.size != self.grid.size:
            raise ValueError("cdf length does not match grid")
        if cdf.flags.writeable:
            cdf = cdf.copy()
            cdf.flags.writeable = False
        object.__setattr__(self, "cdf", cdf)

    @classmethod
    def from_cdf(cls, grid, cdf, atom_neg_inf=0.0, atom_pos_inf=0.0, snap_residual=0.0, tidy=True):
        cdf = np.asarray(cdf, dtype=float)
        if tidy:
            cdf = np.clip(np.maximum.accumulate(cdf), atom_neg_inf, 1.0 - atom_pos_inf)
            cdf[-1] = 1.0 - atom_pos_inf
        return cls(grid.grid_min, grid.grid_max, grid.step, cdf,
                   float(atom_neg_inf), float(atom_pos_inf), float(snap_residual))

    @classmethod
    def from_tail(cls, grid, tail, snap_residual=0.0):
        """Build from a tail function f(x) = P(X > x) on the grid.

        Mass beyond the window is read off the end values: f at the left edge
        gives 1 - atom_neg_inf, f at the right edge gives atom_pos_inf.
        """
        tail = np.clip(np.asarray(tail, dtype=float), 0.0, 1.0)
        tail = np.minimum.accumulate(tail)
        return cls.from_cdf(grid, 1.0 - tail, atom_neg_inf=0.0, atom_pos_inf=float(tail[-1]),
                            snap_residual=snap_residual)

    @property
    def grid(self):
        return Grid(self.grid_min, self.grid_max, self.step)

    @property
    def x(self):
        return self.grid.points

    @property
    def tail(self):
        return 1.0 - self.cdf

    @property
    def finite_mass(self):
        return 1.0 - self.atom_neg_inf - self.atom_pos_inf

    def check_invariants(self, tol=1e-12):
        c = self.cdf
        ok = bool(np.all(np.diff(c) >= -tol))
        ok &= c[0] >= self.atom_neg_inf - tol
        ok &= abs(c[-1] - (1.0 - self.atom_pos_inf)) <= tol
        ok &= self.atom_neg_inf + self.atom_pos_inf <= 1.0 + tol
        ok &= self.atom_neg_inf >= -tol and self.atom_pos_inf >= -tol
        return bool(ok)

    def with_residual(self, r):
        return GridMeasure(self.grid_min, self.grid_max, self.step, self.cdf,
                           self.atom_neg_inf, self.atom_pos_inf, float(r))

    # -- evaluation -------------------------------------------------------
    def cdf_at(self, t):
        """F(t) under the piecewise-linear reading (vectorised)."""
        t = np.asarray(t, dtype=float)
        u = (t - self.grid_min) / self.step
        out = np.interp(u, np.arange(self.cdf.size), self.cdf)
        out = np.where(u < 0, self.atom_neg_inf, out)
        out = np.where(t == INF, 1.0, out)
        return out

    def quantile(self, p):
        """Smallest grid point x_i with F(x_i) >= p; +-inf inside the atoms."""
        p = np.asarray(p, dtype=float)
        i = np.searchsorted(self.cdf, p - 1e-15, side="left")
        x = self.grid_min + self.step * np.minimum(i, self.cdf.size - 1)
        x = np.where(i >= self.cdf.size, INF, x)
        x = np.where(p <= self.atom_neg_inf, -INF, x)
        return x[()] if x.ndim == 0 else x

    def sample(self, u):
        """Inverse of the piecewise-linear CDF at uniforms ``u`` in [0, 1)."""
        u = np.asarray(u, dtype=float)
        c = self.cdf
        i = np.searchsorted(c, u, side="right")
        k = np.clip(i, 1, c.size - 1)
        lo = c[k - 1]
        width = c[k] - lo
        frac = np.where(width > 0, (u - lo) / np.where(width > 0, width, 1.0), 1.0)
        x = self.grid_min + self.step * (k - 1 + np.clip(frac, 0.0, 1.0))
        x = np.where(i == 0, self.grid_min, x)
        x = np.where(u < self.atom_neg_inf, -INF, x)
        x = np.where(i >= c.size, INF, x)
        return x

    def quantile_interp(self, p):
        return self.sample(p)

    def rvs(self, n, rng):
        return self.sample(rng.random(n))

    def mean(self):
        """Mean of the finite part (piecewise-linear reading)."""
        c = self.cdf
        mass = c - np.concatenate(([self.atom_neg_inf], c[:-1]))
        x = self.x - 0.5 * self.step
        x[0] = self.grid_min
        return float(np.dot(mass, x) / max(self.finite_mass, 1e-300))

    # -- serialisation ----------------------------------------------------
    def to_dict(self):
        d = {"grid_min": self.grid_min, "grid_max": self.grid_max, "step": self.step,
             "cdf": self.cdf, "atom_neg_inf": self.atom_neg_inf, "atom_pos_inf": self.atom_pos_inf}
        if self.snap_residual:
            d["snap_residual"] = self.snap_residual
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["grid_min"]), float(d["grid_max"]), float(d["step"]),
                   np.asarray(d["cdf"], dtype=float), float(d["atom_neg_inf"]),
                   float(d["atom_pos_inf"]), float(d.get("snap_residual", 0.0)))

    def to_json(self):
        return jsonio.dumps(self.to_dict(), indent=None)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(jsonio.loads(text))

    def to_csv(self):
        return jsonio.csv_text(["x", "F"], [self.x, self.cdf])

    def equals(self, other):
        return (same_grid(self, other) and np.array_equal(self.cdf, other.cdf)
                and self.atom_neg_inf == other.atom_neg_inf
                and self.atom_pos_inf == other.atom_pos_inf)


def same_grid(mu, nu):
    return (mu.grid_min == nu.grid_min and mu.grid_max == nu.grid_max
            and mu.step == nu.step and mu.cdf.size == nu.cdf.size)


def _require_same_grid(mu, nu):
    if not same_grid(mu, nu):
        raise GridMismatch("measures live on different grids")


def dirac(a, grid):
    """Point mass at ``a`` (snapped to the nearest grid point when finite)."""
    cdf = np.zeros(grid.size)
    if a == INF:
        return GridMeasure.from_cdf(grid, cdf, atom_pos_inf=1.0, tidy=False)
    if a == -INF:
        return GridMeasure.from_cdf(grid, np.ones(grid.size), atom_neg_inf=1.0, tidy=False)
    if not grid.contains(a):
        raise WindowOverflow("Dirac point %g outside the grid window" % a)
    cdf[grid.index(a):] = 1.0
    return GridMeasure.from_cdf(grid, cdf, tidy=False)


def translate(mu, r, tol_mass=1e-12):
    """Law of X + r, shifting by the grid-snapped amount.

    The sub-grid remainder ``r - m*step`` is accumulated in ``snap_residual``.
    Mass that would leave the window is clamped to the edge point; more than
    ``tol_mass`` of it raises :class:`WindowOverflow`.
    """
    if not np.isfinite(r):
        raise ValueError("translation must be finite")
    m = int(np.round(r / mu.step))
    res = mu.snap_residual + (r - m * mu.step)
    if m == 0:
        return mu.with_residual(res)
    c = mu.cdf
    K = c.size - 1
    if abs(m) > K:
        lost = mu.finite_mass
    elif m > 0:
        lost = c[K] - c[K - m]
    else:
        lost = c[-m - 1] - mu.atom_neg_inf
    if lost > tol_mass:
        raise WindowOverflow("translation by %g pushes mass %.3g out of the window" % (r, lost))
    idx = np.arange(c.size) - m
    new = c[np.clip(idx, 0, K)]
    new = np.where(idx < 0, mu.atom_neg_inf, new)
    if m < 0:
        new[0] = c[min(-m, K)]
    new[-1] = c[K]
    return GridMeasure(mu.grid_min, mu.grid_max, mu.step, new, mu.atom_neg_inf,
                       mu.atom_pos_inf, res)


def translate_interp(mu, r):
    """Law of X + r read off the piecewise-linear CDF (no snapping, slight smoothing)."""
    fin = mu.cdf - mu.atom_neg_inf
    ia = np.arange(mu.cdf.size)
    new = np.interp(ia - r / mu.step, ia, fin, left=0.0, right=mu.finite_mass)
    return GridMeasure.from_cdf(mu.grid, mu.atom_neg_inf + new, mu.atom_neg_inf, mu.atom_pos_inf)


def stochastic_leq(mu, nu, tol=0.0):
    """mu precedes nu in the stochastic order (F_mu >= F_nu everywhere)."""
    _require_same_grid(mu, nu)
    return bool(np.all(mu.cdf >= nu.cdf - tol)
                and mu.atom_pos_inf <= nu.atom_pos_inf + tol
                and mu.atom_neg_inf >= nu.atom_neg_inf - tol)


def d_weak(mu, nu):
    """Levy distance with shifts restricted to multiples of the step.

    The value is min over m of max(m*step, v(m)) where v(m) is the vertical
    slack needed at horizontal shift m*step; capped at 1.
    """
    _require_same_grid(mu, nu)
    a = np.concatenate(([mu.atom_neg_inf], mu.cdf))
    b = np.concatenate(([nu.atom_neg_inf], nu.cdf))
    h = mu.step

    def v(m):
        if m == 0:
            return float(np.max(np.abs(a - b)))
        s1 = max(a[0] - b[0], a[-1] - b[-1])
        s2 = max(b[0] - a[0], b[-1] - a[-1])
        if m < a.size:
            s1 = max(s1, np.max(a[:-m] - b[m:]))
            s2 = max(s2, np.max(b[:-m] - a[m:]))
        return float(max(s1, s2, 0.0))

    # v is non-increasing in m and m*h is increasing: bisect for the crossing
    lo, hi = 0, int(np.ceil(1.0 / h)) + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if v(mid) <= mid * h:
            hi = mid
        else:
            lo = mid + 1
    if lo == 0:
        return 0.0
    return float(min(lo * h, v(lo - 1), 1.0))


def d_kolmogorov(mu, nu):
    _require_same_grid(mu, nu)
    return float(max(np.max(np.abs(mu.cdf - nu.cdf)), abs(mu.atom_neg_inf - nu.atom_neg_inf)))


def d_weighted(mu, nu, C):
    """sup_x |f_mu - f_nu| e^{C|x|} over the grid; +inf if the infinite atoms differ."""
    _require_same_grid(mu, nu)
    if C <= 0:
        raise ValueError("C must be positive")
    if mu.atom_neg_inf != nu.atom_neg_inf or mu.atom_pos_inf != nu.atom_pos_inf:
        return INF
    diff = np.abs(mu.cdf - nu.cdf)
    with np.errstate(over="ignore", invalid="ignore"):
        w = diff * np.exp(C * np.abs(mu.x))
    w = np.where(diff == 0, 0.0, w)
    return float(np.max(w))


def from_samples(samples, grid):
    """Empirical measure: F(x_i) = fraction of samples <= x_i.

    Finite samples below ``grid_min`` count towards the -inf atom and those
    above ``grid_max`` towards the +inf atom.
    """
    s = np.asarray(samples, dtype=float).ravel()
    n = s.size
    if n == 0:
        raise EmptySample("no samples")
    if np.any(np.isnan(s)):
        raise ValueError("NaN sample")
    h = grid.step
    K = grid.size - 1
    pos = (s - grid.grid_min) / h
    below = pos < -1e-9
    above = pos > K + 1e-9
    inside = ~(below | above)
    idx = np.ceil(pos[inside] - 1e-9).astype(np.int64)
    counts = np.bincount(np.clip(idx, 0, K), minlength=K + 1)
    n_neg = int(np.count_nonzero(below))
    n_pos = int(np.count_nonzero(above))
    cdf = (n_neg + np.cumsum(counts)) / n
    return GridMeasure.from_cdf(grid, cdf, atom_neg_inf=n_neg / n, atom_pos_inf=n_pos / n, tidy=False)


def mixture(measures, weights):
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    m0 = measures[0]
    for m in measures[1:]:
        _require_same_grid(m0, m)
    cdf = sum(wi * m.cdf for wi, m in zip(w, measures))
    an = sum(wi * m.atom_neg_inf for wi, m in zip(w, measures))
    ap = sum(wi * m.atom_pos_inf for wi, m in zip(w, measures))
    return GridMeasure.from_cdf(m0.grid, cdf, an, ap)


def from_cdf_function(F, grid, atom_neg_inf=0.0, atom_pos_inf=0.0):
    """Discretise a continuous CDF ``F`` (mass outside the window folds into the end points)."""
    c = np.asarray(F(grid.points), dtype=float)
    scale = 1.0 - atom_neg_inf - atom_pos_inf
    c = atom_neg_inf + scale * c
    c[-1] = 1.0 - atom_pos_inf
    return GridMeasure.from_cdf(grid, c, atom_neg_inf, atom_pos_inf)


# -- classes --------------------------------------------------------------

@dataclass(frozen=True)
class ClassSpec:
    alpha: float
    delta: float
    kappa_alpha: float
    kappa_one_minus_alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not 0 < self.delta <= self.alpha:
            raise ValueError("delta must lie in (0, alpha]")
        if not self.kappa_alpha < self.kappa_one_minus_alpha:
            raise ValueError("kappa_alpha must be below kappa_(1-alpha)")

    @classmethod
    def from_reference(cls, ref, alpha, delta):
        return cls(alpha, min(delta, alpha), float(ref.quantile(alpha)),
                   float(ref.quantile(1.0 - alpha)))


def _class_mask(mu, spec):
    x = mu.x
    return (x >= spec.kappa_alpha) & (x <= spec.kappa_one_minus_alpha)


def in_upper_class(mu, ref, spec, slack=0.0):
    """F_mu <= F_ref on [kappa_a, kappa_(1-a)] and F_mu <= F_ref + delta elsewhere."""
    _require_same_grid(mu, ref)
    inner = _class_mask(mu, spec)
    d = mu.cdf - ref.cdf
    return bool(np.all(d[inner] <= slack) and np.all(d[~inner] <= spec.delta + slack)
                and mu.atom_neg_inf <= ref.atom_neg_inf + spec.delta + slack)


def in_lower_class(mu, ref, spec, slack=0.0):
    """F_mu >= F_ref on [kappa_a, kappa_(1-a)] and F_mu >= F_ref - delta elsewhere."""
    _require_same_grid(mu, ref)
    inner = _class_mask(mu, spec)
    d = mu.cdf - ref.cdf
    return bool(np.all(d[inner] >= -slack) and np.all(d[~inner] >= -spec.delta - slack)
                and mu.atom_pos_inf <= ref.atom_pos_inf + spec.delta + slack)


def cutoff(mu, a):
    """Law of min(X, a) for X ~ mu.

    The new atom at an off-grid ``a`` is split between the two neighbouring
    grid points in proportion to the distance, so the result is continuous
    and monotone in ``a`` and keeps the mean of the atom.
    """
    g = mu.grid
    if a == INF:
        return mu
    if a < g.grid_min:
        if a == -INF:
            return dirac(-INF, g)
        return GridMeasure.from_cdf(g, np.ones(g.size), 1.0, 0.0, tidy=False)
    c = mu.cdf.copy()
    u = (a - g.grid_min) / g.step
    if u >= g.size - 1:
        c[-1] = 1.0
        return GridMeasure.from_cdf(g, c, mu.atom_neg_inf, 0.0)
    i = int(np.ceil(u - 1e-9))
    th = i - u
    if i > 0 and th > 1e-9:
        c[i - 1] += th * (1.0 - c[i - 1])
    c[i:] = 1.0
    return GridMeasure.from_cdf(g, c, mu.atom_neg_inf, 0.0)
