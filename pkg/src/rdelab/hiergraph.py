"""Random metrics on hierarchical graphs.

On the log scale the length of the basic graph with edge values X_e and a
global rescaling xi is

    R(X; xi) = xi + log min_pi sum_{e in pi} exp(X_e),

the min running over the simple I -> O paths. The noise is log-normal,
xi = s + sigma*Z, with the drift s absorbing the unknown normalisation.

Two push-forward engines are provided: Monte Carlo (any graph) and a
deterministic quadrature engine for graphs whose I -> O paths are
edge-disjoint (the diamond, for instance), where path lengths are
independent and the law of the min factorises.
"""
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import BadBracket, DomainError, NotConverged, TooLarge
from .measure import (INF, METRIC_GRID, Grid, GridMeasure, cutoff, d_weak, dirac,
                      from_samples, translate_interp)
from .rde import RdeModel, rng_for, subseed

# -- graphs ---------------------------------------------------------------


@dataclass(frozen=True)
class HierGraph:
    vertex_count: int
    edges: tuple
    source: int = 0
    sink: int = 1
    name: str = ""
    io_paths: tuple = field(default=(), compare=False)

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        n = self.vertex_count
        if n < 2 or self.source == self.sink:
            raise DomainError("need at least two distinct terminals")
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise DomainError("bad edge (%d, %d)" % (u, v))
        for t in (self.source, self.sink):
            if not 0 <= t < n:
                raise DomainError("terminal out of range")
        paths = self._find_paths()
        if not paths:
            raise DomainError("no path from I to O")
        used = set(itertools.chain.from_iterable(paths))
        dead = sorted(set(range(len(edges))) - used)
        if dead:
            raise DomainError("edges %s lie on no I->O path" % dead)
        object.__setattr__(self, "io_paths", tuple(tuple(p) for p in paths))

    def _find_paths(self):
        out = []
        adj = {}
        for i, (u, v) in enumerate(self.edges):
            adj.setdefault(u, []).append((i, v))

        def walk(v, seen, path):
            if v == self.sink:
                out.append(list(path))
                return
            for i, w in adj.get(v, []):
                if w not in seen:
                    seen.add(w)
                    path.append(i)
                    walk(w, seen, path)
                    path.pop()
                    seen.discard(w)

        walk(self.source, {self.source}, [])
        return out

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def edge_disjoint_paths(self):
        seen = set()
        for p in self.io_paths:
            if seen & set(p):
                return False
            seen |= set(p)
        return True

    def to_dict(self):
        return {"vertices": self.vertex_count, "edges": [list(e) for e in self.edges],
                "I": self.source, "O": self.sink, "name": self.name}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(int(d["vertices"]), tuple(tuple(e) for e in d["edges"]),
                       int(d["I"]), int(d["O"]), str(d.get("name", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError("malformed graph: %s" % exc) from None


def diamond():
    """I=0, a=1, b=2, O=3 with paths I-a-O and I-b-O."""
    return HierGraph(4, ((0, 1), (1, 3), (0, 2), (2, 3)), 0, 3, "diamond")


def racket():
    """A bridge I-v followed by a triangle v-w-O, v-u-O (pivotal)."""
    return HierGraph(5, ((0, 1), (1, 2), (2, 4), (1, 3), (3, 4)), 0, 4, "racket")


def single_edge():
    return HierGraph(2, ((0, 1),), 0, 1, "edge")


BUILTIN_GRAPHS = {"diamond": diamond, "racket": racket, "edge": single_edge}


def load_graph(spec):
    """A built-in name or a path to a JSON graph file."""
    if spec in BUILTIN_GRAPHS:
        return BUILTIN_GRAPHS[spec]()
    with open(spec) as fh:
        return HierGraph.from_dict(json.load(fh))


def validate_nonpivotal(graph):
    """No I-O shortcut edge and no edge lying on every I->O path."""
    for u, v in graph.edges:
        if {u, v} == {graph.source, graph.sink}:
            return False
    common = set(graph.io_paths[0])
    for p in graph.io_paths[1:]:
        common &= set(p)
    return not common


def _connecting_counts(graph):
    E = graph.n_edges
    if E > 24:
        raise TooLarge("exhaustive enumeration limited to 24 edges (got %d)" % E)
    masks = np.array([sum(1 << e for e in p) for p in graph.io_paths], dtype=np.int64)
    subsets = np.arange(1 << E, dtype=np.int64)
    conn = np.zeros(subsets.size, dtype=bool)
    for m in masks:
        conn |= (subsets & m) == m
    bits = np.zeros(subsets.size, dtype=np.int64)
    for e in range(E):
        bits += (subsets >> e) & 1
    return np.bincount(bits[conn], minlength=E + 1)


def percolation_polynomial(graph):
    """c_j = number of connecting edge subsets of size j, so theta = sum c_j p^j (1-p)^(E-j)."""
    return [int(c) for c in _connecting_counts(graph)]


def percolation_theta(graph, p):
    """P(I and O connected) when edges are open independently with probability p.

    Accepts floats or ``fractions.Fraction`` for exact evaluation.
    """
    if not 0 <= p <= 1:
        raise DomainError("p must lie in [0, 1]")
    E = graph.n_edges
    c = percolation_polynomial(graph)
    return sum(cj * p ** j * (1 - p) ** (E - j) for j, cj in enumerate(c))


def theta_basins_ok(graph, alpha, n_iter=60, tol=1e-9):
    """alpha flows to 0 and 1-alpha flows to 1 under theta."""
    lo, hi = alpha, 1.0 - alpha
    for _ in range(n_iter):
        lo, hi = percolation_theta(graph, lo), percolation_theta(graph, hi)
    return bool(lo < tol and hi > 1.0 - tol)


def relation_R(graph, xs, xi_log):
    """xi + log min over paths of sum exp(X_e); vectorised over leading axes."""
    xs = np.asarray(xs, dtype=float)
    if xs.shape[-1] != graph.n_edges:
        raise DomainError("expected %d edge values" % graph.n_edges)
    best = None
    for p in graph.io_paths:
        v = np.logaddexp.reduce(xs[..., list(p)], axis=-1)
        best = v if best is None else np.minimum(best, v)
    out = best + np.asarray(xi_log, dtype=float)
    return out[()] if out.ndim == 0 else out


# -- parameters and model ----------------------------------------------------


@dataclass(frozen=True)
class CascadeParams:
    sigma: float
    drift: float
    alpha: float = 0.05

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError("sigma must be >= 0")
        if not 0 < self.alpha < 0.5:
            raise DomainError("alpha must lie in (0, 1/2)")
        if not math.isfinite(self.drift):
            raise DomainError("drift must be finite")

    def check_basins(self, graph):
        return theta_basins_ok(graph, self.alpha)

    def to_dict(self):
        return {"sigma": self.sigma, "drift": self.drift, "alpha": self.alpha}


_CHUNK = 1 << 17


def _mc_values(graph, params, mu, n_samples, seed):
    """Raw (unbinned) samples of R(X; xi) with X_e iid mu, chunked per sub-seed."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    out = np.empty(n_samples)
    E = graph.n_edges
    for k, lo in enumerate(range(0, n_samples, _CHUNK)):
        n = min(_CHUNK, n_samples - lo)
        rng = rng_for(subseed(seed, k))
        x = mu.sample(rng.random((n, E)))
        xi = params.drift + params.sigma * rng.standard_normal(n)
        out[lo:lo + n] = relation_R(graph, x, xi)
    return out


def pushforward(graph, params, mu, cutoff_a=INF, n_samples=10 ** 6, seed=0):
    """Monte Carlo Phi_a[mu]: sample, bin on mu's grid, then cut at a."""
    v = _mc_values(graph, params, mu, n_samples, seed)
    return cutoff(from_samples(v, mu.grid), cutoff_a)


# quadrature engine -----------------------------------------------------------

_TINY = 1e-15


def _cells(mu):
    """Finite-part cell masses and their representative points (cell midpoints)."""
    c = mu.cdf
    m = np.diff(c, prepend=mu.atom_neg_inf)
    x = mu.x - 0.5 * mu.step
    x[0] = mu.grid_min
    return m, x


def _support(m):
    nz = np.flatnonzero(m > _TINY)
    if nz.size == 0:
        return None
    return int(nz[0]), int(nz[-1])


def _logadd_law(A, B):
    """Law of log(exp X + exp Y) for independent X ~ A, Y ~ B."""
    g = A.grid
    h = g.step
    K = g.size
    fa = A.cdf - A.atom_neg_inf          # finite sub-CDF of A
    fb = B.cdf - B.atom_neg_inf
    ma_tot, mb_tot = A.finite_mass, B.finite_mass
    pn = A.atom_neg_inf * B.atom_neg_inf
    pp = 1.0 - (1.0 - A.atom_pos_inf) * (1.0 - B.atom_pos_inf)
    # one side -inf: the other value survives
    fin = A.atom_neg_inf * fb + B.atom_neg_inf * fa
    mb, xb = _cells(B)
    sa, sb = _support(np.diff(A.cdf, prepend=A.atom_neg_inf)), _support(mb)
    conv = np.zeros(K)
    if sa is not None and sb is not None:
        lo = max(sa[0], sb[0])
        hi = min(K - 1, max(sa[1], sb[1]) + int(math.ceil(math.log(2.0) / h)) + 2)
        j = np.arange(sb[0], sb[1] + 1)
        y_idx = np.arange(lo, hi + 1)
        y = g.grid_min + h * y_idx
        rows = max(1, 4_000_000 // j.size)
        ia = np.arange(K)
        for r0 in range(0, y.size, rows):
            yy = y[r0:r0 + rows, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = yy + np.log(-np.expm1(xb[j][None, :] - yy))
            u = (t - g.grid_min) / h
            val = np.interp(u, ia, fa, left=0.0, right=ma_tot)
            val = np.where(np.isfinite(t), val, 0.0)
            conv[lo + r0:lo + r0 + yy.shape[0]] = val @ mb[j]
        conv[hi + 1:] = ma_tot * mb_tot
    cdf = pn + fin + conv
    return GridMeasure.from_cdf(g, cdf, pn, pp)


def _min_law(laws):
    """Law of the min of independent variables."""
    g = laws[0].grid
    surv = np.ones(g.size)
    sn = 1.0
    pp = 1.0
    for L in laws:
        surv = surv * (1.0 - L.cdf)
        sn *= 1.0 - L.atom_neg_inf
        pp *= L.atom_pos_inf
    return GridMeasure.from_cdf(g, 1.0 - surv, 1.0 - sn, pp)


def _gauss_kernel(sigma, h):
    M = int(math.ceil(9.0 * sigma / h))
    m = np.arange(-M, M + 1)
    return ndtr((m + 0.5) * h / sigma) - ndtr((m - 0.5) * h / sigma)


def _add_noise(L, s, sigma):
    """Law of X + s + sigma*Z."""
    g = L.grid
    h = g.step
    fin = L.cdf - L.atom_neg_inf
    tot = L.finite_mass
    ia = np.arange(g.size)
    if sigma == 0:
        shifted = np.interp(ia - s / h, ia, fin, left=0.0, right=tot)
        return GridMeasure.from_cdf(g, L.atom_neg_inf + shifted, L.atom_neg_inf, L.atom_pos_inf)
    w = _gauss_kernel(sigma, h)
    M = (w.size - 1) // 2
    ext = np.arange(-M, g.size + M)
    hs = np.interp(ext - s / h, ia, fin, left=0.0, right=tot)
    out = np.convolve(hs, w, mode="valid")
    return GridMeasure.from_cdf(g, L.atom_neg_inf + out, L.atom_neg_inf, L.atom_pos_inf)


def quadrature_pushforward(graph, params, mu, cutoff_a=INF):
    """Deterministic Phi_a[mu] for graphs with edge-disjoint I->O paths."""
    if not graph.edge_disjoint_paths:
        raise DomainError("quadrature engine needs edge-disjoint I->O paths")
    cache = {}
    laws = []
    for p in graph.io_paths:
        n = len(p)
        if n not in cache:
            L = mu
            for _ in range(n - 1):
                L = _logadd_law(L, mu)
            cache[n] = L
        laws.append(cache[n])
    L = _min_law(laws)
    L = _add_noise(L, params.drift, params.sigma)
    return cutoff(L, cutoff_a)


class MetricModel(RdeModel):
    """The hierarchical-graph RDE as an :class:`RdeModel`.

    ``method`` is "mc" (Monte Carlo with ``n_mc`` samples per push-forward)
    or "quadrature" (deterministic, edge-disjoint paths only).
    """

    center_method = "band"

    def __init__(self, graph, params, grid=METRIC_GRID, n_mc=10 ** 6, method="mc"):
        if method not in ("mc", "quadrature"):
            raise DomainError("unknown method %r" % method)
        if method == "quadrature" and not graph.edge_disjoint_paths:
            raise DomainError("quadrature engine needs edge-disjoint I->O paths")
        self.graph = graph
        self.params = params
        self.grid = grid
        self.method = method
        self.n_mc = int(n_mc) if method == "mc" else 0
        self.alpha = params.alpha

    def with_drift(self, s):
        return MetricModel(self.graph, CascadeParams(self.params.sigma, s, self.params.alpha),
                           self.grid, self.n_mc or 10 ** 6, self.method)

    def pushforward(self, mu, cutoff=INF, seed=0):
        if self.method == "quadrature":
            return quadrature_pushforward(self.graph, self.params, mu, cutoff)
        return pushforward(self.graph, self.params, mu, cutoff, self.n_mc, seed)

    def sample_noise(self, rng, size=None):
        return self.params.drift + self.params.sigma * rng.standard_normal(size)

    def relation(self, children, noise):
        return relation_R(self.graph, children, noise)

    def arity(self):
        return self.graph.n_edges

    def describe(self):
        return {"family": "metric", "graph": self.graph.to_dict(), "params": self.params.to_dict(),
                "grid": self.grid.to_dict(), "method": self.method, "n_mc": self.n_mc}


# -- stationary measure at the critical drift ------------------------------

#: critical drift of the diamond with sigma = 0.5, Monte Carlo engine
#: (10^6 samples, h = 0.01); see solve_metric
S_CR_DIAMOND_SIGMA_HALF = -0.52606


def _recenter(mu, method="median"):
    c = float(mu.quantile_interp(0.5)) if method == "median" else mu.mean()
    return translate_interp(mu, -c), c


def solve_metric(graph, sigma, grid=METRIC_GRID, method="quadrature", n_mc=10 ** 6,
                 tol=1e-6, max_iter=200, burn_in=3, seed=0, start=None):
    """Stationary shape and critical drift by renormalised iteration.

    Iterates mu -> recenter(Phi_{s=0}[mu]) with the median pinned at 0; the
    per-step shift converges to -s_cr. Returns (s_cr, mu_bar, info) where
    mu_bar is normalised to median 0 and is a fixed point of Phi at s_cr.
    """
    model = MetricModel(graph, CascadeParams(sigma, 0.0), grid, n_mc, method)
    mu = dirac(0.0, grid) if start is None else start
    shifts = []
    dists = []
    for n in range(max_iter):
        nu = model.pushforward(mu, INF, seed=subseed(seed, n))
        if nu.atom_neg_inf > 0 or nu.atom_pos_inf > 0:
            raise NotConverged("iterates acquired infinite atoms")
        nu, c = _recenter(nu)
        shifts.append(c)
        dists.append(d_weak(nu, mu))
        mu = nu
        if method == "quadrature" and n >= burn_in and abs(shifts[-1] - shifts[-2]) <= tol \
                and dists[-1] <= tol:
            break
    else:
        if method == "quadrature":
            raise NotConverged("renormalised iteration did not settle", last=mu, trace=dists)
    if method == "mc":
        # average the noisy per-step speed over the second half of the run
        s_cr = -float(np.mean(shifts[max(burn_in, len(shifts) // 2):]))
    else:
        s_cr = -shifts[-1]
    info = {"shifts": shifts, "d_weak_trace": dists, "iterations": len(shifts)}
    return s_cr, mu, info


def critical_model(graph, sigma, method="quadrature", grid=METRIC_GRID, n_mc=10 ** 6, seed=0,
                   **kw):
    """(model at s_cr, mu_bar) ready for the cut-off machinery."""
    s_cr, mu_bar, _ = solve_metric(graph, sigma, grid, method, n_mc, seed=seed, **kw)
    return MetricModel(graph, CascadeParams(sigma, s_cr), grid, n_mc, method), mu_bar


# -- critical drift by bisection ---------------------------------------------


def _critical_grid(a, sigma, tol_s):
    h = min(0.01, tol_s / 4.0)
    width = 0.25 if sigma == 0 else 8.0 * sigma + 2.0
    lo = a - width
    n = int(math.ceil((a + 1.0 - lo) / h))
    return Grid(a + 1.0 - n * h, a + 1.0, h)


def cutoff_is_nontrivial(graph, sigma, s, a=10.0, tol_s=1e-3, seed=0, n_samples=None,
                         max_iter=20000):
    """Does Phi_a^n[Dirac_{+inf}] settle away from -inf at drift s?

    Trivial once the median reaches grid_min + 5h; non-trivial once the
    median has not moved by more than one grid step over ``patience`` steps
    (and the last step moved by less than half a grid step in d_weak).
    """
    grid = _critical_grid(a, sigma, tol_s)
    if n_samples is None:
        n_samples = 64 if sigma == 0 else 20000
    model = MetricModel(graph, CascadeParams(sigma, s), grid, n_samples, "mc")
    mu = dirac(INF, grid)
    floor = grid.grid_min + 5 * grid.step
    patience = 10 if sigma == 0 else 40
    meds = []
    for n in range(max_iter):
        nu = model.pushforward(mu, a, seed=subseed(seed, n))
        med = float(nu.quantile(0.5))
        meds.append(med)
        if med <= floor:
            return False
        if len(meds) > patience and abs(meds[-1] - meds[-1 - patience]) <= grid.step \
                and d_weak(nu, mu) <= (0.5 * grid.step if sigma == 0 else 0.05):
            return True
        mu = nu
    raise NotConverged("cut-off iteration neither settled nor collapsed")


def find_critical_drift(graph, sigma, bracket=(-1.5, 0.5), a=10.0, tol_s=1e-3, seed=0,
                        n_samples=None, return_trace=False):
    """Bisection on s for the triviality threshold of the cut-off stationary measure."""
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise BadBracket("need s_lo < s_hi")
    kw = dict(a=a, tol_s=tol_s, seed=seed, n_samples=n_samples)
    if cutoff_is_nontrivial(graph, sigma, lo, **kw):
        raise BadBracket("lower end %g already non-trivial" % lo)
    if not cutoff_is_nontrivial(graph, sigma, hi, **kw):
        raise BadBracket("upper end %g still trivial" % hi)
    trace = [(lo, False), (hi, True)]
    while hi - lo > tol_s:
        mid = 0.5 * (lo + hi)
        ok = cutoff_is_nontrivial(graph, sigma, mid, **kw)
        trace.append((mid, ok))
        if ok:
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    return (s, trace) if return_trace else s


# -- direct cascade ------------------------------------------------------------


def simulate_cascade(graph, params, level, n_samples=10 ** 6, seed=0, grid=METRIC_GRID,
                     exact_limit=10 ** 8, return_values=False):
    """Law of the level-n log I-O distance of the random hierarchical graph.

    A level-n value is R over E independent level-(n-1) values with fresh
    noise, level 0 being the unit edge (value 0). When E^n * n_samples is at
    most ``exact_limit`` every sample gets its own full tree; beyond that the
    recursion is run as population dynamics: a pool of ``n_samples`` values
    per level, children drawn from the previous pool with replacement.
    """
    if level < 0:
        raise DomainError("level must be >= 0")
    E = graph.n_edges
    if level == 0:
        v = np.zeros(n_samples)
        mode = "exact"
    elif E ** level * n_samples <= exact_limit:
        mode = "exact"
        v = np.empty(n_samples)
        per = max(1, _CHUNK // E ** level)
        for k, lo in enumerate(range(0, n_samples, per)):
            n = min(per, n_samples - lo)
            rng = rng_for(subseed(seed, k))
            cur = np.zeros(n * E ** level)
            for _ in range(level):
                cur = cur.reshape(-1, E)
                xi = params.drift + params.sigma * rng.standard_normal(cur.shape[0])
                cur = relation_R(graph, cur, xi)
            v[lo:lo + n] = cur
    else:
        mode = "population"
        cur = np.zeros(n_samples)
        for lev in range(level):
            nxt = np.empty(n_samples)
            for k, lo in enumerate(range(0, n_samples, _CHUNK)):
                n = min(_CHUNK, n_samples - lo)
                rng = rng_for(subseed(seed, lev, k))
                idx = rng.integers(0, n_samples, size=(n, E))
                xi = params.drift + params.sigma * rng.standard_normal(n)
                nxt[lo:lo + n] = relation_R(graph, cur[idx], xi)
            cur = nxt
        v = cur
    mu = from_samples(v, grid)
    mu.meta.update({"mode": mode, "level": level, "n_samples": n_samples})
    return (mu, v) if return_values else mu
