"""Mean-field k-factor cavity equations in pseudo-dimension q.

The recursion is X = k-th smallest of (xi_i - X_i) over a Poisson process
{xi_i} of intensity x^{q-1} dx on (0, inf). On tail functions f(x) = P(X > x)
it reads f -> P_k(I[f]) with I[f](x) = int (x + y)_+^{q-1} f(y) dy, which
reverses the order; the monotone dynamics use its square.

Tails live on a symmetric grid y_j = -G + j h and are read as piecewise
linear. I[f] is computed with exact product-integration weights for the
kernel t_+^{q-1} against hat functions, plus an exponential extrapolation of
the tail beyond the window.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .errors import CertificationFailed, CollapseSignal, DomainError, NotConverged
from .measure import CAVITY_GRID, INF, GridMeasure, Grid, d_weak, dirac, translate_interp
from .measure import cutoff as measure_cutoff
from .rde import RdeModel

# tails above this at the right edge cannot be integrated
_COLLAPSE_LEVEL = 1e-6
_LAGUERRE = np.polynomial.laguerre.laggauss(40)
_WEIGHT_CAP = 1e6


def c_q_default(q):
    """Smallest two-decimal C with Gamma(q) / C^q <= 1/4."""
    c = math.ceil(100 * (4 * math.gamma(q)) ** (1.0 / q) - 1e-9) / 100
    while math.gamma(q) / c ** q > 0.25:
        c += 0.01
    return round(c, 2)


@dataclass(frozen=True)
class CavityParams:
    q: float
    k: int
    C_q: float = None
    M: float = 3.0
    L: float = None
    delta_0: float = None
    grid: Grid = CAVITY_GRID

    def __post_init__(self):
        if not self.q >= 1:
            raise DomainError("q must be >= 1")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("k must be a positive integer")
        object.__setattr__(self, "k", int(self.k))
        if self.C_q is None:
            object.__setattr__(self, "C_q", c_q_default(self.q))
        if not self.C_q > 0 or math.gamma(self.q) / self.C_q ** self.q > 0.25 + 1e-12:
            raise DomainError("C_q must satisfy Gamma(q)/C_q^q <= 1/4")
        if not self.M > 0:
            raise DomainError("M must be positive")
        if not self.grid.symmetric:
            raise DomainError("the cavity grid must be symmetric about 0")

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, np.power(np.maximum(x, 0.0), self.q - 1), 0.0)

    def to_dict(self):
        return {"q": self.q, "k": self.k, "C_q": self.C_q, "M": self.M, "L": self.L,
                "delta_0": self.delta_0, "grid": self.grid.to_dict()}


@dataclass(frozen=True)
class AdaptedClassSpec:
    M: float
    C_q: float
    delta: float
    side: str = "upper"

    def __post_init__(self):
        if self.side not in ("upper", "lower"):
            raise DomainError("side must be 'upper' or 'lower'")
        if not self.delta >= 0:
            raise DomainError("delta must be >= 0")


# -- scalar pieces ---------------------------------------------------------


def poisson_Pk(k, lam):
    """P(Poisson(lam) < k)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("lambda must be >= 0")
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    out = np.where(np.isinf(lam), 0.0, special.gammaincc(int(k), np.where(np.isinf(lam), 0.0, lam)))
    return out[()] if out.ndim == 0 else out


def poisson_Pk_complement(k, lam):
    """1 - P_k(lam) without cancellation for small lam."""
    lam = np.asarray(lam, dtype=float)
    return special.gammainc(int(k), lam)


def f_pert(x, M, C_q):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) >= M, np.exp(-C_q * np.abs(x)), 0.0)
    return out[()] if out.ndim == 0 else out


def logistic_tail(x):
    return special.expit(-np.asarray(x, dtype=float))


# -- the convolution I -----------------------------------------------------


def _g_derivs(m, q, orders):
    """Derivatives g^(j)(m) of g(t) = t_+^(q+1) / (q (q+1)) at m > 0."""
    out = []
    for j in orders:
        c = 1.0
        for i in range(j):
            c *= q + 1 - i
        out.append(c / (q * (q + 1)) * np.power(m, q + 1 - j))
    return out


def _g(t, q):
    t = np.maximum(t, 0.0)
    return np.power(t, q + 1) / (q * (q + 1))


_SERIES_FROM = 50


def hat_weights(n, q, h):
    """W[m] = int hat(s) (h (m + s))_+^(q-1) h ds for m = 0..n (full hats)."""
    m = np.arange(n + 1, dtype=float)
    w = _g(m + 1, q) - 2 * _g(m, q) + _g(m - 1, q)
    big = m >= _SERIES_FROM
    if np.any(big):
        mb = m[big]
        d = _g_derivs(mb, q, (2, 4, 6, 8, 10))
        w[big] = 2 * (d[0] / 2 + d[1] / 24 + d[2] / 720 + d[3] / 40320 + d[4] / 3628800)
    return w * h ** q


def right_half_weights(n, q, h):
    """Weights of the right half hat, used to drop the last node's outer half."""
    m = np.arange(n + 1, dtype=float)
    gp = np.power(m, q) / q
    w = _g(m + 1, q) - _g(m, q) - gp
    big = m >= _SERIES_FROM
    if np.any(big):
        mb = m[big]
        d = _g_derivs(mb, q, (2, 3, 4, 5, 6, 7, 8))
        w[big] = sum(di / math.factorial(j) for di, j in zip(d, range(2, 9)))
    return w * h ** q


_WCACHE = {}


def _weights(grid, q):
    key = (grid, float(q))
    if key not in _WCACHE:
        n = grid.size - 1
        _WCACHE[key] = (hat_weights(n, q, grid.step), right_half_weights(n, q, grid.step))
    return _WCACHE[key]


def _tail_extension(f, grid, q):
    """int_{G}^inf (x + y)^{q-1} f(y) dy for an exponential continuation of f."""
    fG = f[-1]
    if fG <= 0:
        return 0.0
    if fG > _COLLAPSE_LEVEL:
        raise CollapseSignal("tail %.3g at the window edge is not integrable" % fG)
    w = max(1, int(round(0.5 / grid.step)))
    prev = f[-1 - w]
    if not prev > fG:
        raise CollapseSignal("tail does not decay at the window edge")
    r = math.log(prev / fG) / (w * grid.step)
    z = grid.points + grid.grid_max          # x + G >= 0
    t, wt = _LAGUERRE
    vals = np.power(z[:, None] + t[None, :] / r, q - 1) @ wt
    return fG * vals / r


def convolve_I(f, q, grid=CAVITY_GRID):
    """I[f](x) = int (x + y)_+^{q-1} f(y) dy at every grid point.

    ``f`` is a tail array on ``grid`` (or a GridMeasure). The part of f
    equal to 1 on y <= 0 is summed exactly through cumulative weights, the
    remainder goes through an FFT convolution.
    """
    if isinstance(f, GridMeasure):
        grid = f.grid
        f = f.tail
    f = np.asarray(f, dtype=float)
    if f.size != grid.size:
        raise DomainError("tail length does not match the grid")
    if not np.any(f):
        return np.zeros_like(f)
    n = grid.size - 1
    W, Wr = _weights(grid, q)
    fr = f[::-1]
    # step part: s_j = 1 for y_j <= 0, i.e. reversed index k >= n/2
    half = n // 2
    cw = np.cumsum(W)
    i = np.arange(n + 1)
    step = np.where(i >= half, cw[np.clip(i - half, 0, n)], 0.0)
    rem = fr.copy()
    rem[half:] -= 1.0
    nz = np.nonzero(np.abs(rem) > 0)[0]
    if nz.size:
        lo, hi = nz[0], nz[-1] + 1
        conv = signal.fftconvolve(W, rem[lo:hi])
        part = np.zeros(n + 1)
        seg = conv[: n + 1 - lo]
        part[lo:] = seg
    else:
        part = 0.0
    out = step + part
    # the last node carries only its inner half; the outside is the extension
    out -= f[-1] * Wr
    out += _tail_extension(f, grid, q)
    return np.maximum(out, 0.0)


def cavity_step(f, params):
    """One application of f -> P_k(I[f])."""
    lam = convolve_I(f, params.q, params.grid)
    return poisson_Pk(params.k, lam)


def cavity_double_step(f, params):
    return cavity_step(cavity_step(f, params), params)


def cut_tail(f, a, grid):
    """Tail of min(X, a); an off-grid a is split as in the measure cut-off."""
    f = np.array(f, dtype=float)
    if a == INF:
        return f
    u = (a - grid.grid_min) / grid.step
    if u >= grid.size - 1:
        f[-1] = 0.0
        return f
    if u < 0:
        return np.zeros_like(f)
    i = int(np.ceil(u - 1e-9))
    th = i - u
    if i > 0 and th > 1e-9:
        f[i - 1] *= 1.0 - th
    f[i:] = 0.0
    return f


def tail_to_measure(f, grid):
    return GridMeasure.from_tail(grid, f)


def measure_to_tail(mu):
    return np.asarray(mu.tail, dtype=float)


def weighted_window(C_q, grid, cap=_WEIGHT_CAP):
    """Mask |x| <= log(cap)/C_q where the weighted distance is above round-off."""
    return np.abs(grid.points) <= math.log(cap) / C_q


def d_weighted_tail(f, g, C_q, grid, cap=_WEIGHT_CAP):
    m = weighted_window(C_q, grid, cap)
    x = grid.points[m]
    return float(np.max(np.abs(f[m] - g[m]) * np.exp(C_q * np.abs(x))))


# -- solver ----------------------------------------------------------------


def seed_tail(params, a=INF):
    x = params.grid.points
    f0 = np.where(x > 0, np.exp(-np.power(np.maximum(x, 0.0), params.q) / params.q), 1.0)
    return cut_tail(f0, a, params.grid)


def _cut_double_step(f, params, a):
    g = params.grid
    return cut_tail(cavity_step(cut_tail(cavity_step(f, params), a, g), params), a, g)


def _iterate_cut(f, params, a, tol, max_iter):
    """Double steps of the cut-off equation (the cut acts on both halves).

    Far cut-offs pin the translation mode only weakly, so the phase ends
    at ``tol`` or after ``max_iter`` steps; it is a warm start for the
    symmetrisation that follows.
    """
    trace = []
    for it in range(max_iter):
        g = _cut_double_step(f, params, a)
        d = d_weighted_tail(f, g, params.C_q, params.grid)
        trace.append(d)
        f = g
        if d <= tol:
            break
    return f, trace


def solve_cavity(params, a=6.0, tol=1e-8, max_iter=1000, anneal=(0, 2, 4), anneal_tol=1e-2,
                 cut_iter=200, return_info=False):
    """Stationary solution of the cavity equation.

    Double steps of the cut-off equation at a, a+2, a+4 (each from the
    previous solution), then damped single steps f <- (f + P_k I[f]) / 2 with
    no cut-off. The damping removes the period-2 translation mode, so the
    limit is the solution itself rather than a translate. Convergence is
    measured in the weighted distance on the window where its weight stays
    below 1e6 (beyond it the weight only amplifies round-off).
    """
    g = params.grid
    f = seed_tail(params, a)
    info = {"cut_traces": [], "anneal": [], "a": a}
    prev = None
    for da in anneal:
        f, tr = _iterate_cut(f, params, a + da, tol, cut_iter)
        info["cut_traces"].append({"a": a + da, "iterations": len(tr), "trace": tr,
                                   "ratios": _ratios(tr), "reached_tol": bool(tr[-1] <= tol)})
        mu = tail_to_measure(f, g)
        if prev is not None:
            info["anneal"].append({"a": a + da, "d_weak_prev": d_weak(prev, mu)})
        prev = mu
    anneal_ok = all(r["d_weak_prev"] <= anneal_tol for r in info["anneal"])
    trace = []
    for it in range(max_iter):
        h = cavity_step(f, params)
        d = d_weighted_tail(f, h, params.C_q, g)
        trace.append(d)
        if d <= tol:
            break
        f = 0.5 * (f + h)
    else:
        raise NotConverged("symmetrisation did not converge", last=f, trace=trace)
    info["symmetrise_trace"] = trace
    info["iterations"] = sum(t["iterations"] for t in info["cut_traces"]) + len(trace)
    info["residual_sup"] = float(np.max(np.abs(cavity_step(f, params) - f)))
    info["anneal_ok"] = bool(anneal_ok)
    mu = tail_to_measure(f, g)
    mu.meta.update({"solver": info, "params": params.to_dict()})
    return (mu, info) if return_info else mu


def _ratios(trace):
    return [b / a for a, b in zip(trace, trace[1:]) if a > 0]


# -- tail-decay certificates -------------------------------------------------


def fit_upper_envelope(f, params, xs=(2.0, 2.5, 3.0)):
    """Smallest C with f(x) <= C x^{q(k-1)} e^{-x^q} at the probe points."""
    g = params.grid
    q, k = params.q, params.k
    vals = np.interp(xs, g.points, f)
    env = np.power(xs, q * (k - 1)) * np.exp(-np.power(xs, q))
    return float(np.max(vals / env)), [float(v) for v in vals / env]


def fit_lower_envelope(f, params, xs=(2.0, 2.5, 3.0)):
    """Smallest C' with 1 - f(-x) <= C' x^{qk(k-1)} e^{-k x^q} at the probe points."""
    g = params.grid
    q, k = params.q, params.k
    xs = np.asarray(xs, dtype=float)
    vals = 1.0 - np.interp(-xs, g.points, f)
    env = np.power(xs, q * k * (k - 1)) * np.exp(-k * np.power(xs, q))
    return float(np.max(vals / env)), [float(v) for v in vals / env]


# -- adapted classes -------------------------------------------------------


def adapted_envelope(f_bar, spec, grid):
    """Extreme tail function of an adapted class.

    Upper side: the largest non-increasing f <= min(1, f_bar + delta f_pert).
    Lower side: the smallest non-increasing f >= max(0, f_bar - delta f_pert).
    """
    p = f_pert(grid.points, spec.M, spec.C_q)
    if spec.side == "upper":
        b = np.minimum(1.0, f_bar + spec.delta * p)
        return np.minimum.accumulate(b)
    b = np.maximum(0.0, f_bar - spec.delta * p)
    return np.maximum.accumulate(b[::-1])[::-1]


def in_adapted_upper_class(f, f_bar, M, C_q, delta, grid, slack=1e-12):
    return bool(np.all(f <= f_bar + delta * f_pert(grid.points, M, C_q) + slack))


def in_adapted_lower_class(f, f_bar, M, C_q, delta, grid, slack=1e-12):
    return bool(np.all(f >= f_bar - delta * f_pert(grid.points, M, C_q) - slack))


def shift_tail(f, c, grid):
    """Tail of X + c for a tail array f (sub-grid shifts by interpolation)."""
    mu = translate_interp(tail_to_measure(f, grid), c)
    return measure_to_tail(mu)


def check_pert_bounds(params, xs=None):
    """Closed forms for I[f_pert] against the quadrature.

    For x <= -M: I = Gamma(q)/C^q e^{Cx}. For |x| <= M the exact value is
    e^{Cx} Gamma(q, C(x+M)) / C^q, which reduces to the constant
    Gamma(q) C^{-q} e^{-CM} only for q = 1. For x in [M, 3M] the bound is
    Gamma(q, 2CM) C^{-q} + x^{q-1} e^{-CM} / C (the first term bounds the
    y >= M part, the second the y <= -M part).
    """
    g = params.grid
    q, C, M = params.q, params.C_q, params.M
    fp = f_pert(g.points, M, C)
    lam = convolve_I(fp, q, g)
    x = g.points
    gq = math.gamma(q)
    out = {}
    left = (x <= -M) & (x >= -2 * M)
    exact_left = gq / C ** q * np.exp(C * x[left])
    out["left_max_rel_err"] = float(np.max(np.abs(lam[left] - exact_left) / exact_left))
    mid = np.abs(x) <= M
    exact_mid = np.exp(C * x[mid]) * special.gammaincc(q, C * (x[mid] + M)) * gq / C ** q
    out["mid_max_abs_err"] = float(np.max(np.abs(lam[mid] - exact_mid)))
    right = (x >= M) & (x <= 3 * M)
    xr = x[right]
    first = np.exp(C * xr) * special.gammaincc(q, C * (xr + M)) * gq / C ** q
    second = np.power(xr - M, q - 1) * (math.exp(-C * M) - np.exp(-C * xr)) / C
    out["right_max_ratio"] = float(np.max(lam[right] / (first + second)))
    literal = (math.exp(-C * M) / C + gq * C ** (-q) * math.exp(-C * M)) * np.power(xr, q - 1)
    out["right_literal_max_ratio"] = float(np.max(lam[right] / literal))
    return out


def check_Pk_inequalities(k, lambda_grid, delta_grid, lambda_pert_grid):
    """Both perturbation inequalities for P_k on the product grid.

    Slack is reported as the minimum of (rhs - lhs) for the upper-bound form
    and (lhs - rhs) for the lower-bound form; non-negative means it holds.
    """
    lam, dl, lp = np.meshgrid(np.asarray(lambda_grid, float), np.asarray(delta_grid, float),
                              np.asarray(lambda_pert_grid, float), indexing="ij")
    e = dl * lp
    base = poisson_Pk(k, lam)
    s1 = poisson_Pk(k, lam + e) - np.exp(-e) * base
    s2 = np.exp(e) * base - poisson_Pk(k, np.maximum(lam - e, 0.0))
    tol = 1e-14
    return {"k": int(k), "sum_min_slack": float(s1.min()), "sum2_min_slack": float(s2.min()),
            "sum_holds": bool(s1.min() >= -tol), "sum2_holds": bool(s2.min() >= -tol),
            "n_points": int(s1.size)}


def _probes(f_bar, spec, grid, n_random, rng):
    ext = adapted_envelope(f_bar, spec, grid)
    out = [ext]
    for _ in range(n_random):
        t = rng.random()
        out.append(t * ext + (1 - t) * f_bar)
    return out


def certify_adapted_contraction(params, f_bar, delta_grid=None, M_ladder=(1.0, 2.0, 3.0, 4.0),
                                L_max=20.0, n_random=3, seed=0):
    """Search (M, L, delta_0) such that Phi maps adapted classes as required.

    For each delta the extreme probe of the upper class (and random
    interpolants towards f_bar) must land, after translation by L delta, in
    the lower class (M, delta/2); symmetrically for the lower class. Because
    the operator reverses order, the extreme probe is the binding one.
    Returns (L, delta_0, report).
    """
    if delta_grid is None:
        delta_grid = [0.4 * 0.5 ** i for i in range(7)]
    deltas = sorted(float(d) for d in delta_grid)
    rng = np.random.default_rng(seed)
    witnesses = []
    for M in M_ladder:
        Ls, Ks = [], []
        ok = []
        for d in deltas:
            res = _certify_delta(params, f_bar, M, d, L_max, n_random, rng)
            ok.append(res["ok"])
            if res["ok"]:
                Ls.append(res["L"])
                Ks.append(res["K"])
            else:
                witnesses.append({"M": M, "delta": d, "x": res.get("x")})
        # passing deltas must be the smallest ones
        n_ok = next((i for i, v in enumerate(ok) if not v), len(ok))
        if n_ok >= max(1, len(deltas) - 1) and n_ok > 0:
            delta_0 = deltas[n_ok] if n_ok < len(deltas) else min(0.99, 2 * deltas[-1])
            L = max(Ls[:n_ok])
            report = {"M": M, "C_q": params.C_q, "L": L, "delta_0": delta_0,
                      "K": max(Ks[:n_ok]), "deltas": deltas[:n_ok], "L_per_delta": Ls[:n_ok],
                      "grid_relative": True}
            return L, delta_0, report
    raise CertificationFailed("adapted contraction not certified on the ladders", witnesses=witnesses)


def _certify_delta(params, f_bar, M, delta, L_max, n_random, rng):
    g = params.grid
    C = params.C_q
    p = f_pert(g.points, M, C)
    inner = np.abs(g.points) < M
    res = {"ok": False}
    K = 0.0
    needL = 0.0
    for side in ("upper", "lower"):
        spec = AdaptedClassSpec(M, C, delta, side)
        for pr in _probes(f_bar, spec, g, n_random, rng):
            img = cavity_step(pr, params)
            # intermediate bound: deviation on the compact is K delta, outside delta/2 f_pert
            dev = (f_bar - img) if side == "upper" else (img - f_bar)
            K = max(K, float(np.max(dev[inner])) / delta)
            outside_ok = np.all(dev[~inner] <= 0.5 * delta * p[~inner] + 1e-12)
            if not outside_ok:
                bad = np.argmax(dev - 0.5 * delta * p)
                res["x"] = float(g.points[bad])
                return res
            L = _min_translation(img, f_bar, M, C, delta, side, L_max, g)
            if L is None:
                res["x"] = None
                return res
            needL = max(needL, L)
    return {"ok": True, "L": needL, "K": K}


def _min_translation(img, f_bar, M, C, delta, side, L_max, g):
    """Smallest L on a 1/32 ladder making T_{+-L delta} img lie in the target class."""
    sign = 1.0 if side == "upper" else -1.0
    check = in_adapted_lower_class if side == "upper" else in_adapted_upper_class
    for L in np.arange(0.0, L_max + 1e-9, 1.0 / 32):
        sh = shift_tail(img, sign * L * delta, g)
        if check(sh, f_bar, M, C, delta / 2, g):
            return float(L)
    return None


# -- RdeModel adapter ---------------------------------------------------------


class CavityModel(RdeModel):
    """Deterministic push-forward plus a truncated Poisson sampler for trees."""

    center_method = "band"
    n_mc = 0
    # Delta(a) follows the tail e^{-a^q/q}, so the slope needs a longer ladder
    a_ladder = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)

    def __init__(self, params, T=None, max_children=None):
        self.params = params
        self.grid = params.grid
        self.T = T
        self.max_children = max_children
        self._cert = None

    def orientation(self):
        return "two-step-increasing"

    def pushforward(self, mu, cutoff=INF, seed=0):
        try:
            f = cavity_step(measure_to_tail(mu), self.params)
        except CollapseSignal:
            return dirac(-INF, self.grid)
        nu = tail_to_measure(f, self.grid)
        return measure_cutoff(nu, cutoff) if cutoff != INF else nu

    def in_domain(self, mu):
        # mass beyond the window is read as the extrapolated tail, not as an atom
        return mu.atom_pos_inf + mu.tail[-1] <= _COLLAPSE_LEVEL

    # tree simulation
    def configure_truncation(self, mu_bar, eps=1e-9):
        """Choose T and the child cap from the solved measure.

        A point beyond T can only change a node when xi - X falls below
        y*, the (1 - eps) quantile of mu_bar; the expected number of such
        points is int_T^inf t^{q-1} f(t - y*) dt, made <= eps. The child cap
        is the (1 - eps) quantile of the Poisson count on (0, T].
        """
        q = self.params.q
        g = self.grid
        f = measure_to_tail(mu_bar)
        y_star = float(np.interp(eps, f[::-1], g.points[::-1]))
        T = 0.5
        while True:
            t = np.arange(T, T + 40, g.step)
            tail = np.interp(t - y_star, g.points, f, right=0.0)
            mass = float(np.sum(np.power(t, q - 1) * tail) * g.step)
            if mass <= eps:
                break
            T += 0.5
        mean = T ** q / q
        cap = int(special.pdtrik(1 - eps, mean)) + 1
        cap = max(cap, self.params.k)
        self.T = T
        self.max_children = cap
        self._cert = {"T": T, "max_children": cap, "eps": eps, "y_star": y_star,
                      "expected_missed": mass, "mean_count": mean}
        return self._cert

    def truncation_certificate(self):
        return dict(self._cert) if self._cert else None

    def _require_T(self):
        if self.T is None or self.max_children is None:
            raise DomainError("call configure_truncation(mu_bar) before sampling trees")

    def sample_noise(self, rng, size=None):
        """Sorted Poisson points on (0, T], shape (size, max_children), padded with inf.

        Given the count, the points are T U^(1/q) for sorted uniforms U.
        """
        self._require_T()
        q, T, Mc = self.params.q, self.T, self.max_children
        n = 1 if size is None else int(size)
        counts = np.minimum(rng.poisson(T ** q / q, size=n), Mc)
        pts = T * np.power(rng.random((n, Mc)), 1.0 / q)
        col = np.arange(Mc)[None, :]
        # mask before sorting: the first `count` draws are the points
        out = np.sort(np.where(col < counts[:, None], pts, INF), axis=1)
        return out[0] if size is None else out

    def relation(self, children, noise):
        noise = np.asarray(noise, dtype=float)
        children = np.asarray(children, dtype=float)
        with np.errstate(invalid="ignore"):
            v = np.where(np.isinf(noise), INF, noise - children)
        k = self.params.k
        return np.partition(v, k - 1, axis=-1)[..., k - 1]

    def arity(self):
        self._require_T()
        return self.max_children

    def describe(self):
        d = {"family": "cavity", "params": self.params.to_dict()}
        if self._cert:
            d["truncation"] = self._cert
        return d


def solved_model(q, k, grid=CAVITY_GRID, a=6.0, tol=1e-8, eps=1e-9):
    """(model, mu_bar) with truncation configured."""
    params = CavityParams(q, k, grid=grid)
    mu = solve_cavity(params, a=a, tol=tol)
    m = CavityModel(params)
    m.configure_truncation(mu, eps)
    return m, mu


def kth_point_tail(params):
    """Tail of the k-th Poisson point: P_k(x^q / q) for x > 0, 1 otherwise."""
    x = params.grid.points
    lam = np.power(np.maximum(x, 0.0), params.q) / params.q
    return np.where(x > 0, poisson_Pk(params.k, lam), 1.0)
