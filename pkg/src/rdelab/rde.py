"""Model-agnostic cut-off machinery.

Everything here talks to a model only through :class:`RdeModel`. For models
whose relation reverses order (the cavity family) one "step" is the square
Phi_a o Phi, i.e. two applications with the cut-off on the outer one, which
is monotone and translation-equivariant.

Centers are estimated by running the candidate measure and the reference
measure through the same number of plain steps with the same seeds and
reading off the translation between them, so Monte Carlo noise and a small
drift error cancel to first order.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import (DegenerateCutoff, DomainViolation, NotConverged, SearchFailed)
from .measure import INF, GridMeasure, d_weak, dirac, translate, translate_interp

# -- seeds ----------------------------------------------------------------


def as_seed_tuple(seed):
    if seed is None:
        return (0,)
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def subseed(seed, *k):
    return as_seed_tuple(seed) + tuple(int(i) for i in k)


def rng_for(seed):
    return np.random.default_rng(np.random.SeedSequence(list(as_seed_tuple(seed))))


# -- model interface -------------------------------------------------------


class RdeModel:
    """Abstract RDE: push-forward of measures plus a sampler for tree noise."""

    grid = None
    #: "band" (mean of central quantile differences), "median" or "mean"
    center_method = "band"
    #: samples per Monte Carlo push-forward, 0 for deterministic models
    n_mc = 0
    #: bound on infinite atoms for the admissible domain (None = model decides)
    alpha = None
    #: default cut-off ladder for the A7 slope fit
    a_ladder = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)

    def pushforward(self, mu, cutoff=INF, seed=0):
        raise NotImplementedError

    def sample_noise(self, rng, size):
        raise NotImplementedError

    def relation(self, children, noise):
        """Vectorised R: ``children`` has shape (batch, arity)."""
        raise NotImplementedError

    def arity(self):
        raise NotImplementedError

    def orientation(self):
        return "increasing"

    def branching(self):
        """Child slots per tree node."""
        return self.arity()

    @property
    def levels_per_step(self):
        return 2 if self.orientation() == "two-step-increasing" else 1

    def in_domain(self, mu):
        a = 0.05 if self.alpha is None else self.alpha
        return mu.atom_neg_inf <= a and mu.atom_pos_inf <= a

    def describe(self):
        return {}

    @property
    def noise_floor(self):
        return 3.0 / math.sqrt(self.n_mc) if self.n_mc else 0.0


def step(model, mu, a=INF, seed=0):
    """One application of the (possibly squared) cut-off operator."""
    if model.orientation() == "two-step-increasing":
        nu = model.pushforward(mu, INF, seed=subseed(seed, 0))
        return model.pushforward(nu, a, seed=subseed(seed, 1))
    return model.pushforward(mu, a, seed=seed)


def phi(model, mu, n_iter=1, seed=0):
    """Phi^n[mu] with plain (uncut) steps."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    for i in range(n_iter):
        mu = step(model, mu, INF, subseed(seed, i))
    return mu


def phi_cut(model, mu, a, seed=0):
    """Law of min(R(X_1..X_d; xi), a)."""
    if not np.isfinite(a):
        raise ValueError("cut-off must be finite; use phi for a plain step")
    if a < model.grid.grid_min:
        raise DegenerateCutoff("cut-off %g below the grid window" % a)
    return step(model, mu, a, seed)


# -- blocks ---------------------------------------------------------------


@dataclass(frozen=True)
class Subblock:
    a: float
    ell: int

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("ell must be >= 0")

    @property
    def entries(self):
        return [INF] * self.ell + [float(self.a)]


@dataclass(frozen=True)
class Block:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(float(e) for e in self.entries))
        if len(self.entries) < 1:
            raise ValueError("a block has at least one entry")

    @property
    def size(self):
        return len(self.entries)

    @classmethod
    def from_subblocks(cls, subs):
        e = []
        for s in subs:
            e.extend(s.entries)
        return cls(tuple(e))

    @property
    def n_finite(self):
        return sum(1 for e in self.entries if np.isfinite(e))

    def to_dict(self):
        return {"entries": list(self.entries)}


def phi_block(model, mu, block, seed=0):
    """Phi_{b_1} o ... o Phi_{b_n}[mu]: the last entry acts first."""
    for j, b in enumerate(reversed(block.entries)):
        mu = step(model, mu, b, subseed(seed, j))
    return mu


@dataclass
class CutoffSchedule:
    blocks: list
    deltas: list
    epsilons: list
    meta: dict = field(default_factory=dict)

    @property
    def partial_sums(self):
        return [int(v) for v in np.cumsum([b.size for b in self.blocks])]

    @property
    def entries(self):
        out = []
        for b in self.blocks:
            out.extend(b.entries)
        return out

    def cutoff(self, n):
        """a_n for n >= 1 (a_1 is the root's cut-off)."""
        return self.entries[n - 1]

    def to_dict(self):
        d = {"blocks": [b.to_dict() for b in self.blocks], "deltas": list(self.deltas),
             "epsilons": list(self.epsilons), "partial_sums": self.partial_sums}
        if self.meta:
            d["meta"] = self.meta
        return d

    def to_json(self):
        return jsonio.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        blocks = [Block(tuple(float(e) for e in b["entries"])) for b in d["blocks"]]
        return cls(blocks, [float(v) for v in d.get("deltas", [])],
                   [float(v) for v in d.get("epsilons", [])], dict(d.get("meta", {})))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(jsonio.loads(text))


# -- stationary cut-off measures -------------------------------------------


def stationary_cutoff(model, a, tol=None, max_iter=500, seed=0, stop_below=None,
                      patience=2, return_trace=False):
    """Limit of Phi_a^n[Dirac_{+inf}].

    Stops when ``patience`` successive steps move by at most ``tol`` in
    d_weak (the Monte Carlo floor is added to ``tol``). If ``stop_below`` is
    given, the iteration also stops once the median falls below it, which is
    how a drift towards -inf is detected.
    """
    tol = (1e-4 if tol is None else tol) + model.noise_floor
    mu = dirac(INF, model.grid)
    trace = []
    calm = 0
    for n in range(max_iter):
        nu = step(model, mu, a, subseed(seed, n))
        d = d_weak(nu, mu)
        trace.append(d)
        mu = nu
        if stop_below is not None and mu.quantile(0.5) <= stop_below:
            break
        calm = calm + 1 if d <= tol else 0
        if calm >= patience:
            break
    else:
        raise NotConverged("stationary_cutoff did not settle in %d steps" % max_iter,
                           last=mu, trace=trace)
    return (mu, trace) if return_trace else mu


# -- centers --------------------------------------------------------------

_P_BAND = np.linspace(0.1, 0.9, 161)


def offset(nu, ref, method="band"):
    """Translation c such that nu looks like ref shifted by c."""
    if method == "median":
        return float(nu.quantile_interp(0.5) - ref.quantile_interp(0.5))
    if method == "mean":
        if nu.atom_neg_inf or nu.atom_pos_inf or ref.atom_neg_inf or ref.atom_pos_inf:
            return offset(nu, ref, "band")
        return float(np.sum(ref.cdf - nu.cdf) * nu.step)
    q = nu.quantile_interp(_P_BAND) - ref.quantile_interp(_P_BAND)
    return float(np.mean(q))


def _ref_chain(model, mu_bar, seed, n):
    """Phi^n[mu_bar] with step seeds (seed, 0..n-1), cached on the model."""
    cache = model.__dict__.setdefault("_rde_ref_cache", {})
    key0 = (id(mu_bar), as_seed_tuple(seed))
    chain = cache.get(key0)
    if chain is None or chain[0] is not mu_bar:
        chain = (mu_bar, [mu_bar])
        cache[key0] = chain
    lst = chain[1]
    while len(lst) <= n:
        k = len(lst) - 1
        lst.append(step(model, lst[-1], INF, subseed(seed, k)))
    return lst[n]


def default_center_tol(model):
    return 1e-5 if model.n_mc == 0 else max(2e-4, 0.1 * model.noise_floor)


def _chain_center(model, mu, mu_bar, first_cut, tol, max_iter, seed, min_iter=3):
    if tol is None:
        tol = default_center_tol(model)
    cur = mu
    prev = None
    trace = []
    for n in range(max_iter):
        a = first_cut if n == 0 else INF
        cur = step(model, cur, a, subseed(seed, n))
        ref = _ref_chain(model, mu_bar, seed, n + 1)
        if cur.atom_neg_inf > 0.5 or cur.atom_pos_inf > 0.5:
            raise DomainViolation("iterates left the admissible domain")
        c = offset(cur, ref, model.center_method)
        trace.append(c)
        if prev is not None and n + 1 >= min_iter and abs(c - prev) <= tol:
            return c, trace
        prev = c
    raise NotConverged("center did not settle in %d steps (last moves %s)"
                       % (max_iter, trace[-3:]), last=trace[-1], trace=trace)


def center(model, mu, mu_bar, tol=None, max_iter=60, seed=0, return_trace=False):
    """Estimate c~(mu): the c with Phi^n[mu] -> mu_bar_c."""
    if not model.in_domain(mu):
        raise DomainViolation("measure outside the admissible domain")
    c, tr = _chain_center(model, mu, mu_bar, INF, tol, max_iter, seed)
    c += mu.snap_residual - mu_bar.snap_residual
    return (c, tr) if return_trace else c


def _delta_on_grid(model, mu_bar, a, i, tol, seed):
    """Delta_a(c) at the grid translate c = i*step (cached)."""
    cache = model.__dict__.setdefault("_rde_delta_cache", {})
    key = (id(mu_bar), float(a), int(i), as_seed_tuple(seed), tol)
    hit = cache.get(key)
    if hit is not None and hit[0] is mu_bar:
        return hit[1]
    c = i * mu_bar.step
    mu = translate(mu_bar, c).with_residual(0.0)
    s, _ = _chain_center(model, mu, mu_bar, a, tol, 80, seed)
    d = c - s
    cache[key] = (mu_bar, d)
    return d


def delta_fn(model, mu_bar, a, c=0.0, tol=None, seed=0):
    """Delta_a(c) = c - S_a(c).

    Translations live on the grid, so for off-grid ``c`` the value is the
    linear interpolation between the two neighbouring grid translates.
    """
    if not np.isfinite(c):
        raise ValueError("c must be finite")
    if a < model.grid.grid_min:
        raise DegenerateCutoff("cut-off %g below the grid window" % a)
    u = c / mu_bar.step
    i0 = math.floor(u + 1e-9)
    th = u - i0
    d0 = _delta_on_grid(model, mu_bar, a, i0, tol, seed)
    if th <= 1e-9:
        return d0
    d1 = _delta_on_grid(model, mu_bar, a, i0 + 1, tol, seed)
    return (1.0 - th) * d0 + th * d1


def S_a(model, mu_bar, c, a, tol=None, seed=0):
    """Center of Phi_a[mu_bar_c]; S_a(+inf) is the center of Dirac_a."""
    if c == INF:
        return center(model, dirac(a, model.grid), mu_bar, tol=tol, seed=seed)
    return c - delta_fn(model, mu_bar, a, c, tol=tol, seed=seed)


def S_iterate(model, mu_bar, c, a, n, tol=None, seed=0):
    """[c, S_a(c), ..., S_a^n(c)]."""
    out = [c]
    for _ in range(n):
        c = S_a(model, mu_bar, c, a, tol=tol, seed=seed)
        out.append(c)
    return out


# -- block construction ------------------------------------------------------


@dataclass(frozen=True)
class BlockSearchParams:
    delta: float
    delta_prime: float
    epsilon: float
    delta_dblprime: float = None
    epsilon_0: float = None

    def __post_init__(self):
        if self.delta_dblprime is None:
            object.__setattr__(self, "delta_dblprime", 0.5 * (self.delta + self.delta_prime))
        if not self.delta > self.delta_dblprime > self.delta_prime > 0:
            raise ValueError("need delta > delta'' > delta' > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.epsilon_0 is not None and not self.epsilon_0 > 0:
            raise ValueError("epsilon_0 must be positive")

    def to_dict(self):
        return {"delta": self.delta, "delta_prime": self.delta_prime,
                "delta_dblprime": self.delta_dblprime, "epsilon": self.epsilon,
                "epsilon_0": self.epsilon_0}


def translate_closeness(mu_bar, eps):
    """Largest shift c0 with d_weak(mu_bar_{+-c}, mu_bar) <= eps for all |c| <= c0.

    Whole grid steps first, then bisection inside the last cell with
    interpolated (sub-grid) translates.
    """
    def far(c, tr):
        return max(d_weak(tr(mu_bar, c), mu_bar), d_weak(tr(mu_bar, -c), mu_bar)) > eps

    h = mu_bar.step
    i = 0
    while not far((i + 1) * h, translate):
        i += 1
    lo, hi = i * h, (i + 1) * h
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if far(mid, translate_interp):
            hi = mid
        else:
            lo = mid
    return lo


def resolve_epsilon_0(mu_bar, params):
    if params.epsilon_0 is not None:
        return params.epsilon_0
    e0 = translate_closeness(mu_bar, params.epsilon / 2)
    if e0 <= 0:
        raise SearchFailed("epsilon too small for the grid: no translate is eps/2-close")
    return e0


def n_steps_to(model, mu_bar, c, b, target, n_max, tol=None, seed=0):
    """min{n : S_b^n(c) <= target} and the orbit (None if n_max is hit)."""
    orbit = [c]
    while c > target:
        if len(orbit) > n_max:
            return None, orbit
        c = S_a(model, mu_bar, c, b, tol=tol, seed=seed)
        orbit.append(c)
    return len(orbit) - 1, orbit


def b_ladder(b_start, eta=0.05, r=1.25, n=60):
    out = [b_start]
    for j in range(n):
        out.append(out[-1] + eta * r ** j)
    return out


def choose_b1_N(model, mu_bar, c_0, params, seed=0, ladder=None, n_max=4000, tol=None):
    """First b on an increasing ladder meeting the two conclusions needed of (b1, N).

    For each b: N(b) = min{n : S_b^n(c_0) <= 0}; accept when S_b(0) is in
    (-eps_0, 0) and S_b^N(-delta'') > -delta.
    """
    if not c_0 > 0:
        raise ValueError("c_0 must be positive")
    eps0 = resolve_epsilon_0(mu_bar, params)
    dd, d = params.delta_dblprime, params.delta
    if ladder is None:
        ladder = b_ladder(0.0)
    diag = []
    for b in ladder:
        d0 = delta_fn(model, mu_bar, b, 0.0, tol=tol, seed=seed)
        rec = {"b": b, "Delta_b(0)": d0}
        diag.append(rec)
        if not d0 < eps0:
            continue
        rec["Delta ratio"] = delta_fn(model, mu_bar, b, -dd, tol=tol, seed=seed) / d0
        N, _ = n_steps_to(model, mu_bar, c_0, b, 0.0, n_max, tol, seed)
        if N is None:
            rec["N"] = None
            break
        rec["N"] = N
        low = S_iterate(model, mu_bar, -dd, b, N, tol=tol, seed=seed)[-1]
        rec["S^N(-delta'')"] = low
        if low > -d:
            return b, N
    raise SearchFailed("no (b1, N) found on the ladder", {"ladder": diag, "epsilon_0": eps0})


def choose_b0(model, mu_bar, params, seed=0, tol=None, b_tol=None):
    """Smallest b (to b_tol) with Delta_b(-delta') < delta'' - delta' and c~(Dirac_b) > 0."""
    h = mu_bar.step
    b_tol = b_tol or 2 * h
    dp, dd = params.delta_prime, params.delta_dblprime
    c_dirac0 = center(model, dirac(0.0, model.grid), mu_bar, tol=tol, seed=seed)

    def good(b):
        return delta_fn(model, mu_bar, b, -dp, tol=tol, seed=seed) < dd - dp

    lo = model.grid.snap(-c_dirac0)
    hi = lo + 0.25
    while not good(hi):
        lo, hi = hi, hi + 2 * (hi - lo)
        if hi > model.grid.grid_max - 1:
            raise SearchFailed("no b0 found", {"c~(Dirac_0)": c_dirac0})
    if good(lo):
        hi = lo
    while hi - lo > b_tol:
        mid = model.grid.snap(0.5 * (lo + hi))
        if mid in (lo, hi):
            break
        if good(mid):
            hi = mid
        else:
            lo = mid
    b0 = hi
    while True:
        c0 = center(model, dirac(b0, model.grid), mu_bar, tol=tol, seed=seed)
        if c0 > 0:
            return b0, c0
        b0 += h


def make_block(b0, b1, N, ell):
    subs = [Subblock(b1, ell)] * N + [Subblock(b0, ell)]
    return Block.from_subblocks(subs)


def probe_measures(mu_bar, params, eps_prime, offsets=(0.9, 0.5, 0.1)):
    """Translates mu_bar_{c'} for c' = -t*delta' and the extreme members of their eps'-balls.

    The extremes shift the CDF by eps' both horizontally and vertically, the
    displaced mass going to +-inf; every measure eps'-close to mu_bar_{c'}
    lies between them in the stochastic order.
    """
    out = []
    for t in offsets:
        c = -t * params.delta_prime
        base = translate(mu_bar, c).with_residual(0.0)
        out.append(("translate", c, base))
        if t in (offsets[0], offsets[-1]):
            up = np.clip(translate(base, eps_prime).cdf - eps_prime, 0.0, 1.0)
            up = GridMeasure.from_cdf(base.grid, up, 0.0, 1.0 - up[-1])
            lo = np.minimum(translate(base, -eps_prime).cdf + eps_prime, 1.0)
            lo = GridMeasure.from_cdf(base.grid, lo, min(eps_prime, lo[0]), 0.0)
            out.append(("upper", c, up))
            out.append(("lower", c, lo))
    return out


def _fit_translate(nu, mu_bar, method):
    c = offset(nu, mu_bar, method)
    return c, d_weak(nu, translate(mu_bar, c).with_residual(0.0))


def certify_block(model, mu_bar, block, params, eps_prime, seed=0):
    """Check both block properties; returns (ok, evidence)."""
    ev = {"eps_prime": eps_prime}
    img = phi_block(model, dirac(INF, model.grid), block, seed=seed)
    d1 = d_weak(img, mu_bar)
    ev["dirac_image_d_weak"] = d1
    ok = d1 <= params.epsilon
    probes = []
    for kind, cp, mu in probe_measures(mu_bar, params, eps_prime):
        img = phi_block(model, mu, block, seed=seed)
        c, d = _fit_translate(img, mu_bar, model.center_method)
        good = bool(d <= params.epsilon and -params.delta < c < 0)
        probes.append({"kind": kind, "c_in": cp, "c_out": c, "d_weak": d, "pass": good})
        ok = ok and good
        if not ok:
            break
    ev["probes"] = probes
    return bool(ok), ev


def build_block(model, mu_bar, params, seed=0, ell_max=10, tol=None, n_max=4000,
                eps_prime_min=1e-3, min_size=1, return_info=False):
    """A (delta, delta'; epsilon, epsilon')-block b(b1, ell)^N b(b0, ell) and its eps'.

    ell starts at 1, or higher if needed to reach ``min_size`` entries.
    """
    b0, c0 = choose_b0(model, mu_bar, params, seed=seed, tol=tol)
    b1, N = choose_b1_N(model, mu_bar, c0, params, seed=seed, tol=tol, n_max=n_max)
    info = {"b0": b0, "c0": c0, "b1": b1, "N": N, "params": params.to_dict(), "attempts": []}
    ell_start = max(1, -(-min_size // (N + 1)) - 1)
    for ell in range(ell_start, max(ell_max, ell_start + 4) + 1):
        block = make_block(b0, b1, N, ell)
        eps_p = params.epsilon
        while eps_p >= eps_prime_min:
            ok, ev = certify_block(model, mu_bar, block, params, eps_p, seed=seed)
            info["attempts"].append({"ell": ell, **ev, "pass": ok})
            if ok:
                info["ell"] = ell
                return (block, eps_p, info) if return_info else (block, eps_p)
            if ev["dirac_image_d_weak"] > params.epsilon:
                break
            eps_p /= 2
    raise SearchFailed("block certification failed up to ell = %d" % ell_max, info)


def build_schedule(model, mu_bar, delta_0, epsilon_1, n_blocks, seed=0, ratio=0.5,
                   check_preconditions=True, tol=None, ell_max=10, n_max=4000, min_block_size=1):
    """Juxtapose certified (delta_{n-1}, delta_n; eps_{n-1}, eps_n)-blocks, delta_n = ratio^n delta_0."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    alpha = 0.05 if model.alpha is None else model.alpha
    pre = {"ball_in_domain": 2 * epsilon_1 <= alpha,
           "translates_close": d_weak(translate(mu_bar, -delta_0), mu_bar) < epsilon_1}
    if check_preconditions and not all(pre.values()):
        raise ValueError("schedule preconditions fail: %s" % pre)
    deltas, eps, blocks, infos = [], [], [], []
    d_prev, e_prev = delta_0, epsilon_1
    for n in range(1, n_blocks + 1):
        d_n = delta_0 * ratio ** n
        p = BlockSearchParams(d_prev, d_n, e_prev)
        try:
            blk, e_cert, info = build_block(model, mu_bar, p, seed=subseed(seed, n), tol=tol,
                                            ell_max=ell_max, n_max=n_max,
                                            min_size=min_block_size, return_info=True)
        except SearchFailed as exc:
            exc.diagnostics["block_index"] = n
            raise
        e_n = min(e_cert, epsilon_1 / n)
        blocks.append(blk)
        deltas.append(d_n)
        eps.append(e_n)
        infos.append({k: info[k] for k in ("b0", "b1", "N", "ell", "c0")})
        d_prev, e_prev = d_n, e_n
    meta = {"delta_0": delta_0, "epsilon_1": epsilon_1, "ratio": ratio, "preconditions": pre,
            "min_block_size": min_block_size,
            "blocks": infos}
    return CutoffSchedule(blocks, deltas, eps, meta)


# -- assumption checks ---------------------------------------------------------


@dataclass
class AssumptionReport:
    items: list = field(default_factory=list)

    def add(self, name, ok, **evidence):
        self.items.append({"name": name, "pass": bool(ok), "evidence": evidence})

    @property
    def passed(self):
        return all(i["pass"] for i in self.items)

    def item(self, name):
        for i in self.items:
            if i["name"] == name:
                return i
        raise KeyError(name)

    def to_dict(self):
        return {"items": self.items, "pass": self.passed}

    def to_json(self):
        return jsonio.dumps(self.to_dict())


def local_slopes(a, logd):
    a = np.asarray(a, dtype=float)
    logd = np.asarray(logd, dtype=float)
    return np.diff(logd) / np.diff(a)


def superexp_check(a_ladder, deltas, betas=(1, 2, 4)):
    """Local slopes of log Delta against a must end below -beta for every beta."""
    d = np.asarray(deltas, dtype=float)
    ok_vals = d > 0
    a = np.asarray(a_ladder, dtype=float)[ok_vals]
    logd = np.log(d[ok_vals])
    if a.size < 3:
        return False, {"reason": "fewer than three positive Delta values"}
    sl = local_slopes(a, logd)
    final = float(sl[-1])
    decreasing = bool(np.all(np.diff(sl) < 0))
    ok = decreasing and all(final < -b for b in betas)
    return ok, {"a": a.tolist(), "log_delta": logd.tolist(), "slopes": sl.tolist(),
                "final_slope": final, "betas": list(betas), "slopes_decreasing": decreasing}


def check_assumptions(model, mu_bar, a_ladder=None, betas=(1, 2, 4), seed=0, n_probe=200,
                      stat_tol=None, delta_floor=1e-13):
    """Empirical report on A1, A2, A4, A5/A6 and A7 for ``model``.

    ``delta_floor`` drops displacement values below the engine's resolution
    from the A7 slope fit.
    """
    rep = AssumptionReport()
    rng = rng_for(subseed(seed, 99))
    stat_tol = (1e-6 + 2 * model.noise_floor) if stat_tol is None else stat_tol
    d = model.arity()
    dd = 3 if d == "poisson" else d
    # A1, A2 through the relation
    noise = [model.sample_noise(rng) for _ in range(n_probe)]
    x = rng.normal(size=(n_probe, dd)) * 2
    y = x + np.abs(rng.normal(size=(n_probe, dd)))
    r = [model.relation(x[i], noise[i]) for i in range(n_probe)]
    ry = [model.relation(y[i], noise[i]) for i in range(n_probe)]
    if model.orientation() == "two-step-increasing":
        mono = all(b <= a + 1e-12 for a, b in zip(r, ry))
        rep.add("A1", mono, note="R is order-reversing; the squared operator is monotone",
                probes=n_probe)
    else:
        rep.add("A1", all(a <= b + 1e-12 for a, b in zip(r, ry)), probes=n_probe)
    c = rng.normal(size=n_probe) * 3
    sign = -1.0 if model.orientation() == "two-step-increasing" else 1.0
    err = max(abs(model.relation(x[i] + c[i], noise[i]) - (r[i] + sign * c[i]))
              for i in range(n_probe))
    rep.add("A2", err <= 1e-9 * (1 + np.max(np.abs(c))), max_error=float(err))
    # A4: stationarity of mu_bar
    one = step(model, mu_bar, INF, subseed(seed, 0))
    d4 = d_weak(one, mu_bar)
    rep.add("A4", d4 <= stat_tol + 2e-3, d_weak=d4, tol=stat_tol + 2e-3)
    # A5/A6: a probe family converges to translates with continuous centers
    h = mu_bar.step
    shifts = [-0.2, -0.1, 0.0, 0.1, 0.2]
    cs = []
    ok6 = True
    for t in shifts:
        try:
            cs.append(center(model, translate(mu_bar, t).with_residual(0.0), mu_bar, seed=seed))
        except NotConverged:
            ok6 = False
            cs.append(float("nan"))
    err6 = float(np.nanmax(np.abs(np.array(cs) - np.array(shifts)))) if ok6 else INF
    try:
        cd = center(model, dirac(0.0, model.grid), mu_bar, seed=seed)
        cd2 = center(model, dirac(0.5, model.grid), mu_bar, seed=seed)
        err_d = abs(cd2 - cd - 0.5)
    except NotConverged:
        cd, err_d, ok6 = float("nan"), INF, False
    rep.add("A5/A6", ok6 and err6 <= 2 * h and err_d <= 2 * h, shifts=shifts, centers=cs,
            center_dirac0=cd, dirac_equivariance_error=err_d)
    # A7
    if a_ladder is None:
        a_ladder = list(model.a_ladder)
    ds = []
    for a in a_ladder:
        v = delta_fn(model, mu_bar, a, 0.0, seed=seed)
        ds.append(v if v > delta_floor else 0.0)
    ok7, ev7 = superexp_check(a_ladder, ds, betas)
    rep.add("A7", ok7, delta=ds, **ev7)
    return rep
