"""Scalar tree recursions, contraction quantities, potentials and uniqueness thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gibbs_exact import GibbsParams

INF = math.inf


class RecursionParamError(ValueError):
    pass


@dataclass(frozen=True)
class RecursionContext:
    params: GibbsParams
    max_degree: int

    def __post_init__(self):
        p = self.params
        if not (0 <= p.beta <= p.gamma):
            raise RecursionParamError("recursion regime needs 0 <= beta <= gamma")
        if self.max_degree < 1:
            raise RecursionParamError("max_degree must be at least 1")


@dataclass(frozen=True)
class LogRatioInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise RecursionParamError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def union(self, other: "LogRatioInterval") -> "LogRatioInterval":
        return LogRatioInterval(min(self.lo, other.lo), max(self.hi, other.hi))


@dataclass(frozen=True)
class PotentialParams:
    s: float
    delta: float
    c: float

    def __post_init__(self):
        if not (self.s >= 1 and self.delta > 0 and self.c > 0):
            raise RecursionParamError(f"invalid potential parameters {self}")


# ---------------------------------------------------------------------------
# Recursions


def f_d(xs: Sequence[float], p: GibbsParams) -> float:
    """lambda * prod (beta x + 1)/(x + gamma) over x in [0, +inf]."""
    out = p.lam
    for x in xs:
        if x == INF:
            out *= p.beta
        else:
            out *= (p.beta * x + 1.0) / (x + p.gamma)
    return out


def _log_factor(y: np.ndarray, p: GibbsParams) -> np.ndarray:
    """log((beta e^y + 1)/(e^y + gamma)) with the limits at y = +-inf."""
    y = np.asarray(y, dtype=float)
    lb = math.log(p.beta) if p.beta > 0 else -INF
    lg = math.log(p.gamma)
    with np.errstate(invalid="ignore"):
        out = np.logaddexp(lb + y, 0.0) - np.logaddexp(y, lg)
    out = np.where(y == INF, lb, out)
    out = np.where(y == -INF, -lg, out)
    return out


def h_d(ys: Sequence[float], p: GibbsParams) -> float:
    """log lambda + sum log((beta e^y + 1)/(e^y + gamma))."""
    if len(ys) == 0:
        return math.log(p.lam)
    return float(math.log(p.lam) + np.sum(_log_factor(np.asarray(ys, dtype=float), p)))


def h_deriv(x, p: GibbsParams):
    """h(x) = -(1 - beta gamma) e^x / ((beta e^x + 1)(e^x + gamma)); vectorised."""
    x = np.asarray(x, dtype=float)
    k = 1.0 - p.beta * p.gamma
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e = np.exp(np.minimum(x, 0.0))
        en = np.exp(-np.maximum(x, 0.0))
        # for x <= 0: e^x / ((beta e^x + 1)(e^x + gamma))
        lo = e / ((p.beta * e + 1.0) * (e + p.gamma))
        # for x > 0: 1 / ((beta e^x + 1)(1 + gamma e^-x))
        hi = 1.0 / ((p.beta / en + 1.0) * (1.0 + p.gamma * en))
        val = np.where(x <= 0, lo, hi)
    plus_limit = 1.0 if p.beta == 0 else 0.0
    val = np.where(x == INF, plus_limit, val)
    val = np.where(x == -INF, 0.0, val)
    out = -k * val
    return float(out) if out.ndim == 0 else out


def log_ratio_interval(d: int, p: GibbsParams) -> LogRatioInterval:
    """J_d: range of log-ratios at a vertex with d children."""
    lam = math.log(p.lam)
    a = lam + d * (math.log(p.beta) if p.beta > 0 else -INF) if d > 0 else lam
    b = lam - d * math.log(p.gamma)
    return LogRatioInterval(min(a, b), max(a, b))


def log_ratio_set(max_degree: int, p: GibbsParams) -> LogRatioInterval:
    """J: union of J_d over d = 1..max_degree."""
    out = log_ratio_interval(1, p)
    for d in range(2, max_degree + 1):
        out = out.union(log_ratio_interval(d, p))
    return out


def _grid_sup_abs_h(p: GibbsParams, lo: float, hi: float, points: int = 4096) -> float:
    a = max(lo, -60.0)
    b = min(hi, 60.0)
    xs = np.linspace(a, b, points) if b > a else np.array([a])
    vals = np.abs(h_deriv(xs, p))
    i = int(np.argmax(vals))
    # refine around the best grid point
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, len(xs) - 1)]
    fine = np.linspace(left, right, points)
    best = max(float(vals.max()), float(np.abs(h_deriv(fine, p)).max()))
    for end in (lo, hi):
        best = max(best, abs(float(h_deriv(end, p))))
    return best


def delta_contraction_sup(p: GibbsParams, max_degree: int | None = None) -> float:
    """sup |h| over the reachable log-ratios.

    Closed forms: Ising |beta-1|/(beta+1); hard-core lambda/(1+lambda) over J.
    Otherwise a refined grid sup over J (when max_degree is given) or the line.
    """
    if p.model_tag == "ising" or (p.beta == p.gamma and p.lam == 1.0):
        return abs(p.beta - 1.0) / (p.beta + 1.0)
    if p.model_tag == "hardcore" or (p.beta == 0.0 and p.gamma == 1.0):
        return p.lam / (1.0 + p.lam)
    if p.beta * p.gamma == 1.0:
        return 0.0
    if max_degree is None:
        return _grid_sup_abs_h(p, -INF, INF)
    j = log_ratio_set(max_degree, p)
    return _grid_sup_abs_h(p, j.lo, j.hi)


# ---------------------------------------------------------------------------
# Thresholds


def lambda_c(k: float) -> float:
    """Hard-core uniqueness threshold k^k / (k-1)^(k+1)."""
    if not k > 1:
        raise RecursionParamError(f"lambda_c needs k > 1, got {k}")
    return math.exp(k * math.log(k) - (k + 1) * math.log(k - 1))


def _log_lambda_c(z: float) -> float:
    return z * math.log(z) - (z + 1) * math.log(z - 1)


def delta_c(lam: float, lo: float = 1 + 1e-9, hi: float = 1e6, tol: float = 1e-12) -> float:
    """Inverse of lambda_c by bisection on log lambda_c (strictly decreasing)."""
    if not lam > 0:
        raise RecursionParamError("delta_c needs lambda > 0")
    target = math.log(lam)
    if not (_log_lambda_c(hi) <= target <= _log_lambda_c(lo)):
        raise RecursionParamError(f"lambda={lam} outside the bracket of delta_c")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _log_lambda_c(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, lo):
            return 0.5 * (lo + hi)
    raise RecursionParamError("delta_c bisection did not converge")


def u_ising(d: float, delta: float) -> tuple:
    """Interval [(d-1+delta)/(d+1-delta), (d+1-delta)/(d-1+delta)]."""
    if not d > 1 or not 0 < delta < 1:
        raise RecursionParamError("u_ising needs d > 1 and 0 < delta < 1")
    lo = (d - 1 + delta) / (d + 1 - delta)
    return lo, 1.0 / lo


# ---------------------------------------------------------------------------
# Hard-core potential


def hc_potential_chi(y):
    """chi(y) = sqrt(e^y / (1 + e^y))."""
    y = np.asarray(y, dtype=float)
    out = np.exp(0.5 * (y - np.logaddexp(0.0, y)))
    return float(out) if out.ndim == 0 else out


def hc_potential_psi(y):
    """psi(y) = (1/2) sqrt(1 / (y (1 + y))) for y > 0."""
    y = np.asarray(y, dtype=float)
    out = 0.5 / np.sqrt(y * (1.0 + y))
    return float(out) if out.ndim == 0 else out


def f_sym(d: float, x, lam: float):
    return lam / (1.0 + np.asarray(x, dtype=float)) ** d


def f_sym_slope(d: float, x, lam: float):
    """|d/dx F_{d,sym}(x)| = d lambda / (1 + x)^(d+1)."""
    return d * lam / (1.0 + np.asarray(x, dtype=float)) ** (d + 1)


def xi_root(s: float, d: float, x, lam: float):
    """Xi(s, d, x)^(1/s); well defined for s = inf as well."""
    x = np.asarray(x, dtype=float)
    base = hc_potential_psi(f_sym(d, x, lam)) / hc_potential_psi(x) * f_sym_slope(d, x, lam)
    if s == INF:
        return base
    return base * (1.0 / d) ** (1.0 / s)


def xi(s: float, d: float, x, lam: float):
    """Xi(s, d, x) = (1/d) (psi(F(x))/psi(x) |F'(x)|)^s."""
    x = np.asarray(x, dtype=float)
    base = hc_potential_psi(f_sym(d, x, lam)) / hc_potential_psi(x) * f_sym_slope(d, x, lam)
    out = base ** s / d
    return float(out) if np.ndim(out) == 0 else out


def sym_fixpoint(d: float, lam: float) -> float:
    """Unique x > 0 with x = lambda / (1 + x)^d."""
    lo, hi = 0.0, max(lam, 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - lam / (1.0 + mid) ** d > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def potential_exponent(dc: float) -> float:
    """q with 1/q = 1 - ((dc - 1)/2) log(1 + 1/(dc - 1))."""
    inv = 1.0 - 0.5 * (dc - 1.0) * math.log1p(1.0 / (dc - 1.0))
    return 1.0 / inv


def hc_potential_params(lam: float) -> PotentialParams:
    dc = delta_c(lam)
    if not dc > 1:
        raise RecursionParamError("critical degree must exceed 1")
    return PotentialParams(potential_exponent(dc), 1.0 / dc, lam / (1.0 + lam))


@dataclass
class PotentialReport:
    lam: float
    params: PotentialParams
    max_degree: int
    boundedness_value: float
    boundedness_slack: float
    contraction_slack: float  # min over grid of delta^(1/s) - Xi^(1/s)
    witness: dict | None  # worst grid point (d, x, value) when the check fails
    spot_max_ratio: float  # max of lhs / (delta^(1/s) ||m||_s) over random tuples
    grid_points: int
    tol: float = 1e-12
    extra: dict = field(default_factory=dict)

    @property
    def contraction_ok(self) -> bool:
        return self.contraction_slack >= -self.tol

    @property
    def boundedness_ok(self) -> bool:
        return self.boundedness_slack >= -self.tol

    @property
    def passed(self) -> bool:
        return self.contraction_ok and self.boundedness_ok

    def to_json(self) -> dict:
        return {
            "lambda": self.lam, "s0": self.params.s, "delta0": self.params.delta, "c0": self.params.c,
            "max_degree": self.max_degree, "contraction_slack": self.contraction_slack,
            "boundedness_slack": self.boundedness_slack, "spot_max_ratio": self.spot_max_ratio,
            "witness": self.witness, "pass": self.passed,
        }


def _contraction_lhs(d: int, ys: np.ndarray, m: np.ndarray, p: GibbsParams) -> float:
    hy = h_d(ys, p)
    return float(hc_potential_chi(hy) * np.sum(np.abs(h_deriv(ys, p)) / hc_potential_chi(ys) * m))


def verify_potential(p: GibbsParams, pp: PotentialParams, max_degree: int, grid: int = 4096,
                     spot_checks: int = 10_000, seed: int = 0, tol: float = 1e-12) -> PotentialReport:
    """Check the contraction and boundedness conditions of the hard-core potential.

    Contraction is checked through the symmetric reduction Xi(s, d, x) <= delta
    for d = 1..max_degree on a log grid over (0, lambda], plus random
    multivariate spot checks. Boundedness is exact: the maximum is
    lambda/(1+lambda).
    """
    if not (p.beta == 0.0 and p.gamma == 1.0):
        raise RecursionParamError("the implemented potential is for the hard-core model")
    lam = p.lam
    s = pp.s
    budget = 1.0 if s == INF else pp.delta ** (1.0 / s)

    bvalue = lam / (1.0 + lam)
    bslack = pp.c - bvalue

    xs = np.logspace(math.log10(lam) - 12.0, math.log10(lam), grid)
    extra_pts = [lam]
    for d in range(1, max_degree + 1):
        fp = sym_fixpoint(d, lam)
        if fp <= lam:
            extra_pts.append(fp)
    try:
        dc = delta_c(lam)
        fp = sym_fixpoint(dc, lam)
        if fp <= lam:
            extra_pts.append(fp)
    except RecursionParamError:
        pass
    xs = np.unique(np.concatenate([xs, extra_pts]))

    worst = (math.inf, None, None, None)
    for d in range(1, max_degree + 1):
        vals = xi_root(s, d, xs, lam)
        slack = budget - vals
        i = int(np.argmin(slack))
        cand = (float(slack[i]), d, float(xs[i]), float(vals[i]))
        if cand[0] < 1e-6:
            # densify around the near-violation
            lo = xs[max(i - 1, 0)]
            hi = xs[min(i + 1, len(xs) - 1)]
            fine = np.linspace(lo, hi, 4 * grid)
            fv = xi_root(s, d, fine, lam)
            j = int(np.argmax(fv))
            if budget - fv[j] < cand[0]:
                cand = (float(budget - fv[j]), d, float(fine[j]), float(fv[j]))
        if cand[0] < worst[0]:
            worst = cand
    cslack = worst[0]
    witness = None
    if cslack < -tol:
        witness = {"d": worst[1], "x": worst[2], "xi_root": worst[3], "budget": budget,
                   "xi": worst[3] ** s if s != INF else worst[3]}

    rng = np.random.default_rng(seed)
    max_ratio = 0.0
    for _ in range(spot_checks):
        d = int(rng.integers(1, max_degree + 1))
        ys = np.log(lam) - rng.exponential(3.0, size=d)
        m = rng.random(d)
        norm = float(np.max(m)) if s == INF else float(np.sum(m ** s) ** (1.0 / s))
        lhs = _contraction_lhs(d, ys, m, p)
        max_ratio = max(max_ratio, lhs / (budget * norm))

    return PotentialReport(lam, pp, max_degree, bvalue, bslack, cslack, witness, max_ratio, len(xs), tol)


def potential_premise_check(lam: float, rho: float, eps: float = 0.0, max_degree: int | None = None,
                            grid: int = 4096, tol: float = 1e-12) -> PotentialReport:
    """Does the hard-core potential contract at the rate (1 - eps)/rho that the spectral bound needs?

    The contraction scan is rerun against the required rate; on failure the
    witness is the worst grid point.
    """
    if not rho > 0 or not 0 <= eps < 1:
        raise RecursionParamError("need rho > 0 and 0 <= eps < 1")
    pp = hc_potential_params(lam)
    need = (1.0 - eps) / rho
    d = max_degree if max_degree is not None else max(1, math.ceil(rho))
    target = PotentialParams(pp.s, min(pp.delta, need), pp.c)
    rep = verify_potential(GibbsParams.hardcore(lam), target, d, grid=grid, spot_checks=0, tol=tol)
    rep.params = pp
    rep.extra = {"required_delta": need, "delta0": pp.delta}
    return rep


@dataclass
class MarginReport:
    eps: float
    L: float
    lam: float
    delta_c: float
    z: float
    z_ok: bool
    e3_bound: float
    e3_ok: bool

    @property
    def passed(self) -> bool:
        return self.z_ok and self.e3_ok


def uniqueness_margin_check(eps: float, L: float, lam: float) -> MarginReport:
    """For lambda < (1-eps) lambda_c(L): the largest z in (0,1) with (1-z)/L >= 1/delta_c(lambda),
    and the bound lambda/(1+lambda) < e^3/L."""
    if not (0 < eps < 1 and L >= 2 and 0 < lam < (1 - eps) * lambda_c(L)):
        raise RecursionParamError("need 0 < eps < 1, L >= 2 and 0 < lambda < (1-eps) lambda_c(L)")
    dc = delta_c(lam)
    z = 1.0 - L / dc
    e3 = math.exp(3.0) / L
    return MarginReport(eps, L, lam, dc, z, 0.0 < z < 1.0, e3, lam / (1.0 + lam) < e3)
