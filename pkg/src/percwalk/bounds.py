"""Analytic bound pipeline: the two-regime growth profile, the associated
decay ODE, its piecewise closed forms, and the lower-bound assembly.

The ODE a' = -a / (8 F_inv(4/a)^2), a(0) = 1 is integrated in the variables
L = -log a and s = log(1 + t); both substitutions are exact and tame the
stiffness at large t.  In each of the three branches of F_inv a power of
(L + log 4) is exactly linear in t, which the piecewise fit exploits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy.integrate import solve_ivp

from percwalk.percolation import ClusterGraph
from percwalk.walk import WalkSeries, exact_visited_distribution

__all__ = [
    "NashProfile",
    "OdeSolution",
    "BoundCurve",
    "nash_ode_solve",
    "tail_exponent",
    "piecewise_constants_fit",
    "surrogate_optimal_r",
    "lower_bound_assemble",
    "lower_bound_assemble_exact",
    "alpha_transfer",
    "lemma_4_5_check",
    "fit_exponent",
    "ALPHA_ONE",
]

LOG4 = float(np.log(4.0))
ALPHA_ONE = 1.0 / (2.0 * np.sqrt(5.0))


@dataclass(frozen=True)
class NashProfile:
    """Growth profile F(k) = e^{Ck} below the knee k0 = c n^gamma, e^{Ck^d} above."""

    d: int
    n: int
    C: float = 1.0
    c: float = 1.0
    gamma: float = None

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 / (2 * (self.d + 2)))
        if self.d < 2 or self.n < 1 or self.C <= 0 or self.c <= 0:
            raise ValueError("need d >= 2, n >= 1, C > 0, c > 0")
        if not 0 < self.gamma < 1.0 / (self.d + 2):
            raise ValueError(f"gamma must lie in (0, 1/(d+2)), got {self.gamma}")
        if self.knee < 1.0:
            raise ValueError("knee c n^gamma below 1; raise n or c")

    @property
    def knee(self) -> float:
        return self.c * self.n**self.gamma

    def F(self, k: float) -> float:
        if k < self.knee:
            return float(np.exp(self.C * k))
        return float(np.exp(self.C * k**self.d))

    def F_inv_log(self, logy: float) -> float:
        """F_inv(y) as a function of log y; the inf-definition gives three
        branches with a plateau at the knee."""
        if logy <= 0:
            return 0.0
        k = logy / self.C
        k0 = self.knee
        if k < k0:
            return k
        if k <= k0**self.d:
            return k0
        return k ** (1.0 / self.d)

    def F_inv(self, y: float) -> float:
        return self.F_inv_log(float(np.log(y)))

    def regime_times(self, t: np.ndarray, L: np.ndarray) -> tuple[float, float]:
        """(t1, t2): where log(4/a) crosses C k0 and C k0^d."""
        lvl1 = self.C * self.knee - LOG4
        lvl2 = self.C * self.knee**self.d - LOG4
        t1 = float(np.interp(lvl1, L, t))
        t2 = float(np.interp(lvl2, L, t))
        return t1, t2


@dataclass
class OdeSolution:
    """Samples of the decay ODE, stored as L = -log a to dodge underflow."""

    profile: NashProfile
    t: np.ndarray
    L: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return np.exp(-self.L)


def nash_ode_solve(profile: NashProfile, t_max: float, n_samples: int = 2000,
                   rtol: float = 1e-10, max_step: float = np.inf) -> OdeSolution:
    """Integrate a' = -a / (8 F_inv(4/a)^2) from a(0) = 1 up to t_max."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")

    def rhs(s, y):
        L = y[0]
        t = np.expm1(s)
        f = profile.F_inv_log(LOG4 + L)
        return [(1.0 + t) / (8.0 * f * f)]

    s_max = float(np.log1p(t_max))
    s_eval = np.linspace(0.0, s_max, n_samples)
    sol = solve_ivp(rhs, (0.0, s_max), [0.0], t_eval=s_eval, rtol=rtol,
                    atol=1e-12, max_step=max_step, method="RK45")
    if not sol.success:
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    t = np.expm1(sol.t)
    return OdeSolution(profile, t, sol.y[0])


def tail_exponent(solution: OdeSolution, decades: float = 1.0) -> float:
    """Least-squares slope of log(-log a) against log t over the last decades."""
    t, L = solution.t, solution.L
    keep = (t > 0) & (L > 0) & (t >= t[-1] / 10**decades)
    if np.count_nonzero(keep) < 3:
        raise ValueError("not enough tail samples")
    slope, _ = np.polyfit(np.log(t[keep]), np.log(L[keep]), 1)
    return float(slope)


def piecewise_constants_fit(solution: OdeSolution) -> dict:
    """Fit the closed forms of -log a on the three regimes of the profile.

    With the additive log 4 shift the forms are exactly linear in t:
    (L + log4)^3 below the knee, L itself on the plateau, and
    (L + log4)^{(d+2)/d} past it.  Returns slopes, intercepts, regime
    boundaries, the worst relative residual of the reconstructed L, and the
    continuity mismatches at the two boundaries.
    """
    prof = solution.profile
    t, L = solution.t, solution.L
    t1, t2 = prof.regime_times(t, L)
    d = prof.d
    powers = (3.0, 1.0, (d + 2.0) / d)
    shifts = (LOG4, 0.0, LOG4)
    masks = (t <= t1, (t >= t1) & (t <= t2), t >= t2)
    fits = []
    worst = 0.0
    for power, shift, mask in zip(powers, shifts, masks):
        if np.count_nonzero(mask) < 3:
            fits.append(None)
            continue
        y = (L[mask] + shift) ** power
        slope, intercept = np.polyfit(t[mask], y, 1)
        pred = np.maximum(slope * t[mask] + intercept, 0.0) ** (1.0 / power) - shift
        denom = np.maximum(np.abs(L[mask]), 1e-3)
        worst = max(worst, float(np.max(np.abs(pred - L[mask]) / denom)))
        fits.append((float(slope), float(intercept)))

    def eval_fit(fit, power, shift, tt):
        slope, intercept = fit
        return max(slope * tt + intercept, 0.0) ** (1.0 / power) - shift

    cont = []
    for (left, right), tt in (((0, 1), t1), ((1, 2), t2)):
        if fits[left] is not None and fits[right] is not None:
            a = eval_fit(fits[left], powers[left], shifts[left], tt)
            b = eval_fit(fits[right], powers[right], shifts[right], tt)
            cont.append(abs(a - b) / max(abs(a), 1e-12))
    return {
        "t1": t1, "t2": t2, "fits": fits, "powers": powers, "shifts": shifts,
        "max_relative_residual": worst,
        "continuity_mismatch": cont,
        "slopes_positive": all(f is None or f[0] > 0 for f in fits),
    }


# ---------------------------------------------------------------------------
# Lower bound assembly
# ---------------------------------------------------------------------------

def surrogate_optimal_r(n: int, d: int, r_max: int | None = None) -> tuple[int, float]:
    """argmin over integer r >= 1 of r^d + n / r^2, by direct scan."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if r_max is None:
        r_max = max(2, int(np.ceil(n ** (1.0 / d))))
    rs = np.arange(1, r_max + 1, dtype=np.float64)
    vals = rs**d + n / rs**2
    i = int(np.argmin(vals))
    return int(rs[i]), float(vals[i])


def lower_bound_assemble(r: int, n: int, alpha: float, d: int,
                         confinement: float) -> float:
    """alpha^{r^d} / (2 d r^d) times the squared confinement probability."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if r < 1:
        raise ValueError("r must be >= 1")
    if not 0.0 <= confinement <= 1.0:
        raise ValueError("confinement probability out of [0, 1]")
    if n <= r:
        confinement = 1.0  # the walk cannot leave the ball in n <= r steps
    return alpha ** (r**d) / (2.0 * d * r**d) * confinement**2


def lower_bound_assemble_exact(cluster: ClusterGraph, r: int, n: int,
                               alpha: float, confinement: float) -> float:
    """Cluster-aware assembly: nu(0) alpha^{|B_r|} conf^2 / sum_{B_r} nu.

    Unlike ``lower_bound_assemble`` this keeps the reversible measure nu
    (vertex degree) and the actual ball size, so the result is a certified
    lower bound on E[alpha^{N_2n} 1{X_2n = 0}] for every finite cluster.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if r < 1:
        raise ValueError("r must be >= 1")
    if not 0.0 <= confinement <= 1.0:
        raise ValueError("confinement probability out of [0, 1]")
    if n <= r:
        confinement = 1.0
    dist = cluster.distances_from_origin()
    in_ball = (dist >= 0) & (dist <= r)
    deg = cluster.degrees
    nu_ball = float(deg[in_ball].sum())
    nu0 = float(deg[cluster.origin])
    return nu0 * alpha ** int(in_ball.sum()) / nu_ball * confinement**2


def alpha_transfer(c0: float, alpha0: float, alpha: float) -> float:
    """Rescale a decay constant from rate alpha0 to rate alpha.

    For alpha <= alpha0 the original constant still works by domination and
    is returned unchanged; otherwise it shrinks by log(alpha)/log(alpha0).
    """
    if not (0.0 < alpha < 1.0 and 0.0 < alpha0 < 1.0):
        raise ValueError("alpha and alpha0 must lie in (0, 1)")
    if alpha <= alpha0:
        return c0
    return c0 * float(np.log(alpha) / np.log(alpha0))


def lemma_4_5_check(cluster: ClusterGraph, n: int, budget: int = 2**28) -> dict:
    """Exact check of the doubling inequalities tying N_n to pinned N_2n.

    For every m with P(N_n = m) > 0 verifies
    P(N_n = m)^2 <= 2d (2m+1)^d P(N_2n <= 2m, X_2n = 0), and reports the
    empirical constant E[(1/2)^{N_2n} 1{X_2n=0}] / E[alpha1^{N_n}] with
    alpha1 = 1/(2 sqrt 5).
    """
    d = int(cluster.meta.get("d", cluster.coords.shape[1]))
    dist_n = exact_visited_distribution(cluster, n, budget)
    dist_2n = exact_visited_distribution(cluster, 2 * n, budget)

    pn = {}
    for (m, _), pr in dist_n.items():
        pn[m] = pn.get(m, 0.0) + pr
    pinned_2n = {}
    for (m, pin), pr in dist_2n.items():
        if pin:
            pinned_2n[m] = pinned_2n.get(m, 0.0) + pr

    per_m = []
    all_hold = True
    for m in sorted(pn):
        lhs = pn[m] ** 2
        tail = sum(pr for mm, pr in pinned_2n.items() if mm <= 2 * m)
        rhs = 2.0 * d * (2 * m + 1) ** d * tail
        ok = lhs <= rhs * (1 + 1e-12)
        all_hold = all_hold and ok
        per_m.append({"m": m, "lhs": lhs, "rhs": rhs, "holds": ok})

    lhs_lemma = sum(0.5**m * pr for m, pr in pinned_2n.items())
    rhs_lemma = sum(ALPHA_ONE**m * pr for m, pr in pn.items())
    return {
        "per_m": per_m, "doubling_holds": all_hold,
        "lemma_lhs": lhs_lemma, "lemma_rhs": rhs_lemma,
        "empirical_c0": lhs_lemma / rhs_lemma if rhs_lemma > 0 else float("inf"),
    }


# ---------------------------------------------------------------------------
# Exponent fitting and bound curves
# ---------------------------------------------------------------------------

def fit_exponent(series: WalkSeries, noise_factor: float = 10.0) -> dict:
    """Slope of log(-log value) against log n over the usable entries.

    Entries must sit strictly inside (0, 1) and clear the Monte Carlo noise
    floor (value > noise_factor * stderr); at least three are required.
    """
    pts = [(n, v) for n, v, se, _ in series.entries
           if 0.0 < v < 1.0 and v > noise_factor * se and n >= 1]
    if len(pts) < 3:
        raise ValueError(f"only {len(pts)} usable points, need at least 3")
    x = np.log([n for n, _ in pts])
    y = np.log(-np.log([v for _, v in pts]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return {"slope": float(slope), "intercept": float(intercept),
            "residual": resid, "points_used": len(pts)}


@dataclass
class BoundCurve:
    """Per-n values of exp(-constant n^exponent) for one side of the bracket."""

    side: str
    constant: float
    exponent: float
    n_values: Sequence[int]
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.side not in ("upper", "lower"):
            raise ValueError("side must be 'upper' or 'lower'")
        if not 0.0 < self.exponent < 1.0:
            raise ValueError("exponent must lie in (0, 1)")
        n = np.asarray(self.n_values, dtype=np.float64)
        self.values = np.exp(-self.constant * n**self.exponent)

    def to_csv(self, out: TextIO):
        out.write("n,bound,side,constant,exponent\n")
        for n, b in zip(self.n_values, self.values):
            out.write(f"{n},{b!r},{self.side},{self.constant!r},{self.exponent!r}\n")
