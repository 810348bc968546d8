"""Click statistics for independent measurement windows.

Between windows the detector input stays dark long enough for a full
recovery, so windows do not influence each other.  The probability of n
clicks given a coherent amplitude is an ordered-time integral of the pulse
density; in the number basis the probability of n clicks given m photons is

    P(n|m) = m!/(m-n)! * int over ordered times of
             density_factor * (1 - exposure)^(m-n),

zero for m < n (a detector cannot click more often than photons arrive).
With a hard dead time tau_d at most floor(tau_m/tau_d) + 1 clicks fit into
a window, so conditional matrices are banded from above as well.

Conditional probabilities are computed at unit efficiency and zero dark
rate; realistic eta and nu belong to the photon-number distribution of the
state (or, on the coherent route, to the effective mean), which leaves the
conditional matrix unchanged.

The dead-time-only detector admits closed forms built from binomial
weights with the adjusting efficiencies (tau_m - k*tau_d)/tau_m; they are
used both as a fast path and as an independent check on the quadrature.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .detector import DetectorConfig
from .errors import ConsistencyError, DomainError
from .parallel import map_indexed
from .quadrature import QuadratureSpec, integrate_ordered
from .results import ClickDistribution, ConditionalMatrix
from .states import PhotonNumberDist, squeezed_density_from_weights
from .weights import carry_adjust, qmc_tilt, support_plan, window_terms

DEFAULT_SPEC = QuadratureSpec()

_EXPOSURE_RAISE = 1e-9  # exposure above 1 by more than this is a hard error


def power_matrix(base: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """(1-exposure)^(m-n) table, computed in log space with guarded base."""
    if len(base) and float(base.min()) < -_EXPOSURE_RAISE:
        raise ConsistencyError(
            f"exposure exceeds 1 by {-float(base.min()):.3e} at a quadrature node")
    b = np.clip(base, 0.0, None)
    lb = np.log(np.where(b > 0, b, 1.0))
    out = np.exp(lb[:, None] * exps[None, :])
    zero = b == 0
    if zero.any():
        out[zero, :] = (exps == 0).astype(float)[None, :]
    return out


def _as_vector(value, k: int):
    if np.ndim(value) == 0:
        return np.full(k, float(value))
    return np.asarray(value, dtype=float)


def _row_integrals(config: DetectorConfig, n: int, exps: np.ndarray,
                   spec: QuadratureSpec, carry: Optional[float] = None,
                   outer_range=None):
    """Integrals of density * (1-exposure)^e over the n-click support, per e."""

    plan = support_plan(config, n, carry)

    def f(T):
        terms = window_terms(config, T)
        if carry is None:
            dens, expo = terms.density, terms.exposure
        else:
            dens, expo = carry_adjust(config, terms, carry)
        return dens[:, None] * power_matrix(1.0 - expo, exps)

    splits = [plan.outer_split] if plan.outer_split is not None else []
    val, err = integrate_ordered(
        n, config.tau_m, f, spec,
        lower_gap=plan.lower_gap, first_offset=plan.first_offset,
        outer_range=outer_range, outer_splits=splits,
        gap_tilt=qmc_tilt(config))
    return _as_vector(val, len(exps)), _as_vector(err, len(exps))


def coherent_click_probability(config: DetectorConfig, n: int, alpha_sq: float,
                               spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Probability of n clicks given a coherent state of mean photon number alpha_sq.

    The detector's eta and nu are folded into the effective mean before the
    ordered-time integral is taken.  An ideal profile reduces to the Poisson
    weight without any quadrature.
    """
    if n < 0:
        raise DomainError("click number must be nonnegative")
    a = config.effective_mean(alpha_sq)
    if config.efficiency.kind == "ideal":
        if a == 0.0:
            return 1.0 if n == 0 else 0.0
        return math.exp(n * math.log(a) - a - math.lgamma(n + 1))
    if n == 0:
        return math.exp(-a)
    cap = config.max_clicks()
    if cap is not None and n > cap:
        return 0.0
    plan = support_plan(config, n)

    def f(T):
        terms = window_terms(config, T)
        return terms.density * np.exp(-a * terms.exposure)

    splits = [plan.outer_split] if plan.outer_split is not None else []
    val, _ = integrate_ordered(n, config.tau_m, f, spec,
                               lower_gap=plan.lower_gap,
                               first_offset=plan.first_offset,
                               outer_splits=splits, gap_tilt=qmc_tilt(config))
    return a**n * val


def cond_prob_matrix(config: DetectorConfig, n_max: Optional[int] = None,
                     m_max: int = 0, spec: QuadratureSpec = DEFAULT_SPEC,
                     ) -> ConditionalMatrix:
    """Conditional click probabilities P(n|m) for n = 0..n_max, m = 0..m_max."""
    cap = config.max_clicks()
    if n_max is None:
        n_max = m_max if cap is None else min(cap, m_max)
    if m_max < n_max:
        raise DomainError("m_max must be at least n_max")

    entries = np.zeros((n_max + 1, m_max + 1))
    if config.efficiency.kind == "ideal":
        for n in range(n_max + 1):
            entries[n, n] = 1.0
        scenario = "independent:pnr"
    else:
        entries[0, 0] = 1.0  # zero clicks from zero photons, never from more

        def compute_row(n):
            if cap is not None and n > cap:
                return np.zeros(m_max + 1 - n)
            ms = np.arange(n, m_max + 1)
            vals, _ = _row_integrals(config, n, ms - n, spec)
            perm = np.array([math.perm(int(m), n) for m in ms], dtype=float)
            return perm * vals

        rows = map_indexed(compute_row, list(range(1, n_max + 1)))
        for n, row in zip(range(1, n_max + 1), rows):
            entries[n, n:] = row
        scenario = "independent"

    entries = np.clip(entries, 0.0, 1.0)
    return ConditionalMatrix(entries=entries, scenario=scenario,
                             config=config.to_json_dict(),
                             meta={"method": spec.method, "seed": spec.seed,
                                   "rel_tol": spec.rel_tol})


def regular_irregular_split(config: DetectorConfig, n: int, m: int,
                            spec: QuadratureSpec = DEFAULT_SPEC):
    """P(n|m) split by whether the last recovery interval fits in the window.

    Returns ``(regular, irregular)``.  The regular part collects histories
    whose final dead time closes before the window ends; it vanishes for
    the maximal click number.  Requires a monochromatic mode and a built-in
    profile (the split is defined through the dead-time structure).
    """
    if config.mode.kind != "monochromatic":
        raise DomainError("regular/irregular split requires a monochromatic mode")
    if config.efficiency.kind == "ideal":
        return (1.0 if n == m else 0.0), 0.0
    if config.efficiency.breakpoint is None:
        raise DomainError("regular/irregular split requires a built-in profile")
    if m < n:
        return 0.0, 0.0
    if n == 0:
        return (1.0 if m == 0 else 0.0), 0.0
    cap = config.max_clicks()
    if cap is not None and n > cap:
        return 0.0, 0.0

    td = config.efficiency.tau_d
    plan = support_plan(config, n)
    boundary = config.tau_m - n * td  # in shifted coordinates
    perm = float(math.perm(m, n))
    exps = np.array([m - n])
    reg, _ = _row_integrals(config, n, exps, spec, outer_range=(0.0, boundary))
    irr, _ = _row_integrals(config, n, exps, spec,
                            outer_range=(boundary, plan.length))
    return perm * float(reg[0]), perm * float(irr[0])


def _binom_weight(m: int, k: int, eta: float) -> float:
    if k > m:
        return 0.0
    return math.comb(m, k) * eta**k * (1.0 - eta) ** (m - k)


def deadtime_closed_form(config: DetectorConfig, n: int, m: int) -> float:
    """P(n|m) of the zero-relaxation detector, no quadrature.

    The regular part is the PNR weight at the adjusting efficiency
    (tau_m - n*tau_d)/tau_m; the irregular part telescopes between the
    adjusting efficiencies of n and n-1 dead times.  The maximal click
    number closes the family by completeness.
    """
    if config.efficiency.kind != "dead_time_only":
        raise DomainError("closed form requires a pure dead-time profile (tau_r = 0)")
    if config.mode.kind != "monochromatic":
        raise DomainError("closed form requires a monochromatic mode")
    if n < 0 or m < 0:
        raise DomainError("n and m must be nonnegative")
    if m < n:
        return 0.0
    td, tm = config.efficiency.tau_d, config.tau_m
    if td == 0.0:
        return 1.0 if n == m else 0.0
    n_dead = config.deadtime_count
    cap = config.max_clicks()
    if n > cap:
        return 0.0

    def eta_adj(j):
        return (tm - j * td) / tm

    if n <= n_dead:
        val = _binom_weight(m, n, eta_adj(n))
        for k in range(n):
            val += _binom_weight(m, k, eta_adj(n)) - _binom_weight(m, k, eta_adj(n - 1))
    else:
        val = 1.0 - sum(_binom_weight(m, k, eta_adj(n_dead)) for k in range(n_dead + 1))
    return min(1.0, max(0.0, val))


def same_count_probability(config: DetectorConfig, n: int) -> float:
    """Probability that n photons produce exactly n clicks (closed form).

    Valid for the exponential-recovery profile with a monochromatic mode.
    This diagonal measures how well the detector distinguishes photon
    numbers; it is 1 for a photon-number-resolving detector and decays as
    dead and relaxation times grow.  The closed form needs n >= 2; zero
    and one photon are always fully resolved.
    """
    if config.mode.kind != "monochromatic":
        raise DomainError("closed form requires a monochromatic mode")
    if config.efficiency.kind != "exponential_recovery":
        raise DomainError("closed form requires the exponential-recovery profile")
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n <= 1:
        return 1.0
    cap = config.max_clicks()
    if cap is not None and n > cap:
        return 0.0
    td, tr, tm = config.efficiency.tau_d, config.efficiency.tau_r, config.tau_m
    a = (tm - (n - 1) * td) / tr
    if a <= 0:
        return 0.0
    terms = [
        a**l * (-1.0) ** (n - l)
        * math.factorial(n) * math.factorial(2 * n - 2 - l)
        / (math.factorial(l) * math.factorial(n - l) * math.factorial(n - 2))
        for l in range(n + 1)
    ]
    first = math.fsum(terms)
    tail_terms = [
        a**l * math.factorial(2 * n - 2 - l)
        / (math.factorial(l) * math.factorial(n - l - 2))
        for l in range(n - 1)
    ]
    second = (-1.0) ** (n - 1) * math.exp(-a) * math.fsum(tail_terms)
    return (tr / tm) ** n * (first + second)


def _required_m_max(state: PhotonNumberDist, bound: float) -> int:
    p = state.probs
    if len(p) >= 2 and p[-2] > 0 and 0 < p[-1] < p[-2]:
        ratio = p[-1] / p[-2]
        extra = math.log(bound * (1 - ratio) / max(state.tail, 1e-300)) / math.log(ratio)
        return state.m_max + max(1, int(math.ceil(extra)))
    return 2 * max(state.m_max, 1)


def click_distribution_independent(state: PhotonNumberDist, config: DetectorConfig,
                                   spec: QuadratureSpec = DEFAULT_SPEC,
                                   ) -> ClickDistribution:
    """Click-number distribution of ``state`` over independent windows."""
    if state.tail > 1e-8:
        raise DomainError(
            f"state tail mass {state.tail:.2e} exceeds 1e-8; "
            f"increase m_max to about {_required_m_max(state, 1e-8)}")
    meta = {"eta": state.eta, "nu": state.nu, "state": state.label,
            "seed": spec.seed}
    if config.efficiency.kind == "ideal":
        return ClickDistribution(probs=state.probs.copy(),
                                 scenario="independent:pnr",
                                 config=config.to_json_dict(), meta=meta)
    matrix = cond_prob_matrix(config, m_max=state.m_max, spec=spec)
    probs = matrix.entries @ state.probs
    total = float(probs.sum()) + state.tail
    if abs(total - 1.0) > 1e-3:
        raise ConsistencyError(
            f"click distribution sums to {total:.6f}; component sums "
            f"{[float(x) for x in probs[:5]]}...")
    return ClickDistribution(probs=probs, scenario="independent",
                             config=config.to_json_dict(), meta=meta)


def squeezed_distribution_direct(config: DetectorConfig, r: float,
                                 n_max: int, spec: QuadratureSpec = DEFAULT_SPEC,
                                 ) -> np.ndarray:
    """Squeezed-vacuum click probabilities via the click-time density route.

    Integrates the closed-form squeezed density over the ordered domain for
    each click number, using the detector's eta and nu.  Serves as the
    independent counterpart of the number-basis route.
    """
    probs = np.zeros(n_max + 1)
    probs[0] = squeezed_density_from_weights(
        np.array([1.0]), np.array([1.0]), 0, r, eta=config.eta, nu=config.nu)[0]
    cap = config.max_clicks()

    def compute(n):
        if cap is not None and n > cap:
            return 0.0
        plan = support_plan(config, n)

        def f(T):
            terms = window_terms(config, T)
            return squeezed_density_from_weights(terms.density, terms.exposure,
                                                 n, r, eta=config.eta, nu=config.nu)

        splits = [plan.outer_split] if plan.outer_split is not None else []
        val, _ = integrate_ordered(n, config.tau_m, f, spec,
                                   lower_gap=plan.lower_gap,
                                   first_offset=plan.first_offset,
                                   outer_splits=splits, gap_tilt=qmc_tilt(config))
        return float(val)

    vals = map_indexed(compute, list(range(1, n_max + 1)))
    probs[1:] = vals
    return probs
