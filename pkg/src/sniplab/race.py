"""Race-outcome probabilities under probabilistic sniping.

When the trigger event is news, the market maker races to cancel his stale
quote while each of the other agents (bandits) independently joins the race
with probability ``p``; the winner is uniform among the entrants.  This module
computes, in closed form and by exact binomial enumeration:

* ``mm_loss_prob(p, n)``       -- the market maker loses the race,
* ``win_prob_given_entry(p, n)`` -- a racing bandit wins, given he entered,

their derivatives in ``p``, and the generalisations for a population split
into trustworthy agents (snipe with probability ``p``) and deceptive agents
(snipe for sure), from both the trustworthy and the deceptive agent's
viewpoint.

Closed forms (with N_B counting bandit entrants):

    mm_loss_prob(p, n)       = E[N_B/(1+N_B)]   = ((1-p)^n - (1-n p)) / (n p)
    win_prob_given_entry(p, n) = E[1/(2+N_B')]  = mm_loss_prob(p, n) / ((n-1) p)

Both are 0/0 at p = 0; below ``SERIES_SWITCH`` the implementations use the
series expansions about p = 0 to avoid catastrophic cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .params import ValidationError

# Below this point the closed forms lose precision to cancellation; the
# two-term series about p = 0 is accurate to O(p^3) there.
SERIES_SWITCH = 1e-6


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"sniping probability must lie in [0, 1] (got {p})")


def _check_n(n_agents: int) -> None:
    if n_agents < 2:
        raise ValidationError(f"need at least 2 agents for a race (got {n_agents})")


@dataclass(frozen=True)
class Population:
    """Split of the agents into trustworthy and deceptive snipers."""

    trustworthy: int
    deceptive: int

    def __post_init__(self) -> None:
        if self.trustworthy < 1:
            raise ValidationError(
                f"need at least one trustworthy agent (got {self.trustworthy})"
            )
        if self.deceptive < 0:
            raise ValidationError(
                f"deceptive count must be >= 0 (got {self.deceptive})"
            )
        if self.total < 3:
            raise ValidationError(
                f"population must have at least 3 agents (got {self.total})"
            )

    @property
    def total(self) -> int:
        return self.trustworthy + self.deceptive


def _binom_pmf(n: int, p: float) -> list[float]:
    """Probability mass of Bin(n, p) on 0..n."""
    q = 1.0 - p
    return [comb(n, k) * p**k * q ** (n - k) for k in range(n + 1)]


def mm_loss_prob(p: float, n_agents: int) -> float:
    """Probability the market maker loses the race against Bin(n-1, p) entrants.

    Equals 0 at p = 0 and (n-1)/n at p = 1; strictly increasing in between.
    """
    _check_p(p)
    _check_n(n_agents)
    n = n_agents
    if p < SERIES_SWITCH:
        return (n - 1) / 2 * p - (n - 1) * (n - 2) / 6 * p * p
    return ((1.0 - p) ** n - (1.0 - n * p)) / (n * p)


def mm_loss_prob_deriv(p: float, n_agents: int) -> float:
    """d/dp of mm_loss_prob; (n-1)/2 at p = 0, 1/n at p = 1."""
    _check_p(p)
    _check_n(n_agents)
    n = n_agents
    if p < SERIES_SWITCH:
        return (n - 1) / 2 - (n - 1) * (n - 2) / 3 * p
    return (1.0 - (1.0 - p) ** (n - 1) * (n * p + 1.0 - p)) / (n * p * p)


def win_prob_given_entry(p: float, n_agents: int) -> float:
    """Probability a racing bandit wins, conditional on having entered.

    Equals 1/2 at p = 0 (only the market maker to beat, in expectation) and
    1/n at p = 1 (uniform among all agents); strictly decreasing in between.
    """
    _check_p(p)
    _check_n(n_agents)
    n = n_agents
    if n == 2:
        return 0.5  # a lone entrant always faces exactly the market maker
    if p < SERIES_SWITCH:
        return 0.5 - (n - 2) / 6 * p
    if p == 1.0:
        return 1.0 / n
    return mm_loss_prob(p, n) / ((n - 1) * p)


def win_prob_given_entry_deriv(p: float, n_agents: int) -> float:
    """d/dp of win_prob_given_entry; -(n-2)/6 at p = 0, -(n-2)/(n(n-1)) at p = 1."""
    _check_p(p)
    _check_n(n_agents)
    n = n_agents
    if n == 2:
        return 0.0
    if p < SERIES_SWITCH:
        return -(n - 2) / 6 + (n - 2) * (n - 3) / 12 * p
    if p == 1.0:
        return -(n - 2) / (n * (n - 1))
    return (mm_loss_prob_deriv(p, n) * p - mm_loss_prob(p, n)) / ((n - 1) * p * p)


def mm_loss_prob_enum(p: float, n_agents: int) -> float:
    """Exact binomial-expectation form of mm_loss_prob, E[N/(1+N)], N~Bin(n-1,p)."""
    _check_p(p)
    _check_n(n_agents)
    pmf = _binom_pmf(n_agents - 1, p)
    return sum(w * k / (k + 1) for k, w in enumerate(pmf))


def win_prob_given_entry_enum(p: float, n_agents: int) -> float:
    """Exact binomial-expectation form of win_prob_given_entry, E[1/(2+N)], N~Bin(n-2,p)."""
    _check_p(p)
    _check_n(n_agents)
    pmf = _binom_pmf(n_agents - 2, p)
    return sum(w / (k + 2) for k, w in enumerate(pmf))


# ---------------------------------------------------------------------------
# Mixed populations: trustworthy agents snipe with probability p, deceptive
# agents snipe for sure.  All expectations are exact O(H_t) binomial sums.
# ---------------------------------------------------------------------------


def mm_loss_prob_mixed(p: float, pop: Population) -> float:
    """Probability a trustworthy market maker loses the race.

    The field is the pop.deceptive sure snipers plus N ~ Bin(H_t - 1, p)
    trustworthy entrants: E[(H_d + N)/(1 + H_d + N)].
    """
    _check_p(p)
    hd = pop.deceptive
    pmf = _binom_pmf(pop.trustworthy - 1, p)
    return sum(w * (hd + k) / (1 + hd + k) for k, w in enumerate(pmf))


def win_prob_given_entry_mixed(p: float, pop: Population) -> float:
    """Probability a racing trustworthy bandit wins, given he entered.

    Single-variable form, valid for any H_t >= 1.  Conditional on the bandit
    racing, the market maker is uniform among the other H-1 agents; whether he
    was already counted as an entrant decides whether the field grows by one:

        (1/(H-1)) * E[ N/(1+N+H_d) + (H_t-1-N)/(2+N+H_d) + H_d/(1+N+H_d) ]

    with N ~ Bin(H_t - 1, p).
    """
    _check_p(p)
    hd = pop.deceptive
    ht = pop.trustworthy
    pmf = _binom_pmf(ht - 1, p)
    total = sum(
        w * (k / (1 + k + hd) + (ht - 1 - k) / (2 + k + hd) + hd / (1 + k + hd))
        for k, w in enumerate(pmf)
    )
    return total / (pop.total - 1)


def win_prob_given_entry_mixed_two_urn(p: float, pop: Population) -> float:
    """Two-variable form of win_prob_given_entry_mixed (cross-check).

    Conditions on whether the market maker is trustworthy or deceptive and
    draws the trustworthy entrants separately in each branch; requires
    H_t >= 2 to be well defined.
    """
    _check_p(p)
    ht, hd = pop.trustworthy, pop.deceptive
    if ht < 2:
        raise ValidationError(
            f"two-urn form needs at least 2 trustworthy agents (got {ht})"
        )
    h_minus_1 = pop.total - 1
    mm_trusty = sum(
        w / (2 + hd + k) for k, w in enumerate(_binom_pmf(ht - 2, p))
    )
    result = (ht - 1) / h_minus_1 * mm_trusty
    if hd > 0:
        mm_deceptive = sum(
            w / (1 + hd + k) for k, w in enumerate(_binom_pmf(ht - 1, p))
        )
        result += hd / h_minus_1 * mm_deceptive
    return result


def mm_loss_prob_mixed_deceptive(p: float, pop: Population) -> float:
    """Probability a deceptive market maker loses the race.

    His field is the other H_d - 1 sure snipers plus N ~ Bin(H_t, p)
    trustworthy entrants: E[(H_d - 1 + N)/(H_d + N)].
    """
    _check_p(p)
    hd = pop.deceptive
    if hd < 1:
        raise ValidationError("deceptive viewpoint needs at least one deceptive agent")
    pmf = _binom_pmf(pop.trustworthy, p)
    return sum(w * (hd - 1 + k) / (hd + k) for k, w in enumerate(pmf))


def win_prob_given_entry_mixed_deceptive(p: float, pop: Population) -> float:
    """Probability a deceptive bandit wins the race (he always enters).

    Same counting argument as the trustworthy case, with the market maker
    uniform among the other H-1 agents: trustworthy with weight H_t/(H-1)
    (field 1 + H_d + Bin(H_t-1, p)), deceptive with weight (H_d-1)/(H-1)
    (field H_d + Bin(H_t, p)).
    """
    _check_p(p)
    ht, hd = pop.trustworthy, pop.deceptive
    if hd < 1:
        raise ValidationError("deceptive viewpoint needs at least one deceptive agent")
    h_minus_1 = pop.total - 1
    mm_trusty = sum(w / (1 + hd + k) for k, w in enumerate(_binom_pmf(ht - 1, p)))
    result = ht / h_minus_1 * mm_trusty
    if hd >= 2:
        mm_deceptive = sum(w / (hd + k) for k, w in enumerate(_binom_pmf(ht, p)))
        result += (hd - 1) / h_minus_1 * mm_deceptive
    return result
