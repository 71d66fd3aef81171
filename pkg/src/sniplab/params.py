"""Primitive game parameters, derived quantities and model assumptions.

All downstream formulas are expressed in units of the jump size sigma, so the
public API works on sigma-rescaled parameters (sigma = 1).  The quantities a
parameter set must satisfy:

* at least three competing high-frequency traders,
* positive arrival rates and latency,
* risk aversion gamma >= 1,
* the latency condition (alpha + mu) * delta < 1, i.e. strictly less than one
  expected follow-up event during a race.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


class ValidationError(ValueError):
    """A parameter set or argument violates a model invariant."""


@dataclass(frozen=True)
class GameParams:
    """Primitive parameters of the stage game.

    H: number of high-frequency traders (>= 3)
    alpha: news arrival rate (events per unit time)
    mu: liquidity-trader arrival rate (events per unit time)
    delta: exchange latency, the duration of a race
    gamma: risk-aversion factor inflating negative payoffs (>= 1)
    sigma: jump size of the asset value on news (default 1 after rescaling)
    """

    H: int
    alpha: float
    mu: float
    delta: float
    gamma: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if int(self.H) != self.H or self.H < 3:
            raise ValidationError(f"H must be an integer >= 3 (got {self.H})")
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be positive (got {self.alpha})")
        if self.mu <= 0:
            raise ValidationError(f"mu must be positive (got {self.mu})")
        if self.delta <= 0:
            raise ValidationError(f"delta must be positive (got {self.delta})")
        if self.gamma < 1:
            raise ValidationError(f"gamma must be >= 1 (got {self.gamma})")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive (got {self.sigma})")
        load = (self.alpha + self.mu) * self.delta
        if not load < 1:
            raise ValidationError(
                "latency condition (alpha+mu)*delta < 1 violated "
                f"(got {load})"
            )


@dataclass(frozen=True)
class DerivedParams:
    """Shorthand quantities every formula consumes.

    alpha_bar: half the expected news arrivals during a race, alpha*delta/2
    mu_bar: half the expected liquidity-trader arrivals, mu*delta/2
    beta: probability the trigger event is news, alpha/(alpha+mu)
    q: excess risk aversion, gamma - 1
    m: 1 - mu_bar
    theta_bar: harmonic mean of alpha_bar and mu_bar
    """

    alpha_bar: float
    mu_bar: float
    beta: float
    q: float
    m: float
    theta_bar: float

    def __post_init__(self) -> None:
        if not self.alpha_bar + self.mu_bar < 0.5:
            raise ValidationError(
                "latency condition alpha_bar + mu_bar < 1/2 violated "
                f"(got {self.alpha_bar + self.mu_bar})"
            )
        if not 0 < self.beta < 1:
            raise ValidationError(f"beta must lie in (0, 1) (got {self.beta})")
        lo = min(self.alpha_bar, self.mu_bar)
        hi = max(self.alpha_bar, self.mu_bar)
        slack = 4e-16 * hi  # a few ulps: the harmonic mean can round past min
        if not lo - slack <= self.theta_bar <= hi + slack:
            raise ValidationError(
                "theta_bar must lie between alpha_bar and mu_bar "
                f"(got {self.theta_bar})"
            )
        if self.q < 0:
            raise ValidationError(f"q must be >= 0 (got {self.q})")
        if not 0.5 < self.m <= 1:
            raise ValidationError(f"m must lie in (1/2, 1] (got {self.m})")


def derive(params: GameParams) -> DerivedParams:
    """Compute the derived quantities from a validated parameter set."""
    alpha_bar = params.alpha * params.delta / 2
    mu_bar = params.mu * params.delta / 2
    return DerivedParams(
        alpha_bar=alpha_bar,
        mu_bar=mu_bar,
        beta=params.alpha / (params.alpha + params.mu),
        q=params.gamma - 1.0,
        m=1.0 - mu_bar,
        theta_bar=2.0 * alpha_bar * mu_bar / (alpha_bar + mu_bar),
    )


def rescale_to_unit_sigma(params: GameParams) -> GameParams:
    """Return the parameter set expressed in units of the jump size.

    Spreads and utilities produced downstream are then measured with sigma as
    the yardstick.  The original sigma is the scale factor for converting
    reported values back; callers that need it for reporting should keep the
    original parameter set (the CLI records it in the run manifest).
    """
    if params.sigma == 1.0:
        return params
    return replace(params, sigma=1.0)


_CONFIG_KEYS = ("H", "alpha", "mu", "delta", "gamma", "sigma")


def load_config(path: str) -> dict[str, float]:
    """Read a flat key=value parameter file.

    Recognised keys: H, alpha, mu, delta, gamma, sigma.  Blank lines and
    '#' comments are ignored; unknown keys are an error.
    """
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'key = value' (got {line!r})"
                )
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = int(val) if key == "H" else float(val)
            except ValueError as exc:
                raise ValidationError(
                    f"{path}:{lineno}: invalid value for {key!r}: {val.strip()!r}"
                ) from exc
    return values


def params_from_config(values: dict[str, float]) -> GameParams:
    """Build GameParams from a config mapping, naming any missing key."""
    for key in ("H", "alpha", "mu", "delta", "gamma"):
        if key not in values:
            raise ValidationError(f"missing required parameter {key!r}")
    return GameParams(
        H=int(values["H"]),
        alpha=float(values["alpha"]),
        mu=float(values["mu"]),
        delta=float(values["delta"]),
        gamma=float(values["gamma"]),
        sigma=float(values.get("sigma", 1.0)),
    )
