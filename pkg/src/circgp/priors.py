"""Prior distributions and prior configuration.

Notation follows the usual shorthand: ``G(shape, rate)``, ``B(a, b)``,
``IG(shape, scale)``, ``N(mean, variance)``, ``TN(mean, variance)``
(normal truncated to ``(-1, 1)``) and ``WrapN(mean, variance)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .circular import TWO_PI, default_k_max, wn_logpdf, wrap
from .errors import ConfigurationError

_LOG_2PI = math.log(TWO_PI)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float
    circular = False

    def logpdf(self, x):
        if x <= 0:
            return -math.inf
        k, r = self.shape, self.rate
        return k * math.log(r) - math.lgamma(k) + (k - 1) * math.log(x) - r * x

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    @property
    def mean(self):
        return self.shape / self.rate

    def __str__(self):
        return f"G({self.shape:g},{self.rate:g})"


@dataclass(frozen=True)
class Beta:
    a: float
    b: float
    circular = False

    def logpdf(self, x):
        if not 0 < x < 1:
            return -math.inf
        a, b = self.a, self.b
        lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        return (a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - lbeta

    def sample(self, rng, size=None):
        return rng.beta(self.a, self.b, size)

    @property
    def mean(self):
        return self.a / (self.a + self.b)

    def __str__(self):
        return f"B({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class InverseGamma:
    shape: float
    scale: float
    circular = False

    def logpdf(self, x):
        if x <= 0:
            return -math.inf
        k, s = self.shape, self.scale
        return k * math.log(s) - math.lgamma(k) - (k + 1) * math.log(x) - s / x

    def sample(self, rng, size=None):
        return 1.0 / rng.gamma(self.shape, 1.0 / self.scale, size)

    @property
    def mean(self):
        return self.scale / (self.shape - 1) if self.shape > 1 else math.inf

    def __str__(self):
        return f"IG({self.shape:g},{self.scale:g})"


@dataclass(frozen=True)
class Normal:
    mean: float
    var: float
    circular = False

    def logpdf(self, x):
        d = x - self.mean
        return -0.5 * (d * d / self.var + _LOG_2PI + math.log(self.var))

    def sample(self, rng, size=None):
        return rng.normal(self.mean, math.sqrt(self.var), size)

    def __str__(self):
        return f"N({self.mean:g},{self.var:g})"


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal restricted to ``(lower, upper)``; defaults to the correlation range."""

    mean: float
    var: float
    lower: float = -1.0
    upper: float = 1.0
    circular = False

    def _mass(self):
        sd = math.sqrt(self.var)
        return ndtr((self.upper - self.mean) / sd) - ndtr((self.lower - self.mean) / sd)

    def logpdf(self, x):
        if not self.lower < x < self.upper:
            return -math.inf
        d = x - self.mean
        return -0.5 * (d * d / self.var + _LOG_2PI + math.log(self.var)) - math.log(self._mass())

    def sample(self, rng, size=None):
        # inverse-cdf sampling
        sd = math.sqrt(self.var)
        lo = ndtr((self.lower - self.mean) / sd)
        hi = ndtr((self.upper - self.mean) / sd)
        u = rng.uniform(lo, hi, size)
        out = self.mean + sd * ndtri(u)
        return np.clip(out, np.nextafter(self.lower, 0), np.nextafter(self.upper, 0))

    def __str__(self):
        if (self.lower, self.upper) == (-1.0, 1.0):
            return f"TN({self.mean:g},{self.var:g})"
        return f"TN({self.mean:g},{self.var:g},{self.lower:g},{self.upper:g})"


@dataclass(frozen=True)
class WrappedNormal:
    """Wrapped normal prior for a mean direction."""

    mean: float
    var: float
    k_max: int | None = None
    circular = True

    def logpdf(self, x):
        k = self.k_max if self.k_max is not None else default_k_max(self.var)
        return wn_logpdf(x, self.mean, self.var, k)

    def sample(self, rng, size=None):
        return wrap(rng.normal(self.mean, math.sqrt(self.var), size))

    def __str__(self):
        return f"WrapN({self.mean:g},{self.var:g})"


_PRIOR_RE = re.compile(r"^\s*([A-Za-z]+)\s*\((.*)\)\s*$")
_FAMILIES = {
    "G": Gamma,
    "Gamma": Gamma,
    "B": Beta,
    "Beta": Beta,
    "IG": InverseGamma,
    "N": Normal,
    "TN": TruncatedNormal,
    "WrapN": WrappedNormal,
    "WN": WrappedNormal,
}


def _number(token: str) -> float:
    token = token.strip().lower()
    if token == "pi":
        return math.pi
    m = re.fullmatch(r"([0-9.eE+-]*)\*?pi", token)
    if m:
        return float(m.group(1) or 1.0) * math.pi
    return float(token)


def parse_prior(text: str):
    """Parse shorthand such as ``"IG(4.5, 0.55)"`` or ``"WrapN(pi, 5)"``."""
    m = _PRIOR_RE.match(text)
    if not m or m.group(1) not in _FAMILIES:
        raise ConfigurationError(f"cannot parse prior {text!r}")
    try:
        args = [_number(t) for t in m.group(2).split(",")]
    except ValueError as exc:
        raise ConfigurationError(f"bad prior hyperparameters in {text!r}") from exc
    family = _FAMILIES[m.group(1)]
    try:
        prior = family(*args)
    except TypeError as exc:
        raise ConfigurationError(f"wrong number of hyperparameters in {text!r}") from exc
    if family in (Gamma, Beta, InverseGamma):
        positive = args
    else:
        positive = args[1:2]
    if any(v <= 0 for v in positive):
        raise ConfigurationError(f"non-positive shape, rate or variance in {text!r}")
    return prior


def base_name(name: str) -> str:
    """``"sigma2[calm]"`` -> ``"sigma2"``."""
    return name.split("[", 1)[0]


@dataclass
class PriorConfig:
    """Priors keyed by parameter name.

    A key may be a full parameter name such as ``"nugget[storm]"`` or a group
    name such as ``"nugget"`` covering every cell of that parameter.
    """

    priors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.priors = {
            k: parse_prior(v) if isinstance(v, str) else v for k, v in self.priors.items()
        }

    def resolve(self, param_names) -> dict:
        """Map every parameter to exactly one prior; reject unknown or duplicate keys."""
        names = list(param_names)
        known = set(names) | {base_name(n) for n in names}
        unknown = sorted(set(self.priors) - known)
        if unknown:
            raise ConfigurationError(f"unknown prior keys: {', '.join(unknown)}")
        out = {}
        for name in names:
            exact = name in self.priors
            group = name != base_name(name) and base_name(name) in self.priors
            if exact and group:
                raise ConfigurationError(f"parameter {name} matches two prior entries")
            if not (exact or group):
                raise ConfigurationError(f"no prior given for parameter {name}")
            out[name] = self.priors[name] if exact else self.priors[base_name(name)]
        return out

    def to_strings(self) -> dict:
        return {k: str(v) for k, v in self.priors.items()}
