"""Station-count scenario models and their generating functions.

A scenario assigns probability q_n to "n stations are contending".  Its
generating function f(x) = sum_n q_n x^n is the object every downstream
computation (partition tuning, collision rates, bounds) consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Polynomial",
    "StationDistribution",
    "make_power_law",
    "gf_from_distribution",
]

_COEF_TOL = 1e-9


@dataclass(frozen=True)
class Polynomial:
    """Dense real polynomial; coefficients[i] multiplies x**i."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        c = np.trim_zeros(c, "b")
        if c.size == 0:
            c = np.zeros(1)
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        y = np.polynomial.polynomial.polyval(x, self.coefficients)
        return y if isinstance(x, np.ndarray) else float(y)

    def derivative(self, order: int = 1) -> "Polynomial":
        if order < 0:
            raise ValueError("order must be nonnegative")
        if order == 0:
            return self
        c = np.polynomial.polynomial.polyder(self.coefficients, m=order)
        return Polynomial(c)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coefficients, other.coefficients
        n = max(len(a), len(b))
        c = np.zeros(n)
        c[: len(a)] += a
        c[: len(b)] += b
        return Polynomial(c)

    def __mul__(self, scalar: float) -> "Polynomial":
        return Polynomial(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def compose_affine(self, a: float, b: float) -> "Polynomial":
        """Return the polynomial x -> self(a*x + b).

        Horner in the coefficient ring, so the result's constant term is
        exactly the Horner evaluation self(b).  Callers that need an
        exactly-zero constant after subtracting self(b) rely on this.
        """
        src = self.coefficients
        res = np.array([src[-1]])
        for cj in src[-2::-1]:
            nxt = np.zeros(len(res) + 1)
            nxt[1:] += res * a
            nxt[:-1] += res * b
            nxt[0] += cj
            res = nxt
        return Polynomial(res)

    def shift_constant(self, dc: float) -> "Polynomial":
        c = self.coefficients.copy()
        c[0] += dc
        return Polynomial(c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coefficients, other.coefficients)


@dataclass(frozen=True)
class StationDistribution:
    """Probability distribution over the number of contending stations.

    weights maps n >= 1 to q_n; weights must sum to 1.  alpha / n_max are
    kept when the instance came from make_power_law so output files can
    echo the scenario parameters.
    """

    weights: dict[int, float]
    alpha: float | None = None
    n_max: int | None = None

    def __post_init__(self):
        if not self.weights:
            raise ValueError("weights must be nonempty")
        for n, q in self.weights.items():
            if int(n) != n or n < 1:
                raise ValueError(f"station count {n!r} must be an integer >= 1")
            if not (q > 0.0):
                raise ValueError(f"weight for n={n} must be positive, got {q}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > _COEF_TOL:
            raise ValueError(f"weights sum to {total}, expected 1")
        object.__setattr__(self, "weights", dict(sorted(self.weights.items())))

    @property
    def support(self) -> list[int]:
        return list(self.weights)

    def mean_station_count(self) -> float:
        return sum(n * q for n, q in self.weights.items())

    def gf(self) -> Polynomial:
        return gf_from_distribution(self)

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n_max": self.n_max,
            "weights": {str(n): q for n, q in self.weights.items()},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StationDistribution":
        weights = {int(n): float(q) for n, q in d["weights"].items()}
        return cls(weights=weights, alpha=d.get("alpha"), n_max=d.get("n_max"))


def make_power_law(alpha: float, n_max: int) -> StationDistribution:
    """Scenario q_n proportional to n**-alpha on n in {2, ..., n_max}.

    alpha = 0 is the uniform case; n_max must be at least 2 so that at
    least one contention-capable count is in the support.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    ns = np.arange(2, n_max + 1, dtype=np.float64)
    raw = ns ** (-float(alpha))
    q = raw / raw.sum()
    weights = {int(n): float(w) for n, w in zip(ns, q)}
    return StationDistribution(weights=weights, alpha=float(alpha), n_max=int(n_max))


def gf_from_distribution(dist: StationDistribution) -> Polynomial:
    """Generating function sum_n q_n x^n; constant coefficient exactly 0."""
    top = max(dist.weights)
    c = np.zeros(top + 1)
    for n, q in dist.weights.items():
        c[n] = q
    return Polynomial(c)
