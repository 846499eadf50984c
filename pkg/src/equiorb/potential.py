"""Pairwise potential shapes ``U_ij = m_i m_j / f(|y_i - y_j|)``."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PotentialModel:
    """Denominator ``f`` of the pair potential with its first two derivatives.

    The built-in shapes use ``f(r) = (r^2 + eps^2)^(alpha/2)``: ``alpha = 1``
    and ``eps = 0`` is Newtonian gravity.  ``kind="none"`` switches the
    potential off entirely.  Custom shapes may pass vectorised callables
    ``f``, ``df`` and ``d2f``.
    """

    kind: str = "power"
    alpha: float = 1.0
    epsilon: float = 0.0
    f: object = None
    df: object = None
    d2f: object = None

    @classmethod
    def newtonian(cls):
        return cls("power", 1.0, 0.0)

    @classmethod
    def power_law(cls, alpha, epsilon=0.0):
        return cls("power", float(alpha), float(epsilon))

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def custom(cls, f, df, d2f):
        return cls("custom", f=f, df=df, d2f=d2f)

    @property
    def is_zero(self):
        return self.kind == "none"

    def derivatives(self, r):
        """Return ``(f, f', f'')`` evaluated at distances ``r``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "custom":
            return self.f(r), self.df(r), self.d2f(r)
        if self.kind == "none":
            raise ValueError("the zero potential has no denominator")
        a, e2 = self.alpha, self.epsilon ** 2
        s = r * r + e2
        f = s ** (a / 2)
        df = a * r * s ** (a / 2 - 1)
        d2f = a * s ** (a / 2 - 1) + a * (a - 2) * r * r * s ** (a / 2 - 2)
        return f, df, d2f

    def to_dict(self):
        if self.kind == "custom":
            raise ValueError("custom potentials cannot be serialised")
        if self.kind == "none":
            return {"kind": "none"}
        return {"kind": "power", "alpha": self.alpha, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", "newtonian")
        if kind == "newtonian":
            return cls.newtonian()
        if kind == "none":
            return cls.none()
        if kind == "power":
            return cls.power_law(data.get("alpha", 1.0), data.get("epsilon", 0.0))
        raise ValueError(f"unknown potential kind {kind!r}")
