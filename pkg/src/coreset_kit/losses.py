"""Entrywise loss functions ("g-norms") and their metadata.

A loss g must satisfy, for the guarantees downstream:
  * an approximate triangle inequality  g(sum x_i) <= ati(t) * sum g(x_i),
  * mon-monotonicity                    g(x) <= mon * g(y) for |x| <= |y|,
  * at-least-linear growth              g(y)/g(x) >= lin * |y|/|x|.

The registry ships the Huber loss and |x|^p; fair / cauchy / l1_l2 are
included as parameterized formulas with nominal metadata.  Cauchy's linear
growth only holds on a bounded range, so its ``lin`` is a nominal constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LossSpec:
    """An entrywise loss g with IRLS weights and growth metadata.

    ``g`` maps arrays to arrays elementwise; ``irls_weight`` returns the
    majorize-minimize weights g'(r)/r (up to a constant factor, which a
    weighted least-squares step absorbs).  ``ati`` maps a term count t to
    the approximate-triangle-inequality constant.
    """

    kind: str
    g: Callable[[np.ndarray], np.ndarray]
    irls_weight: Callable[[np.ndarray], np.ndarray]
    ati: Callable[[int], float]
    mon: float
    lin: float
    params: dict = field(default_factory=dict)

    def cost(self, values: np.ndarray) -> float:
        """Sum of g over all entries (the un-rooted g-norm)."""
        return float(np.sum(self.g(np.asarray(values, dtype=float))))

    def __repr__(self) -> str:
        if self.params:
            inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
            return f"{self.kind}({inner})"
        return self.kind


def _huber_g(x):
    ax = np.abs(x)
    return np.where(ax <= 1.0, 0.5 * ax * ax, ax - 0.5)


def _huber_w(r):
    ar = np.maximum(np.abs(r), 1e-12)
    return np.where(ar <= 1.0, 1.0, 1.0 / ar)


def huber() -> LossSpec:
    return LossSpec(
        kind="huber",
        g=_huber_g,
        irls_weight=_huber_w,
        ati=lambda t: 2.0 * max(t, 1),
        mon=1.0,
        lin=1.0,
    )


def abs_p(p: float) -> LossSpec:
    if p < 1:
        raise ValueError(f"abs_p requires p >= 1, got {p}")

    def g(x, p=p):
        return np.abs(x) ** p

    def w(r, p=p):
        ar = np.maximum(np.abs(r), 1e-12)
        return ar ** (p - 2.0)

    return LossSpec(
        kind="abs_p",
        g=g,
        irls_weight=w,
        ati=lambda t, p=p: float(max(t, 1)) ** (p - 1.0),
        mon=1.0,
        lin=1.0,
        params={"p": p},
    )


def l1_l2() -> LossSpec:
    def g(x):
        return 2.0 * (np.sqrt(1.0 + x * x / 2.0) - 1.0)

    def w(r):
        return 1.0 / np.sqrt(1.0 + r * r / 2.0)

    return LossSpec(
        kind="l1_l2",
        g=g,
        irls_weight=w,
        ati=lambda t: 2.0 * max(t, 1),
        mon=1.0,
        lin=1.0,
    )


def fair(c: float = 1.0) -> LossSpec:
    def g(x, c=c):
        ax = np.abs(x)
        return c * c * (ax / c - np.log1p(ax / c))

    def w(r, c=c):
        return 1.0 / (1.0 + np.abs(r) / c)

    return LossSpec(
        kind="fair",
        g=g,
        irls_weight=w,
        ati=lambda t: 2.0 * max(t, 1),
        mon=1.0,
        lin=0.5,
        params={"c": c},
    )


def cauchy(c: float = 1.0) -> LossSpec:
    # Linear growth fails asymptotically for Cauchy; lin is nominal and
    # only meaningful on a bounded residual range.
    def g(x, c=c):
        return (c * c / 2.0) * np.log1p(x * x / (c * c))

    def w(r, c=c):
        return 1.0 / (1.0 + r * r / (c * c))

    return LossSpec(
        kind="cauchy",
        g=g,
        irls_weight=w,
        ati=lambda t: 2.0 * max(t, 1),
        mon=1.0,
        lin=0.25,
        params={"c": c},
    )


_REGISTRY: dict[str, Callable[..., LossSpec]] = {
    "huber": huber,
    "abs_p": abs_p,
    "l1_l2": l1_l2,
    "fair": fair,
    "cauchy": cauchy,
}


def get_loss(kind: str, **params) -> LossSpec:
    """Look up a loss by registry name, e.g. get_loss("abs_p", p=3)."""
    try:
        factory = _REGISTRY[kind]
    except KeyError:
        raise KeyError(f"unknown loss {kind!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)
