"""Smooth functions ``g`` of the likelihood ratio defining f-divergences.

A divergence of the form ``G(f1, f2) = E_{f2}[g(f1/f2)]`` is selected by a
:class:`Functional`. Only smooth ``g`` are offered; non-smooth choices such
as total variation are rejected.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError, ParameterError

NAMES = ("kl_forward", "kl_reverse", "renyi_alpha", "chernoff_alpha", "hellinger")
_NEEDS_ALPHA = {"renyi_alpha", "chernoff_alpha"}


@dataclass(frozen=True)
class Functional:
    """A named smooth functional.

    ``kl_forward`` is ``L ln L`` (KL(f1 || f2)), ``kl_reverse`` is ``-ln L``
    (KL(f2 || f1)), ``chernoff_alpha`` and ``renyi_alpha`` are ``L**alpha``
    (the Renyi divergence is a log-transform of that same integral), and
    ``hellinger`` is ``chernoff_alpha`` at ``alpha = 0.5``.
    """

    name: str = "kl_forward"
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise ParameterError(
                f"unknown or non-smooth functional {self.name!r}; choose from {NAMES}")
        if self.name == "hellinger":
            if self.alpha not in (None, 0.5):
                raise ParameterError("hellinger fixes alpha at 0.5")
            object.__setattr__(self, "alpha", 0.5)
        elif self.name in _NEEDS_ALPHA:
            if self.alpha is None or not 0.0 < float(self.alpha) < 1.0:
                raise ParameterError(f"{self.name} needs alpha in (0, 1), got {self.alpha!r}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ParameterError(f"{self.name} takes no alpha")

    @property
    def is_power(self):
        return self.alpha is not None

    def g(self, L):
        """Vectorized ``g``; ``L`` must be positive."""
        L = np.asarray(L, dtype=np.float64)
        if self.name == "kl_forward":
            return L * np.log(L)
        if self.name == "kl_reverse":
            return -np.log(L)
        return L ** self.alpha

    def to_dict(self):
        return {"name": self.name, "alpha": self.alpha}


def make_functional(name, alpha=None):
    if isinstance(name, Functional):
        return name
    return Functional(name, alpha)


def eval_functional(f, L):
    """Scalar ``g(L)`` for ``L > 0``."""
    f = make_functional(f)
    L = float(L)
    if not L > 0.0 or not math.isfinite(L):
        raise DomainError(f"likelihood ratio must be positive and finite, got {L!r}")
    if f.name == "kl_forward":
        return L * math.log(L)
    if f.name == "kl_reverse":
        return -math.log(L)
    return L ** f.alpha
