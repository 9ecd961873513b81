"""Rectified power units and their derivative stack.

ReQU(z) = max(z, 0)^2 and ReCU(z) = max(z, 0)^3 are the activations used
by the solver networks; plain ReLU is kept around for the piecewise-linear
interpolants in :mod:`mixres.barron`.  At the kink every derivative is
defined by its left limit, so ``d2(0) = 0`` for ReQU and ``d3(0) = 0`` for
ReCU.  Both backends implement the same ``z > 0`` mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Activation:
    """A rectified power unit z -> max(z, 0)**power."""

    name: str
    power: int

    def value(self, z: np.ndarray) -> np.ndarray:
        return np.where(z > 0.0, z, 0.0) ** self.power

    def d1(self, z: np.ndarray) -> np.ndarray:
        p = self.power
        if p == 1:
            return np.where(z > 0.0, 1.0, 0.0)
        return p * np.where(z > 0.0, z, 0.0) ** (p - 1)

    def d2(self, z: np.ndarray) -> np.ndarray:
        p = self.power
        if p == 1:
            return np.zeros_like(z)
        if p == 2:
            return np.where(z > 0.0, 2.0, 0.0)
        return p * (p - 1) * np.where(z > 0.0, z, 0.0) ** (p - 2)

    def d3(self, z: np.ndarray) -> np.ndarray:
        p = self.power
        if p <= 2:
            return np.zeros_like(z)
        return np.where(z > 0.0, float(p * (p - 1) * (p - 2)), 0.0)

    def supports_jets(self) -> bool:
        """Whether value/gradient/Laplacian propagation is well defined.

        ReLU has a distributional second derivative, so jet evaluation is
        restricted to powers >= 2.
        """
        return self.power >= 2


RELU = Activation("relu", 1)
REQU = Activation("requ", 2)
RECU = Activation("recu", 3)

_BY_NAME = {a.name: a for a in (RELU, REQU, RECU)}


def get_activation(name: str) -> Activation:
    try:
        return _BY_NAME[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; expected one of {sorted(_BY_NAME)}"
        ) from None
