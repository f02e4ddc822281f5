"""Four-vectors, Lorentz boosts, and the rank-2 angular-momentum tensor.

The antisymmetric tensor is stored as its boost/spin split
``K_i = L^{0i}``, ``s_i = (1/2) eps_ijk L^{jk}``, which preserves
antisymmetry by construction. Boosts are passive transforms from the
particle rest frame (primed quantities) to the lab; metric (+,-,-,-).

Under a boost with speed v along the unit vector n, the split transforms
like an (E, B) field pair:

    K = gamma K' + (1 - gamma)(n . K') n - gamma v (n x s')
    s = gamma s' + (1 - gamma)(n . s') n + gamma v (n x K')

so for a boost along +x the lab y-spin is gamma (s'_y - v K'_z), with
K'_z the 03 tensor component of the rest frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class FourVector:
    t: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.t, self.x, self.y, self.z))):
            raise ValueError("FourVector components must be finite")

    def boost(self, b: "BoostParams") -> "FourVector":
        n = np.asarray(b.direction, dtype=float)
        r = np.array([self.x, self.y, self.z])
        rn = float(n @ r)
        t = b.gamma * (self.t + b.v * rn)
        space = r + ((b.gamma - 1.0) * rn + b.gamma * b.v * self.t) * n
        return FourVector(t, *space)


@dataclass(frozen=True)
class BoostParams:
    """Speed v in [0, 1), unit direction, and the derived Lorentz factor."""

    v: float
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.v < 1.0:
            raise ValueError(f"boost speed must satisfy 0 <= v < 1, got {self.v!r}")
        norm = math.sqrt(sum(c * c for c in self.direction))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"boost direction must be a unit vector, |n| = {norm!r}")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.v * self.v)

    def reversed(self) -> "BoostParams":
        return BoostParams(self.v, tuple(-c for c in self.direction))


@dataclass(frozen=True, eq=False)
class AngularMomentumTensor:
    """Split (K, s) form; K_i = L^{0i}, s_i = (1/2) eps_ijk L^{jk}."""

    K: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        if self.K.shape != (3,) or self.s.shape != (3,):
            raise ValueError("K and s must be 3-vectors")
        if not (np.isfinite(self.K).all() and np.isfinite(self.s).all()):
            raise ValueError("tensor components must be finite")


def _boost_split(K, s, v, n):
    """Vectorized split-form boost; K, s broadcast over leading axes."""
    g = 1.0 / np.sqrt(1.0 - v * v)
    nK = np.sum(n * K, axis=-1, keepdims=True)
    ns = np.sum(n * s, axis=-1, keepdims=True)
    gv = np.expand_dims(g * v, -1) if np.ndim(v) else g * v
    gm = np.expand_dims(g, -1) if np.ndim(v) else g
    K_lab = gm * K + (1.0 - gm) * nK * n - gv * np.cross(n, s)
    s_lab = gm * s + (1.0 - gm) * ns * n + gv * np.cross(n, K)
    return K_lab, s_lab


def boost_tensor(T: AngularMomentumTensor, b: BoostParams) -> AngularMomentumTensor:
    """Transform a rest-frame tensor to the lab frame of the boost."""
    n = np.asarray(b.direction, dtype=float)
    K_lab, s_lab = _boost_split(T.K, T.s, b.v, n)
    return AngularMomentumTensor(K_lab, s_lab)


def l03_rest(t_prime: float, p_z_prime: float, E_prime: float, z_prime: float) -> float:
    """03 angular-momentum component t' p'_z - E' z' in the rest frame.

    Constant along a free trajectory z'(t') = z0 + (p'_z/E') t'.
    """
    return t_prime * p_z_prime - E_prime * z_prime


def spin_lab_y(s_y_rest: float, b: BoostParams, l03: float) -> float:
    """Closed-form lab y angular momentum gamma (s'_y - v L'03).

    Assumes the boost is along the +x axis, orthogonal to y.
    """
    return b.gamma * (s_y_rest - b.v * l03)
