"""Catalog of reaction kinetics, diffusion families and initial profiles.

Every reaction entry carries its own Lipschitz constant so the stability
budget of the explicit reaction treatment can be checked without parsing
user expressions.  Functions are vectorized: ``f(t, y, z)`` takes reference
points ``y`` of shape (m, 2) and values ``z`` of shape (m,).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import DiffusionSpec


def _zero(t, y, *z):
    return np.zeros(np.shape(z[0]))


@dataclass
class ReactionSpec:
    f1: object = _zero
    f2: object = _zero
    h1: object = _zero
    h2: object = _zero
    lipschitz_bound: float = 0.0
    sup_bound: float = None
    y_dependent: bool = False
    name: str = "none"
    params: dict = field(default_factory=dict)

    @property
    def is_zero(self):
        return self.name == "none"

    def with_lipschitz(self, value):
        return ReactionSpec(self.f1, self.f2, self.h1, self.h2, float(value), self.sup_bound,
                            self.y_dependent, self.name, dict(self.params))


def no_reaction():
    return ReactionSpec()


def linear_decay(rate1=0.0, rate2=1.0):
    """f^j(z) = -rate_j z; no interface kinetics."""
    return ReactionSpec(
        f1=lambda t, y, z: -rate1 * np.asarray(z),
        f2=lambda t, y, z: -rate2 * np.asarray(z),
        lipschitz_bound=max(abs(rate1), abs(rate2)),
        name="linear",
        params={"rate1": rate1, "rate2": rate2},
    )


def _kappa(kappa, amplitude):
    if amplitude == 0.0:
        return lambda y: kappa
    return lambda y: kappa * (1.0 + amplitude * np.cos(2 * np.pi * y[:, 0]) * np.cos(2 * np.pi * y[:, 1]))


def exchange(kappa=1.0, amplitude=0.0):
    """h^1 = kappa(y) (z2 - z1), h^2 = -h^1: conservative transfer across the interface."""
    if not abs(amplitude) < 1.0:
        raise ValueError("exchange amplitude must satisfy |a| < 1")
    k = _kappa(kappa, amplitude)
    return ReactionSpec(
        h1=lambda t, y, z1, z2: k(y) * (np.asarray(z2) - np.asarray(z1)),
        h2=lambda t, y, z1, z2: k(y) * (np.asarray(z1) - np.asarray(z2)),
        lipschitz_bound=abs(kappa) * (1.0 + abs(amplitude)),
        y_dependent=amplitude != 0.0,
        name="exchange",
        params={"kappa": kappa, "amplitude": amplitude},
    )


def logistic_truncated(rate=1.0, kappa=1.0, amplitude=0.0):
    """Logistic growth r s (1 - s) with s = clip(z, 0, 1), plus interface exchange."""

    def f(t, y, z):
        s = np.clip(z, 0.0, 1.0)
        return rate * s * (1.0 - s)

    ex = exchange(kappa, amplitude)
    return ReactionSpec(
        f1=f, f2=f, h1=ex.h1, h2=ex.h2,
        lipschitz_bound=max(abs(rate), ex.lipschitz_bound),
        sup_bound=abs(rate) / 4.0,
        y_dependent=amplitude != 0.0,
        name="logistic",
        params={"rate": rate, "kappa": kappa, "amplitude": amplitude},
    )


REACTIONS = {
    "none": no_reaction,
    "linear": linear_decay,
    "exchange": exchange,
    "logistic": logistic_truncated,
}


def check_lipschitz(spec: ReactionSpec, rng=None, n=2000, zscale=10.0):
    """Largest observed difference quotients of f^j and h^j by random sampling.

    Returns (observed, ok) where ok means no quotient exceeds the declared bound.
    """
    rng = np.random.default_rng(rng)
    y = rng.random((n, 2))
    t = float(rng.random())
    z = zscale * (2 * rng.random((4, n)) - 1)
    w = z + rng.normal(scale=0.5, size=(4, n))
    worst = 0.0
    for f in (spec.f1, spec.f2):
        d = np.abs(np.asarray(f(t, y, z[0])) - np.asarray(f(t, y, w[0])))
        worst = max(worst, float(np.max(d / np.abs(z[0] - w[0]))))
    for h in (spec.h1, spec.h2):
        d = np.abs(np.asarray(h(t, y, z[0], z[1])) - np.asarray(h(t, y, w[0], w[1])))
        worst = max(worst, float(np.max(d / (np.abs(z[0] - w[0]) + np.abs(z[1] - w[1])))))
    return worst, worst <= spec.lipschitz_bound * (1 + 1e-9) + 1e-300


def constant_diffusion(d1=1.0, d2=1.0, dg1=1.0, dg2=1.0):
    return DiffusionSpec(D1=d1, D2=d2, DG1=dg1, DG2=dg2, c0=min(d1, d2, dg1, dg2))


def periodic_diffusion(d1=1.0, d2=1.0, dg1=1.0, dg2=1.0, amplitude=0.25):
    """Smooth Y-periodic, matrix-valued tensors with a symmetric off-diagonal part."""
    a = float(amplitude)
    if not 0 <= a < 0.5:
        raise ValueError("periodic diffusion amplitude must lie in [0, 0.5)")

    def tensor(base):
        def D(y):
            s = np.sin(2 * np.pi * y[:, 0]) * np.sin(2 * np.pi * y[:, 1])
            c = np.cos(2 * np.pi * (y[:, 0] - y[:, 1]))
            out = np.empty((len(y), 2, 2))
            out[:, 0, 0] = base * (1 + a * s)
            out[:, 1, 1] = base * (1 - a * s)
            out[:, 0, 1] = out[:, 1, 0] = base * 0.5 * a * c
            return out
        return D

    def scalar(base):
        return lambda y: base * (1 + a * np.cos(2 * np.pi * y[:, 0]))

    # eigenvalues of [[1+as, ac/2], [ac/2, 1-as]] are 1 +- a sqrt(s^2 + c^2/4) >= 1 - a sqrt(5/4),
    # attained at y = (1/4, 1/4)
    c0 = (1 - a * math.sqrt(1.25)) * min(d1, d2, dg1, dg2)
    return DiffusionSpec(D1=tensor(d1), D2=tensor(d2), DG1=scalar(dg1), DG2=scalar(dg2), c0=c0)


DIFFUSIONS = {"constant": constant_diffusion, "periodic": periodic_diffusion}


@dataclass
class Profile:
    """Separable initial profile U(x, y) = slow(x) * fast(y)."""

    slow: object
    fast: object = None

    def __call__(self, x, y):
        v = np.asarray(self.slow(np.asarray(x)), dtype=float)
        if self.fast is not None:
            v = v * np.asarray(self.fast(np.asarray(y)), dtype=float)
        return np.broadcast_to(v, (len(x),)).copy()

    def cell_average(self, x, weights, points):
        """x -> int U(x, y) w(y) / int w, using quadrature ``(weights, points)``."""
        v = np.asarray(self.slow(np.asarray(x)), dtype=float)
        v = np.broadcast_to(v, (len(x),)).copy()
        if self.fast is not None:
            v *= float(np.dot(weights, self.fast(points)) / np.sum(weights))
        return v


def constant_profile(c):
    return Profile(lambda x: np.full(len(x), float(c)))


def cosine_profile(base=1.0, amplitude=0.5):
    return Profile(lambda x: base + amplitude * np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]))


@dataclass
class InitialData:
    """Bulk and surface initial profiles for the two components."""

    bulk1: Profile
    surf1: Profile
    bulk2: Profile
    surf2: Profile

    @classmethod
    def same_on_surface(cls, p1, p2):
        return cls(p1, p1, p2, p2)


def smooth_initial_data():
    """Oscillation-free data used by the homogenization sweep."""
    return InitialData.same_on_surface(cosine_profile(1.0, 0.5), cosine_profile(0.5, -0.25))


def constant_initial_data(c1=1.0, c2=0.5):
    return InitialData.same_on_surface(constant_profile(c1), constant_profile(c2))


INITIAL_DATA = {"smooth": smooth_initial_data, "constant": constant_initial_data}


def mms_solution(t, x):
    """Manufactured macro field e^{-t} cos(pi x1) cos(pi x2) (homogeneous Neumann)."""
    return math.exp(-t) * np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])


def mms_source(weight, d_hat):
    """Source making ``mms_solution`` exact for weight * u_t - d_hat Laplace u = source."""
    return lambda t, x: (-weight + 2 * np.pi**2 * d_hat) * mms_solution(t, x)
