"""Seeded data generators.

Two built-in designs: 4 groups of 150 subjects observed at 11 time points
from 3 latent time points, and 4 groups of 150 observed at 30 time points
from 7 latent time points.  Latent covariances default to ``0.5 I`` and noise
to ``0.25 I`` in both designs; every piece is overridable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CholeskyPair, Dataset, ModelConstraint, ModelParams
from .exceptions import InvalidRequestError

SIM1_LAMBDA = np.array([
    [1.0, 0.8, 0.6, 0.4, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 0.8, 0.6, 0.4, 0.2, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
]).T

SIM1_XI = np.array([
    [2.0, 6.0, 4.0],
    [7.0, 7.0, 7.0],
    [12.0, 9.0, 12.0],
    [15.0, 14.0, 13.0],
])

# the third vector is printed with six entries; the fifth entry is read as 3
SIM2_XI = np.array([
    [6.0, 5.0, 3.0, 3.0, 2.0, 2.0, 1.5],
    [4.5, 3.0, 3.5, 2.0, 3.0, 3.5, 4.0],
    [2.0, 2.0, 2.5, 3.0, 3.0, 4.0, 6.0],
    [1.0, 1.0, 2.0, 2.0, 2.0, 1.0, 1.0],
])

DEFAULT_PSI = 0.25
LATENT_VAR = 0.5


@dataclass(frozen=True)
class SimSpec:
    params: ModelParams
    n_per_group: tuple
    seed: int = 0

    def __post_init__(self):
        n = tuple(int(v) for v in self.n_per_group)
        if len(n) != self.params.g_components or min(n) < 1:
            raise InvalidRequestError("need one positive group size per component")
        object.__setattr__(self, "n_per_group", n)


def tent_loadings(p: int, q: int) -> np.ndarray:
    """Overlapping triangular loadings, one tent per factor.

    Tent centres are evenly spaced from the first to the last time point and
    each loading decays linearly to zero at the neighbouring centres, so every
    row sums to one.  A tent reaches 1 only where its centre falls on a time
    point (always for the first and last factor).
    """
    if q < 2 or p < q:
        raise InvalidRequestError(f"need 2 <= q <= p, got p={p}, q={q}")
    centers = np.linspace(0.0, p - 1.0, q)
    width = (p - 1.0) / (q - 1.0)
    return np.maximum(0.0, 1.0 - np.abs(np.arange(p)[:, None] - centers[None, :]) / width)


def sample_latent_ar(pair: CholeskyPair, xi, seed=None, size=None) -> np.ndarray:
    """Draw latent trajectories by the autoregressive recursion of ``pair``.

    ``Y_t = xi_t + sum_{s<t} (-phi_ts)(Y_s - xi_s) + sqrt(d_t) eps_t``, giving
    mean ``xi`` and covariance ``(T' D^{-1} T)^{-1}``.  Returns shape (q,) or
    (size, q).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xi = np.asarray(xi, dtype=float)
    q = pair.q
    m = 1 if size is None else int(size)
    eps = rng.standard_normal((m, q))
    dev = np.zeros((m, q))
    for t in range(q):
        dev[:, t] = -dev[:, :t] @ pair.t[t, :t] + np.sqrt(pair.d[t]) * eps[:, t]
    y = xi + dev
    return y[0] if size is None else y


def sample_dataset(spec: SimSpec) -> Dataset:
    """Draw ``x = Lambda u + e`` per group, with ``u`` from the recursion and ``e ~ N(0, Psi)``."""
    rng = np.random.default_rng(spec.seed)
    par = spec.params
    rows, labels = [], []
    for g, (pair, n_g) in enumerate(zip(par.chol, spec.n_per_group)):
        u = sample_latent_ar(pair, par.xi[g], rng, size=n_g)
        noise = rng.standard_normal((n_g, par.p)) * np.sqrt(par.psi)
        rows.append(u @ par.lam.T + noise)
        labels.append(np.full(n_g, g))
    names = tuple(f"t{j + 1}" for j in range(par.p))
    return Dataset(np.vstack(rows), np.concatenate(labels), names)


def _identity_params(xi, lam, psi, latent_var=1.0):
    G, q = xi.shape
    p = lam.shape[0]
    return ModelParams(
        pi=np.full(G, 1.0 / G),
        xi=xi,
        t=np.broadcast_to(np.eye(q), (G, q, q)),
        d=np.full((G, q), float(latent_var)),
        lam=lam,
        psi=np.full(p, psi),
        constraint=ModelConstraint.VVA,
    )


def simulation1_spec(seed=0, psi: float = DEFAULT_PSI, latent_var: float = LATENT_VAR, xi=None,
                     n_per_group=(150, 150, 150, 150)) -> SimSpec:
    """Four groups, p = 11, q = 3, printed loadings and latent means.

    Latent covariance ``latent_var * I``; at the default the groups are
    separated well enough that the true parameters classify every subject
    correctly.
    """
    xi = SIM1_XI if xi is None else np.asarray(xi, dtype=float)
    return SimSpec(_identity_params(xi, SIM1_LAMBDA, psi, latent_var), tuple(n_per_group), seed)


def simulation2_spec(seed=0, psi: float = DEFAULT_PSI, latent_var: float = LATENT_VAR, xi=None,
                     n_per_group=(150, 150, 150, 150)) -> SimSpec:
    """Four groups, p = 30, q = 7, tent loadings, latent covariance ``latent_var * I``."""
    xi = SIM2_XI if xi is None else np.asarray(xi, dtype=float)
    return SimSpec(_identity_params(xi, tent_loadings(30, 7), psi, latent_var), tuple(n_per_group), seed)


def simulate(design: int, seed=0) -> Dataset:
    """Dataset from built-in design 1 or 2."""
    specs = {1: simulation1_spec, 2: simulation2_spec}
    if design not in specs:
        raise InvalidRequestError(f"unknown design {design!r}; expected 1 or 2")
    return sample_dataset(specs[design](seed))
