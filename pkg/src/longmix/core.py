"""Model containers, the modified Cholesky decomposition and density evaluation.

The latent covariance of component ``g`` is never stored directly.  It is
carried as a pair ``(T_g, D_g)`` with ``T_g`` unit lower triangular and
``D_g`` diagonal positive, so that::

    Omega_g = (T_g' D_g^{-1} T_g)^{-1}        and        T_g Omega_g T_g' = D_g

The observed-space covariance of component ``g`` is
``Lambda Omega_g Lambda' + Psi`` with mean ``Lambda xi_g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .exceptions import DataError, DegenerateComponentError, InvalidRequestError

D_FLOOR = 1e-10
LOG_2PI = np.log(2.0 * np.pi)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """An ``n x p`` matrix of longitudinal measurements.

    Rows are subjects, columns are ordered time points.  ``labels`` are only
    used for scoring a clustering, never for fitting.
    """

    x: np.ndarray
    labels: Optional[np.ndarray] = None
    time_names: Optional[tuple] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got shape {x.shape}")
        n, p = x.shape
        if n < 1:
            raise DataError("dataset has no rows")
        if p < 2:
            raise DataError(f"need at least 2 time points, got {p}")
        bad = np.argwhere(~np.isfinite(x))
        if len(bad):
            raise DataError("non-finite entry", row=int(bad[0, 0]), column=int(bad[0, 1]))
        object.__setattr__(self, "x", _frozen(x))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got shape {labels.shape}")
            object.__setattr__(self, "labels", _frozen(labels, dtype=labels.dtype))
        if self.time_names is not None:
            names = tuple(str(s) for s in self.time_names)
            if len(names) != p:
                raise DataError(f"expected {p} time names, got {len(names)}")
            object.__setattr__(self, "time_names", names)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]


class ModelConstraint(str, Enum):
    """Sharing and isotropy pattern of the latent covariance factors.

    First letter: T_g Equal (shared) or Variable across groups.  Second
    letter: D_g Equal or Variable.  Third letter: D_g Anisotropic or
    Isotropic (``D_g = delta_g I``).
    """

    EEA = "EEA"
    VVA = "VVA"
    VEA = "VEA"
    EVA = "EVA"
    VVI = "VVI"
    VEI = "VEI"
    EVI = "EVI"
    EEI = "EEI"

    @property
    def t_shared(self) -> bool:
        return self.value[0] == "E"

    @property
    def d_shared(self) -> bool:
        return self.value[1] == "E"

    @property
    def d_isotropic(self) -> bool:
        return self.value[2] == "I"

    @classmethod
    def from_flags(cls, t_shared: bool, d_shared: bool, d_isotropic: bool) -> "ModelConstraint":
        code = ("E" if t_shared else "V") + ("E" if d_shared else "V") + ("I" if d_isotropic else "A")
        return cls(code)

    @classmethod
    def parse(cls, code) -> "ModelConstraint":
        if isinstance(code, cls):
            return code
        try:
            return cls(str(code).strip().upper())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise InvalidRequestError(f"unknown model code {code!r}; expected one of {valid}") from None


@dataclass(frozen=True)
class CholeskyPair:
    """Unit lower triangular ``t`` and innovation variances ``d`` (diagonal of D)."""

    t: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        d = np.asarray(self.d, dtype=float)
        q = d.shape[0]
        if d.ndim != 1 or t.shape != (q, q):
            raise InvalidRequestError(f"incompatible shapes t={t.shape}, d={d.shape}")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(d)):
            raise InvalidRequestError("non-finite entries in Cholesky pair")
        if np.any(d < 0):
            raise InvalidRequestError("innovation variances must be positive")
        if np.any(np.triu(t, 1) != 0) or np.any(np.diag(t) != 1):
            raise InvalidRequestError("t must be unit lower triangular")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "d", _frozen(np.maximum(d, D_FLOOR)))

    @property
    def q(self):
        return self.d.shape[0]


@dataclass(frozen=True)
class LatentMoments:
    """Conditional moments of the latent factors for one observation and group."""

    e_u: np.ndarray
    e_uu: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector of the mixture.

    Per-group quantities are stacked along the first axis: ``pi`` (G,),
    ``xi`` (G, q), ``t`` (G, q, q), ``d`` (G, q).  ``lam`` is the shared
    ``p x q`` loading matrix and ``psi`` the diagonal of the shared noise
    covariance.
    """

    pi: np.ndarray
    xi: np.ndarray
    t: np.ndarray
    d: np.ndarray
    lam: np.ndarray
    psi: np.ndarray
    constraint: ModelConstraint = ModelConstraint.VVA
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraint", ModelConstraint.parse(self.constraint))
        pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        t = np.asarray(self.t, dtype=float)
        d = np.atleast_2d(np.asarray(self.d, dtype=float))
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        if t.ndim == 2:
            t = t[None]
        G, q = xi.shape
        p = lam.shape[0]
        if pi.shape != (G,) or t.shape != (G, q, q) or d.shape != (G, q) or lam.shape != (p, q) or psi.shape != (p,):
            raise InvalidRequestError(
                f"inconsistent shapes: pi {pi.shape}, xi {xi.shape}, t {t.shape}, "
                f"d {d.shape}, lam {lam.shape}, psi {psi.shape}"
            )
        if self.validate:
            if not 1 <= q < p:
                raise InvalidRequestError(f"need 1 <= q < p, got q={q}, p={p}")
            if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
                raise InvalidRequestError("mixing proportions must be positive and sum to 1")
            if np.any(psi <= 0):
                raise InvalidRequestError("psi entries must be positive")
            if np.any(np.triu(t, 1) != 0) or np.any(np.diagonal(t, axis1=1, axis2=2) != 1):
                raise InvalidRequestError("every T_g must be unit lower triangular")
            c = self.constraint
            if c.t_shared and np.any(t != t[0]):
                raise InvalidRequestError(f"{c.value} requires identical T_g")
            if c.d_shared and np.any(d != d[0]):
                raise InvalidRequestError(f"{c.value} requires identical D_g")
            if c.d_isotropic and np.any(d != d[:, :1]):
                raise InvalidRequestError(f"{c.value} requires isotropic D_g")
        for name, arr in (("pi", pi), ("xi", xi), ("t", t), ("lam", lam), ("psi", psi)):
            object.__setattr__(self, name, _frozen(arr))
        object.__setattr__(self, "d", _frozen(np.maximum(d, D_FLOOR)))

    @property
    def g_components(self) -> int:
        return self.xi.shape[0]

    @property
    def q_latent(self) -> int:
        return self.xi.shape[1]

    @property
    def p(self) -> int:
        return self.lam.shape[0]

    @property
    def chol(self) -> tuple:
        return tuple(CholeskyPair(self.t[g], self.d[g]) for g in range(self.g_components))

    def means(self) -> np.ndarray:
        """Component mean trajectories ``Lambda xi_g`` as a (G, p) array."""
        return self.xi @ self.lam.T

    def omegas(self) -> np.ndarray:
        return omegas_from_factors(self.t, self.d)

    def covariances(self) -> np.ndarray:
        """All component covariances as a (G, p, p) array."""
        om = self.omegas()
        sig = self.lam @ om @ self.lam.T
        idx = np.arange(self.p)
        sig[:, idx, idx] += self.psi
        return sig

    def replace(self, **changes) -> "ModelParams":
        kw = dict(pi=self.pi, xi=self.xi, t=self.t, d=self.d, lam=self.lam, psi=self.psi,
                  constraint=self.constraint, validate=self.validate)
        kw.update(changes)
        return ModelParams(**kw)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.constraint == other.constraint and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("pi", "xi", "t", "d", "lam", "psi")
        )

    __hash__ = None


def omegas_from_factors(t: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Batched ``(T' D^{-1} T)^{-1} = T^{-1} D T^{-T}`` for stacked factors."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    eye = np.broadcast_to(np.eye(t.shape[-1]), t.shape)
    tinv = np.linalg.solve(t, eye)
    om = (tinv * d[..., None, :]) @ np.swapaxes(tinv, -1, -2)
    return 0.5 * (om + np.swapaxes(om, -1, -2))


def omega_from_cholesky(pair: CholeskyPair) -> np.ndarray:
    """Latent covariance ``(T' D^{-1} T)^{-1}`` of a Cholesky pair."""
    tinv = linalg.solve_triangular(pair.t, np.eye(pair.q), lower=True, unit_diagonal=True)
    om = (tinv * pair.d) @ tinv.T
    return 0.5 * (om + om.T)


def solve_triangle_row(s: np.ndarray, r: int) -> np.ndarray:
    """Sub-diagonal entries of row ``r`` (0-based) of the triangle of ``s``.

    Solves ``s[:r, :r] phi = -s[r, :r]``, the stationarity condition of the
    ``r``-th row of ``T s T'`` with unit diagonal.
    """
    return -linalg.solve(s[:r, :r], s[r, :r], assume_a="pos")


def modified_cholesky_triangle(s: np.ndarray) -> np.ndarray:
    """Unit lower triangular ``T`` such that ``T s T'`` is diagonal.

    Raises ``numpy.linalg.LinAlgError`` when a leading block of ``s`` is not
    positive definite.
    """
    s = np.asarray(s, dtype=float)
    q = s.shape[0]
    t = np.eye(q)
    for r in range(1, q):
        t[r, :r] = solve_triangle_row(s, r)
    return t


def cholesky_from_omega(omega) -> CholeskyPair:
    """Modified Cholesky factors ``(T, D)`` with ``T omega T' = D``."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise InvalidRequestError(f"omega must be square, got shape {omega.shape}")
    if not np.all(np.isfinite(omega)) or not np.allclose(omega, omega.T, rtol=1e-10, atol=1e-12):
        raise InvalidRequestError("omega must be symmetric")
    try:
        np.linalg.cholesky(omega)
        t = modified_cholesky_triangle(omega)
    except np.linalg.LinAlgError:
        raise InvalidRequestError("omega is not positive definite") from None
    d = np.einsum("ij,jk,ik->i", t, omega, t)
    if np.any(d <= 0):
        raise InvalidRequestError("omega is not positive definite")
    return CholeskyPair(t, d)


def component_covariance(params: ModelParams, g: int) -> np.ndarray:
    """Observed covariance ``Lambda Omega_g Lambda' + Psi`` of component ``g``."""
    om = omega_from_cholesky(CholeskyPair(params.t[g], params.d[g]))
    sig = params.lam @ om @ params.lam.T + np.diag(params.psi)
    return 0.5 * (sig + sig.T)


def gaussian_logpdf(x, mean, cov, g=None) -> np.ndarray:
    """Row-wise multivariate normal log density via a Cholesky factor.

    ``x`` may be a single vector or an ``(n, p)`` matrix.
    """
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        raise DegenerateComponentError(g) from None
    if not np.all(np.diag(chol) > 0):
        raise DegenerateComponentError(g)
    x = np.asarray(x, dtype=float)
    resid = np.atleast_2d(x - mean)
    z = linalg.solve_triangular(chol, resid.T, lower=True)
    out = -0.5 * (cov.shape[0] * LOG_2PI + (z * z).sum(axis=0)) - np.log(np.diag(chol)).sum()
    return out if x.ndim == 2 else out[0]


def log_component_density(x, params: ModelParams, g: int):
    """``log phi(x | Lambda xi_g, Lambda Omega_g Lambda' + Psi)``."""
    return gaussian_logpdf(x, params.lam @ params.xi[g], component_covariance(params, g), g=g)


def _omega_count(g, q, constraint: ModelConstraint) -> int:
    t_part = q * (q - 1) // 2 * (1 if constraint.t_shared else g)
    d_part = (1 if constraint.d_isotropic else q) * (1 if constraint.d_shared else g)
    return t_part + d_part


def count_free_parameters(g: int, p: int, q: int, constraint=ModelConstraint.VVA) -> int:
    """Number of free parameters of a fitted model.

    Mixing weights, latent means, loadings (modulo rotation), noise, then the
    latent covariance factors counted according to ``constraint``.
    """
    constraint = ModelConstraint.parse(constraint)
    if g < 1 or not 1 <= q < p:
        raise InvalidRequestError(f"need G >= 1 and 1 <= q < p, got G={g}, p={p}, q={q}")
    return (g - 1) + g * q + (p * q - q * q) + p + _omega_count(g, q, constraint)


def count_gmm_parameters(g: int, p: int) -> int:
    """Free parameters of an unconstrained full-covariance Gaussian mixture."""
    if g < 1 or p < 1:
        raise InvalidRequestError(f"need G >= 1 and p >= 1, got G={g}, p={p}")
    return (g - 1) + g * p + g * (p * (p - 1) // 2) + g * p


def isotropic(d: np.ndarray) -> np.ndarray:
    """Replace each row of ``d`` by its mean, exactly repeated."""
    d = np.asarray(d, dtype=float)
    return np.repeat(d.mean(axis=-1, keepdims=True), d.shape[-1], axis=-1)


def as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.x
    return np.asarray(data, dtype=float)


def stack_params(pairs: Sequence[CholeskyPair]):
    return np.stack([c.t for c in pairs]), np.stack([c.d for c in pairs])
