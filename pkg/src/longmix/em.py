"""EM fitting of the latent mixture.

One iteration computes, from the current estimates, the conditional latent
moments of every observation under every component, then the closed-form
updates of all parameters, and commits them together before recomputing the
responsibilities.  Every update maximizes the expected complete-data
log-likelihood over its own block with the other blocks held at their
current values, so the observed log-likelihood never decreases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    D_FLOOR,
    LOG_2PI,
    LatentMoments,
    ModelConstraint,
    ModelParams,
    as_matrix,
    count_free_parameters,
    isotropic,
)
from .exceptions import (
    CollapsedComponentError,
    DegenerateComponentError,
    FitFailedError,
    InvalidRequestError,
)
from .metrics import bic as _bic

log = logging.getLogger(__name__)

PSI_FLOOR = 1e-10
RIDGE = 1e-8


@dataclass(frozen=True)
class Responsibilities:
    """Posterior membership probabilities, one row per observation."""

    z_hat: np.ndarray

    def __post_init__(self):
        z = np.array(self.z_hat, dtype=float)
        if z.ndim != 2:
            raise InvalidRequestError(f"responsibilities must be 2-d, got shape {z.shape}")
        if np.any(z < 0) or np.any(z > 1) or not np.allclose(z.sum(axis=1), 1.0, rtol=0, atol=1e-10):
            raise InvalidRequestError("responsibility rows must be probability vectors")
        z.setflags(write=False)
        object.__setattr__(self, "z_hat", z)

    @property
    def n_g(self) -> np.ndarray:
        return self.z_hat.sum(axis=0)

    @property
    def shape(self):
        return self.z_hat.shape

    def hard(self) -> np.ndarray:
        return np.argmax(self.z_hat, axis=1)

    @classmethod
    def from_labels(cls, labels, g: Optional[int] = None) -> "Responsibilities":
        labels = np.asarray(labels, dtype=int)
        g = int(labels.max()) + 1 if g is None else g
        z = np.zeros((labels.shape[0], g))
        z[np.arange(labels.shape[0]), labels] = 1.0
        return cls(z)


@dataclass(frozen=True)
class FitConfig:
    """Stopping rule and safety thresholds for :func:`fit`.

    ``min_responsibility_mass`` defaults to ``1e-6 * n`` when left as None.
    """

    epsilon: float = 1e-5
    max_iter: int = 1000
    min_responsibility_mass: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidRequestError("epsilon must be positive")
        if self.max_iter < 1:
            raise InvalidRequestError("max_iter must be >= 1")

    def min_mass(self, n: int) -> float:
        if self.min_responsibility_mass is None:
            return 1e-6 * n
        return self.min_responsibility_mass


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    responsibilities: Responsibilities
    loglik_trace: np.ndarray
    bic: float
    assignments: np.ndarray
    converged: bool
    iterations: int
    rho: int
    diagnostics: tuple = field(default=())

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def g(self) -> int:
        return self.params.g_components

    @property
    def q(self) -> int:
        return self.params.q_latent

    @property
    def constraint(self) -> ModelConstraint:
        return self.params.constraint


# ---------------------------------------------------------------------------
# batched conditional expectations


class _Centered:
    """Data matrix with its column means removed, plus column sums of squares."""

    __slots__ = ("x", "mean", "xc_t", "xc2_t", "sq")

    def __init__(self, x):
        self.x = x
        self.mean = x.mean(axis=0)
        self.xc_t = np.ascontiguousarray((x - self.mean).T)  # (p, n)
        self.xc2_t = self.xc_t * self.xc_t
        self.sq = np.einsum("np,np->p", x, x)


def _prep(x):
    return x if isinstance(x, _Centered) else _Centered(np.asarray(x, dtype=float))


@dataclass
class _Expectations:
    """Conditional latent moments in affine form ``E[U_ig | x_i] = offset_g + coef_g y_i``.

    ``y`` is a fixed linear image of the centered data: ``Lambda' Psi^{-1}``
    applied on the fast path, the identity on the dense one.  The conditional
    covariance ``cond_var`` does not depend on the observation.  Arrays
    indexed by observation keep that index last.
    """

    xi: np.ndarray          # (G, q)  latent means the moments were taken at
    cond_var: np.ndarray    # (G, q, q)
    coef: np.ndarray        # (G, q, r)
    offset: np.ndarray      # (G, q)
    y_t: np.ndarray         # (r, n)
    log_dens_t: np.ndarray  # (G, n)
    y2_t: Optional[np.ndarray] = None  # (r * r, n) outer products y_i y_i'

    def outer(self):
        if self.y2_t is None:
            self.y2_t = _outer_rows(self.y_t)
        return self.y2_t

    @property
    def e_u(self):
        return np.swapaxes(self.offset[:, :, None] + self.coef @ self.y_t, -1, -2)

    @property
    def log_dens(self):
        return self.log_dens_t.T


class _State:
    """Mutable-free light parameter holder used inside the EM loop."""

    __slots__ = ("pi", "xi", "t", "d", "lam", "psi", "constraint")

    def __init__(self, pi, xi, t, d, lam, psi, constraint):
        self.pi, self.xi, self.t, self.d = pi, xi, t, d
        self.lam, self.psi, self.constraint = lam, psi, constraint

    @classmethod
    def of(cls, params):
        return cls(params.pi, params.xi, params.t, params.d, params.lam, params.psi, params.constraint)

    def means(self):
        return self.xi @ self.lam.T

    def omegas(self):
        tinv = np.linalg.inv(self.t)
        om = (tinv * self.d[:, None, :]) @ np.swapaxes(tinv, -1, -2)
        return _sym(om)

    def to_params(self, validate=True):
        return ModelParams(self.pi, self.xi, self.t, self.d, self.lam, self.psi, self.constraint, validate=validate)


def _outer_rows(y_t):
    r = y_t.shape[0]
    return (y_t[:, None, :] * y_t[None, :, :]).reshape(r * r, -1)


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _expectations(x, params) -> _Expectations:
    """Densities and latent moments for every (component, observation) pair.

    Because the loadings are shared, every component covariance has the form
    ``Psi + Lambda Omega_g Lambda'`` and the Woodbury identity reduces all
    per-component work to q x q matrices ``M_g = Omega_g^{-1} + Lambda' Psi^{-1}
    Lambda``: ``beta_g = M_g^{-1} Lambda' Psi^{-1}`` and the conditional
    covariance is ``M_g^{-1}``.  Quadratic forms in ``y_i = Lambda' Psi^{-1}
    x_i`` are evaluated as one product with the stacked outer products
    ``y_i y_i'``.  A badly conditioned ``Psi`` falls back to dense p x p
    factorizations.
    """
    data = _prep(x)
    psi = params.psi
    if psi.max() > 1e8 * psi.min():
        return _expectations_dense(data, params)
    lam, xi, d, t = params.lam, params.xi, params.d, params.t
    G, q = xi.shape
    p = lam.shape[0]
    lp = lam / psi[:, None]                             # Psi^{-1} Lambda
    m = np.swapaxes(t, -1, -2) @ (t / d[:, :, None]) + _sym(lam.T @ lp)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return _expectations_dense(data, params)
    lower_inv = np.linalg.inv(chol)
    k = _sym(np.swapaxes(lower_inv, -1, -2) @ lower_inv)  # M^{-1}
    y_t = lp.T @ data.xc_t                              # (q, n)
    y2_t = _outer_rows(y_t)
    mu = xi @ lam.T - data.mean                         # centered component means
    mp = mu / psi
    mlat = mu @ lp                                      # (G, q)
    km = (k @ mlat[:, :, None])[..., 0]
    # -2 log density = (x - mu)' Psi^{-1} (x - mu) - v' M^{-1} v + const,
    # v = Lambda' Psi^{-1} (x - mu), expanded into terms linear in x, y and y y'
    logdet = np.log(psi).sum() + np.log(d * np.diagonal(chol, axis1=1, axis2=2) ** 2).sum(axis=1)
    const = p * LOG_2PI + logdet + np.einsum("gp,gp->g", mu, mp) - np.einsum("gq,gq->g", mlat, km)
    log_dens = (mp @ data.xc_t - km @ y_t + 0.5 * (k.reshape(G, q * q) @ y2_t)
                - 0.5 * ((1.0 / psi) @ data.xc2_t)[None, :] - 0.5 * const[:, None])
    return _Expectations(xi, k, k, xi - km, y_t, log_dens, y2_t)


def _expectations_dense(data: _Centered, params) -> _Expectations:
    lam, psi, xi = params.lam, params.psi, params.xi
    p = lam.shape[0]
    om = params.omegas()
    lam_om = lam @ om                                   # (G, p, q)
    sig = lam_om @ lam.T
    sig.reshape(sig.shape[0], p * p)[:, ::p + 1] += psi
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError:
        for g in range(sig.shape[0]):
            try:
                np.linalg.cholesky(sig[g])
            except np.linalg.LinAlgError:
                raise DegenerateComponentError(g) from None
        raise
    lower_inv = np.linalg.inv(chol)
    mu = xi @ lam.T - data.mean
    resid = data.xc_t.T[None, :, :] - mu[:, None, :]   # (G, n, p)
    white = resid @ np.swapaxes(lower_inv, -1, -2)      # rows: L^{-1} r_i
    maha = np.einsum("gnp,gnp->gn", white, white)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    log_dens = -0.5 * (p * LOG_2PI + logdet[:, None] + maha)
    # beta = Omega Lambda' Sigma^{-1}
    beta = np.swapaxes(np.swapaxes(lower_inv, -1, -2) @ (lower_inv @ lam_om), -1, -2)
    cond_var = _sym(om - beta @ lam_om)
    offset = xi - (beta @ mu[:, :, None])[..., 0]
    return _Expectations(xi, cond_var, beta, offset, data.xc_t, log_dens)


def _normalize(log_dens_t, pi):
    """Responsibilities (n, G) and log-likelihood from component log densities (G, n)."""
    weighted = log_dens_t + np.log(pi)[:, None]
    top = weighted.max(axis=0)
    if not np.all(np.isfinite(top)):
        return np.full(weighted.shape[::-1], np.nan), float("nan")
    z = np.exp(weighted - top)
    total = z.sum(axis=0)
    z /= total
    return z.T, float((np.log(total) + top).sum())


# ---------------------------------------------------------------------------
# per-component operations


def beta(params: ModelParams, g: int) -> np.ndarray:
    """Regression of the latent factors on the observation, ``Omega_g Lambda' Sigma_g^{-1}``."""
    sig = params.covariances()[g]
    om = params.omegas()[g]
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError:
        raise DegenerateComponentError(g) from None
    rhs = params.lam @ om
    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs)).T


def latent_moments(x, params: ModelParams, g: int) -> LatentMoments:
    """First and second conditional moments of ``U_ig`` given ``x_i`` and membership in ``g``."""
    x = np.asarray(x, dtype=float)
    b = beta(params, g)
    om = params.omegas()[g]
    e_u = params.xi[g] + b @ (x - params.lam @ params.xi[g])
    cond = _sym((np.eye(params.q_latent) - b @ params.lam) @ om)
    return LatentMoments(e_u, cond + np.outer(e_u, e_u), b)


def e_step(data, params: ModelParams):
    """Responsibilities and observed log-likelihood at ``params``."""
    x = as_matrix(data)
    es = _expectations(x, params)
    z, ll = _normalize(es.log_dens_t, params.pi)
    return Responsibilities(z), ll


def _z(resp):
    return resp.z_hat if isinstance(resp, Responsibilities) else np.asarray(resp, dtype=float)


def _check_mass(n_g, min_mass):
    bad = np.flatnonzero(n_g < min_mass)
    if len(bad):
        raise CollapsedComponentError(int(bad[0]), float(n_g[bad[0]]))


class _Sums:
    """Responsibility-weighted sums of the affine latent moments, per component."""

    __slots__ = ("n_g", "bsy", "bsyyb")

    def __init__(self, z, es: _Expectations):
        G = z.shape[1]
        r = es.y_t.shape[0]
        self.n_g = z.sum(axis=0)
        sy = (es.y_t @ z).T
        syy = (es.outer() @ z).T.reshape(G, r, r)
        self.bsy = (es.coef @ sy[:, :, None])[..., 0]                 # sum_i z B y_i
        self.bsyyb = es.coef @ syy @ np.swapaxes(es.coef, -1, -2)     # sum_i z B y_i y_i' B'

    def outer_about(self, h):
        """``sum_i z_ig (h_g + B_g y_i)(h_g + B_g y_i)'``."""
        cross = self.bsy[:, :, None] * h[:, None, :]
        return (self.bsyyb + cross + np.swapaxes(cross, -1, -2)
                + self.n_g[:, None, None] * h[:, :, None] * h[:, None, :])


def _scatters(z, es, n_g, sums=None):
    sums = sums or _Sums(z, es)
    return _sym(es.cond_var + sums.outer_about(es.offset - es.xi) / n_g[:, None, None])


def scatter(data, resp, params: ModelParams, g: int, config: Optional[FitConfig] = None) -> np.ndarray:
    """Responsibility-weighted conditional scatter of ``U_ig`` about ``xi_g``."""
    x = as_matrix(data)
    z = _z(resp)
    n_g = z.sum(axis=0)
    _check_mass(n_g[g:g + 1], (config or FitConfig()).min_mass(x.shape[0]))
    return _scatters(z, _expectations(x, params), n_g)[g]


def update_pi(resp) -> np.ndarray:
    z = _z(resp)
    return z.sum(axis=0) / z.shape[0]


def update_xi(data, resp, params: ModelParams, g: int, config: Optional[FitConfig] = None) -> np.ndarray:
    """``xi_g + (1/n_g) sum_i z_ig beta_g (x_i - Lambda xi_g)``."""
    x = as_matrix(data)
    z = _z(resp)
    n_g = z[:, g].sum()
    _check_mass(np.array([n_g]), (config or FitConfig()).min_mass(x.shape[0]))
    b = beta(params, g)
    resid = x - params.lam @ params.xi[g]
    return params.xi[g] + (z[:, g] @ resid) @ b.T / n_g


def _solve_rows(systems, rhs):
    """Batched ``systems @ phi = -rhs`` with the ridge fallback; returns (phi, regularized)."""
    try:
        phi = -np.linalg.solve(systems, rhs[..., None])[..., 0]
        if np.all(np.isfinite(phi)):
            return phi, False
    except np.linalg.LinAlgError:
        pass
    k = systems.shape[-1]
    tr = np.trace(systems, axis1=-2, axis2=-1)
    ridged = systems + (RIDGE * np.abs(tr) / k + 1e-300)[..., None, None] * np.eye(k)
    try:
        phi = -np.linalg.solve(ridged, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise DegenerateComponentError(None, "singular system in triangle update") from None
    if not np.all(np.isfinite(phi)):
        raise DegenerateComponentError(None, "singular system in triangle update")
    return phi, True


def _triangles(scatters, row_weights=None):
    """Unit lower triangles solving the row systems of each scatter.

    With ``row_weights`` of shape (G, q) a single triangle is returned whose
    row ``r`` is solved from ``sum_g row_weights[g, r] S_g``.
    """
    scatters = np.asarray(scatters, dtype=float)
    G, q, _ = scatters.shape
    regularized = False
    if row_weights is None:
        # S = L L' with L = L1 C gives T = L1^{-1}; row solves are the fallback
        try:
            chol = np.linalg.cholesky(scatters)
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None:
            unit = chol / np.diagonal(chol, axis1=1, axis2=2)[:, None, :]
            t = np.tril(np.linalg.inv(unit), -1) + np.eye(q)
            if np.all(np.isfinite(t)):
                return t, False
        t = np.broadcast_to(np.eye(q), scatters.shape).copy()
        for r in range(1, q):
            phi, flag = _solve_rows(scatters[:, :r, :r], scatters[:, r, :r])
            t[:, r, :r] = phi
            regularized |= flag
        return t, regularized
    t = np.eye(q)
    for r in range(1, q):
        pooled = np.tensordot(row_weights[:, r], scatters, axes=1)
        phi, flag = _solve_rows(pooled[:r, :r], pooled[r, :r])
        t[r, :r] = phi
        regularized |= flag
    return t, regularized


def update_t(scatter_matrix) -> np.ndarray:
    """Unit lower triangular ``T`` whose rows solve the stationarity systems of ``S``.

    The result makes ``T S T'`` diagonal.
    """
    s = np.asarray(scatter_matrix, dtype=float)
    return _triangles(s[None])[0][0]


def update_d(scatter_matrix, t_new) -> np.ndarray:
    """Innovation variances ``diag(T S T')`` floored at ``1e-10``."""
    s = np.asarray(scatter_matrix, dtype=float)
    t = np.asarray(t_new, dtype=float)
    return np.maximum(np.einsum("...ij,...jk,...ik->...i", t, s, t), D_FLOOR)


def apply_constraint(t, d, n_g, constraint, scatters=None, d_prev=None):
    """Impose the sharing/isotropy pattern of ``constraint`` on per-group factors.

    Order: shared triangle, then shared D, then isotropy.  A shared triangle
    is re-solved from the pooled scatters, row ``r`` weighting group ``g`` by
    ``n_g / d_prev[g, r]`` (``n_g`` alone when ``d_prev`` is None or D is
    shared); ``d`` is then recomputed from the pooled triangle.

    Returns ``(t, d, regularized)``.
    """
    constraint = ModelConstraint.parse(constraint)
    t = np.array(t, dtype=float)
    d = np.array(d, dtype=float)
    n_g = np.asarray(n_g, dtype=float)
    G, q = d.shape
    regularized = False
    if constraint.t_shared:
        if scatters is None:
            raise InvalidRequestError("a shared triangle needs the per-group scatters")
        scatters = np.asarray(scatters, dtype=float)
        if d_prev is None or constraint.d_shared:
            weights = np.repeat(n_g[:, None], q, axis=1)
        else:
            weights = n_g[:, None] / np.asarray(d_prev, dtype=float)
        weights = weights / weights.sum(axis=0, keepdims=True)
        shared, regularized = _triangles(scatters, weights)
        t = np.broadcast_to(shared, (G, q, q)).copy()
        d = update_d(scatters, t)
    if constraint.d_shared:
        pooled = (n_g / n_g.sum()) @ d
        d = np.broadcast_to(pooled, (G, q)).copy()
    if constraint.d_isotropic:
        d = isotropic(d)
    return t, np.maximum(d, D_FLOOR), regularized


def _lambda_accumulators(x, z, es, n_g, sums=None):
    """``A = sum z x E[U]'`` (p, q) and ``B = sum z E[UU']`` (q, q)."""
    sums = sums or _Sums(z, es)
    zt = z.T
    G, q, r = es.coef.shape
    # sum_g z_ig E[U_ig | x_i] as (q, n)
    mixed = (es.coef.reshape(G, q * r).T @ zt).reshape(q, r, -1)
    e_mix = es.offset.T @ zt + np.einsum("qrn,rn->qn", mixed, es.y_t)
    a = (e_mix @ x).T
    b = (n_g @ es.cond_var.reshape(G, q * q)).reshape(q, q) + sums.outer_about(es.offset).sum(axis=0)
    return a, _sym(b)


def _solve_lambda(a, b):
    try:
        lam = np.linalg.solve(b, a.T).T
        if np.all(np.isfinite(lam)):
            return lam, False
    except np.linalg.LinAlgError:
        pass
    q = b.shape[0]
    ridged = b + (RIDGE * abs(np.trace(b)) / q + 1e-300) * np.eye(q)
    try:
        return np.linalg.solve(ridged, a.T).T, True
    except np.linalg.LinAlgError:
        raise DegenerateComponentError(None, "singular loading accumulator") from None


def update_lambda(data, resp, params: ModelParams) -> np.ndarray:
    """``(sum z x E[U]') (sum z E[UU'])^{-1}`` over all observations and groups."""
    x = as_matrix(data)
    z = _z(resp)
    a, b = _lambda_accumulators(x, z, _expectations(x, params), z.sum(axis=0))
    return _solve_lambda(a, b)[0]


def _psi_update(data: _Centered, lam, a, b):
    n = data.x.shape[0]
    psi = (data.sq - 2.0 * (lam * a).sum(axis=1) + ((lam @ b) * lam).sum(axis=1)) / n
    return np.maximum(psi, PSI_FLOOR)


def update_psi(data, resp, params: ModelParams) -> np.ndarray:
    """Diagonal noise update evaluated at the current loadings."""
    x = as_matrix(data)
    z = _z(resp)
    a, b = _lambda_accumulators(x, z, _expectations(x, params), z.sum(axis=0))
    return _psi_update(_Centered(x), params.lam, a, b)


# ---------------------------------------------------------------------------
# M-step and driver


def _m_step(data: _Centered, z, params, es: _Expectations, min_mass):
    x = data.x
    n = x.shape[0]
    sums = _Sums(z, es)
    n_g = sums.n_g
    _check_mass(n_g, min_mass)
    pi = n_g / n
    pi = pi / pi.sum()
    xi = es.offset + sums.bsy / n_g[:, None]
    s = _scatters(z, es, n_g, sums)
    t, flag_t = _triangles(s)
    d = update_d(s, t)
    flag_c = False
    if params.constraint is not ModelConstraint.VVA:
        t, d, flag_c = apply_constraint(t, d, n_g, params.constraint, scatters=s, d_prev=params.d)
    a, b = _lambda_accumulators(x, z, es, n_g, sums)
    lam, flag_l = _solve_lambda(a, b)
    psi = _psi_update(data, params.lam, a, b)
    flags = []
    if flag_t or flag_c:
        flags.append("ridge added to a triangle system")
    if flag_l:
        flags.append("ridge added to the loading accumulator")
    return _State(pi, xi, t, d, lam, psi, params.constraint), flags


def initial_params(data, resp, q: int, constraint=ModelConstraint.VVA) -> ModelParams:
    """Starting estimates from a responsibility matrix.

    Loadings are the leading ``q`` eigenvectors of the uncentered second
    moment matrix; latent means and covariances are the group moments
    projected onto them; noise is the residual variance off that subspace.
    """
    x = as_matrix(data)
    z = _z(resp)
    n, p = x.shape
    G = z.shape[1]
    constraint = ModelConstraint.parse(constraint)
    n_g = z.sum(axis=0)
    _check_mass(n_g, 1e-12)
    evals, evecs = np.linalg.eigh(x.T @ x / n)
    lam = evecs[:, ::-1][:, :q]
    # fix eigenvector signs for reproducibility
    lam = lam * np.where(lam[np.abs(lam).argmax(axis=0), np.arange(q)] < 0, -1.0, 1.0)
    mu = (z.T @ x) / n_g[:, None]
    xi = mu @ lam
    proj = x @ lam
    oms = np.empty((G, q, q))
    for g in range(G):
        c = proj - xi[g]
        om = (c * z[:, g, None]).T @ c / n_g[g]
        oms[g] = om + (1e-6 * max(np.trace(om), 1e-12) / q) * np.eye(q)
    resid = x - proj @ lam.T
    psi = (resid * resid).mean(axis=0)
    psi = np.maximum(psi, 1e-6 * max(x.var(axis=0).mean(), 1e-12))
    t, _ = _triangles(oms)
    d = update_d(oms, t)
    t, d, _ = apply_constraint(t, d, n_g, constraint, scatters=oms)
    return ModelParams(n_g / n_g.sum(), xi, t, d, lam, psi, constraint, validate=False)


def fit(data, g: int, q: int, constraint, init, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the mixture by EM from starting responsibilities ``init``.

    Stops when the log-likelihood gain falls below ``config.epsilon`` or after
    ``config.max_iter`` iterations.  Raises :class:`CollapsedComponentError`
    or :class:`DegenerateComponentError` when a component breaks down and
    :class:`FitFailedError` on a non-finite log-likelihood.
    """
    config = config or FitConfig()
    constraint = ModelConstraint.parse(constraint)
    x = as_matrix(data)
    n, p = x.shape
    if g < 1 or not 1 <= q < p:
        raise InvalidRequestError(f"need G >= 1 and 1 <= q < p, got G={g}, q={q}, p={p}")
    z = _z(init)
    if z.shape != (n, g):
        raise InvalidRequestError(f"init has shape {z.shape}, expected {(n, g)}")
    if not np.allclose(z.sum(axis=1), 1.0, rtol=0, atol=1e-10):
        raise InvalidRequestError("init rows must sum to 1")
    min_mass = config.min_mass(n)

    params = _State.of(initial_params(x, z, q, constraint))
    data = _Centered(x)
    es = _expectations(data, params)
    trace = []
    diagnostics = []
    converged = False
    for it in range(1, config.max_iter + 1):
        params, flags = _m_step(data, z, params, es, min_mass)
        for msg in flags:
            diagnostics.append(f"iteration {it}: {msg}")
        es = _expectations(data, params)
        z, ll = _normalize(es.log_dens_t, params.pi)
        if not np.isfinite(ll):
            raise FitFailedError(f"non-finite log-likelihood at iteration {it}")
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < config.epsilon:
            converged = True
            break
    rho = count_free_parameters(g, p, q, constraint)
    final = params.to_params()
    resp = Responsibilities(z)
    return FitResult(
        params=final,
        responsibilities=resp,
        loglik_trace=np.asarray(trace),
        bic=_bic(trace[-1], rho, n),
        assignments=resp.hard(),
        converged=converged,
        iterations=len(trace),
        rho=rho,
        diagnostics=tuple(diagnostics),
    )


# ---------------------------------------------------------------------------
# expected complete-data log-likelihood and its score functions


def _conditional_blocks(x, z, params, moments_at):
    es = _expectations(x, moments_at)
    return es.e_u, es.cond_var


def expected_complete_loglik(data, resp, params: ModelParams, moments_at: ModelParams) -> float:
    """Q evaluated at ``params`` with latent moments taken at ``moments_at``.

    ``params`` may hold any unit lower triangular ``t``, positive ``d`` and
    ``psi``; the log(2 pi) constant of the joint density of ``(x, u)`` is kept.
    """
    x = as_matrix(data)
    z = _z(resp)
    n, p = x.shape
    q = params.q_latent
    e_u, v = _conditional_blocks(x, z, params, moments_at)
    total = 0.0
    psi_inv = 1.0 / params.psi
    for g in range(params.g_components):
        prec = params.t[g].T @ np.diag(1.0 / params.d[g]) @ params.t[g]
        logdet_prec = np.linalg.slogdet(prec)[1]
        c = e_u[g] - params.xi[g]
        latent_quad = np.einsum("ij,ni,nj->n", prec, c, c) + np.trace(prec @ v[g])
        r = x - e_u[g] @ params.lam.T
        lvl = params.lam @ v[g] @ params.lam.T
        obs_quad = (r * r) @ psi_inv + np.diag(lvl) @ psi_inv
        per_obs = (np.log(params.pi[g]) - 0.5 * (p + q) * LOG_2PI + 0.5 * logdet_prec
                   + 0.5 * np.log(psi_inv).sum() - 0.5 * latent_quad - 0.5 * obs_quad)
        total += z[:, g] @ per_obs
    return float(total)


def score_functions(data, resp, params: ModelParams, moments_at: ModelParams) -> dict:
    """Analytic derivatives of :func:`expected_complete_loglik`.

    Keys: ``xi`` (G, q); ``t`` (G, q, q), valid on the strict lower triangle;
    ``d_inv`` (G, q, q), valid on the diagonal; ``lam`` (p, q); ``psi_inv``
    (p, p), valid on the diagonal.
    """
    x = as_matrix(data)
    z = _z(resp)
    n = x.shape[0]
    e_u, v = _conditional_blocks(x, z, params, moments_at)
    G = params.g_components
    n_g = z.sum(axis=0)
    s_xi, s_t, s_d = [], [], []
    for g in range(G):
        d_inv = np.diag(1.0 / params.d[g])
        tg = params.t[g]
        c = e_u[g] - params.xi[g]
        s_g = v[g] + (c * z[:, g, None]).T @ c / n_g[g]
        s_xi.append(tg.T @ d_inv @ tg @ (z[:, g] @ c))
        s_t.append(-n_g[g] * d_inv @ tg @ s_g)
        s_d.append(0.5 * n_g[g] * np.diag(params.d[g]) - 0.5 * n_g[g] * tg @ s_g @ tg.T)
    lam = params.lam
    a = np.zeros_like(lam)
    b = np.zeros((lam.shape[1],) * 2)
    xx = np.zeros((x.shape[1],) * 2)
    for g in range(G):
        w = z[:, g, None]
        a += x.T @ (w * e_u[g])
        b += n_g[g] * v[g] + (w * e_u[g]).T @ e_u[g]
        xx += (w * x).T @ x
    s_lam = np.diag(1.0 / params.psi) @ (a - lam @ b)
    s_psi = 0.5 * n * np.diag(params.psi) - 0.5 * (xx - lam @ a.T - a @ lam.T + lam @ b @ lam.T)
    return {"xi": np.array(s_xi), "t": np.array(s_t), "d_inv": np.array(s_d), "lam": s_lam, "psi_inv": s_psi}
