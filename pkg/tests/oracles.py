"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (explicit inverses,
determinants, loops over pairs) and shares no code with the package beyond
the parameter container.
"""

from itertools import combinations

import numpy as np

from longmix import ModelConstraint, ModelParams


def dense_omega(t, d):
    return np.linalg.inv(t.T @ np.diag(1.0 / d) @ t)


def dense_cov(params, g):
    om = dense_omega(params.t[g], params.d[g])
    return params.lam @ om @ params.lam.T + np.diag(params.psi)


def dense_logpdf(x, mean, cov):
    r = np.asarray(x, dtype=float) - mean
    p = cov.shape[0]
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * (p * np.log(2 * np.pi) + logdet + r @ np.linalg.inv(cov) @ r)


def dense_beta(params, g):
    om = dense_omega(params.t[g], params.d[g])
    return om @ params.lam.T @ np.linalg.inv(dense_cov(params, g))


def joint_conditional(x, params, g):
    """Mean and covariance of U given X = x from the assembled (q + p) joint Gaussian."""
    q = params.q_latent
    om = dense_omega(params.t[g], params.d[g])
    lam = params.lam
    joint = np.block([[om, om @ lam.T], [lam @ om, lam @ om @ lam.T + np.diag(params.psi)]])
    mean = np.concatenate([params.xi[g], lam @ params.xi[g]])
    c_uu, c_ux, c_xx = joint[:q, :q], joint[:q, q:], joint[q:, q:]
    gain = c_ux @ np.linalg.inv(c_xx)
    return mean[:q] + gain @ (x - mean[q:]), c_uu - gain @ c_ux.T


def q_function(x, z, params, moments_at):
    """Expected complete-data log-likelihood by per-observation Gaussian expectations."""
    total = 0.0
    for g in range(params.g_components):
        om = dense_omega(params.t[g], params.d[g])
        om_inv = np.linalg.inv(om)
        psi = np.diag(params.psi)
        for i in range(x.shape[0]):
            e_u, v = joint_conditional(x[i], moments_at, g)
            # E log N(x | Lambda u, Psi) + E log N(u | xi, Omega) for u ~ N(e_u, v)
            obs = dense_logpdf(x[i], params.lam @ e_u, psi) - 0.5 * np.trace(
                np.linalg.inv(psi) @ params.lam @ v @ params.lam.T)
            lat = dense_logpdf(e_u, params.xi[g], om) - 0.5 * np.trace(om_inv @ v)
            total += z[i, g] * (np.log(params.pi[g]) + obs + lat)
    return total


def random_unit_lower(rng, q, scale=0.5):
    t = np.eye(q)
    t[np.tril_indices(q, -1)] = rng.normal(scale=scale, size=q * (q - 1) // 2)
    return t


def random_spd(rng, k, jitter=0.5):
    a = rng.normal(size=(k, k))
    return a @ a.T + jitter * np.eye(k)


def random_params(rng, g, p, q, constraint=ModelConstraint.VVA, spread=3.0):
    constraint = ModelConstraint.parse(constraint)
    pi = rng.dirichlet(np.full(g, 5.0))
    xi = rng.normal(scale=spread, size=(g, q))
    t = np.stack([random_unit_lower(rng, q) for _ in range(g)])
    d = rng.uniform(0.3, 2.0, size=(g, q))
    if constraint.t_shared:
        t[:] = t[0]
    if constraint.d_shared:
        d[:] = d[0]
    if constraint.d_isotropic:
        d[:] = d[:, :1]
    lam = rng.normal(size=(p, q))
    psi = rng.uniform(0.2, 1.0, size=p)
    return ModelParams(pi, xi, t, d, lam, psi, constraint)


def sample(rng, params, n):
    labels = rng.choice(params.g_components, size=n, p=params.pi)
    x = np.empty((n, params.p))
    for i, g in enumerate(labels):
        x[i] = rng.multivariate_normal(params.lam @ params.xi[g], dense_cov(params, g))
    return x, labels


def random_responsibilities(rng, n, g):
    z = rng.dirichlet(np.ones(g), size=n)
    return z / z.sum(axis=1, keepdims=True)


def naive_cross_tab(a, b):
    rows = list(dict.fromkeys(a))
    cols = list(dict.fromkeys(b))
    table = np.zeros((len(rows), len(cols)), dtype=int)
    for u, v in zip(a, b):
        table[rows.index(u), cols.index(v)] += 1
    return table


def pair_counts(a, b):
    """(both same, same in a only, same in b only, both different) over all pairs."""
    ss = sd = ds = dd = 0
    for i, j in combinations(range(len(a)), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        if sa and sb:
            ss += 1
        elif sa:
            sd += 1
        elif sb:
            ds += 1
        else:
            dd += 1
    return ss, sd, ds, dd


def brute_rand_index(a, b):
    ss, sd, ds, dd = pair_counts(a, b)
    return (ss + dd) / (ss + sd + ds + dd)


def brute_ari(a, b):
    """Pair-count form of the chance-corrected index."""
    ss, sd, ds, dd = pair_counts(a, b)
    den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd)
    return 1.0 if den == 0 else 2.0 * (ss * dd - sd * ds) / den
