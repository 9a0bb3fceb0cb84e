"""Linear mixed model fit by profiled maximum likelihood.

The biomarker model has fixed polynomial effects (plus an optional genotype
shift) and subject-level random deviations of the leading polynomial
coefficients.  Given the ratio matrix ``Gamma = random_cov / error_var``, the
GLS fixed effects and the error variance maximize the likelihood in closed
form, so the optimizer only searches over a log/Cholesky parameterization of
``Gamma`` with a derivative-free simplex.

Two structural facts keep evaluations cheap.  Subjects sharing a measurement
count share their marginal covariance ``M = I + Z Gamma Z'``, so the cohort
collapses into per-group sufficient statistics (Y'Y, column sums,
genotype-weighted sums) computed once.  And ``M`` is a rank-r update of the
identity, so Woodbury turns every quantity the profiled likelihood needs into
r-by-r algebra against Gamma-independent constants: with
``K = I + (Z'Z) Gamma`` and ``W = Gamma K^{-1}``,

    A' M^{-1} B = A'B - (Z'A)' W (Z'B),      log det M = log det K,

and the BLUPs are simply ``W Z'residual``.  Each likelihood call is then a
handful of batched operations on tiny matrices, independent of cohort size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from snpdesign.simulate import Cohort

__all__ = ["LmmFit", "SingularDesignError", "fit_lmm", "adjust_responses", "blup_trajectory"]

_LOG_CLIP = 14.0
_FIXED_NAMES = ("intercept", "time", "time2")


class SingularDesignError(ValueError):
    """Fixed-effect design is singular (e.g. monomorphic genotype column)."""


@dataclass(frozen=True)
class LmmFit:
    """Maximum-likelihood fit of the longitudinal model.

    ``coef``/``coef_se`` follow ``coef_names`` (polynomial terms, then
    ``snp`` when included).  ``random_cov`` and ``error_var`` are the
    variance-component estimates, ``blups`` the per-subject random-effect
    predictions aligned with cohort subject order.
    """

    coef_names: tuple[str, ...]
    coef: np.ndarray
    coef_se: np.ndarray
    random_cov: np.ndarray
    error_var: float
    blups: np.ndarray
    converged: bool
    loglik: float
    degree: int
    include_snp: bool

    @property
    def snp_effect(self) -> float:
        if not self.include_snp:
            raise ValueError("fit has no genotype term")
        return float(self.coef[self.coef_names.index("snp")])

    def coefficient(self, name: str) -> tuple[float, float]:
        i = self.coef_names.index(name)
        return float(self.coef[i]), float(self.coef_se[i])

    def to_record(self) -> str:
        lines = []
        for i, name in enumerate(self.coef_names):
            lines.append(f"{name}.estimate={self.coef[i]!r}")
            lines.append(f"{name}.se={self.coef_se[i]!r}")
        lines.append(f"error_var={self.error_var!r}")
        lines.append(f"loglik={self.loglik!r}")
        lines.append(f"converged={int(self.converged)}")
        return "\n".join(lines)


class _GroupStats:
    """Gamma-independent constants per measurement-count group."""

    def __init__(self, times, n_meas, y, snp, degree, random_dim):
        ks = np.unique(n_meas)
        ks = ks[ks > 0]
        if len(ks) == 0:
            raise ValueError("no subjects with measurements")
        G, pp, r = len(ks), degree + 1, random_dim
        self.ks = [int(k) for k in ks]
        self.pp = pp
        self.rdim = r
        self.szz = np.zeros((G, r, r))
        self.zp = np.zeros((G, r, pp))
        self.zu = np.zeros((G, r))
        self.zsy = np.zeros((G, r))
        self.zssy = np.zeros((G, r))
        self.zsyyz = np.zeros((G, r, r))
        self.ppp = np.zeros((G, pp, pp))
        self.pu = np.zeros((G, pp))
        self.psy = np.zeros((G, pp))
        self.ussy = np.zeros(G)
        self.usy = np.zeros(G)
        self.tr_syy = np.zeros(G)
        self.kk = np.zeros(G)
        self.m = np.zeros(G)
        self.ss = np.zeros(G)
        self.ss2 = np.zeros(G)
        self.z_mats = []
        self.p_mats = []
        self.selections = []
        self.n_total = 0
        for gi, k in enumerate(self.ks):
            sel = np.flatnonzero(n_meas == k)
            tk = times[:k]
            z = np.vander(tk, r, increasing=True)
            p = np.vander(tk, pp, increasing=True)
            yk = y[sel, :k]
            s = snp[sel].astype(float)
            sy = yk.sum(axis=0)
            ssy = s @ yk
            zy = yk @ z
            self.szz[gi] = z.T @ z
            self.zp[gi] = z.T @ p
            self.zu[gi] = z.sum(axis=0)
            self.zsy[gi] = z.T @ sy
            self.zssy[gi] = z.T @ ssy
            self.zsyyz[gi] = zy.T @ zy
            self.ppp[gi] = p.T @ p
            self.pu[gi] = p.sum(axis=0)
            self.psy[gi] = p.T @ sy
            self.ussy[gi] = ssy.sum()
            self.usy[gi] = sy.sum()
            self.tr_syy[gi] = float(np.einsum("ij,ij->", yk, yk))
            self.kk[gi] = k
            self.m[gi] = len(sel)
            self.ss[gi] = s.sum()
            self.ss2[gi] = (s * s).sum()
            self.z_mats.append(z)
            self.p_mats.append(p)
            self.selections.append(sel)
            self.n_total += k * len(sel)
        self.eye_r = np.eye(r)


def _gamma_from_params(theta: np.ndarray, rdim: int) -> np.ndarray:
    fac = np.zeros((rdim, rdim))
    fac[np.diag_indices(rdim)] = np.exp(np.clip(theta[:rdim], -_LOG_CLIP, _LOG_CLIP))
    if rdim > 1:
        fac[np.tril_indices(rdim, -1)] = theta[rdim:]
    return fac @ fac.T


def _params_from_gamma(gamma: np.ndarray) -> np.ndarray:
    rdim = gamma.shape[0]
    fac = np.linalg.cholesky(gamma)
    params = np.empty(rdim + rdim * (rdim - 1) // 2)
    params[:rdim] = np.log(np.clip(np.diag(fac), 1e-6, None))
    if rdim > 1:
        params[rdim:] = fac[np.tril_indices(rdim, -1)]
    return params


def _weights(stats: _GroupStats, gamma: np.ndarray):
    """Per-group W = Gamma (I + Z'Z Gamma)^{-1} and log det(I + Z Gamma Z')."""
    k_mat = stats.eye_r[None, :, :] + stats.szz @ gamma
    try:
        k_inv = np.linalg.inv(k_mat)
    except np.linalg.LinAlgError:
        return None, None
    w = gamma @ k_inv
    w = 0.5 * (w + np.swapaxes(w, 1, 2))
    sign, logabs = np.linalg.slogdet(k_mat)
    if np.any(sign <= 0.0):
        return None, None
    return w, logabs


def _profiled(stats: _GroupStats, gamma: np.ndarray, include_snp: bool):
    """Profiled -2 loglik (up to a constant) and the GLS byproducts."""
    w, logabs = _weights(stats, gamma)
    if w is None:
        return None
    logdet = float(stats.m @ logabs)

    wzp = w @ stats.zp
    wzu = np.einsum("grs,gs->gr", w, stats.zu)
    pmp = stats.ppp - np.einsum("grp,grq->gpq", stats.zp, wzp)
    pmu = stats.pu - np.einsum("grp,gr->gp", stats.zp, wzu)
    umu = stats.kk - np.einsum("gr,gr->g", stats.zu, wzu)
    pmsy = stats.psy - np.einsum("grp,gr->gp", wzp, stats.zsy)
    umsy = stats.usy - np.einsum("gr,gr->g", wzu, stats.zsy)
    umssy = stats.ussy - np.einsum("gr,gr->g", wzu, stats.zssy)
    yy = float(stats.tr_syy.sum() - np.einsum("grs,gsr->", w, stats.zsyyz))

    pp = stats.pp
    pdim = pp + (1 if include_snp else 0)
    a = np.zeros((pdim, pdim))
    b = np.zeros(pdim)
    a[:pp, :pp] = np.einsum("gpq,g->pq", pmp, stats.m)
    b[:pp] = pmsy.sum(axis=0)
    if include_snp:
        cross = np.einsum("gp,g->p", pmu, stats.ss)
        a[:pp, pp] = cross
        a[pp, :pp] = cross
        a[pp, pp] = float(stats.ss2 @ umu)
        b[pp] = float(umssy.sum())
    try:
        if np.linalg.cond(a) > 1e12:
            return None
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    rss = yy - float(b @ beta)
    sig2 = max(rss, 1e-280) / stats.n_total
    f = stats.n_total * math.log(sig2) + logdet
    # umsy is unused when the genotype column is absent; keep the reduction
    # common so both model variants share one code path.
    del umsy
    return f, beta, sig2, a, logdet


def _initial_params(stats: _GroupStats, rdim: int) -> np.ndarray:
    """Moment start: covariance of per-subject OLS coefficients over residual MSE.

    Both pieces come from the group constants: the coefficient second moment
    is pinv(Z'Z) Z'Syy Z pinv(Z'Z) and the residual sum of squares is
    tr(Syy) - tr(pinv(Z'Z) Z'Syy Z).
    """
    scc = np.zeros((rdim, rdim))
    sc = np.zeros(rdim)
    m_used = 0.0
    rss_total, dof_total = 0.0, 0.0
    for gi, k in enumerate(stats.ks):
        if k < rdim + 2 or stats.m[gi] < 2:
            continue
        szz_inv = np.linalg.pinv(stats.szz[gi])
        scc += szz_inv @ stats.zsyyz[gi] @ szz_inv
        sc += szz_inv @ stats.zsy[gi]
        m_used += stats.m[gi]
        rss_total += stats.tr_syy[gi] - float(np.trace(szz_inv @ stats.zsyyz[gi]))
        dof_total += stats.m[gi] * (k - rdim)
    if m_used < 4 or dof_total <= 0:
        return _params_from_gamma(np.diag([1.0, 0.1, 0.02][:rdim]))
    mean_c = sc / m_used
    cov_c = scc / m_used - np.outer(mean_c, mean_c)
    sig2 = max(rss_total / dof_total, 1e-8)
    gamma0 = cov_c / sig2
    # Guard positive definiteness; the moment estimate only seeds the simplex.
    w, v = np.linalg.eigh((gamma0 + gamma0.T) / 2.0)
    w = np.clip(w, max(1e-4, 1e-4 * float(w.max())), None)
    return _params_from_gamma(v @ np.diag(w) @ v.T)


def fit_lmm(
    cohort: Cohort,
    degree: int,
    include_snp: bool = True,
    random_dim: int | None = None,
    max_restarts: int = 3,
) -> LmmFit:
    """Fit the longitudinal model to a cohort by maximum likelihood.

    Args:
        cohort: simulated (or adjusted) cohort.
        degree: polynomial degree of the fixed trajectory, 1 or 2.
        include_snp: include the genotype shift in the fixed effects.
        random_dim: number of random polynomial coefficients; defaults to
            ``degree + 1``.
        max_restarts: simplex restarts before flagging non-convergence.

    Raises:
        SingularDesignError: collinear fixed effects at the optimum.
        ValueError: degree unsupported or too few measurements.
    """
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    rdim = degree + 1 if random_dim is None else random_dim
    if not 1 <= rdim <= degree + 1:
        raise ValueError(f"random_dim must be in [1, degree+1], got {rdim}")
    n_meas = cohort.n_measurements
    if int((n_meas >= 3).sum()) == 0:
        raise ValueError("need at least one subject with 3 or more measurements")
    times = cohort.config.grid.longitudinal_times
    stats = _GroupStats(times, n_meas, cohort.measurements, cohort.snp, degree, rdim)

    def objective(theta: np.ndarray) -> float:
        out = _profiled(stats, _gamma_from_params(theta, rdim), include_snp)
        return 1e12 if out is None else out[0]

    x0 = _initial_params(stats, rdim)
    f0 = objective(x0)
    if f0 >= 1e12:
        x0 = np.zeros_like(x0)
        f0 = objective(x0)
    fatol = max(1e-9 * abs(f0), 1e-10)
    converged = False
    for _ in range(max_restarts):
        result = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"maxiter": 500, "xatol": 1e-6, "fatol": fatol},
        )
        x0 = result.x
        if result.success:
            converged = True
            break

    gamma = _gamma_from_params(x0, rdim)
    out = _profiled(stats, gamma, include_snp)
    if out is None:
        raise SingularDesignError("fixed-effect design is singular at the optimum")
    _, beta, sig2, a, logdet = out
    try:
        cov_beta = sig2 * np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("fixed-effect design is singular at the optimum") from exc
    se = np.sqrt(np.clip(np.diag(cov_beta), 0.0, None))
    n_total = stats.n_total
    loglik = -0.5 * (n_total * math.log(2.0 * math.pi * max(sig2, 1e-280)) + n_total + logdet)

    # BLUPs: W Z'residual per subject.
    w_all, _ = _weights(stats, gamma)
    blups = np.zeros((cohort.n_subjects, rdim))
    pp = degree + 1
    for gi, k in enumerate(stats.ks):
        sel = stats.selections[gi]
        z = stats.z_mats[gi]
        fitted = stats.p_mats[gi] @ beta[:pp]
        resid = cohort.measurements[sel, :k] - fitted[None, :]
        if include_snp:
            resid = resid - beta[pp] * cohort.snp[sel].astype(float)[:, None]
        blups[sel] = (resid @ z) @ w_all[gi]

    names = _FIXED_NAMES[: degree + 1] + (("snp",) if include_snp else ())
    return LmmFit(
        coef_names=names,
        coef=np.asarray(beta, dtype=float),
        coef_se=se,
        random_cov=sig2 * gamma,
        error_var=float(sig2),
        blups=blups,
        converged=converged,
        loglik=float(loglik),
        degree=degree,
        include_snp=include_snp,
    )


def adjust_responses(cohort: Cohort, snp_effect_estimate: float) -> Cohort:
    """Remove the estimated genotype shift from every measurement."""
    if not math.isfinite(snp_effect_estimate):
        raise ValueError("snp effect estimate must be finite")
    adjusted = cohort.measurements - snp_effect_estimate * cohort.snp[:, None]
    return cohort.with_measurements(adjusted)


def blup_trajectory(fit: LmmFit, subject: int, t) -> float:
    """Predicted genotype-free trajectory for one subject at time ``t``.

    Combines the fitted polynomial with the subject's BLUP deviations.
    """
    if not fit.converged:
        raise ValueError("fit did not converge; trajectories are not reliable")
    if not 0 <= subject < len(fit.blups):
        raise ValueError(f"unknown subject {subject}")
    t = np.asarray(t, dtype=float)
    value = np.zeros_like(t)
    for j in range(fit.degree + 1):
        dev = fit.blups[subject, j] if j < fit.blups.shape[1] else 0.0
        value = value + (fit.coef[j] + dev) * t**j
    return float(value) if value.ndim == 0 else value
