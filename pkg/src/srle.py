#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
srle.py - Oracles de régression linéaire robuste et parcimonieuse

Trois estimateurs pour y = z^T w* + η dont une fraction ε des lignes a été
remplacée par un adversaire :

┌──────────┬─────────────────────────────────────────────┬──────────────────────┐
│ srle1    │ gradient projeté sur la boule ℓ1,           │ design bien           │
│          │ gradients par moyennes tronquées            │ conditionné           │
├──────────┼─────────────────────────────────────────────┼──────────────────────┤
│ srle2    │ programme ℓ0-ℓ2 tronqué : support exhaustif │ exact sur petites     │
│          │ (ou IHT) + alternance ajustement / rognage  │ dimensions            │
├──────────┼─────────────────────────────────────────────┼──────────────────────┤
│ srle3    │ descente miroir géométrie ‖·‖_p, p = 1+1/ln d│ vitesse lente, aucune │
│          │ gradients par moyennes tronquées            │ hypothèse de design   │
└──────────┴─────────────────────────────────────────────┴──────────────────────┘

`ols` (moindres carrés non rognés) sert de référence non robuste.

CALIBRATION:
- default_ridge : λ = C (s/N) log(d/(sδ))
- alpha_schedule : rayons α_h des bonus et du critique, constantes à 1 par défaut

Usage:
    report = run_oracle("srle2", RegressionProblem(Z, y, sparsity=2, l1_budget=3.0))
    print(report.w_hat, report.support, report.objective)
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, stats

from errors import BadEpsilon, NegativeQuadratic, NonFinite, SearchSpaceTooLarge

logger = logging.getLogger("sparse_orl.srle")

MAX_SUPPORTS = 10**6
MAX_TRIM = 0.49
ROW_TOL = 1e-12


def tolerant_ceil(value: float) -> int:
    """⌈value⌉ insensible au bruit flottant : (5/6)·12 donne 10, pas 11."""
    return int(math.ceil(round(value, 9)))


# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    """
    Attributes:
        Z: covariables (N, d), ‖ligne‖_∞ <= 1
        y: cibles (N,)
        sparsity: budget s
        l1_budget: B, borne sur ‖w*‖_1
        sigma: échelle du bruit
        epsilon: fraction corrompue, dans [0, 1/2)
        ridge: λ
        delta: probabilité d'échec
    """

    Z: np.ndarray
    y: np.ndarray
    sparsity: int
    l1_budget: float
    sigma: float = 1.0
    epsilon: float = 0.0
    ridge: float = 0.0
    delta: float = 0.1

    def __post_init__(self) -> None:
        covariates = np.array(self.Z, dtype=float)
        targets = np.array(self.y, dtype=float)
        covariates.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "Z", covariates)
        object.__setattr__(self, "y", targets)
        if covariates.ndim != 2 or targets.shape != (covariates.shape[0],):
            raise ValueError(f"Formes incompatibles : Z {covariates.shape}, y {targets.shape}")
        if covariates.shape[0] < 1:
            raise ValueError("Le problème de régression exige N >= 1")
        if not 0.0 <= self.epsilon < 0.5:
            raise BadEpsilon(f"ε doit appartenir à [0, 1/2), reçu {self.epsilon}")
        if self.l1_budget <= 0.0:
            raise ValueError(f"Le budget ℓ1 doit être > 0, reçu {self.l1_budget}")
        if self.sparsity < 1 or self.ridge < 0.0 or not 0.0 < self.delta < 1.0:
            raise ValueError("Paramètres invalides : s >= 1, λ >= 0 et δ dans (0, 1) requis")
        if np.abs(covariates).max(initial=0.0) > 1.0 + ROW_TOL:
            raise ValueError("Les lignes de Z doivent vérifier ‖z‖_∞ <= 1")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    @property
    def keep(self) -> int:
        """|C| = ⌈(1-ε)N⌉."""
        return tolerant_ceil((1.0 - self.epsilon) * self.n)


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    oracle: str
    w_hat: np.ndarray
    support: Tuple[int, ...]
    trimmed_set: np.ndarray
    objective: float
    iterations: int
    converged: bool
    scaled: bool = False
    objective_trace: Tuple[float, ...] = ()

    def to_document(self) -> Dict[str, Any]:
        """Vidage JSON de diagnostic."""
        return {
            "oracle": self.oracle,
            "w_hat": self.w_hat.tolist(),
            "support": list(self.support),
            "trimmed_set": self.trimmed_set.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "scaled": self.scaled,
            "objective_trace": list(self.objective_trace),
        }


@dataclass(frozen=True)
class Srle1Options:
    max_iters: int = 500
    step_schedule: Literal["constant", "diminishing"] = "constant"
    step_scale: float = 1.0
    tol: float = 1e-10
    trim_constant: float = 1.0


@dataclass(frozen=True)
class Srle2Options:
    support_search: Literal["exhaustive", "iht"] = "exhaustive"
    max_alt_iters: int = 50
    iht_iters: int = 200
    n_jobs: int = 1


@dataclass(frozen=True)
class Srle3Options:
    max_iters: int = 2000
    tol: float = 1e-10
    trim_constant: float = 1.0


# ============================================================================
# OUTILS COMMUNS
# ============================================================================


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection euclidienne sur {‖w‖_1 <= radius} (tri puis seuillage doux)."""
    v = np.asarray(v, dtype=float)
    magnitude = np.abs(v)
    if magnitude.sum() <= radius:
        return v.copy()
    ordered = np.sort(magnitude)[::-1]
    cumulative = np.cumsum(ordered)
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(ordered * ranks > cumulative - radius)[0][-1]
    threshold = (cumulative[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(magnitude - threshold, 0.0)


def scale_to_l1_ball(w: np.ndarray, radius: float) -> Tuple[np.ndarray, bool]:
    """Mise à l'échelle proportionnelle ; le booléen signale une contrainte active."""
    w = np.asarray(w, dtype=float)
    norm = np.abs(w).sum()
    if norm <= radius:
        return w.copy(), False
    return w * (radius / norm), True


def trim_fraction(epsilon: float, dim: int, n: int, delta: float, constant: float = 1.0) -> float:
    """Fraction rognée de chaque queue : c (ε + √(log(2d/δ)/N)), plafonnée à 0.49."""
    return min(constant * (epsilon + math.sqrt(math.log(2.0 * dim / delta) / n)), MAX_TRIM)


def _retained(residual_sq: np.ndarray, keep: int) -> np.ndarray:
    """Indices des `keep` plus petits résidus, égalités par indice croissant."""
    return np.sort(np.argsort(residual_sq, kind="stable")[:keep])


def _objective(p: RegressionProblem, w: np.ndarray, rows: np.ndarray) -> float:
    residual = p.y[rows] - p.Z[rows] @ w
    return float(residual @ residual / p.n + p.ridge * w @ w)


def _trimmed_gradient(p: RegressionProblem, w: np.ndarray, fraction: float) -> np.ndarray:
    residual = p.Z @ w - p.y
    contributions = residual[:, None] * p.Z
    gradient = stats.trim_mean(contributions, fraction, axis=0) + p.ridge * w
    if not np.all(np.isfinite(gradient)):
        raise NonFinite("Gradient tronqué non fini : vérifier les cibles et le pas")
    return gradient


def _support_of(w: np.ndarray) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(w))


def _report(
    oracle: str,
    p: RegressionProblem,
    w: np.ndarray,
    iterations: int,
    converged: bool,
    rows: Optional[np.ndarray] = None,
    scaled: bool = False,
    trace: Sequence[float] = (),
) -> EstimatorReport:
    if rows is None:
        rows = _retained((p.y - p.Z @ w) ** 2, p.keep)
    return EstimatorReport(
        oracle=oracle,
        w_hat=w,
        support=_support_of(w),
        trimmed_set=rows,
        objective=_objective(p, w, rows),
        iterations=iterations,
        converged=converged,
        scaled=scaled,
        objective_trace=tuple(trace),
    )


# ============================================================================
# SRLE1 - GRADIENT PROJETÉ TRONQUÉ
# ============================================================================


def srle1(p: RegressionProblem, opts: Optional[Srle1Options] = None) -> EstimatorReport:
    """
    Gradient projeté (application miroir euclidienne) sur ‖w‖_1 <= B, pas 1/L̂
    avec L̂ = λ_max(Z^T Z / N) + λ.

    Raises:
        NonFinite: itéré ou gradient non fini
    """
    opts = opts or Srle1Options()
    fraction = trim_fraction(p.epsilon, p.dim, p.n, p.delta, opts.trim_constant)
    smoothness = float(linalg.eigvalsh(p.Z.T @ p.Z / p.n)[-1]) + p.ridge
    base_step = opts.step_scale / max(smoothness, 1e-12)

    w = np.zeros(p.dim)
    converged, iteration = False, 0
    for iteration in range(1, opts.max_iters + 1):
        step = base_step if opts.step_schedule == "constant" else base_step / math.sqrt(iteration)
        candidate = project_l1_ball(w - step * _trimmed_gradient(p, w, fraction), p.l1_budget)
        if not np.all(np.isfinite(candidate)):
            raise NonFinite(f"srle1 diverge à l'itération {iteration}")
        change = float(np.abs(candidate - w).sum())
        w = candidate
        if change < opts.tol:
            converged = True
            break
    if not converged:
        logger.debug("srle1 : %d itérations sans convergence", iteration)
    return _report("srle1", p, w, iteration, converged)


# ============================================================================
# SRLE2 - PROGRAMME ℓ0-ℓ2 TRONQUÉ
# ============================================================================


@dataclass(frozen=True, eq=False)
class SupportFit:
    support: Tuple[int, ...]
    w: np.ndarray
    rows: np.ndarray
    objective: float
    trace: Tuple[float, ...]
    iterations: int
    converged: bool


def _ridge_fit(covariates: np.ndarray, targets: np.ndarray, ridge: float, n_total: int) -> np.ndarray:
    """argmin (1/N)‖y - Zw‖² + λ‖w‖², par moindres carrés augmentés."""
    if ridge > 0.0:
        scale = math.sqrt(n_total)
        covariates = np.vstack([covariates / scale, math.sqrt(ridge) * np.eye(covariates.shape[1])])
        targets = np.concatenate([targets / scale, np.zeros(covariates.shape[1])])
    return np.linalg.lstsq(covariates, targets, rcond=None)[0]


def fit_support(p: RegressionProblem, support: Tuple[int, ...], max_alt_iters: int) -> SupportFit:
    """Alternance ajustement ridge sur C / C <- ⌈(1-ε)N⌉ plus petits résidus, jusqu'à stabilité de C."""
    columns = list(support)
    sub = p.Z[:, columns]
    keep = p.keep
    coef = _ridge_fit(sub, p.y, p.ridge, p.n)
    retained = _retained((p.y - sub @ coef) ** 2, keep)
    fit_rows = retained
    trace: List[float] = []
    converged, iteration = False, 0
    for iteration in range(1, max_alt_iters + 1):
        fit_rows = retained
        coef = _ridge_fit(sub[fit_rows], p.y[fit_rows], p.ridge, p.n)
        residual_sq = (p.y - sub @ coef) ** 2
        trace.append(float(residual_sq[fit_rows].sum() / p.n + p.ridge * coef @ coef))
        retained = _retained(residual_sq, keep)
        if np.array_equal(retained, fit_rows):
            converged = True
            break
    w = np.zeros(p.dim)
    w[columns] = coef
    return SupportFit(tuple(support), w, fit_rows, trace[-1], tuple(trace), iteration, converged)


def _hard_threshold(v: np.ndarray, size: int) -> np.ndarray:
    """Indices des `size` plus grandes amplitudes, égalités par indice croissant."""
    return np.sort(np.argsort(-np.abs(v), kind="stable")[:size])


def _iht_support(p: RegressionProblem, size: int, iters: int) -> Tuple[int, ...]:
    """Support trouvé par seuillage dur itératif sur les lignes retenues."""
    smoothness = float(linalg.eigvalsh(p.Z.T @ p.Z / p.n)[-1]) + p.ridge
    step = 1.0 / max(smoothness, 1e-12)
    w = np.zeros(p.dim)
    support: Tuple[int, ...] = tuple(range(size))
    for _ in range(iters):
        residual = p.Z @ w - p.y
        rows = _retained(residual**2, p.keep)
        moved = w - step * (p.Z[rows].T @ residual[rows] / p.n + p.ridge * w)
        index = _hard_threshold(moved, size)
        candidate = np.zeros(p.dim)
        candidate[index] = moved[index]
        stable = tuple(index.tolist()) == support and np.abs(candidate - w).sum() < 1e-12
        support, w = tuple(int(i) for i in index), candidate
        if stable:
            break
    return support


def srle2(p: RegressionProblem, opts: Optional[Srle2Options] = None) -> EstimatorReport:
    """
    Supports candidats (exhaustifs ou IHT), alternance par support, mise à
    l'échelle ℓ1 finale, puis le (S, C, w) d'objectif minimal (plus petit
    indice de support en cas d'égalité).

    Raises:
        SearchSpaceTooLarge: C(d, s) > 10^6 en recherche exhaustive
    """
    opts = opts or Srle2Options()
    size = min(p.sparsity, p.dim)
    if opts.support_search == "exhaustive":
        count = math.comb(p.dim, size)
        if count > MAX_SUPPORTS:
            raise SearchSpaceTooLarge(f"C({p.dim}, {size}) = {count} supports dépasse {MAX_SUPPORTS}")
        supports: Sequence[Tuple[int, ...]] = list(combinations(range(p.dim), size))
    else:
        supports = [_iht_support(p, size, opts.iht_iters)]

    fits = Parallel(n_jobs=opts.n_jobs)(delayed(fit_support)(p, support, opts.max_alt_iters) for support in supports)

    best: Optional[Tuple[float, SupportFit, np.ndarray, bool]] = None
    for fit in fits:
        w, scaled = scale_to_l1_ball(fit.w, p.l1_budget)
        objective = _objective(p, w, fit.rows)
        if best is None or objective < best[0]:
            best = (objective, fit, w, scaled)
    _, fit, w, scaled = best
    if scaled:
        logger.warning("srle2 : contrainte ℓ1 active (B=%g), estimateur mis à l'échelle", p.l1_budget)
    report = _report("srle2", p, w, fit.iterations, fit.converged, rows=fit.rows, scaled=scaled, trace=fit.trace)
    return dataclasses.replace(report, support=fit.support)


def srle2_exact_tiny(p: RegressionProblem) -> EstimatorReport:
    """Optimum exact du programme tronqué : énumère tous les C de taille ⌈(1-ε)N⌉ et tous les supports."""
    size = min(p.sparsity, p.dim)
    count = math.comb(p.n, p.keep) * math.comb(p.dim, size)
    if p.n > 12 or count > MAX_SUPPORTS:
        raise SearchSpaceTooLarge(f"Énumération exacte réservée à N <= 12 ({count} combinaisons)")
    best: Optional[Tuple[float, Tuple[int, ...], np.ndarray, np.ndarray]] = None
    for rows in combinations(range(p.n), p.keep):
        rows_array = np.array(rows)
        for support in combinations(range(p.dim), size):
            w = np.zeros(p.dim)
            w[list(support)] = _ridge_fit(p.Z[np.ix_(rows_array, support)], p.y[rows_array], p.ridge, p.n)
            objective = _objective(p, w, rows_array)
            if best is None or objective < best[0]:
                best = (objective, support, rows_array, w)
    _, support, rows_array, w = best
    w, scaled = scale_to_l1_ball(w, p.l1_budget)
    report = _report("srle2_exact_tiny", p, w, count, True, rows=rows_array, scaled=scaled)
    return dataclasses.replace(report, support=tuple(support))


# ============================================================================
# SRLE3 - DESCENTE MIROIR ‖·‖_p
# ============================================================================


def mirror_exponent(dim: int) -> float:
    """p = 1 + 1/ln d (borné à 2 pour les petites dimensions)."""
    return 1.0 + 1.0 / max(math.log(dim), 1.0) if dim > 1 else 2.0


def _norm_gradient(v: np.ndarray, order: float) -> np.ndarray:
    """∇(½‖v‖_order²) = sign(v)|v|^{order-1} ‖v‖_order^{2-order}."""
    norm = np.linalg.norm(v, ord=order)
    if norm == 0.0:
        return np.zeros_like(v)
    return np.sign(v) * np.abs(v) ** (order - 1.0) * norm ** (2.0 - order)


def _bregman_l1_projection(theta: np.ndarray, order: float, radius: float) -> np.ndarray:
    """
    argmin_{‖w‖_1 <= B} ½‖w‖_p² - <θ, w> = ∇ψ*(soft(θ, ν)), ν trouvé par
    bisection (‖w(ν)‖_1 décroît avec ν).
    """
    dual = order / (order - 1.0)
    w = _norm_gradient(theta, dual)
    if np.abs(w).sum() <= radius:
        return w
    low, high = 0.0, float(np.abs(theta).max())
    for _ in range(100):
        middle = 0.5 * (low + high)
        shrunk = np.sign(theta) * np.maximum(np.abs(theta) - middle, 0.0)
        if np.abs(_norm_gradient(shrunk, dual)).sum() > radius:
            low = middle
        else:
            high = middle
    return _norm_gradient(np.sign(theta) * np.maximum(np.abs(theta) - high, 0.0), dual)


def srle3(p: RegressionProblem, opts: Optional[Srle3Options] = None) -> EstimatorReport:
    """
    Descente miroir ψ = ½‖w‖_p² sur la boule ℓ1, pas (p-1)/L̂ avec
    L̂ = max|Σ̂_ij| + λ. Renvoie le meilleur itéré au sens de l'objectif tronqué.

    Raises:
        NonFinite: itéré ou gradient non fini
    """
    opts = opts or Srle3Options()
    order = mirror_exponent(p.dim)
    fraction = trim_fraction(p.epsilon, p.dim, p.n, p.delta, opts.trim_constant)
    smoothness = float(np.abs(p.Z.T @ p.Z / p.n).max()) + p.ridge
    step = (order - 1.0) / max(smoothness, 1e-12)

    w = np.zeros(p.dim)
    best_w = w
    best_objective = _objective(p, w, _retained(p.y**2, p.keep))
    converged, iteration = False, 0
    for iteration in range(1, opts.max_iters + 1):
        theta = _norm_gradient(w, order) - step * _trimmed_gradient(p, w, fraction)
        candidate = _bregman_l1_projection(theta, order, p.l1_budget)
        if not np.all(np.isfinite(candidate)):
            raise NonFinite(f"srle3 diverge à l'itération {iteration}")
        change = float(np.abs(candidate - w).sum())
        w = candidate
        objective = _objective(p, w, _retained((p.y - p.Z @ w) ** 2, p.keep))
        if objective < best_objective:
            best_w, best_objective = w, objective
        if change < opts.tol:
            converged = True
            break
    return _report("srle3", p, best_w, iteration, converged)


# ============================================================================
# RÉFÉRENCE NON ROBUSTE ET AIGUILLAGE
# ============================================================================


def ols(p: RegressionProblem, opts: Any = None) -> EstimatorReport:
    """Moindres carrés (ridge) sur toutes les lignes, sans rognage."""
    w, scaled = scale_to_l1_ball(_ridge_fit(p.Z, p.y, p.ridge, p.n), p.l1_budget)
    return _report("ols", p, w, 1, True, rows=np.arange(p.n), scaled=scaled)


ORACLES: Dict[str, Callable[..., EstimatorReport]] = {
    "srle1": srle1,
    "srle2": srle2,
    "srle3": srle3,
    "ols": ols,
}


def run_oracle(name: str, p: RegressionProblem, options: Any = None) -> EstimatorReport:
    try:
        oracle = ORACLES[name]
    except KeyError as exc:
        raise ValueError(f"Oracle inconnu : {name}") from exc
    return oracle(p, options)


def sigma_norm_error(w_hat: np.ndarray, w_ref: np.ndarray, sigma: np.ndarray) -> float:
    """
    ‖ŵ - w‖_Σ.

    Raises:
        NegativeQuadratic: forme quadratique < -1e-10 (Σ non PSD)
    """
    diff = np.asarray(w_hat, dtype=float) - np.asarray(w_ref, dtype=float)
    quadratic = float(diff @ np.asarray(sigma, dtype=float) @ diff)
    if quadratic < -1e-10:
        raise NegativeQuadratic(f"Forme quadratique négative : {quadratic:.3e}")
    return math.sqrt(max(quadratic, 0.0))


# ============================================================================
# CALIBRATION
# ============================================================================


def default_ridge(sparsity: int, n: int, dim: int, delta: float, constant: float = 1.0) -> float:
    """λ = C (s/N) log(d/(sδ))."""
    return max(constant * sparsity / n * math.log(dim / (sparsity * delta)), 0.0)


def alpha_schedule(
    oracle: str,
    horizon: int,
    n: int,
    dim: int,
    sparsity: int,
    delta: float,
    ridge: float,
    epsilon: float,
    constant: float = 1.0,
) -> np.ndarray:
    """
    Rayons α_h, h = 0..H-1, proportionnels au budget H - h.

    srle3 : (H-h)(√log(dHN/δ)/N^{1/4} + ε^{1/4} + √λ + √ε)
    autres : (H-h)(s^{1/4} √log(dHN/δ)/N^{1/4} + √λ + √ε)
    """
    budgets = horizon - np.arange(horizon, dtype=float)
    statistical = math.sqrt(math.log(dim * horizon * n / delta)) / n**0.25
    if oracle == "srle3":
        core = statistical + epsilon**0.25 + math.sqrt(ridge) + math.sqrt(epsilon)
    else:
        core = sparsity**0.25 * statistical + math.sqrt(ridge) + math.sqrt(epsilon)
    return constant * budgets * core
