#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
lsvi.py - Itération de valeur par moindres carrés, robuste et parcimonieuse

Boucle arrière h = H-1..0 :
    ŵ_h  <- oracle(D*_h construit depuis Q̲_{h+1})
    Q̲_h  <- clip(<φ, ŵ_h> - Γ_h, 0, H - h)
puis politique gloutonne en Q̲ (plus petite action en cas d'égalité).

BONUS PESSIMISTES:
- zero       : Γ = 0 (couverture uniforme)
- sparse_max : α_h max_{|S| <= 2s} ‖φ_S‖_{(Σ̂_S)^{-1}} (sous-matrices principales)
- dense      : α_h ‖φ‖_{Σ̂^{-1}} en pleine dimension

Le module contient aussi la démonstration Monte-Carlo de l'écart entre
espérance du maximum et maximum de l'espérance sur supports parcimonieux.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any, Literal, Optional, Tuple, Union

import numpy as np

import rng
from datagen import Dataset, empirical_covariance, srle_dataset_for_policy
from errors import SearchSpaceTooLarge
from mdp_core import (
    SparseLinearMDP,
    TabularPolicy,
    bellman_apply,
    exact_values,
    greedy_tabular_policy,
    occupancy_measures,
    suboptimality,
)
from srle import MAX_SUPPORTS, EstimatorReport, alpha_schedule, run_oracle

logger = logging.getLogger("sparse_orl.lsvi")

BELLMAN_CSV_COLUMNS = ["h", "x", "a", "bellman_err", "bonus"]

# ============================================================================
# BONUS
# ============================================================================


@dataclass(frozen=True)
class BonusSpec:
    kind: Literal["zero", "sparse_max", "dense"]
    alpha: Tuple[float, ...]
    two_s: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if any(a < 0.0 for a in self.alpha):
            raise ValueError("Les rayons α_h doivent être >= 0")
        if self.two_s < 1:
            raise ValueError(f"two_s doit être >= 1, reçu {self.two_s}")


def calibrated_bonus(
    kind: str,
    horizon: int,
    n: int,
    dim: int,
    sparsity: int,
    delta: float,
    ridge: float,
    epsilon: float,
    constant: float = 1.0,
) -> BonusSpec:
    """BonusSpec avec α_h = C (H-h)(s^{1/4} √log(dHN/δ)/N^{1/4} + √λ + √ε)."""
    alpha = alpha_schedule("srle2", horizon, n, dim, sparsity, delta, ridge, epsilon, constant)
    return BonusSpec(kind=kind, alpha=tuple(alpha), two_s=2 * sparsity)


def _is_diagonal(matrix: np.ndarray) -> bool:
    return not np.any(matrix - np.diag(np.diag(matrix)))


def sparse_max_bonus(phi: np.ndarray, sigma_hat: np.ndarray, alpha_h: float, two_s: int) -> float:
    """
    α_h max_{|S| <= 2s} √(φ_S^T (Σ̂_S)^{-1} φ_S).

    La forme quadratique croît avec S : seuls les supports de taille
    min(2s, d) sont énumérés. Σ̂ diagonale : top-2s de φ_i²/Σ̂_ii.

    Raises:
        SearchSpaceTooLarge: C(d, 2s) > 10^6 hors cas diagonal
    """
    phi = np.asarray(phi, dtype=float)
    size = min(two_s, phi.size)
    if alpha_h == 0.0 or not np.any(phi):
        return 0.0
    if _is_diagonal(sigma_hat):
        ratios = np.sort(phi**2 / np.diag(sigma_hat))[::-1]
        return float(alpha_h * math.sqrt(ratios[:size].sum()))
    count = math.comb(phi.size, size)
    if count > MAX_SUPPORTS:
        raise SearchSpaceTooLarge(f"C({phi.size}, {size}) = {count} supports pour le bonus")
    best = 0.0
    for support in combinations(range(phi.size), size):
        sub = phi[list(support)]
        best = max(best, float(sub @ np.linalg.solve(sigma_hat[np.ix_(support, support)], sub)))
    return float(alpha_h * math.sqrt(best))


def sparse_max_bonus_table(features: np.ndarray, sigma_hat: np.ndarray, alpha_h: float, two_s: int) -> np.ndarray:
    """Même bonus pour toute la table (X, A), une inversion par support."""
    n_states, n_actions, dim = features.shape
    if alpha_h == 0.0:
        return np.zeros((n_states, n_actions))
    flat = features.reshape(-1, dim)
    size = min(two_s, dim)
    if _is_diagonal(sigma_hat):
        ratios = -np.sort(-(flat**2) / np.diag(sigma_hat), axis=1)
        return alpha_h * np.sqrt(ratios[:, :size].sum(axis=1)).reshape(n_states, n_actions)
    count = math.comb(dim, size)
    if count > MAX_SUPPORTS:
        raise SearchSpaceTooLarge(f"C({dim}, {size}) = {count} supports pour le bonus")
    best = np.zeros(flat.shape[0])
    for support in combinations(range(dim), size):
        columns = list(support)
        inverse = np.linalg.inv(sigma_hat[np.ix_(columns, columns)])
        block = flat[:, columns]
        np.maximum(best, np.einsum("ni,ij,nj->n", block, inverse, block), out=best)
    return alpha_h * np.sqrt(np.maximum(best, 0.0)).reshape(n_states, n_actions)


def dense_bonus_table(features: np.ndarray, sigma_hat: np.ndarray, alpha_h: float) -> np.ndarray:
    """α_h ‖φ‖_{Σ̂^{-1}}."""
    inverse = np.linalg.inv(sigma_hat)
    quadratic = np.einsum("xai,ij,xaj->xa", features, inverse, features)
    return alpha_h * np.sqrt(np.maximum(quadratic, 0.0))


def bonus_table(features: np.ndarray, sigma_hat: Optional[np.ndarray], alpha_h: float, spec: BonusSpec) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros(features.shape[:2])
    if spec.kind == "dense":
        return dense_bonus_table(features, sigma_hat, alpha_h)
    return sparse_max_bonus_table(features, sigma_hat, alpha_h, spec.two_s)


# ============================================================================
# LSVI
# ============================================================================


@dataclass(frozen=True, eq=False)
class BellmanDiagnostics:
    """
    Diagnostic réservé aux tests (MDP vrai connu).

    Attributes:
        regression_error: |<φ, ŵ_h> - B_h Q̲_{h+1}| par (h, x, a)
        bonus: Γ_h par (h, x, a)
        premise_holds: erreur <= Γ partout
        bound: 2 Σ_h E_{d^{π*}_h}[Γ_h]
        subopt: sous-optimalité de la politique gloutonne
    """

    regression_error: np.ndarray
    bonus: np.ndarray
    premise_holds: bool
    bound: float
    subopt: float


@dataclass(frozen=True, eq=False)
class LsviOutput:
    q_weights: np.ndarray
    clipped_q: np.ndarray
    bonus: np.ndarray
    policy: TabularPolicy
    reports: Tuple[EstimatorReport, ...]
    diagnostics: Optional[BellmanDiagnostics] = None


def _bellman_diagnostics(
    mdp: SparseLinearMDP, weights: np.ndarray, clipped: np.ndarray, bonuses: np.ndarray, policy: TabularPolicy
) -> BellmanDiagnostics:
    horizon = mdp.horizon
    errors = np.zeros_like(clipped)
    for h in range(horizon):
        q_next = clipped[h + 1] if h < horizon - 1 else np.zeros_like(clipped[h])
        errors[h] = np.abs(mdp.features @ weights[h] - bellman_apply(mdp, h, q_next))
    star_occupancy = occupancy_measures(mdp, exact_values(mdp).policy)
    return BellmanDiagnostics(
        regression_error=errors,
        bonus=bonuses,
        premise_holds=bool(np.all(errors <= bonuses + 1e-12)),
        bound=float(2.0 * (star_occupancy * bonuses).sum()),
        subopt=suboptimality(mdp, policy),
    )


def run_lsvi(
    ds: Dataset,
    oracle: str,
    bonus: BonusSpec,
    ridge: float,
    delta: float,
    *,
    sparsity: Optional[int] = None,
    oracle_options: Any = None,
    mdp_true: Optional[SparseLinearMDP] = None,
) -> LsviOutput:
    """
    LSVI robuste parcimonieux. Budget ℓ1 et σ de l'oracle valent H - h.

    Args:
        mdp_true: si fourni, calcule le diagnostic de Bellman (tests uniquement)
    """
    start = time.perf_counter()
    horizon = ds.horizon
    n_states, n_actions, dim = ds.features.shape
    if len(bonus.alpha) != horizon:
        raise ValueError(f"{len(bonus.alpha)} rayons α pour un horizon {horizon}")

    weights = np.zeros((horizon, dim))
    clipped = np.zeros((horizon, n_states, n_actions))
    bonuses = np.zeros_like(clipped)
    reports = [None] * horizon
    q_next = np.zeros((n_states, n_actions))
    for h in reversed(range(horizon)):
        problem = srle_dataset_for_policy(
            ds, h, None, q_next, "greedy", sparsity=sparsity or dim, ridge=ridge, delta=delta
        )
        report = run_oracle(oracle, problem, oracle_options)
        sigma_hat = None if bonus.kind == "zero" else empirical_covariance(ds, h, ridge, ds.epsilon)
        bonuses[h] = bonus_table(ds.features, sigma_hat, bonus.alpha[h], bonus)
        weights[h] = report.w_hat
        clipped[h] = np.clip(ds.features @ report.w_hat - bonuses[h], 0.0, horizon - h)
        reports[h] = report
        q_next = clipped[h]
        logger.debug("LSVI h=%d : %s en %d itérations (objectif %.4g)", h, oracle, report.iterations, report.objective)

    policy = greedy_tabular_policy(clipped)
    diagnostics = None
    if mdp_true is not None:
        diagnostics = _bellman_diagnostics(mdp_true, weights, clipped, bonuses, policy)
    logger.info("LSVI (%s, bonus %s) terminé en %.2fs", oracle, bonus.kind, time.perf_counter() - start)
    return LsviOutput(weights, clipped, bonuses, policy, tuple(reports), diagnostics)


def write_bellman_csv(diagnostics: BellmanDiagnostics, path: Union[str, Path]) -> None:
    """Colonnes h,x,a,bellman_err,bonus."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=BELLMAN_CSV_COLUMNS)
        writer.writeheader()
        for (h, x, a), error in np.ndenumerate(diagnostics.regression_error):
            writer.writerow({"h": h, "x": x, "a": a, "bellman_err": float(error), "bonus": float(diagnostics.bonus[h, x, a])})


# ============================================================================
# ÉCART MAXIMUM / ESPÉRANCE
# ============================================================================


@dataclass(frozen=True)
class GapEstimate:
    lhs: float
    rhs: float
    bound: float
    gap: float
    stderr: float


def demo_max_expectation_gap(d: int, s: int, lam: float, num_samples: int, seed: int) -> GapEstimate:
    """
    z ~ Ber(1/2)^d, K = Σ z_i. Estime E[max_{|S|=2s} z_S^T (λI)^{-1} z_S]
    = E[min(2s, K)]/λ par Monte-Carlo, contre s/λ et la borne
    (1 - 2e^{-d/8}) s/λ sur l'écart.
    """
    if s < 0 or d <= 4 * s:
        raise ValueError(f"La démonstration exige d > 4s (d={d}, s={s})")
    if lam <= 0.0 or num_samples < 2:
        raise ValueError("λ > 0 et au moins deux échantillons sont requis")
    gen = rng.stream(seed, "max-expectation-gap")
    capped = np.minimum(2 * s, gen.binomial(d, 0.5, size=num_samples)).astype(float)
    lhs = float(capped.mean() / lam)
    rhs = s / lam
    return GapEstimate(
        lhs=lhs,
        rhs=rhs,
        bound=(1.0 - 2.0 * math.exp(-d / 8.0)) * s / lam,
        gap=lhs - rhs,
        stderr=float(capped.std(ddof=1) / math.sqrt(num_samples) / lam),
    )
