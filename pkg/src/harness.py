#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
harness.py - Métriques de couverture et balayages d'expériences

FEATURES:
- ξ : plus petite valeur propre d'une covariance
- κ_h : concentrabilité parcimonieuse par horizon (faisceaux généralisés sur |S| = 2s)
- run_sweep : produit cartésien grilles × graines, une ligne CSV par cellule
- Manifeste JSON de la configuration résolue à côté du CSV

Les cellules sont indépendantes et déterministes : la graine du MDP dépend de
(graine, d, s), celle du jeu de (graine, N, d, s), celle de l'adversaire de
la seule graine. Les cellules qui ne diffèrent que par ε partagent donc MDP et
jeu propre (graines appariées).

Usage:
    rows = run_sweep(load_experiment_config("configs/sweep_example.json"))
"""

import csv
import logging
import math
import os
import time
from dataclasses import asdict, dataclass
from itertools import combinations, product
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

import rng
from actor_critic import CriticSpec, run_actor_critic
from codec import write_json
from datagen import Dataset, behavior_policy, corrupt_dataset, generate_dataset
from errors import SearchSpaceTooLarge
from experiment_config import ExperimentConfig
from lsvi import calibrated_bonus, run_lsvi
from mdp_core import (
    MdpConfig,
    Policy,
    SparseLinearMDP,
    build_random_sparse_mdp,
    exact_values,
    occupancy_measures,
    population_covariance,
    suboptimality,
)
from srle import MAX_SUPPORTS, Srle2Options, alpha_schedule, default_ridge

logger = logging.getLogger("sparse_orl.harness")

RESULT_CSV_COLUMNS = [
    "algorithm", "oracle", "N", "d", "s", "epsilon", "H", "seed", "subopt", "kappa", "xi", "wall_ms", "error",
]
KAPPA_JITTER = 1e-12
THREADS_ENV = "SPARSE_ORL_THREADS"

# ============================================================================
# MÉTRIQUES
# ============================================================================


def compute_xi(sigma: np.ndarray) -> float:
    """λ_min(Σ) par décomposition symétrique."""
    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("Σ doit être symétrique")
    return float(linalg.eigvalsh(sigma, subset_by_index=[0, 0])[0])


@dataclass(frozen=True, eq=False)
class KappaResult:
    per_horizon: np.ndarray
    jittered: bool

    @property
    def value(self) -> float:
        """Agrégat retenu : max_h κ_h."""
        return float(self.per_horizon.max())


def _largest_pencil_eigenvalue(numerator: np.ndarray, denominator: np.ndarray) -> Tuple[float, bool]:
    spectrum = linalg.eigvalsh(denominator)
    floor = KAPPA_JITTER * max(1.0, float(spectrum[-1]))
    identity = np.eye(denominator.shape[0])
    jittered = False
    # Σ_S numériquement singulier (rang de Σ_0 <= |A| quand x_1 est fixé)
    if spectrum[0] <= floor:
        denominator = denominator + (floor - min(float(spectrum[0]), 0.0)) * identity
        jittered = True
    try:
        values = linalg.eigh(numerator, denominator, eigvals_only=True)
    except linalg.LinAlgError:
        values = linalg.eigh(numerator, denominator + 1e3 * floor * identity, eigvals_only=True)
        jittered = True
    return float(values[-1]), jittered


def compute_kappa(
    mdp: SparseLinearMDP, behavior_nu: Union[Policy, np.ndarray], two_s: int
) -> KappaResult:
    """
    κ_h = max_{|S| = min(2s, d)} λ_max([Σ*_h]_S, [Σ_h]_S), Σ* sous l'occupation
    de π* et Σ sous ν (politique de comportement ou occupation (H, X, A)).

    Raises:
        SearchSpaceTooLarge: C(d, 2s) > 10^6
    """
    if isinstance(behavior_nu, Policy):
        behavior_nu = occupancy_measures(mdp, behavior_nu)
    dim = mdp.dim
    size = min(two_s, dim)
    count = math.comb(dim, size)
    if count > MAX_SUPPORTS:
        raise SearchSpaceTooLarge(f"C({dim}, {size}) = {count} supports pour κ")
    sigma = population_covariance(mdp, behavior_nu)
    sigma_star = population_covariance(mdp, occupancy_measures(mdp, exact_values(mdp).policy))
    per_horizon = np.full(mdp.horizon, -np.inf)
    jittered = False
    for h in range(mdp.horizon):
        for support in combinations(range(dim), size):
            idx = np.ix_(support, support)
            value, flag = _largest_pencil_eigenvalue(sigma_star[h][idx], sigma[h][idx])
            per_horizon[h] = max(per_horizon[h], value)
            jittered = jittered or flag
    if jittered:
        logger.warning("κ : faisceau singulier, régularisation %.0e appliquée", KAPPA_JITTER)
    return KappaResult(per_horizon, jittered)


# ============================================================================
# LIGNES DE RÉSULTATS
# ============================================================================


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    oracle: str
    N: int
    d: int
    s: int
    epsilon: float
    H: int
    seed: int
    subopt: float
    kappa: float
    xi: float
    wall_ms: float
    error: str = ""
    kappa_jittered: bool = False

    def __post_init__(self) -> None:
        if self.subopt < -1e-8:
            raise ValueError(f"Sous-optimalité négative : {self.subopt}")

    def to_csv_dict(self) -> Dict[str, Any]:
        document = asdict(self)
        return {column: document[column] for column in RESULT_CSV_COLUMNS}


@dataclass(frozen=True)
class Cell:
    n: int
    epsilon: float
    dim: int
    sparsity: int
    seed: int


def iter_cells(cfg: ExperimentConfig) -> Iterator[Cell]:
    """Ordre d'énumération : N, ε, d, s, graine."""
    grid = cfg.grid
    for n, epsilon, dim, sparsity, seed in product(grid.sample_sizes, grid.epsilons, grid.dims, grid.sparsities, cfg.seeds):
        yield Cell(n, epsilon, dim, sparsity, seed)


def pool_size(requested: int) -> int:
    """Taille du pool, plafonnée par SPARSE_ORL_THREADS si défini."""
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            logger.warning("%s=%r ignoré : entier attendu", THREADS_ENV, cap)
    return requested


# ============================================================================
# CELLULE
# ============================================================================


def _cell_datasets(cfg: ExperimentConfig, cell: Cell) -> Tuple[SparseLinearMDP, Policy, Dataset]:
    mdp_cfg = MdpConfig(**{**cfg.mdp.model_dump(), "dim": cell.dim, "sparsity": cell.sparsity})
    mdp = build_random_sparse_mdp(mdp_cfg, rng.derive_seed(cell.seed, f"mdp/d={cell.dim}/s={cell.sparsity}"))
    behavior = behavior_policy(mdp, cfg.behavior)
    clean = generate_dataset(
        mdp, behavior, cell.n, rng.derive_seed(cell.seed, f"data/N={cell.n}/d={cell.dim}/s={cell.sparsity}")
    )
    ds = corrupt_dataset(clean, cfg.attack, cell.epsilon, rng.derive_seed(cell.seed, "corruption"))
    return mdp, behavior, ds


def run_algorithm(cfg: ExperimentConfig, ds: Dataset, cell: Cell, ridge: float) -> Policy:
    """Politique apprise par l'algorithme configuré sur le jeu (éventuellement corrompu)."""
    options = Srle2Options(support_search=cfg.support_search) if cfg.oracle == "srle2" else None
    horizon = ds.horizon
    if cfg.algorithm == "lsvi":
        bonus = calibrated_bonus(
            cfg.bonus.kind, horizon, cell.n, cell.dim, cell.sparsity, cfg.delta, ridge, ds.epsilon, cfg.bonus.alpha_constant
        )
        return run_lsvi(ds, cfg.oracle, bonus, ridge, cfg.delta, sparsity=cell.sparsity, oracle_options=options).policy
    alpha = alpha_schedule(
        cfg.oracle, horizon, cell.n, cell.dim, cell.sparsity, cfg.delta, ridge, ds.epsilon, cfg.critic.alpha_constant
    )
    spec = CriticSpec(
        variant=cfg.critic.variant,
        oracle=cfg.oracle,
        alpha=tuple(alpha),
        ridge=ridge,
        solver=cfg.critic.solver,
        max_iters=cfg.critic.max_iters,
        sparsity=cell.sparsity,
        delta=cfg.delta,
        oracle_options=options,
    )
    return run_actor_critic(ds, spec, cfg.iterations, cfg.eta, cell.seed).mixture


def cell_metrics(mdp: SparseLinearMDP, behavior: Policy, two_s: int) -> Tuple[float, float, bool]:
    """(κ, ξ, régularisé) sous ν ; κ = nan si l'énumération des supports est trop grande."""
    occupancy = occupancy_measures(mdp, behavior)
    xi = min(compute_xi(sigma) for sigma in population_covariance(mdp, occupancy))
    try:
        kappa = compute_kappa(mdp, occupancy, two_s)
    except SearchSpaceTooLarge as exc:
        logger.warning("κ non calculé : %s", exc)
        return math.nan, xi, False
    return kappa.value, xi, kappa.jittered


def run_cell(cfg: ExperimentConfig, cell: Cell) -> ResultRow:
    """Une cellule ; toute erreur est consignée dans la colonne error sans interrompre le balayage."""
    start = time.perf_counter()
    base = dict(
        algorithm=cfg.algorithm, oracle=cfg.oracle, N=cell.n, d=cell.dim, s=cell.sparsity,
        epsilon=cell.epsilon, H=cfg.mdp.horizon, seed=cell.seed,
    )
    try:
        mdp, behavior, ds = _cell_datasets(cfg, cell)
        ridge = cfg.ridge if cfg.ridge is not None else default_ridge(
            cell.sparsity, cell.n, cell.dim, cfg.delta, cfg.ridge_constant
        )
        policy = run_algorithm(cfg, ds, cell, ridge)
        subopt = suboptimality(mdp, policy)
    except Exception as exc:
        logger.exception("Cellule %s en échec", cell)
        row = ResultRow(
            **base, subopt=math.nan, kappa=math.nan, xi=math.nan,
            wall_ms=1000.0 * (time.perf_counter() - start), error=f"{type(exc).__name__}: {exc}",
        )
    else:
        error = ""
        try:
            kappa, xi, jittered = cell_metrics(mdp, behavior, 2 * cell.sparsity)
        except Exception as exc:
            logger.exception("Métriques de couverture en échec pour %s", cell)
            kappa, xi, jittered = math.nan, math.nan, False
            error = f"{type(exc).__name__}: {exc}"
        row = ResultRow(
            **base, subopt=subopt, kappa=kappa, xi=xi,
            wall_ms=1000.0 * (time.perf_counter() - start), error=error, kappa_jittered=jittered,
        )
    logger.info("Cellule N=%d ε=%g d=%d s=%d graine=%d terminée en %.2fs", cell.n, cell.epsilon, cell.dim,
                cell.sparsity, cell.seed, row.wall_ms / 1000.0)
    return row


# ============================================================================
# BALAYAGE
# ============================================================================


def manifest_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def run_sweep(cfg: ExperimentConfig, output: Optional[Union[str, Path]] = None) -> List[ResultRow]:
    """
    Exécute toutes les cellules et écrit le CSV au fil de l'eau, dans l'ordre
    d'énumération quel que soit l'ordre d'achèvement des tâches.
    """
    output = Path(output or cfg.output)
    cells = list(iter_cells(cfg))
    jobs = pool_size(cfg.n_jobs)
    logger.info("Balayage de %d cellules (%d tâches parallèles) vers %s", len(cells), jobs, output)
    start = time.perf_counter()

    output.parent.mkdir(parents=True, exist_ok=True)
    write_json(manifest_path(output), {"config": cfg.model_dump(mode="json", by_alias=True), "cells": len(cells)})
    rows: List[ResultRow] = []
    with open(output, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULT_CSV_COLUMNS)
        writer.writeheader()
        results = Parallel(n_jobs=jobs, return_as="generator")(delayed(run_cell)(cfg, cell) for cell in cells)
        for row in results:
            writer.writerow(row.to_csv_dict())
            handle.flush()
            rows.append(row)

    failures = sum(1 for row in rows if row.error)
    logger.info("Balayage terminé en %.2fs : %d lignes, %d en erreur", time.perf_counter() - start, len(rows), failures)
    return rows
