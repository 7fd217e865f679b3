#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
actor_critic.py - Acteur-critique robuste parcimonieux

ARCHITECTURE:
┌─────────────────────────────────────────────────────────────┐
│  Acteur : υ_{t+1} = υ_t + η w̲_t, politiques log-linéaires   │
├─────────────────────────────────────────────────────────────┤
│  Critique uniform_coverage : ŵ_h mis à l'échelle ℓ1         │
│  Critique pess_opt : minimisation pessimiste sous           │
│    ‖w - R^π_h(w_{h+1})‖²_Σ̂ <= α², ‖w‖_1 <= H-h, ‖w‖_0 <= s   │
│    solveurs : alternating (par niveau) ou exact_tiny         │
├─────────────────────────────────────────────────────────────┤
│  Diagnostics : MDP induit, regret à critique figé           │
└─────────────────────────────────────────────────────────────┘

La sortie est le mélange uniforme des politiques π_{υ_1}, ..., π_{υ_T}.

Le solveur alternating minimise à chaque niveau h l'espérance de <φ, w>
sous l'occupation empirique d̂^π_h (états du jeu, actions repondérées par π).
Le pessimisme de la valeur initiale y est surveillé, pas garanti.
"""

import csv
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from datagen import Dataset, empirical_covariance, srle_dataset_for_policy
from errors import Infeasible, SearchSpaceTooLarge
from mdp_core import (
    LogLinearPolicy,
    MixturePolicy,
    Policy,
    SparseLinearMDP,
    bellman_apply,
    exact_values,
    suboptimality,
)
from srle import MAX_SUPPORTS, EstimatorReport, run_oracle, scale_to_l1_ball

logger = logging.getLogger("sparse_orl.actor_critic")

FEASIBILITY_TOL = 1e-9
MAX_EXACT_TUPLES = 10**5
TRACE_CSV_COLUMNS = ["t", "pessimistic_value", "subopt_if_true_mdp_known", "constraint_max_slack"]

# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True)
class CriticSpec:
    variant: Literal["uniform_coverage", "pess_opt"]
    oracle: str = "srle2"
    alpha: Tuple[float, ...] = ()
    ridge: float = 0.0
    solver: Literal["exact_tiny", "alternating"] = "alternating"
    max_iters: int = 10
    sparsity: Optional[int] = None
    delta: float = 0.1
    oracle_options: Any = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if any(a < 0.0 for a in self.alpha):
            raise ValueError("Les rayons α_h doivent être >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters doit être >= 1")
        if self.variant == "pess_opt" and self.solver == "exact_tiny" and self.oracle != "srle2":
            raise ValueError("Le solveur exact_tiny n'est défini que pour l'oracle srle2")


@dataclass(frozen=True, eq=False)
class CriticOutput:
    """
    Attributes:
        weights: w̲_h, tableau (H, d)
        q_tables: Q̲_h = <φ, w̲_h> (écrêté pour uniform_coverage), tableau (H, X, A)
        slacks: écarts aux contraintes par horizon ; <= 0 si satisfaites
        pessimistic_value: Σ_a π_1(a|x1) Q̲_1(x1, a)
        centers: sorties de l'oracle R^π_h par horizon
    """

    variant: str
    weights: np.ndarray
    q_tables: np.ndarray
    slacks: Dict[str, np.ndarray]
    pessimistic_value: float
    centers: np.ndarray
    reports: Tuple[EstimatorReport, ...] = ()
    iterations: int = 1

    @property
    def max_slack(self) -> float:
        return float(max(values.max() for values in self.slacks.values()))


@dataclass(frozen=True, eq=False)
class InducedMdpDiag:
    perturbed_reward: np.ndarray
    value_match_error: float
    pessimistic_value: float
    true_value: float

    @property
    def pessimism_gap(self) -> float:
        """V̲_1^π(x1) - V_1^π(x1), <= 0 quand le critique est pessimiste."""
        return self.pessimistic_value - self.true_value


@dataclass(frozen=True)
class TraceRow:
    t: int
    pessimistic_value: float
    subopt_if_true_mdp_known: Optional[float]
    constraint_max_slack: float


@dataclass(frozen=True, eq=False)
class ActorCriticResult:
    mixture: MixturePolicy
    trace: Tuple[TraceRow, ...]
    eta: float
    seed: int
    critics: Tuple[CriticOutput, ...] = field(default=(), repr=False)


@dataclass(frozen=True, eq=False)
class LevelSolution:
    w: np.ndarray
    support: Tuple[int, ...]
    objective: float


# ============================================================================
# OUTILS
# ============================================================================


def policy_features(features: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Ψ_h(x) = Σ_a π_h(a|x) φ(x, a), tableau (H, X, d)."""
    return np.einsum("hxa,xai->hxi", probs, features)


def _initial_value(probs: np.ndarray, q_tables: np.ndarray, x1: int) -> float:
    return float(probs[0, x1] @ q_tables[0, x1])


def _occupancy_directions(ds: Dataset, psi: np.ndarray) -> np.ndarray:
    """g_h : Ψ_1(x1) au premier niveau, moyenne empirique de Ψ_h sur les états du jeu ensuite."""
    directions = np.stack([psi[h][ds.states[:, h]].mean(axis=0) for h in range(ds.horizon)])
    directions[0] = psi[0, ds.initial_state]
    return directions


def _quadratic(diff: np.ndarray, sigma: np.ndarray) -> float:
    return float(diff @ sigma @ diff)


def critic_output_from_weights(
    variant: str,
    features: np.ndarray,
    policy: Policy,
    weights: np.ndarray,
    x1: int,
    clip: bool = False,
) -> CriticOutput:
    """CriticOutput pour des poids donnés (critique de référence, tests)."""
    horizon = weights.shape[0]
    q_tables = np.einsum("xai,hi->hxa", features, weights)
    if clip:
        budgets = (horizon - np.arange(horizon, dtype=float))[:, None, None]
        q_tables = np.clip(q_tables, -budgets, budgets)
    budgets = horizon - np.arange(horizon, dtype=float)
    slacks = {"l1": np.abs(weights).sum(axis=1) - budgets}
    probs = policy.action_probabilities(features)
    return CriticOutput(variant, weights, q_tables, slacks, _initial_value(probs, q_tables, x1), weights.copy())


# ============================================================================
# CRITIQUE - COUVERTURE UNIFORME
# ============================================================================


def critic_uniform(ds: Dataset, pi: Policy, spec: CriticSpec) -> CriticOutput:
    """w̲_h = ŵ_h ramené dans la boule ℓ1 de rayon H - h ; Q̲_h = clip(<φ, w̲_h>, ±(H - h))."""
    if spec.variant != "uniform_coverage":
        raise ValueError(f"critic_uniform appelé avec la variante {spec.variant}")
    horizon = ds.horizon
    n_states, n_actions, dim = ds.features.shape
    weights = np.zeros((horizon, dim))
    centers = np.zeros((horizon, dim))
    q_tables = np.zeros((horizon, n_states, n_actions))
    reports: List[Optional[EstimatorReport]] = [None] * horizon
    q_next = np.zeros((n_states, n_actions))
    for h in reversed(range(horizon)):
        budget = float(horizon - h)
        problem = srle_dataset_for_policy(
            ds, h, pi, q_next, "policy", sparsity=spec.sparsity or dim, ridge=spec.ridge, delta=spec.delta
        )
        report = run_oracle(spec.oracle, problem, spec.oracle_options)
        centers[h] = report.w_hat
        weights[h], _ = scale_to_l1_ball(report.w_hat, budget)
        q_tables[h] = np.clip(ds.features @ weights[h], -budget, budget)
        reports[h] = report
        q_next = q_tables[h]
    budgets = horizon - np.arange(horizon, dtype=float)
    probs = pi.action_probabilities(ds.features)
    return CriticOutput(
        variant=spec.variant,
        weights=weights,
        q_tables=q_tables,
        slacks={"l1": np.abs(weights).sum(axis=1) - budgets},
        pessimistic_value=_initial_value(probs, q_tables, ds.initial_state),
        centers=centers,
        reports=tuple(reports),
    )


# ============================================================================
# CRITIQUE - PESSOPT
# ============================================================================


def _feasible(w: np.ndarray, center: np.ndarray, sigma: np.ndarray, alpha: float, budget: float) -> bool:
    return (
        _quadratic(w - center, sigma) <= alpha**2 + FEASIBILITY_TOL
        and np.abs(w).sum() <= budget + FEASIBILITY_TOL
    )


def _support_candidate(
    center: np.ndarray,
    sigma: np.ndarray,
    direction: np.ndarray,
    alpha: float,
    budget: float,
    support: Sequence[int],
) -> Optional[np.ndarray]:
    """
    Point réalisable de support S, ou None.

    Hors de S, w = 0 fixe l'écart δ = -c_{S^c}. L'ellipsoïde restreinte a
    pour centre c_S - Σ_SS^{-1} Σ_{S,S^c} δ et pour rayon² α² moins le
    complément de Schur. Candidats dans l'ordre : minimiseur, minimiseur mis
    à l'échelle ℓ1, centre, centre mis à l'échelle.
    """
    dim = center.size
    inside = list(support)
    outside = [i for i in range(dim) if i not in support]
    offset = -center[outside]
    sigma_in = sigma[np.ix_(inside, inside)]
    coupling = sigma[np.ix_(inside, outside)] @ offset
    shift = np.linalg.solve(sigma_in, coupling)
    schur = _quadratic(offset, sigma[np.ix_(outside, outside)]) - float(coupling @ shift)
    radius_sq = alpha**2 - schur
    if radius_sq < -1e-12:
        return None
    radius = math.sqrt(max(radius_sq, 0.0))

    base = np.zeros(dim)
    base[inside] = center[inside] - shift
    steer = np.linalg.solve(sigma_in, direction[inside])
    norm = math.sqrt(max(float(direction[inside] @ steer), 0.0))
    minimizer = base.copy()
    if norm > 0.0:
        minimizer[inside] -= radius * steer / norm

    for candidate in (minimizer, scale_to_l1_ball(minimizer, budget)[0], base, scale_to_l1_ball(base, budget)[0]):
        if _feasible(candidate, center, sigma, alpha, budget):
            return candidate
    return None


def pessimistic_level_solution(
    center: np.ndarray,
    sigma: np.ndarray,
    direction: np.ndarray,
    alpha: float,
    budget: float,
    sparsity: int,
) -> LevelSolution:
    """
    argmin <g, w> sur {‖w - c‖²_Σ̂ <= α²} ∩ {‖w‖_1 <= B} ∩ {‖w‖_0 <= s},
    supports énumérés dans l'ordre lexicographique (premier gagnant en cas d'égalité).

    Raises:
        Infeasible: aucun support réalisable
        SearchSpaceTooLarge: C(d, s) > 10^6
    """
    center = np.asarray(center, dtype=float)
    direction = np.asarray(direction, dtype=float)
    dim = center.size
    size = min(sparsity, dim)
    count = math.comb(dim, size)
    if count > MAX_SUPPORTS:
        raise SearchSpaceTooLarge(f"C({dim}, {size}) = {count} supports pour le critique")
    best: Optional[LevelSolution] = None
    for support in combinations(range(dim), size):
        candidate = _support_candidate(center, sigma, direction, alpha, budget, support)
        if candidate is None:
            continue
        objective = float(direction @ candidate)
        if best is None or objective < best.objective:
            best = LevelSolution(candidate, support, objective)
    if best is None:
        raise Infeasible(f"Aucun support réalisable avec α={alpha:.4g} : rayon trop petit pour le centre de l'oracle")
    return best


def _pessopt_slacks(
    weights: np.ndarray, centers: np.ndarray, sigmas: Sequence[np.ndarray], alpha: Sequence[float], sparsity: int
) -> Dict[str, np.ndarray]:
    horizon = weights.shape[0]
    budgets = horizon - np.arange(horizon, dtype=float)
    return {
        "ellipsoid": np.array([_quadratic(weights[h] - centers[h], sigmas[h]) - alpha[h] ** 2 for h in range(horizon)]),
        "l1": np.abs(weights).sum(axis=1) - budgets,
        "l0": (np.count_nonzero(weights, axis=1) - sparsity).astype(float),
    }


def _alternating(ds: Dataset, pi: Policy, spec: CriticSpec) -> CriticOutput:
    horizon = ds.horizon
    n_states, n_actions, dim = ds.features.shape
    sparsity = spec.sparsity or dim
    probs = pi.action_probabilities(ds.features)
    directions = _occupancy_directions(ds, policy_features(ds.features, probs))
    sigmas = [empirical_covariance(ds, h, spec.ridge, ds.epsilon) for h in range(horizon)]

    weights = np.zeros((horizon, dim))
    centers = np.zeros((horizon, dim))
    reports: List[Optional[EstimatorReport]] = [None] * horizon
    iteration = 0
    for iteration in range(1, spec.max_iters + 1):
        updated = np.zeros((horizon, dim))
        q_next = np.zeros((n_states, n_actions))
        for h in reversed(range(horizon)):
            problem = srle_dataset_for_policy(
                ds, h, pi, q_next, "policy", sparsity=sparsity, ridge=spec.ridge, delta=spec.delta
            )
            reports[h] = run_oracle(spec.oracle, problem, spec.oracle_options)
            centers[h] = reports[h].w_hat
            level = pessimistic_level_solution(
                centers[h], sigmas[h], directions[h], spec.alpha[h], float(horizon - h), sparsity
            )
            updated[h] = level.w
            q_next = ds.features @ updated[h]
        stable = np.allclose(updated, weights, rtol=0.0, atol=1e-12)
        weights = updated
        if stable:
            break

    q_tables = np.einsum("xai,hi->hxa", ds.features, weights)
    return CriticOutput(
        variant=spec.variant,
        weights=weights,
        q_tables=q_tables,
        slacks=_pessopt_slacks(weights, centers, sigmas, spec.alpha, sparsity),
        pessimistic_value=_initial_value(probs, q_tables, ds.initial_state),
        centers=centers.copy(),
        reports=tuple(reports),
        iterations=iteration,
    )


def _frozen_operator(
    ds: Dataset, psi: np.ndarray, h: int, report: EstimatorReport, ridge: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Opérateur srle2 à (support, C) figés : c_h = offset + linear @ w_{h+1}.
    La mise à l'échelle ℓ1 éventuelle de l'oracle n'est pas reproduite.
    """
    dim = ds.features.shape[2]
    columns = list(report.support)
    rows = report.trimmed_set
    covariates = ds.features_at(h)[np.ix_(rows, columns)]
    n = ds.num_trajectories
    if ridge > 0.0:
        operator = np.linalg.solve(covariates.T @ covariates / n + ridge * np.eye(len(columns)), covariates.T / n)
    else:
        operator = np.linalg.pinv(covariates)
    offset = np.zeros(dim)
    offset[columns] = operator @ ds.rewards[rows, h]
    linear = np.zeros((dim, dim))
    if h < ds.horizon - 1:
        linear[columns, :] = operator @ psi[h + 1][ds.states[rows, h + 1]]
    return offset, linear


@dataclass(frozen=True, eq=False)
class _JointProgram:
    offsets: np.ndarray
    linears: np.ndarray
    sigmas: Tuple[np.ndarray, ...]
    alpha: Tuple[float, ...]
    objective_direction: np.ndarray

    @property
    def horizon(self) -> int:
        return self.offsets.shape[0]

    def centers(self, weights: np.ndarray) -> np.ndarray:
        out = self.offsets.copy()
        for h in range(self.horizon - 1):
            out[h] += self.linears[h] @ weights[h + 1]
        return out

    def feasible(self, weights: np.ndarray) -> bool:
        centers = self.centers(weights)
        return all(
            _feasible(weights[h], centers[h], self.sigmas[h], self.alpha[h], float(self.horizon - h))
            for h in range(self.horizon)
        )

    def repair(self, weights: np.ndarray) -> np.ndarray:
        """Ramène chaque w_h sur son ellipsoïde, de h = H-1 vers 0 (dépassements numériques du solveur)."""
        weights = weights.copy()
        for h in reversed(range(self.horizon)):
            center = self.centers(weights)[h]
            excess = _quadratic(weights[h] - center, self.sigmas[h])
            if excess > self.alpha[h] ** 2:
                ratio = self.alpha[h] / math.sqrt(excess) * (1.0 - 1e-12)
                weights[h] = center + (weights[h] - center) * ratio
        return weights


def _solve_support_tuple(
    program: _JointProgram, supports: Tuple[Tuple[int, ...], ...], warm: np.ndarray
) -> Optional[np.ndarray]:
    """Sous-problème convexe à supports fixés : w = w⁺ - w⁻, SLSQP."""
    horizon, dim = warm.shape
    sizes = [len(support) for support in supports]
    offsets = np.concatenate([[0], np.cumsum([2 * size for size in sizes])])

    def unpack(x: np.ndarray) -> np.ndarray:
        weights = np.zeros((horizon, dim))
        for h, support in enumerate(supports):
            block = x[offsets[h]:offsets[h + 1]]
            weights[h, list(support)] = block[: sizes[h]] - block[sizes[h]:]
        return weights

    def pack(weights: np.ndarray) -> np.ndarray:
        parts = []
        for h, support in enumerate(supports):
            values = weights[h, list(support)]
            parts.extend([np.maximum(values, 0.0), np.maximum(-values, 0.0)])
        return np.concatenate(parts)

    constraints = []
    for h in range(horizon):
        budget = float(horizon - h)
        constraints.append({"type": "ineq", "fun": lambda x, h=h, b=budget: b - x[offsets[h]:offsets[h + 1]].sum()})
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda x, h=h: program.alpha[h] ** 2
                - _quadratic(unpack(x)[h] - program.centers(unpack(x))[h], program.sigmas[h]),
            }
        )
    bounds = [(0.0, float(horizon - h)) for h in range(horizon) for _ in range(2 * sizes[h])]
    start = pack(warm)
    result = minimize(
        lambda x: float(program.objective_direction @ unpack(x)[0]),
        start,
        method="SLSQP",
        bounds=bounds,
        constraints=constraints,
        options={"maxiter": 300, "ftol": 1e-12},
    )
    best: Optional[np.ndarray] = None
    for candidate in (program.repair(unpack(result.x)), unpack(start)):
        if not program.feasible(candidate):
            continue
        if best is None or program.objective_direction @ candidate[0] < program.objective_direction @ best[0]:
            best = candidate
    return best


def _exact_tiny(ds: Dataset, pi: Policy, spec: CriticSpec) -> CriticOutput:
    """
    Énumération conjointe des supports par horizon, l'opérateur srle2 étant
    figé sur les (support, C) du solveur alternating, qui sert de départ.
    """
    horizon = ds.horizon
    dim = ds.features.shape[2]
    sparsity = spec.sparsity or dim
    size = min(sparsity, dim)
    total = math.comb(dim, size) ** horizon
    if total > MAX_EXACT_TUPLES:
        raise SearchSpaceTooLarge(f"{total} tuples de supports pour exact_tiny (plafond {MAX_EXACT_TUPLES})")
    per_level = list(combinations(range(dim), size))
    reference = _alternating(ds, pi, spec)

    probs = pi.action_probabilities(ds.features)
    psi = policy_features(ds.features, probs)
    frozen = [_frozen_operator(ds, psi, h, reference.reports[h], spec.ridge) for h in range(horizon)]
    program = _JointProgram(
        offsets=np.stack([offset for offset, _ in frozen]),
        linears=np.stack([linear for _, linear in frozen]),
        sigmas=tuple(empirical_covariance(ds, h, spec.ridge, ds.epsilon) for h in range(horizon)),
        alpha=spec.alpha,
        objective_direction=psi[0, ds.initial_state],
    )

    best_weights: Optional[np.ndarray] = None
    best_value = math.inf
    for supports in itertools.product(per_level, repeat=horizon):
        warm = np.zeros_like(reference.weights)
        for h, support in enumerate(supports):
            warm[h, list(support)] = reference.weights[h, list(support)]
        solution = _solve_support_tuple(program, supports, warm)
        if solution is None:
            continue
        value = float(program.objective_direction @ solution[0])
        if value < best_value:
            best_weights, best_value = solution, value
    if best_weights is None:
        raise Infeasible("exact_tiny : aucun tuple de supports réalisable")

    centers = program.centers(best_weights)
    q_tables = np.einsum("xai,hi->hxa", ds.features, best_weights)
    return CriticOutput(
        variant=spec.variant,
        weights=best_weights,
        q_tables=q_tables,
        slacks=_pessopt_slacks(best_weights, centers, program.sigmas, spec.alpha, sparsity),
        pessimistic_value=_initial_value(probs, q_tables, ds.initial_state),
        centers=centers,
        reports=reference.reports,
        iterations=total,
    )


def critic_pessopt(ds: Dataset, pi: Policy, spec: CriticSpec) -> CriticOutput:
    """
    Critique PessOpt, solveur `spec.solver`.

    Raises:
        Infeasible: α trop petit pour le centre de l'oracle
        SearchSpaceTooLarge: énumération au-delà des plafonds
    """
    if spec.variant != "pess_opt":
        raise ValueError(f"critic_pessopt appelé avec la variante {spec.variant}")
    if len(spec.alpha) != ds.horizon:
        raise ValueError(f"{len(spec.alpha)} rayons α pour un horizon {ds.horizon}")
    if any(a == 0.0 for a in spec.alpha):
        logger.warning("Rayon α_h nul : l'ellipsoïde se réduit au centre de l'oracle")
    if spec.solver == "exact_tiny":
        return _exact_tiny(ds, pi, spec)
    return _alternating(ds, pi, spec)


def run_critic(ds: Dataset, pi: Policy, spec: CriticSpec) -> CriticOutput:
    if spec.variant == "uniform_coverage":
        return critic_uniform(ds, pi, spec)
    return critic_pessopt(ds, pi, spec)


# ============================================================================
# ACTEUR
# ============================================================================


def actor_step(upsilon: np.ndarray, w_underbar: np.ndarray, eta: float) -> np.ndarray:
    """υ'_h = υ_h + η w̲_h."""
    if eta < 0.0:
        raise ValueError(f"Le pas η doit être >= 0, reçu {eta}")
    return np.asarray(upsilon, dtype=float) + eta * np.asarray(w_underbar, dtype=float)


def default_step_size(variant: str, num_actions: int, iterations: int, horizon: int) -> float:
    """
    √(log|A|/T) pour uniform_coverage, √(log|A|/(H²T)) pour pess_opt, T étant
    le nombre d'itérations effectivement exécutées (avec T = N : pas théorique).
    """
    if variant == "uniform_coverage":
        return math.sqrt(math.log(num_actions) / iterations)
    return math.sqrt(math.log(num_actions) / (horizon**2 * iterations))


def run_actor_critic(
    ds: Dataset,
    spec: CriticSpec,
    T: int,
    eta: Optional[float] = None,
    seed: int = 0,
    mdp_true: Optional[SparseLinearMDP] = None,
) -> ActorCriticResult:
    """
    Boucle acteur-critique à υ_1 = 0 ; renvoie le mélange uniforme des T
    politiques visitées. L'algorithme est déterministe ; `seed` est
    conservée dans le résultat pour la traçabilité.
    """
    if T < 1:
        raise ValueError(f"T doit être >= 1, reçu {T}")
    start = time.perf_counter()
    n_actions, dim = ds.features.shape[1:]
    if eta is None:
        eta = default_step_size(spec.variant, n_actions, T, ds.horizon)
    upsilon = np.zeros((ds.horizon, dim))
    members: List[LogLinearPolicy] = []
    trace: List[TraceRow] = []
    critics: List[CriticOutput] = []
    for t in range(1, T + 1):
        policy = LogLinearPolicy(upsilon)
        critic = run_critic(ds, policy, spec)
        subopt = suboptimality(mdp_true, policy) if mdp_true is not None else None
        members.append(policy)
        critics.append(critic)
        trace.append(TraceRow(t, critic.pessimistic_value, subopt, critic.max_slack))
        upsilon = actor_step(upsilon, critic.weights, eta)
        logger.debug("Itération %d : valeur pessimiste %.4f", t, critic.pessimistic_value)
    logger.info(
        "Acteur-critique (%s, %s) : %d itérations en %.2fs", spec.variant, spec.oracle, T, time.perf_counter() - start
    )
    return ActorCriticResult(MixturePolicy(tuple(members)), tuple(trace), float(eta), int(seed), tuple(critics))


def write_trace_csv(trace: Sequence[TraceRow], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=TRACE_CSV_COLUMNS)
        writer.writeheader()
        for row in trace:
            writer.writerow(
                {
                    "t": row.t,
                    "pessimistic_value": row.pessimistic_value,
                    "subopt_if_true_mdp_known": "" if row.subopt_if_true_mdp_known is None else row.subopt_if_true_mdp_known,
                    "constraint_max_slack": row.constraint_max_slack,
                }
            )


# ============================================================================
# DIAGNOSTICS - MDP INDUIT
# ============================================================================


def induced_rewards(mdp: SparseLinearMDP, pi: Policy, q_tables: np.ndarray) -> np.ndarray:
    """r̂^π_h = r_h + Q̲_h - B^π_h Q̲_{h+1}."""
    perturbed = np.zeros_like(q_tables)
    for h in range(mdp.horizon):
        q_next = q_tables[h + 1] if h < mdp.horizon - 1 else np.zeros_like(q_tables[h])
        perturbed[h] = mdp.rewards[h] + q_tables[h] - bellman_apply(mdp, h, q_next, pi)
    return perturbed


def induced_mdp_diagnostic(mdp_true: SparseLinearMDP, pi: Policy, critic_out: CriticOutput) -> InducedMdpDiag:
    """MDP à récompenses perturbées dont la DP exacte reproduit Q̲ ; écart de pessimisme en x1."""
    perturbed = induced_rewards(mdp_true, pi, critic_out.q_tables)
    induced = exact_values(mdp_true, pi, rewards=perturbed)
    x1 = mdp_true.initial_state
    probs = pi.action_probabilities(mdp_true.features)
    return InducedMdpDiag(
        perturbed_reward=perturbed,
        value_match_error=float(np.abs(induced.q - critic_out.q_tables).max()),
        pessimistic_value=_initial_value(probs, critic_out.q_tables, x1),
        true_value=float(exact_values(mdp_true, pi).v[0, x1]),
    )


def frozen_critic_regret(
    mdp: SparseLinearMDP, weight_sequence: Sequence[np.ndarray], eta: Optional[float] = None
) -> float:
    """
    Regret moyen (1/T) Σ_t (V^{π*}_{M_t} - V^{π_t}_{M_t}) de l'acteur face à
    une suite figée de sorties du critique ; M_t est le MDP induit par
    (π_t, w̲_t) et π* l'optimum du MDP vrai.
    """
    horizon = mdp.horizon
    steps = len(weight_sequence)
    if eta is None:
        eta = math.sqrt(math.log(mdp.num_actions) / (horizon**2 * steps))
    optimal = exact_values(mdp).policy
    x1 = mdp.initial_state
    upsilon = np.zeros((horizon, mdp.dim))
    regrets = []
    for weights in weight_sequence:
        policy = LogLinearPolicy(upsilon)
        perturbed = induced_rewards(mdp, policy, np.einsum("xai,hi->hxa", mdp.features, weights))
        regrets.append(
            exact_values(mdp, optimal, rewards=perturbed).v[0, x1] - exact_values(mdp, policy, rewards=perturbed).v[0, x1]
        )
        upsilon = actor_step(upsilon, weights, eta)
    return float(np.mean(regrets))
