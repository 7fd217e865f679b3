#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
datagen.py - Jeux de trajectoires hors ligne et corruption adverse budgétée

FEATURES:
- Échantillonnage de N épisodes i.i.d. depuis x1 sous une politique de comportement
- Récompenses réalisées Bernoulli(r_h(x, a))
- Adversaire : reward_poison, feature_swap, value_flip sur ⌈εN⌉ trajectoires
- Covariance empirique régularisée et jeux de régression compatibles SRLE
- Contrôle d'encadrement des covariances sur supports parcimonieux
- Format JSON Lines (ligne 0 = provenance)

Usage:
    ds = generate_dataset(mdp, behavior_policy(mdp, BehaviorSpec()), n=500, seed=1)
    bad = corrupt_dataset(ds, AttackSpec(kind="reward_poison"), epsilon=0.1, seed=1)
"""

import dataclasses
import logging
import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg

import rng
from codec import iter_jsonl, write_jsonl
from errors import BadEpsilon
from mdp_core import (
    Policy,
    SparseLinearMDP,
    TabularPolicy,
    exact_values,
    flatten_members,
    mdp_fingerprint,
    occupancy_measures,
    policy_fingerprint,
    population_covariance,
    stack_members,
    uniform_policy,
)
from srle import RegressionProblem, default_ridge, tolerant_ceil

logger = logging.getLogger("sparse_orl.datagen")

DATASET_FORMAT = "sparse-orl-dataset/1"
SANDWICH_LOW = 1.0 / 3.0
SANDWICH_HIGH = 5.0 / 3.0

# ============================================================================
# SPÉCIFICATIONS
# ============================================================================


class BehaviorSpec(BaseModel):
    """Politique de comportement : uniforme, ou mélange de π* et de l'uniforme."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["uniform", "optimal_mix"] = "uniform"
    optimal_weight: float = Field(0.5, ge=0.0, le=1.0)


class AttackSpec(BaseModel):
    """Adversaire qui observe le jeu propre puis réécrit ⌈εN⌉ trajectoires."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["reward_poison", "feature_swap", "value_flip"] = "reward_poison"
    magnitude: float = Field(1.0, ge=0.0)
    target_selection: Literal["random", "high_reward_first"] = "random"
    # Ridge de l'ajustement en une passe utilisé par feature_swap
    ridge: float = Field(1.0, gt=0.0)


def behavior_policy(mdp: SparseLinearMDP, spec: BehaviorSpec) -> TabularPolicy:
    uniform = uniform_policy(mdp.horizon, mdp.num_states, mdp.num_actions)
    if spec.kind == "uniform":
        return uniform
    optimal = exact_values(mdp).policy
    return TabularPolicy(spec.optimal_weight * optimal.probs + (1.0 - spec.optimal_weight) * uniform.probs)


# ============================================================================
# JEU DE DONNÉES
# ============================================================================


class Step(NamedTuple):
    state: int
    action: int
    reward: float


Trajectory = Tuple[Step, ...]


@dataclass(frozen=True)
class Provenance:
    mdp_hash: str
    behavior_policy_hash: str
    seed: int
    corruption: Optional[Dict[str, Any]] = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    N trajectoires de longueur H stockées en tableaux (N, H), plus le registre
    de corruption. La table φ connue de l'apprenant et l'état initial x1
    accompagnent les données.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    corrupted: np.ndarray
    features: np.ndarray
    initial_state: int
    epsilon: float
    provenance: Provenance

    def __post_init__(self) -> None:
        for name, dtype in (("states", int), ("actions", int), ("rewards", float), ("corrupted", bool)):
            array = np.array(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.states.shape != self.actions.shape or self.states.shape != self.rewards.shape:
            raise ValueError("states, actions et rewards doivent partager la forme (N, H)")
        if self.corrupted.shape != (self.states.shape[0],):
            raise ValueError("Le registre de corruption doit avoir une entrée par trajectoire")
        if self.states.shape[0] < 1:
            raise ValueError("Un jeu de données doit contenir au moins une trajectoire")

    @property
    def num_trajectories(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    def trajectory(self, index: int) -> Trajectory:
        return tuple(
            Step(int(x), int(a), float(r))
            for x, a, r in zip(self.states[index], self.actions[index], self.rewards[index])
        )

    def features_at(self, h: int) -> np.ndarray:
        """Covariables Z de l'étape h, tableau (N, d)."""
        return self.features[self.states[:, h], self.actions[:, h]]


def _sample_rows(gen: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Un tirage catégoriel par ligne, par inversion de la fonction de répartition."""
    cumulative = np.cumsum(probs, axis=1)
    draws = gen.random(probs.shape[0])
    picks = (cumulative <= draws[:, None]).sum(axis=1)
    return np.minimum(picks, probs.shape[1] - 1)


def generate_dataset(mdp: SparseLinearMDP, behavior: Policy, n: int, seed: int) -> Dataset:
    """
    N épisodes i.i.d. depuis x1 sous `behavior`, déterministes en `seed`.

    Un mélange tire un membre par trajectoire. Les récompenses réalisées
    suivent Bernoulli(r_h(x, a)).
    """
    if n < 1:
        raise ValueError(f"N doit être >= 1, reçu {n}")
    start = time.perf_counter()
    gen = rng.stream(seed, "dataset")
    members = flatten_members(behavior)
    probs = stack_members([member for member, _ in members], mdp.features)
    weights = np.array([weight for _, weight in members])
    picks = gen.choice(len(members), size=n, p=weights) if len(members) > 1 else np.zeros(n, dtype=int)

    horizon = mdp.horizon
    states = np.zeros((n, horizon), dtype=int)
    actions = np.zeros((n, horizon), dtype=int)
    rewards = np.zeros((n, horizon))
    x = np.full(n, mdp.initial_state)
    for h in range(horizon):
        a = _sample_rows(gen, probs[picks, h, x])
        states[:, h], actions[:, h] = x, a
        rewards[:, h] = (gen.random(n) < mdp.rewards[h, x, a]).astype(float)
        if h < horizon - 1:
            x = _sample_rows(gen, mdp.transitions[h, x, a])

    provenance = Provenance(mdp_fingerprint(mdp), policy_fingerprint(behavior), int(seed))
    logger.info("Jeu de %d trajectoires généré en %.2fs", n, time.perf_counter() - start)
    return Dataset(
        states=states,
        actions=actions,
        rewards=rewards,
        corrupted=np.zeros(n, dtype=bool),
        features=mdp.features,
        initial_state=mdp.initial_state,
        epsilon=0.0,
        provenance=provenance,
    )


# ============================================================================
# ADVERSAIRE
# ============================================================================


def _select_targets(ds: Dataset, count: int, selection: str, gen: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=int)
    candidates = np.flatnonzero(~ds.corrupted)
    if selection == "high_reward_first":
        totals = ds.rewards[candidates].sum(axis=1)
        return np.sort(candidates[np.argsort(-totals, kind="stable")[:count]])
    return np.sort(gen.choice(candidates, size=count, replace=False))


def _feature_swap(ds: Dataset, targets: np.ndarray, ridge: float, states: np.ndarray, actions: np.ndarray) -> None:
    """Remplace chaque (x, a) ciblé par la paire de la table qui contredit le plus la récompense observée."""
    n_states, n_actions, dim = ds.features.shape
    table = ds.features.reshape(n_states * n_actions, dim)
    for h in range(ds.horizon):
        covariates = ds.features_at(h)
        fitted = np.linalg.solve(covariates.T @ covariates + ridge * np.eye(dim), covariates.T @ ds.rewards[:, h])
        predictions = table @ fitted
        mismatch = np.abs(predictions[None, :] - ds.rewards[targets, h][:, None])
        flat = np.argmax(mismatch, axis=1)
        states[targets, h], actions[targets, h] = np.divmod(flat, n_actions)


def corrupt_dataset(ds: Dataset, attack: AttackSpec, epsilon: float, seed: int) -> Dataset:
    """
    Porte à exactement ⌈εN⌉ le nombre de trajectoires réécrites selon `attack` ;
    les trajectoires déjà corrompues comptent dans ce budget et seules des
    trajectoires propres sont ciblées. Les autres restent identiques bit à bit.

    Raises:
        BadEpsilon: ε hors de [0, 1/2), ou budget inférieur aux trajectoires déjà corrompues
    """
    if not 0.0 <= epsilon < 0.5:
        raise BadEpsilon(f"ε doit appartenir à [0, 1/2), reçu {epsilon}")
    budget = tolerant_ceil(epsilon * ds.num_trajectories)
    already = int(ds.corrupted.sum())
    if already > budget:
        raise BadEpsilon(f"{already} trajectoires déjà corrompues dépassent le budget ⌈εN⌉ = {budget} pour ε = {epsilon}")
    count = budget - already
    if count == 0:
        return ds if epsilon == ds.epsilon else dataclasses.replace(ds, epsilon=epsilon)

    gen = rng.stream(seed, "corruption")
    targets = _select_targets(ds, count, attack.target_selection, gen)
    states, actions, rewards = ds.states.copy(), ds.actions.copy(), ds.rewards.copy()
    bound = float(ds.horizon)
    if attack.kind == "reward_poison":
        rewards[targets, :] = np.clip(-attack.magnitude * bound, -bound, bound)
    elif attack.kind == "value_flip":
        rewards[targets, :] = np.clip(attack.magnitude * bound - rewards[targets, :], -bound, bound)
    else:
        _feature_swap(ds, targets, attack.ridge, states, actions)

    corrupted = ds.corrupted.copy()
    corrupted[targets] = True
    ledger = {"attack": attack.model_dump(), "epsilon": epsilon, "seed": int(seed), "count": budget}
    logger.info("Corruption %s appliquée à %d/%d trajectoires", attack.kind, count, ds.num_trajectories)
    return Dataset(
        states=states,
        actions=actions,
        rewards=rewards,
        corrupted=corrupted,
        features=ds.features,
        initial_state=ds.initial_state,
        epsilon=epsilon,
        provenance=dataclasses.replace(ds.provenance, corruption=ledger),
    )


# ============================================================================
# RÉGRESSION
# ============================================================================


def empirical_covariance(ds: Dataset, h: int, ridge: float, epsilon: float) -> np.ndarray:
    """Σ̂_h = (1/N) Σ φφ^T + (λ + ε) I."""
    if ridge < 0.0:
        raise ValueError(f"λ doit être >= 0, reçu {ridge}")
    covariates = ds.features_at(h)
    dim = covariates.shape[1]
    return covariates.T @ covariates / ds.num_trajectories + (ridge + epsilon) * np.eye(dim)


def srle_dataset_for_policy(
    ds: Dataset,
    h: int,
    policy: Optional[Policy],
    q_next: Optional[np.ndarray],
    mode: Literal["policy", "greedy"] = "policy",
    *,
    sparsity: Optional[int] = None,
    l1_budget: Optional[float] = None,
    sigma: Optional[float] = None,
    epsilon: Optional[float] = None,
    ridge: float = 0.0,
    delta: float = 0.1,
) -> RegressionProblem:
    """
    Jeu D^π_h (ou D*_h en mode glouton) : Z = φ(x_h, a_h) et
    y = R_h + Σ_a π_{h+1}(a|x_{h+1}) Q_next(x_{h+1}, a)  (ou max_a Q_next),
    continuation nulle à la dernière étape. Budget ℓ1 et σ valent H - h
    par défaut.
    """
    if mode not in ("policy", "greedy"):
        raise ValueError(f"Mode inconnu : {mode}")
    targets = ds.rewards[:, h].copy()
    if h < ds.horizon - 1 and q_next is not None:
        q_next = np.asarray(q_next, dtype=float)
        if mode == "greedy":
            continuation = q_next.max(axis=1)
        else:
            if policy is None:
                raise ValueError("Le mode policy exige une politique")
            continuation = (policy.action_probabilities(ds.features)[h + 1] * q_next).sum(axis=1)
        targets += continuation[ds.states[:, h + 1]]
    budget = float(ds.horizon - h)
    return RegressionProblem(
        Z=ds.features_at(h),
        y=targets,
        sparsity=ds.features.shape[2] if sparsity is None else sparsity,
        l1_budget=budget if l1_budget is None else l1_budget,
        sigma=budget if sigma is None else sigma,
        epsilon=ds.epsilon if epsilon is None else epsilon,
        ridge=ridge,
        delta=delta,
    )


# ============================================================================
# ENCADREMENT DES COVARIANCES
# ============================================================================


def covariance_sandwich(
    population: np.ndarray, empirical: np.ndarray, ridge: float, sparsity: int
) -> Tuple[float, float]:
    """
    Extrêmes des valeurs propres généralisées de (Σ̂_S, [Σ + λI]_S) sur tous
    les supports |S| <= s. L'encadrement tient si elles restent dans [1/3, 5/3].
    """
    dim = population.shape[0]
    regularized = population + ridge * np.eye(dim)
    low, high = np.inf, -np.inf
    for size in range(1, min(sparsity, dim) + 1):
        for support in combinations(range(dim), size):
            idx = np.ix_(support, support)
            values = linalg.eigh(empirical[idx], regularized[idx], eigvals_only=True)
            low, high = min(low, values[0]), max(high, values[-1])
    return float(low), float(high)


@dataclass(frozen=True)
class SandwichTrial:
    constant: float
    ridge: float
    low: float
    high: float

    @property
    def holds(self) -> bool:
        return self.low >= SANDWICH_LOW and self.high <= SANDWICH_HIGH


def sandwich_trial(
    mdp: SparseLinearMDP,
    behavior: Policy,
    n: int,
    sparsity: int,
    delta: float,
    seed: int,
    constant: float = 1.0,
) -> SandwichTrial:
    """Un jeu de N trajectoires, encadrement vérifié à chaque horizon avec λ = C (s/N) log(d/(sδ))."""
    population = population_covariance(mdp, occupancy_measures(mdp, behavior))
    ds = generate_dataset(mdp, behavior, n, seed)
    ridge = default_ridge(sparsity, n, mdp.dim, delta, constant)
    low, high = np.inf, -np.inf
    for h in range(mdp.horizon):
        lo_h, hi_h = covariance_sandwich(population[h], empirical_covariance(ds, h, ridge, 0.0), ridge, sparsity)
        low, high = min(low, lo_h), max(high, hi_h)
    return SandwichTrial(constant, ridge, low, high)


def sandwich_coverage(
    mdp: SparseLinearMDP,
    behavior: Policy,
    n: int,
    sparsity: int,
    delta: float,
    seeds: Sequence[int],
    constant: float = 1.0,
    target_rate: float = 0.95,
    max_doublings: int = 3,
) -> Tuple[float, float]:
    """
    Taux de graines où l'encadrement tient. Si le taux reste sous
    `target_rate`, C est doublé et toutes les graines sont rejouées.

    Returns:
        (C retenu, taux observé)
    """
    rate = 0.0
    for _ in range(max_doublings + 1):
        trials = [sandwich_trial(mdp, behavior, n, sparsity, delta, seed, constant) for seed in seeds]
        rate = float(np.mean([trial.holds for trial in trials]))
        if rate >= target_rate:
            return constant, rate
        logger.warning("Encadrement tenu sur %.0f%% des graines avec C=%g : doublement de C", 100 * rate, constant)
        constant *= 2.0
    return constant / 2.0, rate


# ============================================================================
# FORMAT JSON LINES
# ============================================================================


def dataset_to_lines(ds: Dataset) -> Iterable[Dict[str, Any]]:
    yield {
        "format": DATASET_FORMAT,
        "provenance": dataclasses.asdict(ds.provenance),
        "epsilon": ds.epsilon,
        "num_trajectories": ds.num_trajectories,
        "horizon": ds.horizon,
        "initial_state": ds.initial_state,
    }
    for index in range(ds.num_trajectories):
        yield {
            "steps": [[step.state, step.action, step.reward] for step in ds.trajectory(index)],
            "corrupted": bool(ds.corrupted[index]),
        }


def save_dataset(path: Union[str, Path], ds: Dataset) -> None:
    write_jsonl(path, dataset_to_lines(ds))


def load_dataset(path: Union[str, Path], mdp: SparseLinearMDP) -> Dataset:
    """Relit un jeu JSONL ; la table φ vient du MDP dont l'empreinte doit correspondre."""
    lines = iter_jsonl(path)
    header = next(lines, None)
    if header is None or header.get("format") != DATASET_FORMAT:
        raise ValueError(f"En-tête de jeu de données absent ou inconnu dans {path}")
    provenance = Provenance(**header["provenance"])
    if provenance.mdp_hash != mdp_fingerprint(mdp):
        raise ValueError(f"Le jeu {path} provient d'un autre MDP ({provenance.mdp_hash})")

    steps: List[List[List[float]]] = []
    corrupted: List[bool] = []
    for line in lines:
        steps.append(line["steps"])
        corrupted.append(bool(line["corrupted"]))
    if not steps:
        raise ValueError(f"Le jeu {path} ne contient aucune trajectoire")
    table = np.array(steps, dtype=float)
    return Dataset(
        states=table[:, :, 0].astype(int),
        actions=table[:, :, 1].astype(int),
        rewards=table[:, :, 2],
        corrupted=np.array(corrupted),
        features=mdp.features,
        initial_state=int(header["initial_state"]),
        epsilon=float(header["epsilon"]),
        provenance=provenance,
    )
