#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
mdp_core.py - MDP linéaires parcimonieux finis et vérité terrain exacte

Représentation tabulaire d'un MDP épisodique dont transitions et récompenses
sont linéaires dans une carte de caractéristiques φ(x,a) ∈ R^d, avec tous les
paramètres portés par un support S de taille s.

    P_h(x'|x,a) = <φ(x,a), μ_h(x')>        r_h(x,a) = <φ(x,a), θ_h>

CONTENU:
- MdpConfig / build_random_sparse_mdp : générateurs signed_binary et anchored_simplex
- Politiques : tabulaire, log-linéaire, glouton sur poids, mélange uniforme
- Programmation dynamique exacte : valeurs, opérateur de Bellman, occupations
- Covariances de population et opérateur de projection exact
- Sérialisation JSON canonique (MDP et politiques)

CONVENTION D'INDICES:
Les horizons sont indexés h = 0..H-1. Le budget de valeur d'une étape vaut
H - h (soit H + 1 - h en indexation à partir de 1).

Usage:
    mdp = build_random_sparse_mdp(MdpConfig(dim=10, sparsity=2), seed=7)
    star = exact_values(mdp)                 # Q*, V*, π* glouton
    gap = suboptimality(mdp, uniform_policy(mdp.horizon, mdp.num_states, mdp.num_actions))
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, ClassVar, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import softmax

import rng
from codec import fingerprint
from errors import ConstructionFailed

logger = logging.getLogger("sparse_orl.mdp_core")

SIMPLEX_TOL = 1e-12
EXACT_TOL = 1e-10
NEGATIVE_MASS_TOL = 1e-14

# ============================================================================
# CONFIGURATION
# ============================================================================


class MdpConfig(BaseModel):
    """Paramètres du générateur de MDP aléatoires."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_states: int = Field(12, ge=2)
    num_actions: int = Field(3, ge=1)
    horizon: int = Field(3, ge=1)
    dim: int = Field(12, ge=1)
    sparsity: int = Field(2, ge=1)
    feature_family: Literal["signed_binary", "anchored_simplex"] = "anchored_simplex"
    coverage_mode: Literal["uniform", "narrow"] = "uniform"
    # Étendue moyenne de Σ|θ_j| hors ancre pour signed_binary (rejet si > 1/2)
    reward_spread: float = Field(0.4, ge=0.0)
    max_attempts: int = Field(1000, ge=1)

    @model_validator(mode="after")
    def _check_sparsity(self) -> "MdpConfig":
        if self.sparsity > self.dim:
            raise ValueError(f"Parcimonie s={self.sparsity} supérieure à la dimension d={self.dim}")
        return self


# ============================================================================
# MDP
# ============================================================================


def _frozen(array: Any, ndim: int, name: str) -> np.ndarray:
    out = np.array(array, dtype=float)
    if out.ndim != ndim:
        raise ValueError(f"{name} doit être de dimension {ndim}, reçu {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SparseLinearMDP:
    """
    MDP linéaire parcimonieux fini, immuable.

    Attributes:
        features: φ, tableau (X, A, d)
        theta: θ_h, tableau (H, d)
        mu: μ_h(x'), tableau (H, X, d)
        support: S, indices triés
        initial_state: x1
    """

    features: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    support: Tuple[int, ...]
    initial_state: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", _frozen(self.features, 3, "features"))
        object.__setattr__(self, "theta", _frozen(self.theta, 2, "theta"))
        object.__setattr__(self, "mu", _frozen(self.mu, 3, "mu"))
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        object.__setattr__(self, "initial_state", int(self.initial_state))
        num_states, _, dim = self.features.shape
        if self.theta.shape[1] != dim or self.mu.shape[2] != dim:
            raise ValueError("Dimensions incohérentes entre features, theta et mu")
        if self.mu.shape[0] != self.theta.shape[0] or self.mu.shape[1] != num_states:
            raise ValueError("mu doit être de forme (H, X, d)")
        if not 0 <= self.initial_state < num_states:
            raise ValueError(f"État initial hors bornes : {self.initial_state}")

    @property
    def num_states(self) -> int:
        return self.features.shape[0]

    @property
    def num_actions(self) -> int:
        return self.features.shape[1]

    @property
    def horizon(self) -> int:
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def sparsity(self) -> int:
        return len(self.support)

    @cached_property
    def transitions(self) -> np.ndarray:
        """P_h(x'|x,a), tableau (H, X, A, X')."""
        table = np.einsum("xai,hyi->hxay", self.features, self.mu)
        table.setflags(write=False)
        return table

    @cached_property
    def rewards(self) -> np.ndarray:
        """r_h(x,a), tableau (H, X, A)."""
        table = np.einsum("xai,hi->hxa", self.features, self.theta)
        table.setflags(write=False)
        return table


def check_invariants(mdp: SparseLinearMDP, tol: float = SIMPLEX_TOL) -> List[str]:
    """Liste des invariants violés (vide si le MDP est valide)."""
    problems: List[str] = []
    support = np.array(mdp.support, dtype=int)
    off_support = np.setdiff1d(np.arange(mdp.dim), support)

    if len(set(mdp.support)) != len(mdp.support) or np.any(support < 0) or np.any(support >= mdp.dim):
        problems.append("support invalide")
    if np.abs(mdp.features).max(initial=0.0) > 1.0 + tol:
        problems.append("max |φ_i(x,a)| > 1")
    if np.any(np.abs(mdp.theta).sum(axis=1) > 1.0 + tol):
        problems.append("||θ_h||_1 > 1")
    if off_support.size and np.any(mdp.theta[:, off_support] != 0.0):
        problems.append("θ_h non nul hors du support")
    if off_support.size and np.any(mdp.mu[:, :, off_support] != 0.0):
        problems.append("μ_h non nul hors du support")
    if np.any(np.abs(mdp.mu).sum(axis=1).sum(axis=1) > 1.0 + tol):
        problems.append("||Σ_x' |μ_h(x')| ||_1 > 1")

    kernel = mdp.transitions
    if kernel.min(initial=0.0) < -NEGATIVE_MASS_TOL:
        problems.append("probabilité de transition négative")
    if np.any(np.abs(kernel.sum(axis=-1) - 1.0) > tol):
        problems.append("lignes de transition ne sommant pas à 1")

    rewards = mdp.rewards
    if rewards.min(initial=0.0) < -tol or rewards.max(initial=0.0) > 1.0 + tol:
        problems.append("récompense moyenne hors de [0, 1]")
    return problems


def transition_distribution(mdp: SparseLinearMDP, h: int, x: int, a: int) -> np.ndarray:
    """Loi de x' sachant (x, a) à l'étape h : <φ(x,a), μ_h(x')>."""
    return mdp.mu[h] @ mdp.features[x, a]


def mean_reward(mdp: SparseLinearMDP, h: int, x: int, a: int) -> float:
    return float(mdp.features[x, a] @ mdp.theta[h])


# ============================================================================
# GÉNÉRATEURS
# ============================================================================


def _draw_candidate(cfg: MdpConfig, gen: np.random.Generator) -> SparseLinearMDP:
    """Un tirage du générateur, non encore validé.

    Les invariants de noyau et de masse ℓ1 imposent une dynamique
    indépendante de (x, a) : une coordonnée d'ancrage i0 = min(S) vaut 1
    partout et porte seule la masse des μ_h. Les récompenses varient avec
    (x, a) par les autres coordonnées du support.
    """
    n_states, n_actions, horizon, dim = cfg.num_states, cfg.num_actions, cfg.horizon, cfg.dim
    support = np.sort(gen.choice(dim, size=cfg.sparsity, replace=False))
    anchor, others = support[0], support[1:]
    off_support = np.setdiff1d(np.arange(dim), support)

    features = np.zeros((n_states, n_actions, dim))
    features[:, :, anchor] = 1.0
    theta = np.zeros((horizon, dim))

    if cfg.feature_family == "anchored_simplex":
        if others.size:
            block = gen.uniform(0.0, 0.3, size=(n_states, n_actions, others.size))
            dominant = gen.integers(others.size, size=(n_states, n_actions, 1))
            peaks = gen.uniform(0.7, 1.0, size=(n_states, n_actions, 1))
            np.put_along_axis(block, dominant, peaks, axis=2)
            features[:, :, others] = block
        features[:, :, off_support] = gen.uniform(0.0, 1.0, size=(n_states, n_actions, off_support.size))
        weights = gen.dirichlet(np.ones(support.size), size=horizon)
        theta[:, support] = weights * gen.uniform(0.5, 1.0, size=(horizon, 1))
    else:
        signs = np.array([-1.0, 1.0])
        features[:, :, others] = gen.choice(signs, size=(n_states, n_actions, others.size))
        features[:, :, off_support] = gen.choice(signs, size=(n_states, n_actions, off_support.size))
        theta[:, anchor] = 0.5
        if others.size:
            magnitudes = gen.uniform(0.0, 1.0, size=(horizon, others.size)) * (2.0 * cfg.reward_spread / others.size)
            theta[:, others] = gen.choice(signs, size=(horizon, others.size)) * magnitudes

    if cfg.coverage_mode == "narrow" and off_support.size:
        sources = gen.choice(support, size=off_support.size)
        low = 0.0 if cfg.feature_family == "anchored_simplex" else -1.0
        jitter = gen.uniform(low, 1.0, size=(n_states, n_actions, off_support.size))
        features[:, :, off_support] = 0.98 * features[:, :, sources] + 0.02 * jitter

    mu = np.zeros((horizon, n_states, dim))
    mu[:, :, anchor] = gen.dirichlet(np.ones(n_states), size=horizon)
    return SparseLinearMDP(features=features, theta=theta, mu=mu, support=tuple(support.tolist()))


def build_random_sparse_mdp(cfg: MdpConfig, seed: int) -> SparseLinearMDP:
    """
    Tire un MDP linéaire s-parcimonieux valide, déterministe en `seed`.

    Raises:
        ConstructionFailed: aucun tirage valide en `cfg.max_attempts` essais
    """
    gen = rng.stream(seed, "mdp")
    for attempt in range(1, cfg.max_attempts + 1):
        candidate = _draw_candidate(cfg, gen)
        problems = check_invariants(candidate)
        if not problems:
            logger.debug("MDP construit en %d tirage(s) (famille %s)", attempt, cfg.feature_family)
            return candidate
        logger.debug("Tirage %d rejeté : %s", attempt, "; ".join(problems))
    raise ConstructionFailed(
        f"Aucun MDP valide après {cfg.max_attempts} tirages "
        f"(famille={cfg.feature_family}, d={cfg.dim}, s={cfg.sparsity}, reward_spread={cfg.reward_spread})"
    )


# ============================================================================
# POLITIQUES
# ============================================================================


class Policy:
    """Union étiquetée des politiques ; `kind` sert d'étiquette de sérialisation."""

    kind: ClassVar[str] = ""

    def action_probabilities(self, features: np.ndarray) -> np.ndarray:
        """π_h(a|x) pour tout (h, x, a), tableau (H, X, A)."""
        raise NotImplementedError


def _validated_rows(probs: np.ndarray) -> np.ndarray:
    if np.any(probs < 0.0) or np.any(np.abs(probs.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("Chaque ligne de politique tabulaire doit être une loi de probabilité")
    return probs


@dataclass(frozen=True, eq=False)
class TabularPolicy(Policy):
    probs: np.ndarray
    kind: ClassVar[str] = "tabular"

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _validated_rows(_frozen(self.probs, 3, "probs")))

    def action_probabilities(self, features: np.ndarray) -> np.ndarray:
        return self.probs


@dataclass(frozen=True, eq=False)
class LogLinearPolicy(Policy):
    """π_h(a|x) ∝ exp(<φ(x,a), υ_h>)."""

    upsilon: np.ndarray
    kind: ClassVar[str] = "loglinear"

    def __post_init__(self) -> None:
        object.__setattr__(self, "upsilon", _frozen(self.upsilon, 2, "upsilon"))

    def action_probabilities(self, features: np.ndarray) -> np.ndarray:
        logits = np.einsum("xai,hi->hxa", features, self.upsilon)
        return softmax(logits, axis=-1)


@dataclass(frozen=True, eq=False)
class GreedyFromWeights(Policy):
    """Glouton sur clip(<φ(x,a), w_h>, bas_h, haut_h), égalités vers la plus petite action."""

    weights: np.ndarray
    clip_low: np.ndarray
    clip_high: np.ndarray
    kind: ClassVar[str] = "greedy_from_weights"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights, 2, "weights"))
        object.__setattr__(self, "clip_low", _frozen(self.clip_low, 1, "clip_low"))
        object.__setattr__(self, "clip_high", _frozen(self.clip_high, 1, "clip_high"))

    def action_probabilities(self, features: np.ndarray) -> np.ndarray:
        values = np.einsum("xai,hi->hxa", features, self.weights)
        values = np.clip(values, self.clip_low[:, None, None], self.clip_high[:, None, None])
        return greedy_tabular_policy(values).probs


@dataclass(frozen=True, eq=False)
class MixturePolicy(Policy):
    """Mélange uniforme : un membre tiré par épisode, donc non markovien."""

    policies: Tuple[Policy, ...]
    kind: ClassVar[str] = "mixture"

    def __post_init__(self) -> None:
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.policies:
            raise ValueError("Un mélange doit contenir au moins une politique")

    def action_probabilities(self, features: np.ndarray) -> np.ndarray:
        raise ValueError("Un mélange de politiques n'est pas markovien : évaluer ses membres")


def uniform_policy(horizon: int, num_states: int, num_actions: int) -> TabularPolicy:
    return TabularPolicy(np.full((horizon, num_states, num_actions), 1.0 / num_actions))


def greedy_tabular_policy(q_values: np.ndarray) -> TabularPolicy:
    """Politique déterministe argmax_a Q_h(x, a), plus petite action en cas d'égalité."""
    q_values = np.asarray(q_values, dtype=float)
    best = np.argmax(q_values, axis=-1)
    probs = np.zeros_like(q_values)
    np.put_along_axis(probs, best[..., None], 1.0, axis=-1)
    return TabularPolicy(probs)


def flatten_members(policy: Policy) -> List[Tuple[Policy, float]]:
    """Membres markoviens d'une politique avec leur poids dans le mélange."""
    if isinstance(policy, MixturePolicy):
        share = 1.0 / len(policy.policies)
        return [(leaf, share * weight) for member in policy.policies for leaf, weight in flatten_members(member)]
    return [(policy, 1.0)]


# ============================================================================
# PROGRAMMATION DYNAMIQUE EXACTE
# ============================================================================


@dataclass(frozen=True, eq=False)
class ValueTables:
    q: np.ndarray
    v: np.ndarray
    policy: Optional[TabularPolicy] = None


def _continuation(mdp: SparseLinearMDP, h: int, f: np.ndarray, probs: Optional[np.ndarray]) -> np.ndarray:
    """V_{h+1}(x') déduite de f, nulle à la dernière étape."""
    if h >= mdp.horizon - 1:
        return np.zeros(mdp.num_states)
    if probs is None:
        return f.max(axis=1)
    return (probs[h + 1] * f).sum(axis=1)


def bellman_apply(
    mdp: SparseLinearMDP,
    h: int,
    f: np.ndarray,
    policy: Optional[Policy] = None,
    rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Opérateur de Bellman exact à l'étape h.

    policy=None : mode glouton B_h f = r_h + E[max_a' f(x', a')]
    sinon       : B^π_h f = r_h + E[Σ_a' π_{h+1}(a'|x') f(x', a')]
    """
    f = np.asarray(f, dtype=float)
    reward = mdp.rewards[h] if rewards is None else np.asarray(rewards)[h]
    probs = None if policy is None else policy.action_probabilities(mdp.features)
    return reward + mdp.transitions[h] @ _continuation(mdp, h, f, probs)


def exact_values(
    mdp: SparseLinearMDP,
    policy: Optional[Policy] = None,
    rewards: Optional[np.ndarray] = None,
) -> ValueTables:
    """
    Récurrence arrière depuis Q_{H+1} = 0.

    policy=None renvoie Q*, V* et la politique gloutonne π*. Un mélange
    renvoie la moyenne des tables de ses membres. `rewards` remplace r_h
    (MDP induit à récompenses perturbées).
    """
    if isinstance(policy, MixturePolicy):
        parts = [(exact_values(mdp, leaf, rewards), weight) for leaf, weight in flatten_members(policy)]
        q = sum(weight * table.q for table, weight in parts)
        v = sum(weight * table.v for table, weight in parts)
        return ValueTables(q=q, v=v)

    reward = mdp.rewards if rewards is None else np.asarray(rewards, dtype=float)
    probs = None if policy is None else policy.action_probabilities(mdp.features)
    horizon, n_states, n_actions = reward.shape
    q = np.zeros((horizon, n_states, n_actions))
    v = np.zeros((horizon, n_states))
    v_next = np.zeros(n_states)
    for h in reversed(range(horizon)):
        q[h] = reward[h] + mdp.transitions[h] @ v_next
        v[h] = q[h].max(axis=1) if probs is None else (probs[h] * q[h]).sum(axis=1)
        v_next = v[h]
    greedy = greedy_tabular_policy(q) if policy is None else None
    return ValueTables(q=q, v=v, policy=greedy)


def suboptimality(mdp: SparseLinearMDP, policy: Policy) -> float:
    """V*(x1) - V^π(x1)."""
    x1 = mdp.initial_state
    return float(exact_values(mdp).v[0, x1] - exact_values(mdp, policy).v[0, x1])


def occupancy_measures(mdp: SparseLinearMDP, policy: Policy) -> np.ndarray:
    """d^π_h(x, a) par récurrence avant depuis x1, tableau (H, X, A)."""
    if isinstance(policy, MixturePolicy):
        return sum(weight * occupancy_measures(mdp, leaf) for leaf, weight in flatten_members(policy))
    probs = policy.action_probabilities(mdp.features)
    occupancy = np.zeros((mdp.horizon, mdp.num_states, mdp.num_actions))
    state_mass = np.zeros(mdp.num_states)
    state_mass[mdp.initial_state] = 1.0
    for h in range(mdp.horizon):
        occupancy[h] = state_mass[:, None] * probs[h]
        state_mass = np.einsum("xa,xay->y", occupancy[h], mdp.transitions[h])
    return occupancy


def population_covariance(mdp: SparseLinearMDP, occupancy: np.ndarray) -> np.ndarray:
    """Σ = E_ν[φφ^T] ; accepte une loi (X, A) ou une pile par horizon (H, X, A)."""
    occupancy = np.asarray(occupancy, dtype=float)
    if occupancy.ndim == 2:
        return np.einsum("xa,xai,xaj->ij", occupancy, mdp.features, mdp.features)
    return np.einsum("hxa,xai,xaj->hij", occupancy, mdp.features, mdp.features)


def projection_weights(
    mdp: SparseLinearMDP,
    h: int,
    q_next: np.ndarray,
    policy: Optional[Policy] = None,
) -> np.ndarray:
    """Projection exacte w = θ_h + Σ_x' V_{h+1}(x') μ_h(x'), de sorte que <φ, w> = B_h q_next."""
    probs = None if policy is None else policy.action_probabilities(mdp.features)
    v_next = _continuation(mdp, h, np.asarray(q_next, dtype=float), probs)
    return mdp.theta[h] + mdp.mu[h].T @ v_next


# ============================================================================
# SÉRIALISATION
# ============================================================================


def mdp_to_document(mdp: SparseLinearMDP) -> Dict[str, Any]:
    return {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "H": mdp.horizon,
        "d": mdp.dim,
        "s": mdp.sparsity,
        "support": list(mdp.support),
        "features": mdp.features.tolist(),
        "theta": mdp.theta.tolist(),
        "mu": mdp.mu.tolist(),
        "x1": mdp.initial_state,
    }


def mdp_from_document(document: Dict[str, Any]) -> SparseLinearMDP:
    try:
        mdp = SparseLinearMDP(
            features=document["features"],
            theta=document["theta"],
            mu=document["mu"],
            support=document["support"],
            initial_state=document["x1"],
        )
    except KeyError as exc:
        raise ValueError(f"Champ MDP manquant : {exc.args[0]}") from exc
    expected = (document["num_states"], document["num_actions"], document["H"], document["d"], document["s"])
    actual = (mdp.num_states, mdp.num_actions, mdp.horizon, mdp.dim, mdp.sparsity)
    if tuple(expected) != actual:
        raise ValueError(f"En-tête MDP incohérent : {expected} contre {actual}")
    return mdp


def mdp_fingerprint(mdp: SparseLinearMDP) -> str:
    return fingerprint(mdp_to_document(mdp))


def policy_to_document(policy: Policy) -> Dict[str, Any]:
    if isinstance(policy, TabularPolicy):
        return {"kind": policy.kind, "probs": policy.probs.tolist()}
    if isinstance(policy, LogLinearPolicy):
        return {"kind": policy.kind, "upsilon": policy.upsilon.tolist()}
    if isinstance(policy, GreedyFromWeights):
        return {
            "kind": policy.kind,
            "weights": policy.weights.tolist(),
            "clip_low": policy.clip_low.tolist(),
            "clip_high": policy.clip_high.tolist(),
        }
    if isinstance(policy, MixturePolicy):
        return {"kind": policy.kind, "members": [policy_to_document(member) for member in policy.policies]}
    raise ValueError(f"Politique non sérialisable : {type(policy).__name__}")


def policy_from_document(document: Dict[str, Any]) -> Policy:
    kind = document.get("kind")
    if kind == TabularPolicy.kind:
        return TabularPolicy(document["probs"])
    if kind == LogLinearPolicy.kind:
        return LogLinearPolicy(document["upsilon"])
    if kind == GreedyFromWeights.kind:
        return GreedyFromWeights(document["weights"], document["clip_low"], document["clip_high"])
    if kind == MixturePolicy.kind:
        return MixturePolicy(tuple(policy_from_document(member) for member in document["members"]))
    raise ValueError(f"Type de politique inconnu : {kind}")


def policy_fingerprint(policy: Policy) -> str:
    return fingerprint(policy_to_document(policy))


def stack_members(policies: Sequence[Policy], features: np.ndarray) -> np.ndarray:
    """Probabilités des membres markoviens empilées, tableau (M, H, X, A)."""
    return np.stack([policy.action_probabilities(features) for policy in policies])
