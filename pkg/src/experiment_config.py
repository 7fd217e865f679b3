#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
experiment_config.py - Configuration des expériences (JSON versionné)

Le fichier de configuration porte une clé de version "schema": "sparse-orl/1".
Les grilles acceptent un scalaire ou une liste ; chaque cellule (N, ε, d, s)
est croisée avec toutes les graines.

Usage:
    cfg = load_experiment_config("configs/sweep_example.json")
    print(cfg.grid.sample_sizes, cfg.seeds)
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from datagen import AttackSpec, BehaviorSpec
from errors import ConfigError
from mdp_core import MdpConfig

logger = logging.getLogger("sparse_orl.experiment_config")

SCHEMA_VERSION = "sparse-orl/1"
GRID_FIELDS = ("sample_sizes", "epsilons", "dims", "sparsities")

# ============================================================================
# SOUS-SECTIONS
# ============================================================================


class BonusConfig(BaseModel):
    """Bonus de LSVI ; α_h calibré puis multiplié par alpha_constant."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["zero", "sparse_max", "dense"] = "sparse_max"
    alpha_constant: float = Field(1.0, ge=0.0)


class CriticConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: Literal["uniform_coverage", "pess_opt"] = "uniform_coverage"
    solver: Literal["exact_tiny", "alternating"] = "alternating"
    max_iters: int = Field(10, ge=1)
    alpha_constant: float = Field(1.0, ge=0.0)


class GridConfig(BaseModel):
    """Grilles balayées ; d et s remplacent ceux de la section mdp pour chaque cellule."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_sizes: List[int] = Field(default_factory=lambda: [500], min_length=1)
    epsilons: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    dims: List[int] = Field(default_factory=lambda: [12], min_length=1)
    sparsities: List[int] = Field(default_factory=lambda: [2], min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _scalars_to_lists(cls, data: Any) -> Any:
        if isinstance(data, dict):
            return {key: [value] if key in GRID_FIELDS and not isinstance(value, list) else value for key, value in data.items()}
        return data

    @model_validator(mode="after")
    def _check_values(self) -> "GridConfig":
        if any(n < 1 for n in self.sample_sizes):
            raise ValueError("Chaque N de la grille doit être >= 1")
        if any(not 0.0 <= eps < 0.5 for eps in self.epsilons):
            raise ValueError("Chaque ε de la grille doit appartenir à [0, 1/2)")
        if any(s < 1 for s in self.sparsities) or any(d < 1 for d in self.dims):
            raise ValueError("d et s doivent être >= 1")
        if max(self.sparsities) > min(self.dims):
            raise ValueError(
                f"Cellule invalide : s={max(self.sparsities)} supérieur à d={min(self.dims)}"
            )
        return self


# ============================================================================
# CONFIGURATION D'EXPÉRIENCE
# ============================================================================


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    schema_version: Literal["sparse-orl/1"] = Field(SCHEMA_VERSION, alias="schema")
    mdp: MdpConfig = Field(default_factory=MdpConfig)
    behavior: BehaviorSpec = Field(default_factory=BehaviorSpec)
    algorithm: Literal["lsvi", "actor_critic"] = "actor_critic"
    oracle: Literal["srle1", "srle2", "srle3", "ols"] = "srle2"
    support_search: Literal["exhaustive", "iht"] = "exhaustive"
    bonus: BonusConfig = Field(default_factory=BonusConfig)
    critic: CriticConfig = Field(default_factory=CriticConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    attack: AttackSpec = Field(default_factory=AttackSpec)
    output: str = "results.csv"
    # None : λ calibré C (s/N) log(d/(sδ))
    ridge: Optional[float] = Field(None, ge=0.0)
    ridge_constant: float = Field(1.0, ge=0.0)
    delta: float = Field(0.1, gt=0.0, lt=1.0)
    iterations: int = Field(30, ge=1)
    eta: Optional[float] = Field(None, ge=0.0)
    n_jobs: int = Field(1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _accept_scalar_seeds(cls, data: Any) -> Any:
        if isinstance(data, dict) and "seeds" in data and not isinstance(data["seeds"], list):
            return {**data, "seeds": [data["seeds"]]}
        return data

    @model_validator(mode="after")
    def _check_cells(self) -> "ExperimentConfig":
        if self.critic.solver == "exact_tiny" and self.oracle != "srle2":
            raise ValueError("Le solveur exact_tiny n'est défini que pour l'oracle srle2")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("Les graines doivent être distinctes")
        return self


def config_schema() -> Dict[str, Any]:
    """Schéma JSON d'ExperimentConfig (noms publics, clé "schema" incluse)."""
    return ExperimentConfig.model_json_schema(by_alias=True)


def parse_experiment_config(document: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(f"Configuration invalide :\n{exc}") from exc


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Raises:
        ConfigError: fichier absent, JSON illisible ou contenu invalide
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"Fichier de configuration introuvable : {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON invalide dans {path} : {exc}") from exc
    cfg = parse_experiment_config(document)
    logger.info("Configuration chargée depuis %s (%d graines)", path, len(cfg.seeds))
    return cfg
