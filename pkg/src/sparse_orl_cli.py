#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""
sparse_orl_cli.py - Interface en ligne de commande

Sous-commandes : gen-mdp, gen-data, corrupt, run-lsvi, run-ac, eval, sweep,
demo-lemma. Les artefacts sont des fichiers UTF-8 : MDP et politiques en
JSON canonique, jeux de données en JSON Lines, résultats en CSV.

Codes de sortie : 0 succès, 2 erreur de configuration ou d'usage (schéma
JSON affiché), 3 erreur d'exécution.

Usage:
    python3 src/sparse_orl_cli.py gen-mdp --dim 12 --sparsity 2 --seed 1 --out mdp.json
    python3 src/sparse_orl_cli.py gen-data --mdp mdp.json --n 500 --seed 2 --out data.jsonl
    python3 src/sparse_orl_cli.py run-ac --mdp mdp.json --data data.jsonl --seed 3 --out policy.json
    python3 src/sparse_orl_cli.py eval --mdp mdp.json --policy policy.json
"""

import argparse
import json
import logging
import os
import sys
from typing import Callable, List, NoReturn, Optional

from pydantic import ValidationError

from actor_critic import CriticSpec, run_actor_critic, write_trace_csv
from codec import read_json, write_json
from datagen import AttackSpec, BehaviorSpec, behavior_policy, corrupt_dataset, generate_dataset, load_dataset, save_dataset
from errors import BadEpsilon, ConfigError
from experiment_config import config_schema, load_experiment_config
from harness import run_sweep
from lsvi import calibrated_bonus, demo_max_expectation_gap, run_lsvi, write_bellman_csv
from mdp_core import (
    MdpConfig,
    SparseLinearMDP,
    build_random_sparse_mdp,
    mdp_fingerprint,
    mdp_from_document,
    mdp_to_document,
    policy_fingerprint,
    policy_from_document,
    policy_to_document,
    suboptimality,
)
from srle import ORACLES, Srle2Options, alpha_schedule, default_ridge

logger = logging.getLogger("sparse_orl.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
LOG_LEVEL_ENV = "SPARSE_ORL_LOG_LEVEL"

# ============================================================================
# LOGGING
# ============================================================================


def configure_logging() -> None:
    level = os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )


# ============================================================================
# PARSEUR
# ============================================================================


class _Parser(argparse.ArgumentParser):
    """Les erreurs d'usage deviennent des ConfigError au lieu d'un sys.exit."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog} : {message}")


def _load_mdp(path: str) -> SparseLinearMDP:
    return mdp_from_document(read_json(path))


def _oracle_options(oracle: str, search: str) -> Optional[Srle2Options]:
    return Srle2Options(support_search=search) if oracle == "srle2" else None


def _cmd_gen_mdp(args: argparse.Namespace) -> int:
    try:
        cfg = MdpConfig(
            num_states=args.states,
            num_actions=args.actions,
            horizon=args.horizon,
            dim=args.dim,
            sparsity=args.sparsity,
            feature_family=args.family,
            coverage_mode=args.coverage,
        )
    except ValidationError as exc:
        raise ConfigError(f"Paramètres de MDP invalides :\n{exc}") from exc
    mdp = build_random_sparse_mdp(cfg, args.seed)
    write_json(args.out, mdp_to_document(mdp))
    print(f"MDP {mdp_fingerprint(mdp)} écrit dans {args.out}")
    return EXIT_OK


def _cmd_gen_data(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ConfigError(f"--n doit être >= 1, reçu {args.n}")
    mdp = _load_mdp(args.mdp)
    try:
        spec = BehaviorSpec(kind=args.behavior, optimal_weight=args.optimal_weight)
    except ValidationError as exc:
        raise ConfigError(f"Politique de comportement invalide :\n{exc}") from exc
    ds = generate_dataset(mdp, behavior_policy(mdp, spec), args.n, args.seed)
    save_dataset(args.out, ds)
    print(f"{ds.num_trajectories} trajectoires écrites dans {args.out}")
    return EXIT_OK


def _cmd_corrupt(args: argparse.Namespace) -> int:
    if not 0.0 <= args.epsilon < 0.5:
        raise ConfigError(f"--epsilon doit appartenir à [0, 1/2), reçu {args.epsilon}")
    mdp = _load_mdp(args.mdp)
    try:
        attack = AttackSpec(kind=args.kind, magnitude=args.magnitude, target_selection=args.selection)
    except ValidationError as exc:
        raise ConfigError(f"Adversaire invalide :\n{exc}") from exc
    ds = corrupt_dataset(load_dataset(args.data, mdp), attack, args.epsilon, args.seed)
    save_dataset(args.out, ds)
    print(f"{int(ds.corrupted.sum())} trajectoires corrompues, écrites dans {args.out}")
    return EXIT_OK


def _cmd_run_lsvi(args: argparse.Namespace) -> int:
    mdp = _load_mdp(args.mdp)
    ds = load_dataset(args.data, mdp)
    sparsity = args.sparsity or mdp.sparsity
    n, dim = ds.num_trajectories, mdp.dim
    ridge = args.ridge if args.ridge is not None else default_ridge(sparsity, n, dim, args.delta)
    bonus = calibrated_bonus(args.bonus, ds.horizon, n, dim, sparsity, args.delta, ridge, ds.epsilon, args.alpha_constant)
    out = run_lsvi(
        ds, args.oracle, bonus, ridge, args.delta,
        sparsity=sparsity,
        oracle_options=_oracle_options(args.oracle, args.support_search),
        mdp_true=mdp if args.diagnostics else None,
    )
    write_json(args.out, policy_to_document(out.policy))
    if args.diagnostics:
        write_bellman_csv(out.diagnostics, args.diagnostics)
    print(f"Politique {policy_fingerprint(out.policy)} écrite dans {args.out}")
    return EXIT_OK


def _cmd_run_ac(args: argparse.Namespace) -> int:
    mdp = _load_mdp(args.mdp)
    ds = load_dataset(args.data, mdp)
    sparsity = args.sparsity or mdp.sparsity
    n, dim = ds.num_trajectories, mdp.dim
    ridge = args.ridge if args.ridge is not None else default_ridge(sparsity, n, dim, args.delta)
    alpha = alpha_schedule(args.oracle, ds.horizon, n, dim, sparsity, args.delta, ridge, ds.epsilon, args.alpha_constant)
    spec = CriticSpec(
        variant=args.critic,
        oracle=args.oracle,
        alpha=tuple(alpha),
        ridge=ridge,
        solver=args.solver,
        max_iters=args.max_iters,
        sparsity=sparsity,
        delta=args.delta,
        oracle_options=_oracle_options(args.oracle, args.support_search),
    )
    result = run_actor_critic(ds, spec, args.iterations, args.eta, args.seed, mdp_true=mdp)
    write_json(args.out, policy_to_document(result.mixture))
    if args.trace:
        write_trace_csv(result.trace, args.trace)
    print(f"Mélange de {len(result.mixture.policies)} politiques écrit dans {args.out} (η={result.eta:.4g})")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    mdp = _load_mdp(args.mdp)
    policy = policy_from_document(read_json(args.policy))
    print(json.dumps({"subopt": suboptimality(mdp, policy)}))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    rows = run_sweep(cfg, args.out)
    failures = sum(1 for row in rows if row.error)
    print(f"{len(rows)} lignes écrites dans {args.out or cfg.output} ({failures} en erreur)")
    return EXIT_OK


def _cmd_demo_lemma(args: argparse.Namespace) -> int:
    estimate = demo_max_expectation_gap(args.d, args.s, args.lam, args.samples, args.seed)
    print(json.dumps({"lhs": estimate.lhs, "rhs": estimate.rhs, "bound": estimate.bound,
                      "gap": estimate.gap, "stderr": estimate.stderr}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-orl", description="RL hors ligne robuste dans les MDP linéaires parcimonieux")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-mdp", help="Génère un MDP linéaire parcimonieux aléatoire")
    p.add_argument("--states", type=int, default=12)
    p.add_argument("--actions", type=int, default=3)
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--dim", type=int, default=12)
    p.add_argument("--sparsity", type=int, default=2)
    p.add_argument("--family", choices=["signed_binary", "anchored_simplex"], default="anchored_simplex")
    p.add_argument("--coverage", choices=["uniform", "narrow"], default="uniform")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen_mdp)

    p = sub.add_parser("gen-data", help="Échantillonne un jeu de trajectoires")
    p.add_argument("--mdp", required=True)
    p.add_argument("--behavior", choices=["uniform", "optimal_mix"], default="uniform")
    p.add_argument("--optimal-weight", type=float, default=0.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen_data)

    p = sub.add_parser("corrupt", help="Applique un adversaire à ⌈εN⌉ trajectoires")
    p.add_argument("--mdp", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["reward_poison", "feature_swap", "value_flip"], default="reward_poison")
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--selection", choices=["random", "high_reward_first"], default="random")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_corrupt)

    for name, handler in (("run-lsvi", _cmd_run_lsvi), ("run-ac", _cmd_run_ac)):
        p = sub.add_parser(name, help="LSVI robuste" if name == "run-lsvi" else "Acteur-critique robuste")
        p.add_argument("--mdp", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--oracle", choices=sorted(ORACLES), default="srle2")
        p.add_argument("--support-search", choices=["exhaustive", "iht"], default="exhaustive")
        p.add_argument("--alpha-constant", type=float, default=1.0)
        p.add_argument("--ridge", type=float, default=None)
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--sparsity", type=int, default=None)
        p.add_argument("--out", required=True)
        p.set_defaults(handler=handler)
        if name == "run-lsvi":
            p.add_argument("--bonus", choices=["zero", "sparse_max", "dense"], default="sparse_max")
            p.add_argument("--diagnostics", default=None, help="CSV h,x,a,bellman_err,bonus")
        else:
            p.add_argument("--critic", choices=["uniform_coverage", "pess_opt"], default="uniform_coverage")
            p.add_argument("--solver", choices=["exact_tiny", "alternating"], default="alternating")
            p.add_argument("--max-iters", type=int, default=10)
            p.add_argument("--iterations", type=int, default=30)
            p.add_argument("--eta", type=float, default=None)
            p.add_argument("--seed", type=int, required=True)
            p.add_argument("--trace", default=None)

    p = sub.add_parser("eval", help="Sous-optimalité exacte d'une politique")
    p.add_argument("--mdp", required=True)
    p.add_argument("--policy", required=True)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("sweep", help="Balayage d'expériences depuis une configuration JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("demo-lemma", help="Écart entre max et espérance sur supports parcimonieux")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(handler=_cmd_demo_lemma)
    return parser


# ============================================================================
# POINT D'ENTRÉE
# ============================================================================


def cli(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        handler: Callable[[argparse.Namespace], int] = args.handler
        return handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, BadEpsilon) as exc:
        print(f"Erreur de configuration : {exc}", file=sys.stderr)
        print(json.dumps(config_schema(), indent=2, ensure_ascii=False), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"Fichier introuvable : {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logger.exception("Échec de la commande")
        print(f"Erreur d'exécution : {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(cli())
