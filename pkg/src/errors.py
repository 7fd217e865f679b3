# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""Hiérarchie d'exceptions de sparse-orl.

Chaque erreur hérite aussi de l'exception standard la plus proche, de sorte
qu'un appelant qui attrape `ValueError` ou `RuntimeError` continue de
fonctionner.
"""


class SparseOrlError(Exception):
    """Racine commune des erreurs du projet."""


class ConstructionFailed(SparseOrlError, RuntimeError):
    """Le générateur de MDP n'a pas trouvé d'instance valide dans le budget de tirages."""


class BadEpsilon(SparseOrlError, ValueError):
    """Niveau de corruption hors de [0, 1/2)."""


class NonFinite(SparseOrlError, ArithmeticError):
    """Un solveur itératif a produit une valeur non finie."""


class SearchSpaceTooLarge(SparseOrlError, ValueError):
    """Énumération combinatoire au-delà du plafond autorisé."""


class NegativeQuadratic(SparseOrlError, ValueError):
    """Forme quadratique négative : la matrice fournie n'est pas semi-définie positive."""


class Infeasible(SparseOrlError, RuntimeError):
    """Aucun support ne satisfait les contraintes du critique (rayon α trop petit)."""


class ConfigError(SparseOrlError, ValueError):
    """Configuration d'expérience illisible ou invalide."""
