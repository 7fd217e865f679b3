"""
sparse-orl - Apprentissage par renforcement hors ligne robuste à la corruption
dans les MDP linéaires parcimonieux.

Oracles de régression robuste parcimonieuse (srle1, srle2, srle3), LSVI
pessimiste, acteur-critique pessimiste et banc d'essai reproductible validé
contre la programmation dynamique exacte.
"""

__version__ = "1.0.0"
__author__ = "Technologies Nexios TF Inc."
__website__ = "https://nexiostf.com"
