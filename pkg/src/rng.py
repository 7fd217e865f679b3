# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""Flux aléatoires déterministes à compteur (Philox).

Chaque consommateur de hasard (générateur de MDP, échantillonneur de
trajectoires, adversaire, démonstration Monte-Carlo) reçoit son propre flux,
dérivé de la graine maîtresse sans état partagé.

Fonction de mélange (documentée, stable entre versions) :

    mix(master_seed, label, index) =
        SeedSequence([master_seed mod 2^64,
                      w0, w1, w2, w3,          # 4 mots de 32 bits de sha256(label)
                      index mod 2^64])

La SeedSequence numpy (hachage à la PCG) diffuse ensuite cette entropie dans
la clé 128 bits du générateur Philox4x64. Deux labels différents ou deux
index différents donnent des flux indépendants ; mêmes entrées, mêmes tirages,
sur toute plateforme.
"""

import hashlib
from typing import List

import numpy as np

_MASK64 = (1 << 64) - 1


def label_words(label: str) -> List[int]:
    """Quatre mots de 32 bits tirés du sha256 du label (UTF-8)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def mix(master_seed: int, label: str, index: int = 0) -> np.random.SeedSequence:
    """Construit la SeedSequence du sous-flux `(master_seed, label, index)`."""
    entropy = [int(master_seed) & _MASK64, *label_words(label), int(index) & _MASK64]
    return np.random.SeedSequence(entropy)


def stream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Générateur Philox dédié au sous-flux demandé."""
    return np.random.Generator(np.random.Philox(mix(master_seed, label, index)))


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Graine 64 bits dérivée, pour les API qui prennent un entier."""
    return int(mix(master_seed, label, index).generate_state(1, np.uint64)[0])
