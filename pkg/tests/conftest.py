# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""Configuration pytest : marqueur `slow` pour les vérifications statistiques multi-graines."""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Exécute les tests lents (tendances multi-graines)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: vérification statistique multi-graines, ignorée sans --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="test lent : utiliser --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
