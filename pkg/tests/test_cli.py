#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests de l'interface en ligne de commande (chaîne complète sur fichiers)
"""

import csv
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from experiment_config import SCHEMA_VERSION
from sparse_orl_cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, cli


@pytest.fixture
def artifacts(tmp_path):
    """MDP et jeu de données minimaux écrits sur disque."""
    mdp = str(tmp_path / "mdp.json")
    data = str(tmp_path / "data.jsonl")
    assert cli(["gen-mdp", "--states", "4", "--actions", "2", "--horizon", "2", "--dim", "4",
                "--sparsity", "1", "--seed", "1", "--out", mdp]) == EXIT_OK
    assert cli(["gen-data", "--mdp", mdp, "--n", "30", "--seed", "2", "--out", data]) == EXIT_OK
    return tmp_path, mdp, data


class TestPipeline:
    """Tests de la chaîne gen-mdp → gen-data → corrupt → run → eval"""

    def test_lsvi_pipeline(self, artifacts, capsys):
        """Test: Politique LSVI évaluée, diagnostic de Bellman écrit"""
        tmp_path, mdp, data = artifacts
        corrupted = str(tmp_path / "bad.jsonl")
        policy = str(tmp_path / "policy.json")
        bellman = str(tmp_path / "bellman.csv")
        assert cli(["corrupt", "--mdp", mdp, "--data", data, "--epsilon", "0.1", "--seed", "3",
                    "--out", corrupted]) == EXIT_OK
        assert cli(["run-lsvi", "--mdp", mdp, "--data", corrupted, "--out", policy,
                    "--diagnostics", bellman]) == EXIT_OK
        with open(bellman, encoding="utf-8") as handle:
            assert len(list(csv.DictReader(handle))) == 2 * 4 * 2
        capsys.readouterr()
        assert cli(["eval", "--mdp", mdp, "--policy", policy]) == EXIT_OK
        result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert result["subopt"] >= -1e-12

    def test_actor_critic_pipeline(self, artifacts, capsys):
        """Test: Mélange acteur-critique et trace CSV"""
        tmp_path, mdp, data = artifacts
        policy = str(tmp_path / "mixture.json")
        trace = str(tmp_path / "trace.csv")
        assert cli(["run-ac", "--mdp", mdp, "--data", data, "--seed", "3", "--iterations", "2",
                    "--critic", "pess_opt", "--out", policy, "--trace", trace]) == EXIT_OK
        with open(trace, encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert [row["t"] for row in rows] == ["1", "2"]
        capsys.readouterr()
        assert cli(["eval", "--mdp", mdp, "--policy", policy]) == EXIT_OK
        assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["subopt"] >= -1e-12

    def test_sweep(self, tmp_path):
        """Test: Balayage depuis un fichier de configuration"""
        config = tmp_path / "sweep.json"
        config.write_text(json.dumps({
            "schema": SCHEMA_VERSION,
            "mdp": {"num_states": 4, "num_actions": 2, "horizon": 2, "dim": 4, "sparsity": 1},
            "algorithm": "lsvi",
            "grid": {"sample_sizes": [30], "epsilons": [0.0], "dims": [4], "sparsities": [1]},
            "seeds": [0, 1],
        }), encoding="utf-8")
        output = tmp_path / "results.csv"
        assert cli(["sweep", "--config", str(config), "--out", str(output)]) == EXIT_OK
        with open(output, encoding="utf-8") as handle:
            assert len(list(csv.DictReader(handle))) == 2

    def test_demo_lemma(self, capsys):
        """Test: Sortie JSON de la démonstration max / espérance"""
        assert cli(["demo-lemma", "--d", "40", "--s", "2", "--samples", "2000", "--seed", "0"]) == EXIT_OK
        result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert set(result) == {"lhs", "rhs", "bound", "gap", "stderr"}
        assert result["rhs"] == pytest.approx(2.0)


class TestExitCodes:
    """Tests des codes de sortie"""

    def test_help(self):
        """Test: --help renvoie 0"""
        assert cli(["--help"]) == EXIT_OK

    def test_usage_error(self, capsys):
        """Test: Argument obligatoire manquant : code 2 et schéma affiché"""
        assert cli(["gen-mdp", "--seed", "1"]) == EXIT_CONFIG
        assert '"schema"' in capsys.readouterr().err

    def test_invalid_mdp_parameters(self, tmp_path):
        """Test: s > d refusé avec le code 2"""
        out = str(tmp_path / "mdp.json")
        assert cli(["gen-mdp", "--dim", "2", "--sparsity", "3", "--seed", "1", "--out", out]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        """Test: Fichier absent : code 2"""
        assert cli(["eval", "--mdp", str(tmp_path / "absent.json"), "--policy", "x.json"]) == EXIT_CONFIG

    def test_invalid_sweep_config(self, tmp_path):
        """Test: Configuration invalide : code 2"""
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"schema": SCHEMA_VERSION, "grid": {"epsilons": [0.7]}}), encoding="utf-8")
        assert cli(["sweep", "--config", str(config)]) == EXIT_CONFIG

    def test_out_of_range_epsilon(self, artifacts, capsys):
        """Test: --epsilon hors de [0, 1/2) : code 2"""
        tmp_path, mdp, data = artifacts
        out = str(tmp_path / "bad.jsonl")
        assert cli(["corrupt", "--mdp", mdp, "--data", data, "--epsilon", "0.7", "--seed", "1",
                    "--out", out]) == EXIT_CONFIG
        assert "--epsilon" in capsys.readouterr().err
        assert not os.path.exists(out)

    def test_epsilon_below_existing_corruption(self, artifacts):
        """Test: ε inférieur à la corruption déjà présente : code 2"""
        tmp_path, mdp, data = artifacts
        heavy = str(tmp_path / "heavy.jsonl")
        assert cli(["corrupt", "--mdp", mdp, "--data", data, "--epsilon", "0.3", "--seed", "1",
                    "--out", heavy]) == EXIT_OK
        assert cli(["corrupt", "--mdp", mdp, "--data", heavy, "--epsilon", "0.1", "--seed", "2",
                    "--out", str(tmp_path / "light.jsonl")]) == EXIT_CONFIG

    def test_empty_sample_size(self, artifacts):
        """Test: gen-data --n 0 : code 2"""
        tmp_path, mdp, _ = artifacts
        assert cli(["gen-data", "--mdp", mdp, "--n", "0", "--seed", "2",
                    "--out", str(tmp_path / "empty.jsonl")]) == EXIT_CONFIG

    def test_runtime_error(self, artifacts):
        """Test: Jeu de données sans trajectoire à l'exécution : code 3"""
        tmp_path, mdp, data = artifacts
        truncated = tmp_path / "truncated.jsonl"
        with open(data, encoding="utf-8") as handle:
            truncated.write_text(handle.readline(), encoding="utf-8")
        assert cli(["run-lsvi", "--mdp", mdp, "--data", str(truncated),
                    "--out", str(tmp_path / "policy.json")]) == EXIT_RUNTIME


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
