#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests unitaires pour les métriques de couverture, la configuration et les balayages
"""

import csv
import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import harness
from errors import ConfigError, SearchSpaceTooLarge
from experiment_config import (
    SCHEMA_VERSION,
    ExperimentConfig,
    config_schema,
    load_experiment_config,
    parse_experiment_config,
)
from harness import (
    RESULT_CSV_COLUMNS,
    THREADS_ENV,
    Cell,
    ResultRow,
    compute_kappa,
    compute_xi,
    iter_cells,
    manifest_path,
    pool_size,
    run_cell,
    run_sweep,
)
from mdp_core import MdpConfig, build_random_sparse_mdp, exact_values, occupancy_measures, uniform_policy


def tiny_config(**overrides) -> ExperimentConfig:
    document = {
        "schema": SCHEMA_VERSION,
        "mdp": {"num_states": 4, "num_actions": 2, "horizon": 2, "dim": 4, "sparsity": 1},
        "algorithm": "lsvi",
        "grid": {"sample_sizes": [40], "epsilons": [0.0, 0.1], "dims": [4], "sparsities": [1]},
        "seeds": [0],
        "iterations": 2,
    }
    document.update(overrides)
    return parse_experiment_config(document)


class TestMetrics:
    """Tests pour compute_xi et compute_kappa"""

    def test_xi_is_smallest_eigenvalue(self):
        """Test: ξ = λ_min(Σ)"""
        assert compute_xi(np.diag([3.0, 1.0, 2.0])) == pytest.approx(1.0)
        assert compute_xi(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0)

    def test_xi_requires_symmetry(self):
        """Test: Matrice non symétrique refusée"""
        with pytest.raises(ValueError):
            compute_xi(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_kappa_bounded_when_behavior_dominates(self):
        """Test: ν = d^{π*} + d^{unif} donne 0 < κ_h <= 1"""
        mdp = build_random_sparse_mdp(MdpConfig(num_states=5, num_actions=2, horizon=2, dim=4, sparsity=1), 0)
        occupancy = occupancy_measures(mdp, exact_values(mdp).policy) + occupancy_measures(mdp, uniform_policy(2, 5, 2))
        kappa = compute_kappa(mdp, occupancy, 2)
        assert kappa.per_horizon.shape == (2,)
        assert np.all(kappa.per_horizon > 0.0)
        assert np.all(kappa.per_horizon <= 1.0 + 1e-9)

    def test_kappa_scales_inversely_with_behavior_mass(self):
        """Test: Diviser l'occupation de ν par deux double κ"""
        mdp = build_random_sparse_mdp(MdpConfig(num_states=5, num_actions=2, horizon=2, dim=4, sparsity=1), 1)
        occupancy = occupancy_measures(mdp, uniform_policy(2, 5, 2))
        full = compute_kappa(mdp, occupancy, 2)
        half = compute_kappa(mdp, 0.5 * occupancy, 2)
        assert half.value == pytest.approx(2.0 * full.value, rel=1e-6)
        assert full.value == pytest.approx(full.per_horizon.max())

    def test_kappa_monotone_in_support_size(self):
        """Test: κ non décroissant en 2s"""
        mdp = build_random_sparse_mdp(MdpConfig(num_states=6, num_actions=3, horizon=2, dim=5, sparsity=1), 2)
        occupancy = occupancy_measures(mdp, uniform_policy(2, 6, 3))
        values = [compute_kappa(mdp, occupancy, two_s) for two_s in (1, 2, 3)]
        if not any(kappa.jittered for kappa in values):
            for smaller, larger in zip(values, values[1:]):
                assert np.all(larger.per_horizon >= smaller.per_horizon - 1e-9)

    def test_kappa_singular_initial_covariance(self):
        """Test: 2s > |A| : Σ_0 de rang <= |A| depuis x1, κ fini et régularisé"""
        mdp = build_random_sparse_mdp(MdpConfig(num_states=12, num_actions=3, horizon=3, dim=12, sparsity=2), 0)
        kappa = compute_kappa(mdp, uniform_policy(3, 12, 3), 4)
        assert kappa.jittered
        assert np.all(np.isfinite(kappa.per_horizon))
        assert np.all(kappa.per_horizon > 0.0)

    def test_kappa_search_space(self):
        """Test: C(d, 2s) > 10^6 refusé"""
        mdp = build_random_sparse_mdp(MdpConfig(num_states=2, num_actions=2, horizon=1, dim=40, sparsity=10), 0)
        with pytest.raises(SearchSpaceTooLarge):
            compute_kappa(mdp, uniform_policy(1, 2, 2), 20)


class TestExperimentConfig:
    """Tests pour la configuration des balayages"""

    def test_defaults_and_scalars(self):
        """Test: Scalaires promus en listes, graine unique acceptée"""
        cfg = parse_experiment_config({"schema": SCHEMA_VERSION, "grid": {"sample_sizes": 100}, "seeds": 3})
        assert cfg.grid.sample_sizes == [100]
        assert cfg.seeds == [3]
        assert cfg.oracle == "srle2"

    def test_rejects_unknown_keys(self):
        """Test: Clé inconnue refusée"""
        with pytest.raises(ConfigError):
            parse_experiment_config({"schema": SCHEMA_VERSION, "unknown": 1})

    def test_rejects_bad_schema_version(self):
        """Test: Version de schéma inconnue refusée"""
        with pytest.raises(ConfigError):
            parse_experiment_config({"schema": "sparse-orl/0"})

    @pytest.mark.parametrize(
        "grid",
        [{"epsilons": [0.5]}, {"sample_sizes": [0]}, {"dims": [4], "sparsities": [5]}],
    )
    def test_rejects_invalid_cells(self, grid):
        """Test: ε >= 1/2, N < 1 et s > d refusés"""
        with pytest.raises(ConfigError):
            parse_experiment_config({"schema": SCHEMA_VERSION, "grid": grid})

    def test_exact_tiny_requires_srle2(self):
        """Test: exact_tiny avec srle1 refusé"""
        with pytest.raises(ConfigError):
            parse_experiment_config({"schema": SCHEMA_VERSION, "oracle": "srle1", "critic": {"solver": "exact_tiny"}})

    def test_duplicate_seeds(self):
        """Test: Graines répétées refusées"""
        with pytest.raises(ConfigError):
            parse_experiment_config({"schema": SCHEMA_VERSION, "seeds": [1, 1]})

    def test_load_errors(self, tmp_path):
        """Test: Fichier absent ou JSON illisible"""
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(broken)

    def test_schema_uses_public_names(self):
        """Test: Le schéma JSON expose la clé schema"""
        assert "schema" in config_schema()["properties"]


class TestCells:
    """Tests pour l'énumération et l'exécution des cellules"""

    def test_cell_order(self):
        """Test: Ordre N, ε, d, s, graine"""
        cfg = tiny_config(seeds=[0, 1])
        cells = list(iter_cells(cfg))
        assert cells[0] == Cell(40, 0.0, 4, 1, 0)
        assert cells[1] == Cell(40, 0.0, 4, 1, 1)
        assert cells[2] == Cell(40, 0.1, 4, 1, 0)
        assert len(cells) == 4

    def test_pool_size_cap(self, monkeypatch):
        """Test: SPARSE_ORL_THREADS plafonne le pool"""
        monkeypatch.setenv(THREADS_ENV, "2")
        assert pool_size(8) == 2
        monkeypatch.setenv(THREADS_ENV, "abc")
        assert pool_size(8) == 8
        monkeypatch.delenv(THREADS_ENV)
        assert pool_size(3) == 3

    def test_negative_subopt_rejected(self):
        """Test: Sous-optimalité négative refusée"""
        with pytest.raises(ValueError):
            ResultRow("lsvi", "srle2", 10, 4, 1, 0.0, 2, 0, -0.1, 1.0, 0.1, 1.0)

    def test_cell_errors_are_recorded(self):
        """Test: Une cellule en échec renseigne la colonne error"""
        cfg = tiny_config(
            algorithm="actor_critic",
            mdp={"num_states": 4, "num_actions": 2, "horizon": 3, "dim": 12, "sparsity": 2},
            critic={"variant": "pess_opt", "solver": "exact_tiny"},
            grid={"sample_sizes": [40], "epsilons": [0.0], "dims": [12], "sparsities": [2]},
        )
        row = run_cell(cfg, Cell(40, 0.0, 12, 2, 0))
        assert row.error.startswith("SearchSpaceTooLarge")
        assert math.isnan(row.subopt)

    def test_committed_example_cell(self):
        """Test: Cellule de configs/sweep_example.json (d = 12, s = 2, |A| = 3) sans erreur"""
        path = os.path.join(os.path.dirname(__file__), "..", "configs", "sweep_example.json")
        cfg = load_experiment_config(path).model_copy(update={"iterations": 3})
        row = run_cell(cfg, Cell(250, 0.0, 12, 2, 0))
        assert row.error == ""
        assert math.isfinite(row.subopt) and row.subopt >= -1e-8
        assert math.isfinite(row.kappa) and row.kappa_jittered
        assert math.isfinite(row.xi)

    def test_metric_failure_keeps_subopt(self, monkeypatch):
        """Test: Échec du calcul de κ : la sous-optimalité reste renseignée"""
        def failing_kappa(*args, **kwargs):
            raise np.linalg.LinAlgError("faisceau non défini")

        monkeypatch.setattr(harness, "compute_kappa", failing_kappa)
        row = run_cell(tiny_config(), Cell(40, 0.0, 4, 1, 0))
        assert math.isfinite(row.subopt)
        assert math.isnan(row.kappa) and math.isnan(row.xi)
        assert row.error.startswith("LinAlgError")

    def test_negative_subopt_not_clamped(self, monkeypatch):
        """Test: Sous-optimalité transmise telle quelle ; une valeur < -1e-8 déclenche l'invariant"""
        monkeypatch.setattr(harness, "suboptimality", lambda mdp, policy: -1e-10)
        assert run_cell(tiny_config(), Cell(40, 0.0, 4, 1, 0)).subopt == -1e-10
        monkeypatch.setattr(harness, "suboptimality", lambda mdp, policy: -0.5)
        with pytest.raises(ValueError):
            run_cell(tiny_config(), Cell(40, 0.0, 4, 1, 0))

    def test_paired_cells_share_mdp(self):
        """Test: Cellules ne différant que par ε : même MDP, même ν"""
        cfg = tiny_config()
        clean = run_cell(cfg, Cell(40, 0.0, 4, 1, 0))
        dirty = run_cell(cfg, Cell(40, 0.1, 4, 1, 0))
        assert clean.xi == dirty.xi and clean.kappa == dirty.kappa
        assert clean.error == "" and dirty.error == ""


class TestSweep:
    """Tests pour run_sweep"""

    def test_csv_and_manifest(self, tmp_path):
        """Test: Une ligne par cellule, colonnes fixes, manifeste JSON"""
        output = tmp_path / "results.csv"
        rows = run_sweep(tiny_config(), output)
        with open(output, encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            assert reader.fieldnames == RESULT_CSV_COLUMNS
            lines = list(reader)
        assert len(lines) == len(rows) == 2
        assert [float(line["epsilon"]) for line in lines] == [0.0, 0.1]
        assert all(float(line["subopt"]) >= 0.0 for line in lines)
        manifest = json.loads(manifest_path(output).read_text(encoding="utf-8"))
        assert manifest["cells"] == 2
        assert manifest["config"]["schema"] == SCHEMA_VERSION

    def test_deterministic_except_wall_time(self, tmp_path):
        """Test: Deux balayages identiques aux temps près"""
        cfg = tiny_config(algorithm="actor_critic")
        first = run_sweep(cfg, tmp_path / "a.csv")
        second = run_sweep(cfg, tmp_path / "b.csv")
        strip = lambda row: {k: v for k, v in row.to_csv_dict().items() if k != "wall_ms"}
        assert [strip(row) for row in first] == [strip(row) for row in second]

    def test_parallel_matches_sequential(self, tmp_path):
        """Test: L'ordre des lignes ne dépend pas du parallélisme"""
        sequential = run_sweep(tiny_config(), tmp_path / "seq.csv")
        parallel = run_sweep(tiny_config(n_jobs=2), tmp_path / "par.csv")
        assert [row.subopt for row in sequential] == [row.subopt for row in parallel]
        assert [row.epsilon for row in parallel] == [0.0, 0.1]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
