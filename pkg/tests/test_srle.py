#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests unitaires pour les estimateurs de régression linéaire robustes parcimonieux
"""

import itertools
import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from errors import BadEpsilon, NegativeQuadratic, SearchSpaceTooLarge
from srle import (
    RegressionProblem,
    Srle2Options,
    alpha_schedule,
    default_ridge,
    fit_support,
    mirror_exponent,
    ols,
    project_l1_ball,
    run_oracle,
    scale_to_l1_ball,
    sigma_norm_error,
    srle1,
    srle2,
    srle2_exact_tiny,
    srle3,
    tolerant_ceil,
    trim_fraction,
)


def factorial_design(dim: int, copies: int = 2) -> np.ndarray:
    """Plan factoriel complet ±1 : Z^T Z / N = I et résidus symétriques."""
    return np.tile(np.array(list(itertools.product([-1.0, 1.0], repeat=dim))), (copies, 1))


def plackett_burman_12() -> np.ndarray:
    """Plan de Plackett-Burman à 12 essais : colonnes ±1 deux à deux orthogonales."""
    generator = np.array([1, 1, -1, 1, 1, 1, -1, -1, -1, 1, -1], dtype=float)
    rows = [np.roll(generator, shift) for shift in range(11)]
    rows.append(-np.ones(11))
    return np.array(rows)


class TestHelpers:
    """Tests pour les outils communs"""

    def test_tolerant_ceil(self):
        """Test: Plafond insensible aux erreurs d'arrondi flottant"""
        assert tolerant_ceil((5.0 / 6.0) * 12) == 10
        assert tolerant_ceil(0.1 * 30) == 3
        assert tolerant_ceil(2.2) == 3
        assert tolerant_ceil(0.0) == 0

    def test_project_l1_ball(self):
        """Test: Projection euclidienne sur la boule ℓ1"""
        assert np.allclose(project_l1_ball(np.array([3.0, 1.0]), 2.0), [2.0, 0.0])
        assert np.allclose(project_l1_ball(np.array([1.0, -1.0]), 1.0), [0.5, -0.5])
        inside = np.array([0.2, -0.3])
        assert np.array_equal(project_l1_ball(inside, 1.0), inside)

    def test_scale_to_l1_ball(self):
        """Test: Mise à l'échelle proportionnelle et drapeau"""
        w, scaled = scale_to_l1_ball(np.array([4.0, 0.0, 0.0]), 2.0)
        assert scaled and np.allclose(w, [2.0, 0.0, 0.0])
        w, scaled = scale_to_l1_ball(np.array([0.5, 0.5]), 2.0)
        assert not scaled and np.allclose(w, [0.5, 0.5])

    def test_trim_fraction_capped(self):
        """Test: Fraction rognée plafonnée à 0.49"""
        assert trim_fraction(0.45, 10, 10, 0.1) == 0.49
        expected = 0.1 + math.sqrt(math.log(2 * 10 / 0.1) / 1000)
        assert trim_fraction(0.1, 10, 1000, 0.1) == pytest.approx(expected)

    def test_mirror_exponent(self):
        """Test: p = 1 + 1/ln d, et 2 en dimension 1"""
        assert mirror_exponent(1) == 2.0
        assert mirror_exponent(100) == pytest.approx(1.0 + 1.0 / math.log(100))

    def test_problem_validation(self):
        """Test: Préconditions du problème de régression"""
        z = np.zeros((4, 2))
        with pytest.raises(BadEpsilon):
            RegressionProblem(z, np.zeros(4), 1, 1.0, epsilon=0.5)
        with pytest.raises(ValueError):
            RegressionProblem(np.full((4, 2), 1.5), np.zeros(4), 1, 1.0)
        with pytest.raises(ValueError):
            RegressionProblem(z, np.zeros(3), 1, 1.0)

    def test_keep_count(self):
        """Test: |C| = ⌈(1-ε)N⌉"""
        problem = RegressionProblem(np.zeros((12, 2)), np.zeros(12), 1, 1.0, epsilon=1.0 / 6.0)
        assert problem.keep == 10

    def test_sigma_norm_error(self):
        """Test: ‖ŵ - w‖_Σ et forme quadratique négative"""
        assert sigma_norm_error(np.array([1.0, 0.0]), np.zeros(2), np.diag([4.0, 1.0])) == pytest.approx(2.0)
        with pytest.raises(NegativeQuadratic):
            sigma_norm_error(np.ones(2), np.zeros(2), -np.eye(2))

    def test_unknown_oracle(self):
        """Test: Oracle inconnu refusé"""
        problem = RegressionProblem(np.zeros((2, 2)), np.zeros(2), 1, 1.0)
        with pytest.raises(ValueError):
            run_oracle("lasso", problem)


class TestSrle1:
    """Tests pour srle1"""

    def test_exact_on_factorial_design(self):
        """Test: Plan factoriel sans bruit : retrouve w* exactement"""
        z = factorial_design(5)
        w_star = np.array([0.5, -0.3, 0.0, 0.0, 0.0])
        report = srle1(RegressionProblem(z, z @ w_star, sparsity=2, l1_budget=1.0))
        assert np.abs(report.w_hat - w_star).max() <= 1e-9
        assert report.converged
        assert report.oracle == "srle1"

    def test_stays_in_l1_ball(self):
        """Test: L'itéré reste dans la boule ℓ1"""
        z = factorial_design(4)
        report = srle1(RegressionProblem(z, 5.0 * z[:, 0], sparsity=1, l1_budget=1.0))
        assert np.abs(report.w_hat).sum() <= 1.0 + 1e-12

    def test_poisoned_rows_close_to_clean_fit(self):
        """Test: 5 lignes sur 50 empoisonnées à 10^3 : erreur ℓ1 <= 5 × celle des MCO sur lignes propres"""
        robust, reference = [], []
        for seed in range(10):
            gen = np.random.default_rng(seed)
            z = gen.choice([-1.0, 1.0], size=(50, 5))
            w_star = np.array([0.6, -0.3, 0.0, 0.0, 0.0])
            y = z @ w_star + gen.normal(0.0, 0.1, size=50)
            y[:5] = 1e3
            report = srle1(RegressionProblem(z, y, sparsity=2, l1_budget=1.0, sigma=0.1, epsilon=0.1))
            clean_fit = np.linalg.lstsq(z[5:], y[5:], rcond=None)[0]
            robust.append(np.abs(report.w_hat - w_star).sum())
            reference.append(np.abs(clean_fit - w_star).sum())
        assert np.median(robust) <= 5.0 * np.median(reference)


class TestSrle2:
    """Tests pour srle2 et srle2_exact_tiny"""

    def test_noiseless_support_recovery(self):
        """Test: Sans bruit ni corruption, λ = 0, d <= 8 : support et coefficients exacts sur 50 graines"""
        for seed in range(50):
            gen = np.random.default_rng(seed)
            dim = 4 + seed % 5
            z = gen.uniform(-1.0, 1.0, size=(30, dim))
            j = int(gen.integers(dim))
            report = srle2(RegressionProblem(z, 0.7 * z[:, j], sparsity=1, l1_budget=1.0, ridge=0.0))
            assert report.support == (j,)
            assert abs(report.w_hat[j] - 0.7) <= 1e-9

    def test_outliers_match_enumerated_optimum(self):
        """Test: Deux valeurs aberrantes sur 12 : même solution que l'énumération exacte"""
        z = plackett_burman_12()[:, :4]
        y = 2.0 * z[:, 3]
        y[[1, 7]] = 1e6
        problem = RegressionProblem(z, y, sparsity=1, l1_budget=4.0, epsilon=1.0 / 6.0, ridge=0.01)
        fast = srle2(problem)
        exact = srle2_exact_tiny(problem)
        assert fast.support == exact.support == (3,)
        assert np.abs(fast.w_hat - exact.w_hat).max() <= 1e-9
        assert fast.objective == pytest.approx(exact.objective, abs=1e-12)
        assert 1 not in fast.trimmed_set and 7 not in fast.trimmed_set

    def test_untrimmed_least_squares_is_worse(self):
        """Test: Les moindres carrés non rognés sont déviés par les valeurs aberrantes"""
        z = plackett_burman_12()[:, :4]
        y = 2.0 * z[:, 3]
        y[[1, 7]] = 1e6
        problem = RegressionProblem(z, y, sparsity=1, l1_budget=4.0, epsilon=1.0 / 6.0, ridge=0.01)
        w_star = np.array([0.0, 0.0, 0.0, 2.0])
        robust = sigma_norm_error(srle2(problem).w_hat, w_star, np.eye(4))
        naive = sigma_norm_error(ols(problem).w_hat, w_star, np.eye(4))
        assert naive > 5.0 * robust

    def test_alternation_trace_non_increasing(self):
        """Test: L'objectif de l'alternance ne croît pas"""
        gen = np.random.default_rng(4)
        z = gen.uniform(-1.0, 1.0, size=(40, 3))
        y = z[:, 0] + 0.1 * gen.normal(size=40)
        y[:5] = 50.0
        problem = RegressionProblem(z, y, sparsity=2, l1_budget=3.0, epsilon=0.15, ridge=0.01)
        fit = fit_support(problem, (0, 1), max_alt_iters=50)
        assert all(b <= a + 1e-12 for a, b in zip(fit.trace, fit.trace[1:]))

    def test_l1_scaling_flag(self):
        """Test: Contrainte ℓ1 active : estimateur mis à l'échelle"""
        z = factorial_design(3)
        report = srle2(RegressionProblem(z, 0.9 * z[:, 0], sparsity=1, l1_budget=0.5))
        assert report.scaled
        assert np.abs(report.w_hat).sum() == pytest.approx(0.5)

    def test_iht_support_search(self):
        """Test: Recherche de support par seuillage dur"""
        z = factorial_design(5)
        report = srle2(RegressionProblem(z, 0.8 * z[:, 2], sparsity=1, l1_budget=1.0), Srle2Options(support_search="iht"))
        assert report.support == (2,)

    def test_search_space_too_large(self):
        """Test: Plus de 10^6 supports refusés"""
        problem = RegressionProblem(np.zeros((2, 40)), np.zeros(2), sparsity=10, l1_budget=1.0)
        with pytest.raises(SearchSpaceTooLarge):
            srle2(problem)

    def test_exact_tiny_limited_to_small_samples(self):
        """Test: Énumération exacte réservée à N <= 12"""
        problem = RegressionProblem(np.zeros((13, 2)), np.zeros(13), sparsity=1, l1_budget=1.0)
        with pytest.raises(SearchSpaceTooLarge):
            srle2_exact_tiny(problem)

    def test_report_document_is_json(self):
        """Test: Vidage JSON du rapport"""
        z = factorial_design(3)
        document = srle2(RegressionProblem(z, 0.5 * z[:, 1], sparsity=1, l1_budget=1.0)).to_document()
        assert json.loads(json.dumps(document))["support"] == [1]


class TestSrle3:
    """Tests pour srle3"""

    def test_noiseless_factorial_design(self):
        """Test: Descente miroir sans bruit proche de w*"""
        z = factorial_design(5)
        w_star = np.array([0.0, 0.4, 0.0, -0.2, 0.0])
        report = srle3(RegressionProblem(z, z @ w_star, sparsity=2, l1_budget=1.0))
        assert np.abs(report.w_hat - w_star).sum() <= 1e-3
        assert np.abs(report.w_hat).sum() <= 1.0 + 1e-9

    def test_zero_targets_give_zero(self):
        """Test: y ≡ 0 donne ŵ = 0"""
        z = factorial_design(4)
        report = srle3(RegressionProblem(z, np.zeros(z.shape[0]), sparsity=2, l1_budget=1.0))
        assert np.array_equal(report.w_hat, np.zeros(4))
        assert report.objective == 0.0

    def test_rank_one_design_matches_grid_search(self):
        """Test: Z de rang 1 : résidu retenu <= meilleur prédicteur ℓ1-admissible sur une grille de 10^4 points"""
        gen = np.random.default_rng(4)
        v = np.array([1.0, -0.5, 0.25, 0.0])
        t = gen.uniform(-1.0, 1.0, size=60)
        z = np.outer(t, v)
        problem = RegressionProblem(z, 0.3 * t, sparsity=2, l1_budget=1.0)
        report = srle3(problem)
        # <z, w> = t <v, w> et |<v, w>| <= ‖v‖_∞ B
        scales = np.linspace(-1.0, 1.0, 10_000)
        residual_sq = np.sort((problem.y[None, :] - scales[:, None] * t[None, :]) ** 2, axis=1)
        grid_best = float((residual_sq[:, : problem.keep].sum(axis=1) / problem.n).min())
        assert report.objective <= grid_best + 1e-9
        assert np.abs(report.w_hat).sum() <= 1.0 + 1e-9


class TestCalibration:
    """Tests pour default_ridge et alpha_schedule"""

    def test_default_ridge(self):
        """Test: λ = (s/N) log(d/(sδ))"""
        assert default_ridge(2, 100, 20, 0.1) == pytest.approx(0.02 * math.log(100.0))

    @pytest.mark.parametrize("oracle", ["srle2", "srle3"])
    def test_alpha_proportional_to_budget(self, oracle):
        """Test: α_h proportionnel à H - h"""
        alpha = alpha_schedule(oracle, 4, 500, 12, 2, 0.1, 0.01, 0.05)
        ratios = alpha / (4 - np.arange(4))
        assert np.allclose(ratios, ratios[0])
        assert alpha[0] > 0.0

    def test_alpha_grows_with_corruption(self):
        """Test: α croît avec ε"""
        clean = alpha_schedule("srle2", 3, 500, 12, 2, 0.1, 0.01, 0.0)
        dirty = alpha_schedule("srle2", 3, 500, 12, 2, 0.1, 0.01, 0.2)
        assert np.all(dirty > clean)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
