"""Estimator facade tests: sklearn API contract plus recovery behavior."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qstar import DataError, DomainError, QStarModel, qstar
from conftest import PUBLISHED_PARAMS, Q_MIN, S_MAX, T_MAX, grid_points, synth_cells


def design_matrix(cells):
    keys = sorted(cells)
    X = np.array(keys, dtype=float)
    y = np.array([cells[k] for k in keys]) / 9.0
    return X, y


class TestSklearnContract:
    def test_get_set_params_roundtrip(self):
        model = QStarModel(alpha_q=7.25, beta_s=0.8)
        params = model.get_params()
        assert params["alpha_q"] == 7.25
        assert params["beta_s"] == 0.8
        model.set_params(alpha_t=3.0)
        assert model.alpha_t == 3.0

    def test_clone(self):
        model = QStarModel(alpha_q=7.25, alpha_s_hat=3.52, alpha_t=4.10)
        cloned = clone(model)
        assert cloned.get_params() == model.get_params()

    def test_repr_contains_params(self):
        assert "alpha_q=7.25" in repr(QStarModel(alpha_q=7.25))

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            QStarModel().predict([[S_MAX, T_MAX, Q_MIN]])


class TestFitPredict:
    def test_recovers_parameters(self, city_params):
        X, y = design_matrix(synth_cells(city_params))
        model = QStarModel().fit(X, y)
        assert model.alpha_q_ == pytest.approx(city_params.alpha_q, rel=1e-5)
        assert model.alpha_s_hat_ == pytest.approx(city_params.alpha_s_hat, rel=1e-5)
        assert model.alpha_t_ == pytest.approx(city_params.alpha_t, rel=1e-5)
        assert model.fit_report_.rmse < 1e-9

    def test_predict_matches_model_function(self, city_params):
        X, y = design_matrix(synth_cells(city_params))
        model = QStarModel().fit(X, y)
        preds = model.predict(X)
        for row, pred in zip(X, preds):
            from qstar import StarPoint

            point = StarPoint(*row, S_MAX, T_MAX, Q_MIN)
            assert pred == pytest.approx(qstar(point, model.params_), abs=1e-12)

    def test_score_is_pcc(self, city_params):
        X, y = design_matrix(synth_cells(city_params))
        model = QStarModel().fit(X, y)
        assert model.score(X, y) == pytest.approx(1.0, abs=1e-9)

    def test_components_multiply_to_prediction(self, city_params):
        X, y = design_matrix(synth_cells(city_params))
        model = QStarModel().fit(X, y)
        comps = model.components(X)
        assert np.allclose(comps.prod(axis=1), model.predict(X), atol=1e-12)

    def test_preset_model_predicts_without_fit(self, city_params):
        model = QStarModel(
            alpha_q=city_params.alpha_q,
            alpha_s_hat=city_params.alpha_s_hat,
            alpha_t=city_params.alpha_t,
            s_max=S_MAX,
            t_max=T_MAX,
            q_min=Q_MIN,
        )
        point = grid_points()[0]
        pred = model.predict([[point.s, point.t, point.q]])[0]
        assert pred == pytest.approx(qstar(point, city_params), abs=1e-12)

    def test_explicit_references_respected(self, city_params):
        cells = synth_cells(city_params)
        X, y = design_matrix(cells)
        model = QStarModel(s_max=S_MAX, t_max=T_MAX, q_min=Q_MIN).fit(X, y)
        assert (model.s_max_, model.t_max_, model.q_min_) == (S_MAX, T_MAX, Q_MIN)

    @pytest.mark.parametrize("name", ["crew", "fg"])
    def test_other_sequences(self, name):
        truth = PUBLISHED_PARAMS[name]
        X, y = design_matrix(synth_cells(truth))
        model = QStarModel().fit(X, y)
        assert model.alpha_q_ == pytest.approx(truth.alpha_q, rel=1e-5)


class TestValidation:
    def test_wrong_shape(self):
        with pytest.raises(DomainError):
            QStarModel().fit([[1.0, 2.0]], [1.0])

    def test_mismatched_y(self):
        with pytest.raises(DomainError):
            QStarModel().fit([[S_MAX, T_MAX, Q_MIN]], [1.0, 2.0])

    def test_nonpositive_coordinates(self):
        with pytest.raises(DomainError):
            QStarModel().fit([[0.0, T_MAX, Q_MIN]], [1.0])

    def test_nonpositive_y(self):
        with pytest.raises(DomainError):
            QStarModel().fit([[S_MAX, T_MAX, Q_MIN]], [0.0])

    def test_duplicate_rows(self, city_params):
        X, y = design_matrix(synth_cells(city_params))
        X2 = np.vstack([X, X[:1]])
        y2 = np.concatenate([y, y[:1]])
        with pytest.raises(DataError):
            QStarModel().fit(X2, y2)
