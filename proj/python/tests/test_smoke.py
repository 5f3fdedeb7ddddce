import numpy as np
import pytest

import robsel


def benchmark(seed=1, label_noise=20, outliers=5):
    x, y = robsel.generate_clean(500, seed=seed)
    return robsel.contaminate(x, y, label_noise, outliers, seed=seed + 1)


def test_version():
    assert robsel.__version__ == "0.1.0"


def test_chi_square_quantile():
    assert robsel.chi_square_quantile(1, 0.95) == pytest.approx(3.841458820694124, abs=1e-9)


def test_redda_and_predict():
    x, y, planted = benchmark()
    fit = robsel.fit_redda(x[:, :3], y, gamma=0.05, n_start=10, seed=3)
    assert len(fit["trimmed"]) == int(np.floor(len(y) * 0.05))
    assert sum(fit["tau"]) == pytest.approx(1.0)
    post, labels = robsel.predict_map(fit, x[:50, :3])
    assert np.allclose(post.sum(axis=1), 1.0)
    assert len(labels) == 50


def test_selectors_find_relevant_block():
    x, y, _ = benchmark()
    sel = robsel.greedy_select(x, y, gamma=0.05, seed=2)
    assert sorted(sel["selected"]) == [0, 1, 2]
    ml = robsel.fit_ml_subset(x, y, 3, gamma=0.05, seed=2)
    assert ml["selected"] == [0, 1, 2]
    assert robsel.selection_precision(sel["selected"], [0, 1, 2]) == 1.0


def test_outlier_score_ranks_planted_rows_first():
    x, y, planted = benchmark(label_noise=0, outliers=5)
    fit = robsel.fit_redda(x[:, :3], y, gamma=0.05, n_start=10)
    log_density, ranking = robsel.outlier_score(fit, [0, 1, 2], x)
    assert sorted(ranking[:5]) == planted


def test_errors_map_to_python_exceptions():
    x, y, _ = benchmark()
    with pytest.raises(robsel.ValidationError):
        robsel.fit_redda(x, y, gamma=0.7)
    with pytest.raises(ValueError):
        robsel.fit_redda(x, y, model="XYZ")
    with pytest.raises(OSError):
        robsel.load_dataset("/nonexistent.csv")
