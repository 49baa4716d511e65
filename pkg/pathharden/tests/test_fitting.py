import json

import numpy as np
import pandas as pd
import pytest

from pathharden.analysis.fitting import (fit_cost_scaling, fit_linear, fit_result_to_json,
                                         r_squared)


def test_fit_linear():
    lengths = np.linspace(1024, 16384, 5)
    steps = 3.0 * lengths + 11

    fit = fit_linear(lengths, steps)

    assert np.isclose(fit.params['slope'], 3.0)
    assert np.isclose(fit.params['intercept'], 11.0, atol=1e-3)
    assert np.isclose(r_squared(fit), 1.0)


def test_r_squared_noisy():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 100, 50)
    y = 2 * x + rng.normal(0, 20, size=x.shape)

    fit = fit_linear(x, y)

    assert 0.5 < r_squared(fit) < 1.0


def test_r_squared_constant_data():
    fit = fit_linear(np.array([1., 2., 3.]), np.array([5., 5., 5.]))
    assert r_squared(fit) == 1.0


def test_fit_linear_bad_data():
    with pytest.raises(ValueError):
        fit_linear(np.array([1., 2.]), np.array([1.]))
    with pytest.raises(ValueError):
        fit_linear(np.array([1.]), np.array([1.]))


def test_fit_cost_scaling():
    df = pd.DataFrame({'length': [1024, 2048, 4096, 8192],
                       'steps_q': [4 * n + 2 for n in (1024, 2048, 4096, 8192)]})
    fit = fit_cost_scaling(df)
    assert np.isclose(fit.params['slope'], 4.0)


def test_fit_result_to_json():
    fit = fit_linear(np.array([0., 1., 2., 3.]), np.array([1., 3., 5., 7.]))
    doc = fit_result_to_json(fit)
    json.dumps(doc, allow_nan=False)
    assert np.isclose(doc['best_values']['slope'], 2.0)
    assert np.isclose(doc['r_squared'], 1.0)
