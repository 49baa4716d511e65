import numpy as np
import pandas as pd
from lmfit import Model
from lmfit.model import ModelResult


def _check_data(x, y, weights):
    if not len(x) == len(y):
        raise ValueError("Lengths of x and y arrays must be equal.")
    if len(x) < 2:
        raise ValueError("At least two points are needed to fit a line.")
    if weights is not None and not len(x) == len(weights):
        raise ValueError("Lengths of x and weights arrays must be equal if weights is not None.")


def linear(x: np.ndarray, slope: float, intercept: float) -> np.ndarray:
    """
    Model cost that grows linearly in the input length.

    :param x: Independent variable, e.g. input length in bytes
    :param slope: Cost per unit of x
    :param intercept: Cost at x = 0
    :return: Linear fit function
    """
    return np.asarray(slope * x + intercept)


def fit_linear(x: np.ndarray, y: np.ndarray, weights: np.ndarray = None,
               param_guesses: tuple = (1., 0.)) -> ModelResult:
    """
    Fit data x, y to a line.

    :param x: The independent variable, e.g. input length
    :param y: The dependent variable, e.g. interpreter steps
    :param weights: Optional weightings of each point to use when fitting.
    :param param_guesses: initial guesses for the parameters
    :return: a lmfit Model
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_data(x, y, weights)
    line_model = Model(linear)
    params = line_model.make_params(slope=param_guesses[0], intercept=param_guesses[1])
    return line_model.fit(y, x=x, params=params, weights=weights)


def r_squared(fit_result: ModelResult) -> float:
    """
    Coefficient of determination of a fit; 1.0 for data with no variance that the fit matches.

    :param fit_result: a fit returned by e.g. :py:func:`fit_linear`
    """
    y = np.asarray(fit_result.data, dtype=float)
    ss_res = float(np.sum((y - fit_result.best_fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if np.isclose(ss_res, 0.0) else 0.0
    return 1.0 - ss_res / ss_tot


def fit_cost_scaling(scaling: pd.DataFrame, column: str = 'steps_q') -> ModelResult:
    """
    Fit one cost column of a :py:func:`pathharden.interpreter.cost_scaling` table against the
    input length.

    :param scaling: the table, with a ``length`` column
    :param column: the cost column to fit
    """
    return fit_linear(scaling['length'].to_numpy(), scaling[column].to_numpy())


def _finite_or_none(x):
    return float(x) if x is not None and np.isfinite(x) else None


def fit_result_to_json(fit_result):
    """
    Convert a fit result to a JSON-serializable dictionary.

    :param fit_result: (ModelResult) the result to serialize.
    :return: (dict)
    """
    # Parameters.dumps() keeps inf as a quoted string, which plain JSON cannot represent.
    params_str = fit_result.params.dumps()
    json_dict = {
        "chisqr": _finite_or_none(fit_result.chisqr),
        "redchi": _finite_or_none(fit_result.redchi),
        "r_squared": r_squared(fit_result),
        "best_fit": fit_result.best_fit.tolist(),
        "best_values": fit_result.best_values,
        "covar": fit_result.covar.tolist() if fit_result.covar is not None else None,
        "params": params_str
    }
    # aic and bic are left out because they can be +/- infinity.
    return json_dict
