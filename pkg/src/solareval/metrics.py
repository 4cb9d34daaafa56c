"""Point-error summaries and forecast skill against a reference model."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .series import AlignedPair


class DegenerateReference(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ErrorSummary:
    mae: float
    mse: float
    rmse: float
    q95_abs: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def _mean(x: np.ndarray) -> float:
    # fsum is correctly rounded, so the result does not depend on summation order
    return math.fsum(x.tolist()) / x.size


def error_summary(pair: AlignedPair, q: float = 0.95) -> ErrorSummary:
    """MAE, MSE, RMSE and the ``q`` quantile of absolute error of test vs reference."""
    if len(pair) == 0:
        raise ValueError("error summary of an empty pair")
    err = pair.test - pair.reference
    abs_err = np.abs(err)
    mse = _mean(err * err)
    return ErrorSummary(
        mae=_mean(abs_err),
        mse=mse,
        rmse=math.sqrt(mse),
        q95_abs=float(np.quantile(abs_err, q, method="linear")),
        n=int(err.size),
    )


def forecast_skill(err_forecast: float, err_reference: float) -> float:
    """``1 - err_forecast / err_reference``; positive means better than the reference."""
    if err_reference == 0:
        raise DegenerateReference("reference error is zero; skill is undefined")
    if err_reference < 0 or err_forecast < 0:
        raise ValueError("error values must be non-negative")
    return 1.0 - err_forecast / err_reference


def skill_scores(forecast: ErrorSummary, reference: ErrorSummary) -> dict[str, float]:
    """Skill on MSE, RMSE and MAE in one go."""
    return {
        "fs_mse": forecast_skill(forecast.mse, reference.mse),
        "fs_rmse": forecast_skill(forecast.rmse, reference.rmse),
        "fs_mae": forecast_skill(forecast.mae, reference.mae),
    }
