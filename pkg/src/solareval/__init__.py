"""Evaluation toolkit for short-term solar irradiance forecasts.

Smart-persistence reference, forecast skill, swinging-door ramp score,
DTW temporal distortion (TDI/TDM), dataset selection and a tabular
ADAM-trained baseline forecaster.
"""
__version__ = "0.1.0"

from .distortion import DistortionReport, WarpPath, dtw_path, sequence_distortion, tdi_tdm
from .metrics import ErrorSummary, error_summary, forecast_skill
from .ramps import RampSegment, SlopeFunction, epsilon_for_day, ramp_score, swinging_door
from .series import AlignedPair, ForecastSeries, TimeSeries, align, minmax_normalize, split_contiguous
from .solar import (ClearSkyProvider, SolarAngles, clearsky_ghi, clearsky_index, simple_persistence,
                    smart_persistence, solar_position)

__all__ = [
    "AlignedPair", "ClearSkyProvider", "DistortionReport", "ErrorSummary", "ForecastSeries",
    "RampSegment", "SlopeFunction", "SolarAngles", "TimeSeries", "WarpPath", "align",
    "clearsky_ghi", "clearsky_index", "dtw_path", "epsilon_for_day", "error_summary",
    "forecast_skill", "minmax_normalize", "ramp_score", "sequence_distortion",
    "simple_persistence", "smart_persistence", "solar_position", "split_contiguous",
    "swinging_door", "tdi_tdm",
]
