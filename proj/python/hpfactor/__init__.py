"""Regional house-price three-factor model (compiled core)."""

from ._core import (  # noqa: F401
    HpfError,
    __version__,
    adf,
    ar_root_moduli,
    binary_segmentation,
    config_keys,
    doubling_time,
    fit_arima,
    forecast_sd,
    ljung_box,
    loglik,
    run,
    scenario_map,
    uncertainty_band,
)
