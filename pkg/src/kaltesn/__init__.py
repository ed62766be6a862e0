"""Echo-state network time-series prediction with ridge and ensemble-Kalman training."""

from .dynamics import (LorenzParams, RosslerParams, add_noise, integrate_rk4, lorenz_rhs,
                       lorenz_series, rossler_rhs, rossler_series, traffic_surrogate)
from .embedding import EmbeddingConfig, delay_embed, unembed
from .enkf import (Ensemble, EnsembleDivergenceError, EnkfConfig, KaltDiagnostics, analysis_step,
                   forecast_step, init_ensemble, reshape_weights, train_kalt, vectorize_weights)
from .metrics import Summary, monte_carlo_summary, nrmse, pearson
from .reservoir import (DegenerateReservoirError, ReadoutWeights, Reservoir, ReservoirConfig,
                        build_reservoir, drive, load_reservoir, predict_autonomous, readout,
                        save_reservoir, spectral_radius, step)
from .ridge import RidgeConfig, train_ridge
from .timeseries import TimeSeries, read_csv, write_csv

__version__ = "0.1.0"
