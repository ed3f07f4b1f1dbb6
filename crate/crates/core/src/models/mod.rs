//! Classical oracles and end-to-end networks.

pub mod classifier;
pub mod dataset;
pub mod direct;
pub mod fft_conv;
pub mod forecaster;
pub mod layers;
pub mod metrics;
pub mod spectral;

pub use classifier::{build_mnist_qfcn, ClassifierConfig, ConvBackend, ImageSample, QfcnClassifier};
pub use dataset::{
    load_series_dataset, normalized_adjacency, read_adjacency_csv, read_series_csv,
    synth_st_dataset, write_adjacency_csv, write_series_csv, ForecastSample, SeriesDataset,
};
pub use direct::{
    conv_1d_backward, conv_2d_backward, direct_conv, direct_conv_1d, direct_conv_2d, ConvMode,
};
pub use fft_conv::{fft_conv_2d, FftConv2d};
pub use forecaster::{build_qf_forecaster, forecast, ForecasterConfig, QfTemporalForecaster};
pub use metrics::{mae, mse};
pub use spectral::{dft_oracle, fft, fft_circular_convolve, idft_oracle, ifft, FftPlan, NdFft};
