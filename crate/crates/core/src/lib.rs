//! Two-layer wavelet scattering along translations and rotations, with
//! feature standardization and one-vs-rest linear SVM classification.

mod binio;
pub mod classifier;
pub mod config;
pub mod conv;
pub mod error;
pub mod features;
pub mod filterbank;
pub mod plane;
pub mod scattering;
pub use classifier::{train, Evaluation, LinearModel, TrainOptions};
pub use config::{ColorMode, J2Rule, Pooling, ScatteringConfig};
pub use error::{Result, ScatterError};
pub use features::{fit_standardizer, FeatureFile, Matrix, Standardizer};
pub use num_complex::Complex64;
pub use plane::Plane;
pub use scattering::{count_features, path_table, Scattering, ScatteringFeatures};
