//! Regularized K-means for multi-view data, offline and streaming.
//!
//! The solvers are generic over the float type through [`Scalar`]; the
//! aliases below fix it to `f64`, which is what the CLI and benchmarks use.
//!
//! ```
//! use orkm::{rkmc_fit, Dataset, HyperParams, RkmcConfig};
//! use ndarray::array;
//!
//! let x = array![[0.0], [0.1], [10.0], [10.1]];
//! let data = Dataset::single_view(x, Some(vec![0, 0, 1, 1])).unwrap();
//! let mut hyper = HyperParams::with_k(2);
//! hyper.eta = 0.01;
//! let fit = rkmc_fit(&data, &RkmcConfig::new(hyper)).unwrap();
//! assert_eq!(fit.nmi, Some(1.0));
//! ```

pub mod baselines;
pub mod bench;
pub mod datagen;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod orkmc;
pub mod rkmc;
pub mod rng;
pub mod scalar;
pub mod validate;

pub use baselines::{kmeans_fit, ogd_fit, omu_fit, pkmeans_fit, GammaSchedule, OmuConfig, PowerSchedule};
pub use bench::{fit, run_suite, BenchOptions, BenchRow, Suite};
pub use error::{Error, Result};
pub use io::{load_manifest, load_qcm, load_result, save_result, write_dataset, DatasetManifest};
pub use kernels::{nnls, nnls_gram, project_simplex, solve_row_qp, NnlsSolution, QpSolution, RowQp};
pub use metrics::{index, nmi, pair_scores, purity, ContingencyTable, Metric, PairScores};
pub use model::{
    Algorithm, AssignmentMatrix, CenterSet, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
pub use objective::{objective_online, objective_rkmc};
pub use orkmc::{orkmc_init, orkmc_run, orkmc_run_with, orkmc_step, view_weights, OnlineState, StreamOptions};
pub use rkmc::{rkmc_fit, rkmc_fit_from, rkmc_fit_observed, update_m, update_u, Init, IterationEvent, RkmcConfig};
pub use scalar::Scalar;
pub use validate::{validate, Violation};

pub type Dataset = MultiViewDataset<f64>;
pub type Assignment = AssignmentMatrix<f64>;
pub type Centers = CenterSet<f64>;
pub type Weights = ViewWeights<f64>;
pub type FitResult = ClusterResult<f64>;

pub type Dataset32 = MultiViewDataset<f32>;
pub type FitResult32 = ClusterResult<f32>;
