//! Comparison runs: every solver on a suite across seeds, as CSV rows.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{kmeans_fit, ogd_fit, omu_fit, pkmeans_fit, GammaSchedule, OmuConfig, PowerSchedule};
use crate::datagen::{generate, preset};
use crate::error::{Error, Result};
use crate::io::{load_manifest, load_qcm};
use crate::metrics::{nmi, pair_scores, purity};
use crate::model::{Algorithm, ClusterResult, HyperParams, MultiViewDataset};
use crate::orkmc::orkmc_run;
use crate::rkmc::{rkmc_fit, RkmcConfig};

/// Environment variable naming the directory searched for real datasets.
pub const DATA_DIR_ENV: &str = "ORKM_DATA_DIR";

/// Runs one solver with its default options.
pub fn fit(algorithm: Algorithm, data: &MultiViewDataset<f64>, hyper: &HyperParams) -> Result<ClusterResult<f64>> {
    match algorithm {
        Algorithm::Rkmc => rkmc_fit(data, &RkmcConfig::new(hyper.clone())),
        Algorithm::Orkmc => orkmc_run(data, hyper, 1),
        Algorithm::Kmeans => kmeans_fit(data, hyper),
        Algorithm::Pkmeans => pkmeans_fit(data, hyper, &PowerSchedule::default()),
        Algorithm::Ogd => ogd_fit(data, hyper, GammaSchedule::default()),
        Algorithm::Omu => omu_fit(data, hyper, &OmuConfig::default()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Case1Single,
    Case2Multi,
    Qcm,
    Movie,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Case1Single, Suite::Case2Multi, Suite::Qcm, Suite::Movie];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Case1Single => "case1-single",
            Suite::Case2Multi => "case2-multi",
            Suite::Qcm => "qcm",
            Suite::Movie => "movie",
        }
    }

    /// Solver settings used for this suite.
    pub fn hyper(self) -> HyperParams {
        match self {
            Suite::Case1Single | Suite::Case2Multi => preset(self.name()).expect("built-in preset").hyper(),
            Suite::Qcm => HyperParams {
                k: 5,
                eta: 110.0,
                r: 0.5,
                max_iter: 1000,
                ..HyperParams::default()
            },
            Suite::Movie => HyperParams {
                k: 17,
                chushi: Some(600),
                r: 0.5,
                gamma: Some(1e-5),
                eta: 0.5,
                max_iter: 10,
                epsilon: 1.0,
                ..HyperParams::default()
            },
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            Error::Usage(format!(
                "unknown suite '{s}' (expected case1-single, case2-multi, qcm or movie)"
            ))
        })
    }
}

/// One line of the comparison table. Metrics are empty on SKIPPED rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub algorithm: String,
    pub view: String,
    pub nmi: Option<f64>,
    pub purity: Option<f64>,
    pub fscore: Option<f64>,
    pub elapsed_seconds: Option<f64>,
    pub seed: String,
}

impl BenchRow {
    pub fn skipped(dataset: &str, reason: &str) -> Self {
        Self {
            dataset: dataset.into(),
            algorithm: "SKIPPED".into(),
            view: reason.into(),
            nmi: None,
            purity: None,
            fscore: None,
            elapsed_seconds: None,
            seed: String::new(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.algorithm == "SKIPPED"
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub seeds: u64,
    pub data_dir: Option<PathBuf>,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            seeds: 5,
            data_dir: None,
            parallel: true,
        }
    }
}

/// Directory searched for real datasets: the explicit one, else
/// `$ORKM_DATA_DIR`, else `./data`.
pub fn data_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// File backing a real-data suite, if present in `dir`. A manifest wins
/// over a raw file.
pub fn find_dataset(suite: Suite, dir: &Path) -> Option<PathBuf> {
    let names: &[&str] = match suite {
        Suite::Case1Single | Suite::Case2Multi => return None,
        Suite::Qcm => &["qcm.manifest.json", "QCM.csv", "qcm.csv", "QCM3.csv"],
        Suite::Movie => &["movie.manifest.json"],
    };
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// Loads a real-data suite's dataset from `dir`; `None` when absent.
pub fn load_suite_data(suite: Suite, dir: &Path) -> Result<Option<MultiViewDataset<f64>>> {
    let Some(p) = find_dataset(suite, dir) else {
        return Ok(None);
    };
    let data = if p.to_string_lossy().ends_with(".json") {
        load_manifest(&p)?
    } else {
        load_qcm(&p)?
    };
    Ok(Some(data))
}

enum Source {
    Simulated(Suite),
    Fixed(MultiViewDataset<f64>),
}

impl Source {
    fn data(&self, seed: u64) -> Result<MultiViewDataset<f64>> {
        match self {
            Source::Simulated(s) => generate(&preset(s.name())?.with_seed(seed).spec),
            Source::Fixed(d) => Ok(d.clone()),
        }
    }
}

/// A (algorithm, view) pair; `None` means all views at once.
type Cell = (Algorithm, Option<usize>);

fn cells(n_views: usize) -> Vec<Cell> {
    let mut out = Vec::new();
    for a in Algorithm::ALL {
        if a.multi_view() || n_views == 1 {
            out.push((a, if n_views == 1 { Some(0) } else { None }));
        } else {
            out.extend((0..n_views).map(|v| (a, Some(v))));
        }
    }
    out
}

fn view_name(v: Option<usize>) -> String {
    v.map_or_else(|| "all".to_string(), |v| (v + 1).to_string())
}

fn run_cell(suite: Suite, src: &Source, cell: Cell, seed: u64) -> Result<BenchRow> {
    let data = src.data(seed)?;
    let data = match cell.1 {
        Some(v) if data.n_views() > 1 => data.only_view(v),
        _ => data,
    };
    let mut hyper = suite.hyper();
    hyper.seed = seed;
    let started = Instant::now();
    let fit = fit(cell.0, &data, &hyper)?;
    let elapsed = started.elapsed().as_secs_f64();
    let (nmi_v, purity_v, fscore_v) = match data.labels() {
        Some(t) => (
            Some(nmi(fit.labels(), t)?),
            Some(purity(fit.labels(), t)?),
            Some(pair_scores(fit.labels(), t)?.fscore),
        ),
        None => (None, None, None),
    };
    Ok(BenchRow {
        dataset: suite.name().into(),
        algorithm: cell.0.name().into(),
        view: view_name(cell.1),
        nmi: nmi_v,
        purity: purity_v,
        fscore: fscore_v,
        elapsed_seconds: Some(elapsed),
        seed: seed.to_string(),
    })
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    })
}

fn median_row(rows: &[BenchRow]) -> BenchRow {
    let col = |f: fn(&BenchRow) -> Option<f64>| median(rows.iter().filter_map(f).collect());
    BenchRow {
        dataset: rows[0].dataset.clone(),
        algorithm: rows[0].algorithm.clone(),
        view: rows[0].view.clone(),
        nmi: col(|r| r.nmi),
        purity: col(|r| r.purity),
        fscore: col(|r| r.fscore),
        elapsed_seconds: col(|r| r.elapsed_seconds),
        seed: "median".into(),
    }
}

/// Runs every solver on `suite` for seeds `0..opts.seeds`. Rows come back
/// grouped by algorithm and view in a fixed order, each group followed by
/// its median row, whatever the scheduling.
pub fn run_suite(suite: Suite, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if opts.seeds == 0 {
        return Err(Error::Usage("--seeds must be at least 1".into()));
    }
    let src = match suite {
        Suite::Case1Single | Suite::Case2Multi => Source::Simulated(suite),
        Suite::Qcm | Suite::Movie => match load_suite_data(suite, &data_dir(opts.data_dir.as_deref()))? {
            Some(d) => Source::Fixed(d),
            None => return Ok(vec![BenchRow::skipped(suite.name(), "data file not found")]),
        },
    };
    let n_views = src.data(0)?.n_views();
    let cells = cells(n_views);
    let jobs: Vec<(Cell, u64)> = cells
        .iter()
        .flat_map(|&c| (0..opts.seeds).map(move |s| (c, s)))
        .collect();
    let results: Vec<Result<BenchRow>> = if opts.parallel {
        jobs.par_iter().map(|&(c, s)| run_cell(suite, &src, c, s)).collect()
    } else {
        jobs.iter().map(|&(c, s)| run_cell(suite, &src, c, s)).collect()
    };
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(rows.len() + cells.len());
    for group in rows.chunks(opts.seeds as usize) {
        out.extend_from_slice(group);
        out.push(median_row(group));
    }
    Ok(out)
}

/// Writes rows as CSV with a header. `mask_timing` blanks the elapsed
/// column so two runs can be compared byte for byte.
pub fn write_rows<W: std::io::Write>(w: W, rows: &[BenchRow], mask_timing: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        let mut r = r.clone();
        if mask_timing {
            r.elapsed_seconds = None;
        }
        wtr.serialize(r).map_err(|e| Error::Format {
            path: PathBuf::from("<bench output>"),
            message: e.to_string(),
        })?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "dataset",
            "algorithm",
            "view",
            "nmi",
            "purity",
            "fscore",
            "elapsed_seconds",
            "seed",
        ])
        .map_err(|e| Error::Format {
            path: PathBuf::from("<bench output>"),
            message: e.to_string(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<bench output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_layout() {
        assert_eq!(cells(1).len(), 6);
        // pkmeans and ogd run per view
        assert_eq!(cells(2).len(), 4 + 2 * 2);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(vec![3.0, 1.0, 2.0, 4.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
