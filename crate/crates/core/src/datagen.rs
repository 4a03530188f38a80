//! Gaussian mixture generators and the named simulation presets.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HyperParams, MultiViewDataset};
use crate::rng::{stream, Purpose};

/// Shape of a synthetic mixture. Within-cluster noise is isotropic with
/// standard deviation `sigma`; adjacent cluster means sit
/// `separation * sigma` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub k: usize,
    pub v: usize,
    pub j: usize,
    pub separation: f64,
    pub sigma: f64,
    /// Cluster proportions; `None` is uniform.
    pub mix: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: 300,
            k: 3,
            v: 1,
            j: 2,
            separation: 6.0,
            sigma: 1.0,
            mix: None,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn check(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::Config(format!(
                "need n >= k >= 1, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.v == 0 || self.j == 0 {
            return Err(Error::Config("need at least one view and one feature".into()));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::Config(format!(
                "separation must be > 0, got {}",
                self.separation
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if let Some(mix) = &self.mix {
            let total: f64 = mix.iter().sum();
            if mix.len() != self.k || mix.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(
                    "mix must hold k nonnegative proportions summing to 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Cluster proportions, uniform when unset.
    pub fn proportions(&self) -> Vec<f64> {
        self.mix.clone().unwrap_or_else(|| vec![1.0 / self.k as f64; self.k])
    }
}

/// Per-view `K x J` mean matrices. The means are the vertices of a regular
/// K-gon with side `separation * sigma`, centered at the origin, in a plane
/// spanned by two random orthonormal directions (one plane per view). No
/// mean is then a convex combination of the others. With one feature the
/// means fall back to equally spaced points on the line.
pub fn cluster_means(spec: &SimSpec) -> Result<Vec<Array2<f64>>> {
    spec.check()?;
    let mut rng = stream(spec.seed, Purpose::DataMeans);
    let mut direction = |avoid: Option<&[f64]>| -> Vec<f64> {
        loop {
            let mut d: Vec<f64> = (0..spec.j).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(a) = avoid {
                let p: f64 = d.iter().zip(a).map(|(x, y)| x * y).sum();
                d.iter_mut().zip(a).for_each(|(x, y)| *x -= p * y);
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                d.iter_mut().for_each(|x| *x /= norm);
                return d;
            }
        }
    };
    let side = spec.separation * spec.sigma;
    let k = spec.k;
    let mut out = Vec::with_capacity(spec.v);
    for _ in 0..spec.v {
        let e1 = direction(None);
        let mut m = Array2::zeros((k, spec.j));
        if spec.j == 1 || k <= 2 {
            let mid = (k as f64 - 1.0) / 2.0;
            for c in 0..k {
                let offset = (c as f64 - mid) * side;
                m.row_mut(c).iter_mut().zip(&e1).for_each(|(dst, &d)| *dst = offset * d);
            }
        } else {
            let e2 = direction(Some(&e1));
            let radius = side / (2.0 * (std::f64::consts::PI / k as f64).sin());
            for c in 0..k {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                let (a, b) = (radius * angle.cos(), radius * angle.sin());
                for (jj, dst) in m.row_mut(c).iter_mut().enumerate() {
                    *dst = a * e1[jj] + b * e2[jj];
                }
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Draws the mixture and returns it with the means used.
pub fn generate_with_means(spec: &SimSpec) -> Result<(MultiViewDataset<f64>, Vec<Array2<f64>>)> {
    let means = cluster_means(spec)?;
    let mut label_rng = stream(spec.seed, Purpose::DataLabels);
    let pick = WeightedIndex::new(spec.proportions()).map_err(|e| Error::Config(format!("bad mix: {e}")))?;
    let labels: Vec<usize> = (0..spec.n).map(|_| pick.sample(&mut label_rng)).collect();
    let mut noise = stream(spec.seed, Purpose::DataNoise);
    let views = means
        .iter()
        .map(|mu| {
            let mut x = Array2::zeros((spec.n, spec.j));
            for (i, &l) in labels.iter().enumerate() {
                for j in 0..spec.j {
                    let e: f64 = StandardNormal.sample(&mut noise);
                    x[[i, j]] = mu[[l, j]] + spec.sigma * e;
                }
            }
            x
        })
        .collect();
    let name = format!("sim-n{}-k{}-v{}-j{}-s{}", spec.n, spec.k, spec.v, spec.j, spec.seed);
    let data = MultiViewDataset::new(views, Some(labels), name)?;
    Ok((data, means))
}

pub fn generate(spec: &SimSpec) -> Result<MultiViewDataset<f64>> {
    Ok(generate_with_means(spec)?.0)
}

/// A view with the per-column mean and standard deviation of `x` but no
/// cluster structure: independent Gaussian entries.
pub fn noise_view(x: &Array2<f64>, seed: u64) -> Array2<f64> {
    let mut rng = stream(seed, Purpose::NoiseView);
    let n = x.nrows() as f64;
    let mut out = Array2::zeros(x.raw_dim());
    for (j, col) in x.columns().into_iter().enumerate() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for i in 0..x.nrows() {
            let e: f64 = StandardNormal.sample(&mut rng);
            out[[i, j]] = mean + sd * e;
        }
    }
    out
}

/// Two views: view 1 is the informative mixture of `spec`, view 2 is
/// [`noise_view`] of an independent draw of the same mixture (the sample
/// labels play no part in it).
pub fn informative_plus_noise(spec: &SimSpec) -> Result<MultiViewDataset<f64>> {
    let one = SimSpec { v: 2, ..spec.clone() };
    let data = generate(&one)?;
    let noise = noise_view(data.view(1), spec.seed);
    MultiViewDataset::new(
        vec![data.view(0).clone(), noise],
        data.labels().map(<[usize]>::to_vec),
        format!("{}-noise", data.name()),
    )
}

/// A named scenario: the mixture plus solver defaults that go with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub spec: SimSpec,
    /// Initial batch size for the online solvers; `None` is N/2.
    pub chushi: Option<usize>,
    pub eta: Option<f64>,
    /// Sample sizes of a stability sweep; empty for a single scenario.
    pub n_grid: Vec<usize>,
}

impl Preset {
    pub const NAMES: [&'static str; 4] = ["case1-single", "case2-multi", "stability-single", "stability-multi"];

    /// Solver defaults for this scenario.
    pub fn hyper(&self) -> HyperParams {
        let mut h = HyperParams::with_k(self.spec.k);
        h.chushi = self.chushi;
        if let Some(eta) = self.eta {
            h.eta = eta;
        }
        h
    }

    /// The same preset with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.spec.seed = seed;
        self
    }

    /// One spec per sweep point (just the base spec when not a sweep).
    pub fn sweep(&self) -> Vec<SimSpec> {
        if self.n_grid.is_empty() {
            return vec![self.spec.clone()];
        }
        self.n_grid
            .iter()
            .map(|&n| SimSpec { n, ..self.spec.clone() })
            .collect()
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let base = SimSpec::default();
    let grid: Vec<usize> = (1..=10).map(|i| i * 100).collect();
    let p = match name {
        "case1-single" => Preset {
            name: name.into(),
            spec: SimSpec {
                n: 840,
                k: 3,
                v: 1,
                ..base
            },
            chushi: Some(620),
            eta: Some(5.0),
            n_grid: Vec::new(),
        },
        "case2-multi" => Preset {
            name: name.into(),
            spec: SimSpec {
                n: 210,
                k: 3,
                v: 2,
                ..base
            },
            chushi: Some(130),
            eta: Some(20.0),
            n_grid: Vec::new(),
        },
        "stability-single" => Preset {
            name: name.into(),
            spec: SimSpec {
                n: 1000,
                k: 3,
                v: 1,
                ..base
            },
            chushi: None,
            eta: None,
            n_grid: grid,
        },
        "stability-multi" => Preset {
            name: name.into(),
            spec: SimSpec {
                n: 1000,
                k: 3,
                v: 2,
                ..base
            },
            chushi: None,
            eta: None,
            n_grid: grid,
        },
        _ => {
            return Err(Error::Usage(format!(
                "unknown preset '{name}' (expected one of {})",
                Preset::NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}
