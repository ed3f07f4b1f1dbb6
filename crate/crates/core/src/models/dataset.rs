//! Node time series on a weighted graph: a synthetic generator, windowing,
//! the persistence baseline and CSV input/output.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::metrics::mae;
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of time steps assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Values per time step for every node plus the weighted adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDataset {
    nodes: usize,
    steps: usize,
    /// Time-major: `values[t * nodes + v]`.
    values: Vec<f64>,
    /// Row-major `nodes × nodes`.
    adjacency: Vec<f64>,
    /// First time step of the validation split.
    split: usize,
}

/// One forecasting example: `window` steps for every node (node-major,
/// `window[v * len + τ]`) and the next value of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSample {
    pub window: Vec<f64>,
    pub target: Vec<f64>,
}

impl SeriesDataset {
    pub fn new(nodes: usize, values: Vec<f64>, adjacency: Vec<f64>) -> Result<Self> {
        if nodes == 0 || values.len() % nodes != 0 {
            return Err(Error::Dataset(format!(
                "{} values do not form rows of {nodes} nodes",
                values.len()
            )));
        }
        if adjacency.len() != nodes * nodes {
            return Err(Error::Dataset(format!(
                "adjacency has {} entries, expected {nodes}x{nodes}",
                adjacency.len()
            )));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!(
                "non-finite value at step {}, node {}",
                t / nodes,
                t % nodes
            )));
        }
        if adjacency.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Dataset("adjacency weights must be finite and >= 0".into()));
        }
        let steps = values.len() / nodes;
        let split = ((steps as f64) * TRAIN_FRACTION).round() as usize;
        Ok(Self { nodes, steps, values, adjacency, split })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn adjacency(&self) -> &[f64] {
        &self.adjacency
    }

    pub fn value(&self, t: usize, v: usize) -> f64 {
        self.values[t * self.nodes + v]
    }

    /// Time steps `[0, split)` train, `[split, steps)` validate.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.split
    }

    pub fn val_range(&self) -> std::ops::Range<usize> {
        self.split..self.steps
    }

    /// Mean and standard deviation over the training steps of all nodes.
    pub fn train_stats(&self) -> (f64, f64) {
        let train = &self.values[..self.split * self.nodes];
        let n = train.len().max(1) as f64;
        let mean = train.iter().sum::<f64>() / n;
        let var = train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt().max(1e-12))
    }

    /// Copy with every value z-scored by the training statistics.
    pub fn standardized(&self) -> Self {
        let (mean, std) = self.train_stats();
        Self {
            values: self.values.iter().map(|v| (v - mean) / std).collect(),
            ..self.clone()
        }
    }

    /// Examples whose target step lies in `targets`, each with the
    /// preceding `window` steps as input.
    pub fn windows(
        &self,
        targets: std::ops::Range<usize>,
        window: usize,
    ) -> Result<Vec<ForecastSample>> {
        if window == 0 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        let start = targets.start.max(window);
        let end = targets.end.min(self.steps);
        Ok((start..end)
            .map(|t| {
                let mut w = Vec::with_capacity(self.nodes * window);
                for v in 0..self.nodes {
                    w.extend((t - window..t).map(|s| self.value(s, v)));
                }
                let target = (0..self.nodes).map(|v| self.value(t, v)).collect();
                ForecastSample { window: w, target }
            })
            .collect())
    }

    /// MAE of predicting every target by its node's previous value.
    pub fn persistence_mae(&self, samples: &[ForecastSample]) -> Result<f64> {
        let (pred, truth) = persistence_pairs(samples, self.nodes)?;
        mae(&pred, &truth)
    }
}

fn persistence_pairs(samples: &[ForecastSample], nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for s in samples {
        let len = s.window.len() / nodes;
        if len == 0 {
            return Err(Error::Dataset("empty window".into()));
        }
        pred.extend((0..nodes).map(|v| s.window[v * len + len - 1]));
        truth.extend(&s.target);
    }
    Ok((pred, truth))
}

/// Row-normalised `W + I`.
pub fn normalized_adjacency(adjacency: &[f64], nodes: usize) -> Result<Vec<f64>> {
    if adjacency.len() != nodes * nodes {
        return Err(Error::Shape(format!("adjacency must be {nodes}x{nodes}")));
    }
    let mut w = adjacency.to_vec();
    for v in 0..nodes {
        w[v * nodes + v] += 1.0;
        let row = &mut w[v * nodes..(v + 1) * nodes];
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(w)
}

const DECAY: f64 = 0.9;
const DIFFUSION: f64 = 0.5;
const FORCING: f64 = 0.3;
const PERIOD: f64 = 24.0;
const INNOVATION: f64 = 0.05;
const BURN_IN: usize = 100;

/// Random geometric graph with Gaussian edge weights and a damped
/// diffusion series driven by per-node phase-shifted sinusoids:
/// `x ← 0.9((1-κ)x + κ Ŵx) + 0.3 sin(2πt/24 + φ_v) + 0.05 ε` with `κ = 0.5`
/// and `Ŵ` the row-normalised `W + I`.
pub fn synth_st_dataset(nodes: usize, steps: usize, seed: u64) -> Result<SeriesDataset> {
    if nodes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {nodes}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let mut r = rng::stream(seed, 0);
    let pos: Vec<(f64, f64)> = (0..nodes).map(|_| (r.random(), r.random())).collect();
    let n = nodes as f64;
    let radius = (2.5 * n.ln() / (PI * n)).sqrt().max(0.3);
    let sigma = radius / 2.0;
    let mut adjacency = vec![0.0; nodes * nodes];
    for a in 0..nodes {
        for b in a + 1..nodes {
            let d2 = (pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2);
            if d2 < radius * radius {
                let w = (-d2 / (sigma * sigma)).exp();
                adjacency[a * nodes + b] = w;
                adjacency[b * nodes + a] = w;
            }
        }
    }
    let mix = normalized_adjacency(&adjacency, nodes)?;
    let phase: Vec<f64> = (0..nodes).map(|_| r.random::<f64>() * 2.0 * PI).collect();
    let mut x: Vec<f64> = (0..nodes).map(|_| StandardNormal.sample(&mut r)).collect();
    let mut values = Vec::with_capacity(steps * nodes);
    for t in 0..BURN_IN + steps {
        if t >= BURN_IN {
            values.extend(&x);
        }
        let diffused: Vec<f64> = (0..nodes)
            .map(|v| (0..nodes).map(|u| mix[v * nodes + u] * x[u]).sum())
            .collect();
        x = (0..nodes)
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut r);
                DECAY * ((1.0 - DIFFUSION) * x[v] + DIFFUSION * diffused[v])
                    + FORCING * (2.0 * PI * t as f64 / PERIOD + phase[v]).sin()
                    + INNOVATION * z
            })
            .collect();
    }
    SeriesDataset::new(nodes, values, adjacency)
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Dataset(format!("{}: {e}", path.display()))
}

/// Reads a series CSV: header `node_0,…,node_{V-1}`, one row per step.
pub fn read_series_csv(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, h) in headers.iter().enumerate() {
        if h.trim() != format!("node_{i}") {
            return Err(csv_error(path, format!("column {i} is '{h}', expected 'node_{i}'")));
        }
    }
    let nodes = headers.len();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for field in rec.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| csv_error(path, format!("row {}: {e}", row + 1)))?,
            );
        }
    }
    Ok((nodes, values))
}

/// Reads a headerless `V × V` adjacency CSV.
pub fn read_adjacency_csv(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = 0;
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for field in rec.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| csv_error(path, format!("row {}: {e}", rows + 1)))?,
            );
        }
        rows += 1;
    }
    if values.len() != rows * rows {
        return Err(csv_error(path, format!("{rows} rows do not form a square matrix")));
    }
    Ok((rows, values))
}

pub fn load_series_dataset(series: &Path, adjacency: &Path) -> Result<SeriesDataset> {
    let (nodes, values) = read_series_csv(series)?;
    let (adj_nodes, adj) = read_adjacency_csv(adjacency)?;
    if adj_nodes != nodes {
        return Err(Error::Dataset(format!(
            "series has {nodes} nodes but adjacency is {adj_nodes}x{adj_nodes}"
        )));
    }
    SeriesDataset::new(nodes, values, adj)
}

pub fn write_series_csv(data: &SeriesDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record((0..data.nodes).map(|v| format!("node_{v}")))
        .map_err(|e| csv_error(path, e))?;
    for row in data.values.chunks(data.nodes) {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))
}

pub fn write_adjacency_csv(data: &SeriesDataset, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in data.adjacency.chunks(data.nodes) {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))
}
