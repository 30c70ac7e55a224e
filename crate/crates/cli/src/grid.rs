//! The benchmark harness: sweeps forest size × component count × replicate
//! for the level-only and derivative-augmented methods, on either a fixed
//! train/test file pair or regenerated scenario data.

use rayon::prelude::*;

use fcurve_core::cart::{GrowParams, Impurity};
use fcurve_core::dataio::{Cell, CurveSet, Table};
use fcurve_core::forest::{train_forest, ForestParams};
use fcurve_core::simgen::{generate_split, ScenarioConfig};
use fcurve_core::Result;

use crate::space::{accuracy, FeatureSpace};

/// The two compared methods: scores of the curves alone, or pooled with
/// first- and second-derivative scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Frf,
    Afrf,
}

impl Method {
    pub fn r_max(self) -> usize {
        match self {
            Method::Frf => 0,
            Method::Afrf => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Frf => "FRF",
            Method::Afrf => "AFRF",
        }
    }
}

pub const METHODS: [Method; 2] = [Method::Frf, Method::Afrf];

/// Sweep parameters with the harness defaults.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub forest_sizes: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub n_basis: Option<usize>,
    pub order: usize,
    pub impurity: Impurity,
    /// Scenario mode only.
    pub n_per_group: usize,
    pub grid_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            forest_sizes: vec![10, 25, 50, 100, 200, 500],
            k_grid: vec![5, 10, 15, 20],
            replicates: 10,
            seed: 0,
            n_basis: None,
            order: 4,
            impurity: Impurity::Gini,
            n_per_group: 100,
            grid_points: 50,
        }
    }
}

/// One accuracy measurement.
#[derive(Debug, Clone)]
pub struct GridCell {
    /// 0 for file-pair runs.
    pub scenario: u8,
    pub method: &'static str,
    pub forest_size: usize,
    pub k: usize,
    pub k_effective: usize,
    pub replicate: usize,
    pub seed: u64,
    pub accuracy: f64,
}

/// splitmix64-style mixing of a seed with context words, for independent
/// per-cell substreams.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x ^= p.wrapping_add(0x9e3779b97f4a7c15);
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        x = z ^ (z >> 31);
    }
    x
}

fn method_index(m: Method) -> u64 {
    match m {
        Method::Frf => 1,
        Method::Afrf => 2,
    }
}

/// All cells for one replicate on a fixed train/test pair.
fn replicate_cells(
    train: &CurveSet,
    test: &CurveSet,
    scenario: u8,
    replicate: usize,
    spec: &GridSpec,
) -> Result<Vec<GridCell>> {
    let k_request = spec.k_grid.iter().copied().max().unwrap_or(5);
    let space = FeatureSpace::fit(train, spec.n_basis, spec.order, k_request, 2)?;
    let sm_train = space.smoothed(train)?;
    let sm_test = space.smoothed(test)?;

    let mut cells = Vec::new();
    for &k in &spec.k_grid {
        let k_eff = k.min(space.k);
        for method in METHODS {
            let ftrain = space.augment(&sm_train, k_eff, method.r_max())?;
            let ftest = space.augment(&sm_test, k_eff, method.r_max())?;
            for &h in &spec.forest_sizes {
                let seed = mix_seed(
                    spec.seed,
                    &[
                        scenario as u64,
                        replicate as u64,
                        k as u64,
                        method_index(method),
                        h as u64,
                    ],
                );
                let params = ForestParams {
                    n_trees: h,
                    mtry: None,
                    seed,
                    bootstrap: true,
                    grow: GrowParams::forest(spec.impurity),
                };
                let forest = train_forest(&ftrain, &params)?;
                let preds = forest.predict(&ftest)?;
                cells.push(GridCell {
                    scenario,
                    method: method.name(),
                    forest_size: h,
                    k,
                    k_effective: k_eff,
                    replicate,
                    seed,
                    accuracy: accuracy(&preds, test.labels()),
                });
            }
        }
    }
    Ok(cells)
}

/// Grid over a fixed train/test pair; replicates vary only the forest seeds.
pub fn run_file_grid(train: &CurveSet, test: &CurveSet, spec: &GridSpec) -> Result<Vec<GridCell>> {
    let results: Vec<Result<Vec<GridCell>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| replicate_cells(train, test, 0, rep, spec))
        .collect();
    flatten(results)
}

/// Grid over one scenario; every replicate regenerates train and test data
/// with a replicate-specific seed.
pub fn run_scenario_grid(scenario: u8, spec: &GridSpec) -> Result<Vec<GridCell>> {
    let results: Vec<Result<Vec<GridCell>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let data_seed = mix_seed(spec.seed, &[scenario as u64, rep as u64, 0xda7a]);
            let config = ScenarioConfig::with_size(
                scenario,
                spec.n_per_group,
                spec.grid_points,
                data_seed,
            )?;
            let (train, test) = generate_split(&config)?;
            replicate_cells(&train, &test, scenario, rep, spec)
        })
        .collect();
    flatten(results)
}

fn flatten(results: Vec<Result<Vec<GridCell>>>) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for r in results {
        cells.extend(r?);
    }
    Ok(cells)
}

/// Long-format results table.
pub fn cells_table(cells: &[GridCell]) -> Table {
    let mut table = Table::new(&[
        "scenario",
        "method",
        "forest_size",
        "k",
        "k_effective",
        "replicate",
        "seed",
        "accuracy",
    ]);
    for c in cells {
        table.push(vec![
            Cell::Int(c.scenario as i64),
            Cell::Str(c.method.into()),
            Cell::Int(c.forest_size as i64),
            Cell::Int(c.k as i64),
            Cell::Int(c.k_effective as i64),
            Cell::Int(c.replicate as i64),
            Cell::Int(c.seed as i64),
            Cell::Float(c.accuracy),
        ]);
    }
    table
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per (scenario, method, forest size) summary over all k and replicates,
/// for box-plot style comparisons.
pub fn summary_table(cells: &[GridCell]) -> Table {
    let mut keys: Vec<(u8, &'static str, usize)> = cells
        .iter()
        .map(|c| (c.scenario, c.method, c.forest_size))
        .collect();
    keys.sort();
    keys.dedup();
    let mut table = Table::new(&[
        "scenario",
        "method",
        "forest_size",
        "n",
        "mean",
        "min",
        "q1",
        "median",
        "q3",
        "max",
    ]);
    for (scenario, method, forest_size) in keys {
        let mut values: Vec<f64> = cells
            .iter()
            .filter(|c| {
                c.scenario == scenario && c.method == method && c.forest_size == forest_size
            })
            .map(|c| c.accuracy)
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        table.push(vec![
            Cell::Int(scenario as i64),
            Cell::Str(method.into()),
            Cell::Int(forest_size as i64),
            Cell::Int(values.len() as i64),
            Cell::Float(mean),
            Cell::Float(values[0]),
            Cell::Float(quantile(&values, 0.25)),
            Cell::Float(quantile(&values, 0.5)),
            Cell::Float(quantile(&values, 0.75)),
            Cell::Float(values[values.len() - 1]),
        ]);
    }
    table
}

/// Mean accuracy of one method over every cell it appears in.
pub fn method_mean(cells: &[GridCell], method: Method) -> f64 {
    let values: Vec<f64> = cells
        .iter()
        .filter(|c| c.method == method.name())
        .map(|c| c.accuracy)
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

/// Peak accuracy of one method across the grid.
pub fn method_peak(cells: &[GridCell], method: Method) -> f64 {
    cells
        .iter()
        .filter(|c| c.method == method.name())
        .map(|c| c.accuracy)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_is_deterministic_and_spreads() {
        let a = mix_seed(1, &[2, 3]);
        let b = mix_seed(1, &[2, 3]);
        let c = mix_seed(1, &[3, 2]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scenario_grid_is_deterministic() {
        let spec = GridSpec {
            forest_sizes: vec![5],
            k_grid: vec![3],
            replicates: 2,
            seed: 7,
            n_per_group: 10,
            grid_points: 30,
            ..Default::default()
        };
        let a = run_scenario_grid(1, &spec).unwrap();
        let b = run_scenario_grid(1, &spec).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), 2 * 2); // reps × methods × 1 k × 1 H
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.accuracy, y.accuracy);
            assert_eq!(x.seed, y.seed);
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&v, 0.0) - 1.0).abs() < 1e-12);
        assert!((quantile(&v, 1.0) - 4.0).abs() < 1e-12);
    }
}
