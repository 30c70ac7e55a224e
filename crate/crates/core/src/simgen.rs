//! Simulated curve scenarios: group mean structures with Gaussian-process
//! noise under the exponential covariance `γ(s,t) = α·exp(-β|t-s|^ν)`.
//!
//! Six standard scenarios are built in, covering jump contamination,
//! amplitude mixtures, localized peaks, and their multi-class compositions.
//! Generation is deterministic per (scenario, seed) with one random
//! substream per group.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::{unit_grid, CurveSet};
use crate::error::{Error, Result};

/// Exponential-family covariance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub alpha: f64,
    pub beta: f64,
    pub nu_exp: f64,
}

impl GpParams {
    pub fn new(alpha: f64, beta: f64, nu_exp: f64) -> Self {
        GpParams {
            alpha,
            beta,
            nu_exp,
        }
    }
}

/// A zero-mean Gaussian process on a fixed grid.
#[derive(Debug, Clone)]
pub struct GpSpec {
    pub params: GpParams,
    pub grid: Vec<f64>,
}

impl GpSpec {
    pub fn new(params: GpParams, grid: Vec<f64>) -> Result<Self> {
        if params.alpha < 0.0 {
            return Err(Error::Validation("covariance scale must be >= 0".into()));
        }
        if params.beta <= 0.0 {
            return Err(Error::Validation("covariance range must be > 0".into()));
        }
        if !(0.0..=2.0).contains(&params.nu_exp) || params.nu_exp == 0.0 {
            return Err(Error::Validation(
                "covariance exponent must lie in (0, 2]".into(),
            ));
        }
        if grid.len() < 2 {
            return Err(Error::Validation("grid needs at least 2 points".into()));
        }
        Ok(GpSpec { params, grid })
    }

    /// The covariance matrix `Γ[i][j] = α·exp(-β|t_i - t_j|^ν)`; the
    /// diagonal is exactly `α`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let t = &self.grid;
        let GpParams {
            alpha,
            beta,
            nu_exp,
        } = self.params;
        DMatrix::from_fn(t.len(), t.len(), |i, j| {
            if i == j {
                alpha
            } else {
                alpha * (-beta * (t[i] - t[j]).abs().powf(nu_exp)).exp()
            }
        })
    }
}

/// Draws `n` curves from the process, one row per curve. The covariance is
/// jittered before factorization (escalating from 1e-10) so near-singular
/// grids still factor; `alpha = 0` short-circuits to exact zeros.
pub fn sample_gp(spec: &GpSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let t_len = spec.grid.len();
    if spec.params.alpha == 0.0 {
        return Ok(DMatrix::zeros(n, t_len));
    }
    let gamma = spec.covariance();
    let mut jitter = 1e-10;
    let chol = loop {
        let mut jittered = gamma.clone();
        for i in 0..t_len {
            jittered[(i, i)] += jitter;
        }
        if let Some(c) = jittered.cholesky() {
            break c;
        }
        jitter *= 10.0;
        if jitter > 1e-2 {
            return Err(Error::Numeric(
                "covariance factorization failed even with jitter".into(),
            ));
        }
    };
    let l = chol.l();
    let mut out = DMatrix::zeros(n, t_len);
    for i in 0..n {
        let z = DVector::from_fn(t_len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        for j in 0..t_len {
            out[(i, j)] = x[j];
        }
    }
    Ok(out)
}

/// Mean-structure model of one group, before Gaussian noise is added.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupModel {
    /// `μ·t`
    Trend { mu: f64 },
    /// `μ·t + q·k·I(T ≤ t)` with `k = ±1` (equal probability) and
    /// `T ~ U[window]`.
    TrendJump { mu: f64, q: f64, window: (f64, f64) },
    /// `a₁·sin θ + a₂·cos θ` with `θ = 2πt` and `a₁, a₂ ~ U[amp]`.
    SineBase { amp: (f64, f64) },
    /// Mixture `(b₁·sin θ + b₂·cos θ)(1-u) + (c₁·sin θ + c₂·cos θ)u`
    /// with `u ~ Bernoulli(p)`.
    SineMix {
        amp_b: (f64, f64),
        amp_c: (f64, f64),
        p: f64,
    },
    /// `μ·t + (-1)^u·q + (-1)^(1-u)·(1/√(rπ))·exp(-z(t-v)^w)` with
    /// `u ~ Bernoulli(0.5)` and `v ~ U[window]`.
    TrendPeak {
        mu: f64,
        q: f64,
        window: (f64, f64),
        r_peak: f64,
        z_peak: f64,
        w_peak: i32,
    },
}

/// One group: a mean model plus its noise process.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub model: GroupModel,
    pub noise: GpParams,
}

/// A full scenario: group specs, per-group sample count, grid, seed.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub groups: Vec<GroupSpec>,
    pub n_per_group: usize,
    pub grid_size: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The published parameterization of scenarios 1–6 with the standard
    /// 100 curves per group on a 50-point grid.
    pub fn standard(scenario: u8, seed: u64) -> Result<Self> {
        Self::with_size(scenario, 100, 50, seed)
    }

    pub fn with_size(
        scenario: u8,
        n_per_group: usize,
        grid_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let groups = scenario_groups(scenario)?;
        if n_per_group < 2 {
            return Err(Error::Validation("need at least 2 curves per group".into()));
        }
        Ok(ScenarioConfig {
            scenario,
            groups,
            n_per_group,
            grid_size,
            seed,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.groups.len()
    }
}

fn scenario_groups(scenario: u8) -> Result<Vec<GroupSpec>> {
    use GroupModel::*;
    let g = |model: GroupModel, alpha: f64, beta: f64, nu: f64| GroupSpec {
        model,
        noise: GpParams::new(alpha, beta, nu),
    };
    let groups = match scenario {
        1 => vec![
            g(Trend { mu: 8.0 }, 1.0, 1.0, 1.0),
            g(
                TrendJump {
                    mu: 8.0,
                    q: 2.0,
                    window: (0.2, 0.5),
                },
                1.0,
                1.0,
                1.0,
            ),
        ],
        2 => vec![
            g(SineBase { amp: (2.0, 10.0) }, 2.0, 0.5, 1.0),
            g(
                SineMix {
                    amp_b: (1.5, 11.5),
                    amp_c: (1.0, 4.0),
                    p: 0.5,
                },
                2.0,
                0.5,
                1.0,
            ),
        ],
        3 => vec![
            g(Trend { mu: 8.0 }, 1.0, 1.0, 1.0),
            g(
                TrendPeak {
                    mu: 8.0,
                    q: 1.8,
                    window: (0.45, 0.55),
                    r_peak: 0.02,
                    z_peak: 90.0,
                    w_peak: 2,
                },
                1.0,
                1.0,
                1.0,
            ),
        ],
        4 => {
            let peak_a = TrendPeak {
                mu: 0.0,
                q: 1.0,
                window: (0.45, 0.45),
                r_peak: 0.02,
                z_peak: 90.0,
                w_peak: 2,
            };
            let peak_b = TrendPeak {
                mu: -2.0,
                q: 1.8,
                window: (0.15, 0.15),
                r_peak: 0.01,
                z_peak: 90.0,
                w_peak: 5,
            };
            vec![
                g(Trend { mu: 0.0 }, 1.3, 1.2, 1.0),
                g(peak_a, 1.3, 1.2, 1.0),
                g(Trend { mu: -2.0 }, 0.8, 0.8, 1.0),
                g(peak_b, 0.8, 0.8, 1.0),
            ]
        }
        5 => {
            let peak_a = TrendPeak {
                mu: 0.0,
                q: 1.8,
                window: (0.45, 0.45),
                r_peak: 0.02,
                z_peak: 90.0,
                w_peak: 2,
            };
            let peak_b = TrendPeak {
                mu: 1.0,
                q: 0.8,
                window: (0.65, 0.65),
                r_peak: 0.02,
                z_peak: 90.0,
                w_peak: 2,
            };
            vec![
                g(Trend { mu: 0.0 }, 1.0, 1.0, 1.0),
                g(peak_a, 1.0, 1.0, 1.0),
                g(peak_b, 1.0, 1.0, 1.0),
            ]
        }
        6 => vec![
            g(Trend { mu: 2.0 }, 2.0, 1.0, 0.5),
            g(
                TrendJump {
                    mu: 2.0,
                    q: 3.0,
                    window: (0.6, 0.75),
                },
                2.0,
                1.0,
                0.5,
            ),
            g(
                TrendJump {
                    mu: 2.0,
                    q: 3.0,
                    window: (0.8, 0.9),
                },
                2.0,
                1.0,
                0.5,
            ),
        ],
        other => {
            return Err(Error::Validation(format!(
                "unknown scenario {other}; valid ids are 1..=6"
            )))
        }
    };
    Ok(groups)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Per-curve randomness of a group model, drawn up front so the draw order
/// is independent of the grid.
#[derive(Debug, Clone, Copy)]
struct CurveDraw {
    k: f64,
    t_jump: f64,
    a1: f64,
    a2: f64,
    u: bool,
    v: f64,
}

fn draw_curve(model: &GroupModel, rng: &mut ChaCha8Rng) -> CurveDraw {
    let mut d = CurveDraw {
        k: 1.0,
        t_jump: 0.0,
        a1: 0.0,
        a2: 0.0,
        u: false,
        v: 0.0,
    };
    match *model {
        GroupModel::Trend { .. } => {}
        GroupModel::TrendJump { window, .. } => {
            d.k = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            d.t_jump = uniform(rng, window.0, window.1);
        }
        GroupModel::SineBase { amp } => {
            d.a1 = uniform(rng, amp.0, amp.1);
            d.a2 = uniform(rng, amp.0, amp.1);
        }
        GroupModel::SineMix { amp_b, amp_c, p } => {
            d.a1 = uniform(rng, amp_b.0, amp_b.1);
            d.a2 = uniform(rng, amp_b.0, amp_b.1);
            let c1 = uniform(rng, amp_c.0, amp_c.1);
            let c2 = uniform(rng, amp_c.0, amp_c.1);
            d.u = rng.gen_bool(p);
            // reuse the slots: when u is set the c-amplitudes apply
            if d.u {
                d.a1 = c1;
                d.a2 = c2;
            }
        }
        GroupModel::TrendPeak { window, .. } => {
            d.u = rng.gen_bool(0.5);
            d.v = uniform(rng, window.0, window.1);
        }
    }
    d
}

fn mean_value(model: &GroupModel, draw: &CurveDraw, t: f64) -> f64 {
    let theta = 2.0 * std::f64::consts::PI * t;
    match *model {
        GroupModel::Trend { mu } => mu * t,
        GroupModel::TrendJump { mu, q, .. } => {
            let jump = if draw.t_jump <= t { 1.0 } else { 0.0 };
            mu * t + q * draw.k * jump
        }
        GroupModel::SineBase { .. } | GroupModel::SineMix { .. } => {
            draw.a1 * theta.sin() + draw.a2 * theta.cos()
        }
        GroupModel::TrendPeak {
            mu,
            q,
            r_peak,
            z_peak,
            w_peak,
            ..
        } => {
            let sign_q = if draw.u { -1.0 } else { 1.0 };
            let peak = (1.0 / (r_peak * std::f64::consts::PI).sqrt())
                * (-z_peak * (t - draw.v).powi(w_peak)).exp();
            mu * t + sign_q * q - sign_q * peak
        }
    }
}

/// Generates the full labeled curve set: `n_per_group` curves per group in
/// group order, labels equal to group indices.
pub fn generate(config: &ScenarioConfig) -> Result<CurveSet> {
    let grid = unit_grid(config.grid_size);
    let n_groups = config.groups.len();
    let n = config.n_per_group;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_groups * n);
    let mut labels: Vec<usize> = Vec::with_capacity(n_groups * n);

    for (gi, group) in config.groups.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1000 + gi as u64);
        let draws: Vec<CurveDraw> = (0..n).map(|_| draw_curve(&group.model, &mut rng)).collect();
        let spec = GpSpec::new(group.noise, grid.clone())?;
        let noise = sample_gp(&spec, n, &mut rng)?;
        for (i, draw) in draws.iter().enumerate() {
            let row: Vec<f64> = grid
                .iter()
                .enumerate()
                .map(|(j, &t)| mean_value(&group.model, draw, t) + noise[(i, j)])
                .collect();
            rows.push(row);
            labels.push(gi);
        }
    }
    CurveSet::from_rows(rows, labels)
}

/// Generates and splits each group evenly into train and test halves.
pub fn generate_split(config: &ScenarioConfig) -> Result<(CurveSet, CurveSet)> {
    let full = generate(config)?;
    let n = config.n_per_group;
    let half = n / 2;
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for gi in 0..config.groups.len() {
        for i in 0..n {
            let row_idx = gi * n + i;
            let row: Vec<f64> = (0..full.n_points())
                .map(|j| full.values()[(row_idx, j)])
                .collect();
            if i < half {
                train_rows.push(row);
                train_labels.push(gi);
            } else {
                test_rows.push(row);
                test_labels.push(gi);
            }
        }
    }
    Ok((
        CurveSet::from_rows(train_rows, train_labels)?,
        CurveSet::from_rows(test_rows, test_labels)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_scale_gives_exactly_zero_noise() {
        let spec = GpSpec::new(GpParams::new(0.0, 1.0, 1.0), unit_grid(20)).unwrap();
        let draws = sample_gp(&spec, 5, &mut rng(1)).unwrap();
        assert!(draws.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_diagonal_is_exactly_alpha() {
        let spec = GpSpec::new(GpParams::new(2.5, 0.5, 1.0), unit_grid(30)).unwrap();
        let gamma = spec.covariance();
        for i in 0..30 {
            assert_eq!(gamma[(i, i)], 2.5);
        }
    }

    // Monte-Carlo oracle: the empirical covariance of many draws matches
    // the analytic covariance entrywise.
    #[test]
    fn empirical_covariance_matches_gamma() {
        let spec = GpSpec::new(GpParams::new(1.0, 1.0, 1.0), unit_grid(25)).unwrap();
        let n = 20000;
        let draws = sample_gp(&spec, n, &mut rng(7)).unwrap();
        let gamma = spec.covariance();
        let emp = draws.transpose() * &draws / n as f64;
        let mut max_diff: f64 = 0.0;
        for i in 0..25 {
            for j in 0..25 {
                max_diff = max_diff.max((emp[(i, j)] - gamma[(i, j)]).abs());
            }
        }
        assert!(max_diff < 0.05, "max covariance error {max_diff}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GpSpec::new(GpParams::new(-1.0, 1.0, 1.0), unit_grid(5)).is_err());
        assert!(GpSpec::new(GpParams::new(1.0, 0.0, 1.0), unit_grid(5)).is_err());
        assert!(GpSpec::new(GpParams::new(1.0, 1.0, 2.5), unit_grid(5)).is_err());
        assert!(ScenarioConfig::standard(7, 1).is_err());
        assert!(ScenarioConfig::standard(0, 1).is_err());
    }

    #[test]
    fn noiseless_trend_group_is_exactly_linear() {
        let mut config = ScenarioConfig::standard(1, 5).unwrap();
        for g in &mut config.groups {
            g.noise.alpha = 0.0;
        }
        config.n_per_group = 3;
        let set = generate(&config).unwrap();
        let grid = unit_grid(config.grid_size);
        for i in 0..3 {
            assert_eq!(set.labels()[i], 0);
            for (j, &t) in grid.iter().enumerate() {
                assert!((set.values()[(i, j)] - 8.0 * t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jump_group_adds_a_step_at_the_jump_time() {
        let draw = CurveDraw {
            k: 1.0,
            t_jump: 0.3,
            a1: 0.0,
            a2: 0.0,
            u: false,
            v: 0.0,
        };
        let model = GroupModel::TrendJump {
            mu: 8.0,
            q: 2.0,
            window: (0.2, 0.5),
        };
        assert_eq!(mean_value(&model, &draw, 0.2), 8.0 * 0.2);
        assert_eq!(mean_value(&model, &draw, 0.3), 8.0 * 0.3 + 2.0);
        assert_eq!(mean_value(&model, &draw, 0.9), 8.0 * 0.9 + 2.0);
    }

    #[test]
    fn peak_group_matches_the_closed_form_at_the_peak() {
        let model = GroupModel::TrendPeak {
            mu: 8.0,
            q: 1.8,
            window: (0.45, 0.55),
            r_peak: 0.02,
            z_peak: 90.0,
            w_peak: 2,
        };
        let v = 0.5;
        let peak_height = 1.0 / (0.02 * std::f64::consts::PI).sqrt();
        for (u, sign) in [(false, 1.0), (true, -1.0)] {
            let draw = CurveDraw {
                k: 1.0,
                t_jump: 0.0,
                a1: 0.0,
                a2: 0.0,
                u,
                v,
            };
            let got = mean_value(&model, &draw, v);
            let expect = 8.0 * v + sign * 1.8 - sign * peak_height;
            assert!((got - expect).abs() < 1e-12, "u={u}: {got} vs {expect}");
        }
    }

    #[test]
    fn generation_is_deterministic_and_balanced() {
        for scenario in 1..=6u8 {
            let config = ScenarioConfig::with_size(scenario, 10, 30, 99).unwrap();
            let a = generate(&config).unwrap();
            let b = generate(&config).unwrap();
            assert_eq!(a.values(), b.values());
            assert_eq!(a.labels(), b.labels());
            let n_classes = config.n_classes();
            for class in 0..n_classes {
                let count = a.labels().iter().filter(|&&l| l == class).count();
                assert_eq!(count, 10, "scenario {scenario} class {class}");
            }
        }
    }

    #[test]
    fn split_halves_every_group() {
        let config = ScenarioConfig::with_size(4, 10, 25, 3).unwrap();
        let (train, test) = generate_split(&config).unwrap();
        assert_eq!(train.n_curves(), 20);
        assert_eq!(test.n_curves(), 20);
        for class in 0..4 {
            assert_eq!(train.labels().iter().filter(|&&l| l == class).count(), 5);
            assert_eq!(test.labels().iter().filter(|&&l| l == class).count(), 5);
        }
    }

    // The jump term has zero expectation (k is symmetric), so the group-2
    // mean over many draws collapses to the linear trend.
    #[test]
    fn group_means_converge_to_the_analytic_mean_structure() {
        let config = ScenarioConfig::with_size(1, 5000, 30, 123).unwrap();
        let set = generate(&config).unwrap();
        let grid = unit_grid(30);
        for class in 0..2 {
            for (j, &t) in grid.iter().enumerate() {
                let mut sum = 0.0;
                let mut count = 0;
                for i in 0..set.n_curves() {
                    if set.labels()[i] == class {
                        sum += set.values()[(i, j)];
                        count += 1;
                    }
                }
                let mean = sum / count as f64;
                assert!(
                    (mean - 8.0 * t).abs() < 0.05,
                    "class {class} t={t}: mean {mean}"
                );
            }
        }
    }

    #[test]
    fn scenario_class_counts_match_the_published_layout() {
        let expect = [2usize, 2, 2, 4, 3, 3];
        for (scenario, &k) in (1..=6u8).zip(expect.iter()) {
            let config = ScenarioConfig::standard(scenario, 1).unwrap();
            assert_eq!(config.n_classes(), k, "scenario {scenario}");
        }
    }
}
