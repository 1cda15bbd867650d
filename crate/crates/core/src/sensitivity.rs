//! Path-space Fisher information, integrated autocorrelation and the
//! gradient-free sensitivity bounds built from them.

use serde::{Deserialize, Serialize};

use crate::accumulator::TrajectoryAccumulator;
use crate::error::{Error, Result};

/// Two-sided normal quantile used for every reported half-width.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FimEstimate {
    pub names: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub half_widths: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub window: (f64, f64),
}

impl FimEstimate {
    /// Wraps a known matrix (e.g. a published table) with zero half-widths.
    pub fn exact(names: Vec<String>, matrix: Vec<Vec<f64>>) -> Self {
        let l = matrix.len();
        Self {
            names,
            half_widths: vec![vec![0.0; l]; l],
            matrix,
            n_traj: 0,
            window: (0.0, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.matrix[k][k]).collect()
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        quadratic_form(&self.matrix, v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IafEstimate {
    pub label: String,
    pub value: f64,
    pub window: f64,
    pub n_traj: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub observable: String,
    pub direction: String,
    pub iaf: f64,
    pub quadratic_form: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBoundReport {
    pub entries: Vec<BoundEntry>,
    pub fim_n_traj: usize,
    pub fim_window: (f64, f64),
    pub iaf_n_traj: Vec<usize>,
}

impl SensitivityBoundReport {
    pub fn bound(&self, observable: &str, direction: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.observable == observable && e.direction == direction)
            .map(|e| e.bound)
    }
}

/// A named direction in parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub label: String,
    pub v: Vec<f64>,
}

impl Direction {
    /// `e_k` for every parameter, labelled by parameter name.
    pub fn canonical(names: &[String]) -> Vec<Direction> {
        (0..names.len())
            .map(|k| {
                let mut v = vec![0.0; names.len()];
                v[k] = 1.0;
                Direction {
                    label: names[k].clone(),
                    v,
                }
            })
            .collect()
    }
}

pub fn quadratic_form(m: &[Vec<f64>], v: &[f64]) -> f64 {
    m.iter()
        .zip(v)
        .map(|(row, &va)| va * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Across-trajectory mean of the time-averaged FIM integrand, with 95% half-widths.
///
/// Each accumulator must have been run with FIM recording on and the same window.
pub fn accumulate_fim(
    names: &[String],
    trajectories: &[&TrajectoryAccumulator],
) -> Result<FimEstimate> {
    let l = names.len();
    let mut rates = Vec::with_capacity(trajectories.len());
    let mut window = (f64::INFINITY, 0.0f64);
    for acc in trajectories {
        if !(acc.sampled_time > 0.0) {
            return Err(Error::EmptyWindow);
        }
        let rate = acc.fim_rate().ok_or_else(|| {
            Error::InvalidParams("trajectory was run without FIM recording".into())
        })?;
        if rate.len() != l {
            return Err(Error::InvalidParams(format!(
                "FIM has dimension {}, expected {l}",
                rate.len()
            )));
        }
        window.0 = window.0.min(acc.record_from);
        window.1 = window.1.max(acc.clock);
        rates.push(rate);
    }
    if rates.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = rates.len() as f64;
    let mut matrix = vec![vec![0.0; l]; l];
    let mut half_widths = vec![vec![0.0; l]; l];
    for a in 0..l {
        for b in 0..l {
            let vals: Vec<f64> = rates.iter().map(|r| r[a][b]).collect();
            let (mean, var) = mean_var(&vals);
            matrix[a][b] = mean;
            half_widths[a][b] = if rates.len() > 1 {
                Z95 * (var / n).sqrt()
            } else {
                f64::INFINITY
            };
        }
    }
    Ok(FimEstimate {
        names: names.to_vec(),
        matrix,
        half_widths,
        n_traj: rates.len(),
        window,
    })
}

/// Sample variance of the window integrals `Y_k` divided by the window length.
pub fn estimate_iaf(label: &str, samples: &[f64], window: f64) -> Result<IafEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParams(format!(
            "window length must be positive, got {window}"
        )));
    }
    let (_, var) = mean_var(samples);
    Ok(IafEstimate {
        label: label.into(),
        value: var / window,
        window,
        n_traj: samples.len(),
    })
}

fn check_form(q: f64, scale: f64) -> Result<f64> {
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if q < -tol {
        return Err(Error::NegativeQuadraticForm(q));
    }
    Ok(q.max(0.0))
}

fn trace_abs(m: &[Vec<f64>], v: &[f64]) -> f64 {
    // magnitude scale for the rounding tolerance of vᵀMv
    m.iter()
        .zip(v)
        .map(|(row, &va)| {
            row.iter()
                .zip(v)
                .map(|(a, b)| (va * a * b).abs())
                .sum::<f64>()
        })
        .sum()
}

/// `sqrt(IAF) · sqrt(vᵀ I v)` for every observable and direction.
pub fn combine_bounds(
    fim: &FimEstimate,
    iafs: &[IafEstimate],
    directions: &[Direction],
) -> Result<SensitivityBoundReport> {
    let l = fim.dim();
    let mut entries = Vec::with_capacity(iafs.len() * directions.len());
    let mut forms = Vec::with_capacity(directions.len());
    for d in directions {
        if d.v.len() != l {
            return Err(Error::InvalidParams(format!(
                "direction {} has dimension {}, expected {l}",
                d.label,
                d.v.len()
            )));
        }
        let q = fim.quadratic_form(&d.v);
        forms.push(check_form(q, trace_abs(&fim.matrix, &d.v))?);
    }
    for iaf in iafs {
        if iaf.value < 0.0 {
            return Err(Error::InvalidParams(format!(
                "negative IAF for {}",
                iaf.label
            )));
        }
        for (d, &q) in directions.iter().zip(&forms) {
            entries.push(BoundEntry {
                observable: iaf.label.clone(),
                direction: d.label.clone(),
                iaf: iaf.value,
                quadratic_form: q,
                bound: iaf.value.sqrt() * q.sqrt(),
            });
        }
    }
    Ok(SensitivityBoundReport {
        entries,
        fim_n_traj: fim.n_traj,
        fim_window: fim.window,
        iaf_n_traj: iafs.iter().map(|i| i.n_traj).collect(),
    })
}

/// Finite-horizon bound `sqrt(var) · sqrt(vᵀ (T·I) v)`.
pub fn transient_bound(varhat: f64, fim_rate: &[Vec<f64>], horizon: f64, v: &[f64]) -> Result<f64> {
    if !(varhat >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "variance must be nonnegative, got {varhat}"
        )));
    }
    if v.len() != fim_rate.len() {
        return Err(Error::InvalidParams("direction dimension mismatch".into()));
    }
    let q = check_form(
        horizon * quadratic_form(fim_rate, v),
        horizon * trace_abs(fim_rate, v),
    )?;
    Ok(varhat.sqrt() * q.sqrt())
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|k| format!("c{k}")).collect()
    }

    fn diag(d: &[f64]) -> Vec<Vec<f64>> {
        (0..d.len())
            .map(|i| {
                (0..d.len())
                    .map(|j| if i == j { d[i] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn iaf_of_constant_samples_is_zero() {
        let e = estimate_iaf("one", &[5.0; 10], 5.0).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(matches!(
            estimate_iaf("x", &[1.0], 1.0),
            Err(Error::InsufficientSamples(1))
        ));
    }

    #[test]
    fn iaf_is_variance_over_window() {
        let e = estimate_iaf("x", &[1.0, 3.0], 2.0).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn bound_arithmetic() {
        let fim = FimEstimate::exact(names(4), diag(&[87.5, 1670.0, 200.0, 24.6]));
        let iaf = IafEstimate {
            label: "X".into(),
            value: 5.87e5,
            window: 1e5,
            n_traj: 100,
        };
        let r = combine_bounds(&fim, &[iaf], &Direction::canonical(&fim.names)).unwrap();
        let b3 = r.bound("X", "c3").unwrap();
        assert!((b3 - (5.87e5f64 * 200.0).sqrt()).abs() < 1e-9);
        assert!((b3 - 1.0835e4).abs() < 1.0);
    }

    #[test]
    fn zero_iaf_gives_zero_bounds() {
        let fim = FimEstimate::exact(names(2), diag(&[1.0, 2.0]));
        let iaf = IafEstimate {
            label: "X".into(),
            value: 0.0,
            window: 1.0,
            n_traj: 2,
        };
        let r = combine_bounds(&fim, &[iaf], &Direction::canonical(&fim.names)).unwrap();
        assert!(r.entries.iter().all(|e| e.bound == 0.0));
    }

    #[test]
    fn negative_form_rejected() {
        let fim = FimEstimate::exact(names(2), diag(&[1.0, -2.0]));
        let iaf = IafEstimate {
            label: "X".into(),
            value: 1.0,
            window: 1.0,
            n_traj: 2,
        };
        let err = combine_bounds(&fim, &[iaf], &Direction::canonical(&fim.names)).unwrap_err();
        assert!(matches!(err, Error::NegativeQuadraticForm(_)));
    }

    #[test]
    fn transient_examples() {
        let id = diag(&[1.0, 1.0]);
        assert_eq!(transient_bound(0.0, &id, 1.0, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(transient_bound(4.0, &id, 1.0, &[1.0, 0.0]).unwrap(), 2.0);
        assert!(transient_bound(-1.0, &id, 1.0, &[1.0, 0.0]).is_err());
    }
}
