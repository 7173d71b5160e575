//! Discrete-time fixed-effects regressions of posting counts on lagged
//! network exposure: linear (within estimator) and conditional Poisson.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Adjacency;
use crate::panel::CovariateTable;

/// Columns whose within-actor residual norm falls below this fraction of
/// their raw norm are omitted.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("nothing to estimate: {0}")]
    Empty(String),
    #[error("poisson fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e}); last iterate {last:?}")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub actor: usize,
    /// Wave of the outcome, 1-based; rows start at wave 2.
    pub wave: usize,
    pub posts: f64,
    /// Ties the actor gained between waves `wave − 1` and `wave`.
    pub new_friends_lag: f64,
    /// Sum of lagged posts over the actor's friends at wave `wave − 1`.
    pub friends_posts_lag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPanel {
    pub rows: Vec<RegressionRow>,
    pub n_actors: usize,
    pub n_waves: usize,
    pub covariates: CovariateTable,
}

/// One row per actor and wave `2..=T`.
pub fn build_regression_panel(
    counts: &[Vec<u64>],
    networks: &[Adjacency],
    covariates: &CovariateTable,
) -> Result<RegressionPanel, BaselineError> {
    if counts.len() != networks.len() {
        return Err(BaselineError::Misaligned(format!(
            "{} count waves but {} network waves",
            counts.len(),
            networks.len()
        )));
    }
    if counts.len() < 2 {
        return Err(BaselineError::Misaligned("need at least two waves".into()));
    }
    let n = covariates.len();
    if let Some(w) = counts.iter().position(|c| c.len() != n) {
        return Err(BaselineError::Misaligned(format!("wave {} has {} counts for {n} actors", w + 1, counts[w].len())));
    }
    if let Some(w) = networks.iter().position(|a| a.n_actors() != n) {
        return Err(BaselineError::Misaligned(format!("wave {} network has the wrong actor count", w + 1)));
    }
    let mut rows = Vec::with_capacity(n * (counts.len() - 1));
    for t in 1..counts.len() {
        for i in 0..n {
            rows.push(RegressionRow {
                actor: i,
                wave: t + 1,
                posts: counts[t][i] as f64,
                new_friends_lag: networks[t - 1].actor_ties_added_by(&networks[t], i) as f64,
                friends_posts_lag: networks[t - 1].neighbors(i).map(|j| counts[t - 1][j] as f64).sum(),
            });
        }
    }
    Ok(RegressionPanel {
        rows,
        n_actors: n,
        n_waves: counts.len(),
        covariates: covariates.clone(),
    })
}

impl RegressionPanel {
    /// Design matrix: lagged exposure, covariates, gender dummies against the
    /// lowest code, and wave dummies against wave 2.
    pub fn design(&self) -> (Vec<String>, DMatrix<f64>, DVector<f64>, Vec<usize>) {
        let codes = self.covariates.gender_codes();
        let mut names = vec![
            "New friends (t-1)".to_string(),
            "Friends' posts (t-1)".to_string(),
            "Age".to_string(),
            "SNS tenure".to_string(),
        ];
        let gender_names: Vec<String> = if codes.len() == 2 {
            vec!["Gender".to_string()]
        } else {
            codes.iter().skip(1).map(|c| format!("Gender={c}")).collect()
        };
        names.extend(gender_names);
        names.extend((3..=self.n_waves).map(|w| format!("Wave {w}")));
        let k = names.len();
        let x = DMatrix::from_fn(self.rows.len(), k, |r, c| {
            let row = &self.rows[r];
            let i = row.actor;
            match c {
                0 => row.new_friends_lag,
                1 => row.friends_posts_lag,
                2 => self.covariates.age[i] as f64,
                3 => self.covariates.tenure_days[i] as f64,
                _ if c < 4 + codes.len().saturating_sub(1) => {
                    (self.covariates.gender[i] == codes[c - 4 + 1]) as u8 as f64
                }
                _ => {
                    let wave = c - (4 + codes.len().saturating_sub(1)) + 3;
                    (row.wave == wave) as u8 as f64
                }
            }
        });
        let y = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.posts));
        let groups = self.rows.iter().map(|r| r.actor).collect();
        (names, x, y, groups)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    /// `None` when the regressor was omitted.
    pub estimate: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_groups: usize,
    pub iterations: usize,
    pub notices: Vec<String>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// One row per regressor: `estimate (SE)` or `(omitted)`.
    pub fn render(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        writeln!(out, "{}", self.model).unwrap();
        for c in &self.coefficients {
            let cell = match (c.estimate, c.se) {
                (Some(b), Some(se)) => format!("{b:.4}{} ({se:.4})", crate::estimator::significance_stars(b, se)),
                _ => "(omitted)".to_string(),
            };
            writeln!(out, "{:<width$}  {cell}", c.name).unwrap();
        }
        writeln!(out, "observations {}, actors {}", self.n_obs, self.n_groups).unwrap();
        for n in &self.notices {
            writeln!(out, "note: {n}").unwrap();
        }
        out
    }
}

/// Subtracts group means from every column of `m`.
fn demean(m: &DMatrix<f64>, groups: &[usize], n_groups: usize) -> DMatrix<f64> {
    let mut sums = DMatrix::<f64>::zeros(n_groups, m.ncols());
    let mut counts = vec![0usize; n_groups];
    for (r, &g) in groups.iter().enumerate() {
        counts[g] += 1;
        for c in 0..m.ncols() {
            sums[(g, c)] += m[(r, c)];
        }
    }
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let g = groups[r];
        m[(r, c)] - sums[(g, c)] / counts[g] as f64
    })
}

/// Greedy selection of columns with within-group variation not explained by
/// earlier kept columns.
fn independent_columns(within: &DMatrix<f64>, raw: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for c in 0..within.ncols() {
        let scale = raw.column(c).norm().max(1e-300);
        let mut v: DVector<f64> = within.column(c).into_owned();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > COLLINEAR_TOL * scale {
            basis.push(v / norm);
            kept.push(c);
        }
    }
    kept
}

fn dense_groups(groups: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dense = groups.iter().map(|g| ids.binary_search(g).unwrap()).collect();
    (dense, ids.len())
}

fn assemble(names: &[String], kept: &[usize], est: &[f64], se: &[f64]) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(c, name)| match kept.iter().position(|&k| k == c) {
            Some(p) => Coefficient {
                name: name.clone(),
                estimate: Some(est[p]),
                se: Some(se[p]),
            },
            None => Coefficient {
                name: name.clone(),
                estimate: None,
                se: None,
            },
        })
        .collect()
}

/// Within (actor-demeaned) OLS with conventional standard errors.
pub fn fe_ols_design(names: &[String], x: &DMatrix<f64>, y: &DVector<f64>, groups: &[usize]) -> Result<FitResult, BaselineError> {
    let (groups, n_groups) = dense_groups(groups);
    let xw = demean(x, &groups, n_groups);
    let yw = demean(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()), &groups, n_groups).column(0).into_owned();
    let kept = independent_columns(&xw, x);
    let k = kept.len();
    let dof = y.len() as i64 - n_groups as i64 - k as i64;
    if dof <= 0 {
        return Err(BaselineError::Empty(format!("{dof} residual degrees of freedom")));
    }
    let xk = xw.select_columns(&kept);
    let xtx = xk.transpose() * &xk;
    let inv = xtx.try_inverse().ok_or_else(|| BaselineError::Empty("singular design".into()))?;
    let beta = &inv * xk.transpose() * &yw;
    let resid = &yw - &xk * &beta;
    let s2 = resid.norm_squared() / dof as f64;
    let se: Vec<f64> = (0..k).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect();
    let omitted: Vec<&str> = (0..names.len())
        .filter(|c| !kept.contains(c))
        .map(|c| names[c].as_str())
        .collect();
    let mut notices = Vec::new();
    if !omitted.is_empty() {
        notices.push(format!("omitted for lack of within-actor variation: {}", omitted.join(", ")));
    }
    Ok(FitResult {
        model: "Fixed-effects linear regression".into(),
        coefficients: assemble(names, &kept, beta.as_slice(), &se),
        n_obs: y.len(),
        n_groups,
        iterations: 1,
        notices,
    })
}

pub fn fe_ols(panel: &RegressionPanel) -> Result<FitResult, BaselineError> {
    let (names, x, y, groups) = panel.design();
    fe_ols_design(&names, &x, &y, &groups)
}

/// Conditional log-likelihood, gradient and Hessian of the fixed-effects
/// Poisson model with the actor effects conditioned out.
fn poisson_parts(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    members: &[Vec<usize>],
    beta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let k = beta.len();
    let eta = x * beta;
    let mut ll = 0.0;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for rows in members {
        let n_i: f64 = rows.iter().map(|&r| y[r]).sum();
        let max = rows.iter().map(|&r| eta[r]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = rows.iter().map(|&r| (eta[r] - max).exp()).sum();
        let mut xbar = DVector::zeros(k);
        let mut xx = DMatrix::zeros(k, k);
        for &r in rows {
            let p = (eta[r] - max).exp() / denom;
            let xr = x.row(r).transpose();
            if y[r] > 0.0 {
                ll += y[r] * p.ln();
            }
            g += &xr * y[r];
            xbar += &xr * p;
            xx += &xr * xr.transpose() * p;
        }
        g -= &xbar * n_i;
        h -= (xx - &xbar * xbar.transpose()) * n_i;
    }
    (ll, g, h)
}

/// Conditional fixed-effects Poisson fit by Newton's method; converged when
/// the gradient norm drops below 1e-8.
pub fn fe_poisson_design(names: &[String], x: &DMatrix<f64>, y: &DVector<f64>, groups: &[usize]) -> Result<FitResult, BaselineError> {
    const MAX_ITER: usize = 100;
    if y.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
        return Err(BaselineError::Empty("outcome must be non-negative integers".into()));
    }
    let (dense, n_all) = dense_groups(groups);
    let mut totals = vec![0.0; n_all];
    for (r, &g) in dense.iter().enumerate() {
        totals[g] += y[r];
    }
    let mut notices = Vec::new();
    let zero_groups = totals.iter().filter(|&&t| t == 0.0).count();
    if zero_groups > 0 {
        notices.push(format!("dropped {zero_groups} actors whose outcome is zero in every wave"));
    }
    let keep_rows: Vec<usize> = (0..y.len()).filter(|&r| totals[dense[r]] > 0.0).collect();
    if keep_rows.is_empty() {
        return Err(BaselineError::Empty("every actor has an all-zero outcome".into()));
    }
    let xs = x.select_rows(&keep_rows);
    let ys = DVector::from_iterator(keep_rows.len(), keep_rows.iter().map(|&r| y[r]));
    let (g_sub, n_groups) = dense_groups(&keep_rows.iter().map(|&r| dense[r]).collect::<Vec<_>>());
    let kept = independent_columns(&demean(&xs, &g_sub, n_groups), &xs);
    let omitted: Vec<&str> = (0..names.len())
        .filter(|c| !kept.contains(c))
        .map(|c| names[c].as_str())
        .collect();
    if !omitted.is_empty() {
        notices.push(format!("omitted for lack of within-actor variation: {}", omitted.join(", ")));
    }
    let xk = xs.select_columns(&kept);
    let mut members = vec![Vec::new(); n_groups];
    for (r, &g) in g_sub.iter().enumerate() {
        members[g].push(r);
    }

    let mut beta = DVector::zeros(kept.len());
    let (mut ll, mut g, mut h) = poisson_parts(&xk, &ys, &members, &beta);
    let mut iterations = 0;
    while g.norm() >= 1e-8 {
        if iterations == MAX_ITER {
            return Err(BaselineError::NonConvergence {
                iterations,
                gradient_norm: g.norm(),
                last: beta.iter().copied().collect(),
            });
        }
        iterations += 1;
        let step = match (-&h).clone().cholesky() {
            Some(c) => c.solve(&g),
            None => return Err(BaselineError::Empty("information matrix is not positive definite".into())),
        };
        let mut t = 1.0;
        loop {
            let cand = &beta + &step * t;
            let parts = poisson_parts(&xk, &ys, &members, &cand);
            if parts.0 >= ll - 1e-12 * ll.abs().max(1.0) || t < 1e-10 {
                beta = cand;
                (ll, g, h) = parts;
                break;
            }
            t *= 0.5;
        }
    }
    let cov = (-&h)
        .try_inverse()
        .ok_or_else(|| BaselineError::Empty("singular information matrix".into()))?;
    let se: Vec<f64> = (0..kept.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        model: "Fixed-effects Poisson regression (conditional likelihood)".into(),
        coefficients: assemble(names, &kept, beta.as_slice(), &se),
        n_obs: keep_rows.len(),
        n_groups,
        iterations,
        notices,
    })
}

pub fn fe_poisson(panel: &RegressionPanel) -> Result<FitResult, BaselineError> {
    let (names, x, y, groups) = panel.design();
    fe_poisson_design(&names, &x, &y, &groups)
}
