//! Evaluation metrics: effective number of skills, the variational BMI bound,
//! trajectory features, exact t-SNE and held-out discriminability.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::discriminator::Discriminator;
use crate::envs::Goal;
use crate::error::{check_dim, Error, Result};
use crate::numkit::entropy;

/// `exp(H(p))`: how many goals the distribution effectively spreads over.
pub fn effective_num_skills(p: &[f64]) -> Result<f64> {
    Ok(entropy(p)?.exp())
}

/// `H(p) + mean log q(g | f(T))` over `(goal, q)` samples.
pub fn bmi_lower_bound(p: &[f64], samples: &[(Goal, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("BMI bound needs at least one sample"));
    }
    let h = entropy(p)?;
    let mut total = 0.0;
    for &(goal, q) in samples {
        if goal.index() >= p.len() {
            return Err(Error::contract(format!("goal {goal} out of range")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::contract(format!("q must lie in (0, 1], got {q}")));
        }
        total += q.ln();
    }
    Ok(h + total / samples.len() as f64)
}

/// Componentwise mean of a trajectory's observations.
pub fn trajectory_feature<O: AsRef<[f64]>>(observations: &[O]) -> Result<Vec<f64>> {
    let first = observations
        .first()
        .ok_or_else(|| Error::contract("trajectory feature of an empty trajectory"))?;
    let mut mean = vec![0.0; first.as_ref().len()];
    for obs in observations {
        check_dim("trajectory observation", mean.len(), obs.as_ref().len())?;
        mean.iter_mut().zip(obs.as_ref()).for_each(|(m, x)| *m += x);
    }
    let n = observations.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Labelled feature rows, one per trajectory or held-out state.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
    labels: Vec<Goal>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Goal>) -> Result<Self> {
        check_dim("feature labels", rows.len(), labels.len())?;
        if let Some(first) = rows.first() {
            for row in &rows {
                check_dim("feature row", first.len(), row.len())?;
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature values must be finite"));
        }
        Ok(Self { rows, labels })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Goal] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Fraction of rows whose most probable goal is the true label. Ties go to
/// the lowest goal index.
pub fn discriminability_score(model: &Discriminator, heldout: &FeatureMatrix) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::contract("discriminability needs held-out rows"));
    }
    let mut correct = 0usize;
    for (row, label) in heldout.rows.iter().zip(&heldout.labels) {
        let q = model.predict(row)?;
        let mut best = 0;
        for (g, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = g;
            }
        }
        if best == label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / heldout.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Stop once the gradient norm drops below this after the exaggeration
    /// phase. Zero always runs `max_iters`.
    pub min_grad_norm: f64,
    /// Accept `perplexity <= n - 1` and `n >= 2` instead of the usual
    /// `perplexity < (n - 1) / 3` and `n >= 5`. Meant for tiny test inputs.
    pub relax_feasibility: bool,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            learning_rate: 10.0,
            max_iters: 5000,
            seed: 0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            min_grad_norm: 1e-7,
            relax_feasibility: false,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut problems = Vec::new();
        let (min_rows, max_perplexity_ok) = if self.relax_feasibility {
            (2, self.perplexity <= (n as f64 - 1.0))
        } else {
            (5, self.perplexity < (n as f64 - 1.0) / 3.0)
        };
        if n < min_rows {
            problems.push(format!("t-SNE needs at least {min_rows} rows, got {n}"));
        }
        if !(self.perplexity > 1.0) || !max_perplexity_ok {
            problems.push(format!(
                "perplexity {} infeasible for {n} rows",
                self.perplexity
            ));
        }
        if !(self.learning_rate > 0.0) {
            problems.push("learning_rate must be positive".into());
        }
        if self.max_iters < 1 {
            problems.push("max_iters must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Contract(problems.join("; ")))
        }
    }
}

/// Symmetrised affinities `P` with a zero diagonal. Only the strict upper
/// triangle is stored, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct JointProbabilities {
    n: usize,
    upper: Vec<f64>,
    row_entropies: Vec<f64>,
}

impl JointProbabilities {
    pub fn n(&self) -> usize {
        self.n
    }

    fn row_offset(&self, i: usize) -> usize {
        i * self.n - i * (i + 1) / 2
    }

    /// `P_ij` for `j > i`.
    fn upper_row(&self, i: usize) -> &[f64] {
        let start = self.row_offset(i);
        &self.upper[start..start + self.n - i - 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[self.row_offset(i) + j - i - 1],
            std::cmp::Ordering::Greater => self.get(j, i),
        }
    }

    /// Sum over all ordered pairs; 1 for a valid joint distribution.
    pub fn total(&self) -> f64 {
        2.0 * self.upper.iter().sum::<f64>()
    }

    /// Entropy (nats) of each calibrated conditional row `p(.|i)`.
    pub fn row_entropies(&self) -> &[f64] {
        &self.row_entropies
    }
}

const BANDWIDTH_SEARCH_STEPS: usize = 50;
const ENTROPY_TOLERANCE: f64 = 1e-5;
/// Affinities below this are stored as zero.
const NEGLIGIBLE_AFFINITY: f64 = 1.5e-154;

/// Calibrates each row's Gaussian bandwidth to the target perplexity, then
/// symmetrises: `P_ij = (p_j|i + p_i|j) / 2n`.
pub fn joint_probabilities(rows: &[Vec<f64>], perplexity: f64) -> Result<JointProbabilities> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::contract(
            "joint probabilities need at least two rows",
        ));
    }
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    let mut row_entropies = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        for (j, d) in d2.iter_mut().enumerate() {
            *d = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
        let others = || (0..n).filter(move |&j| j != i);
        let d_min = others().map(|j| d2[j]).fold(f64::INFINITY, f64::min);
        let d_mean = others().map(|j| d2[j] - d_min).sum::<f64>() / (n - 1) as f64;
        let row = &mut cond[i * n..(i + 1) * n];
        // entropy of the row at precision beta; shifts by d_min to avoid underflow
        let evaluate = |beta: f64, row: &mut [f64]| -> f64 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in others() {
                let shifted = d2[j] - d_min;
                let w = (-beta * shifted).exp();
                row[j] = w;
                sum += w;
                weighted += shifted * w;
            }
            for j in others() {
                row[j] /= sum;
            }
            sum.ln() + beta * weighted / sum
        };
        let mut beta = if d_mean > 0.0 { 1.0 / d_mean } else { 1.0 };
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut h = evaluate(beta, row);
        for _ in 0..BANDWIDTH_SEARCH_STEPS {
            if (h - target).abs() < ENTROPY_TOLERANCE {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() {
                    0.5 * (beta + hi)
                } else {
                    2.0 * beta
                };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            h = evaluate(beta, row);
        }
        row_entropies[i] = h;
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let v = (cond[i * n + j] + cond[j * n + i]) * scale;
            upper.push(if v < NEGLIGIBLE_AFFINITY { 0.0 } else { v });
        }
    }
    Ok(JointProbabilities {
        n,
        upper,
        row_entropies,
    })
}

/// Student-t kernel sums over unordered pairs: per-row attractive and
/// repulsive forces, and the normaliser `Z`. The reduction order is fixed, so
/// the result is bit-reproducible.
fn pair_forces(p: &JointProbabilities, ys: &[[f64; 2]], forces: &mut [[f64; 4]]) -> f64 {
    const LANES: usize = 4;
    let n = ys.len();
    let xs: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let yv: Vec<f64> = ys.iter().map(|y| y[1]).collect();
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; n];
    let mut z_half = 0.0;
    let fold = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
    for i in 0..n {
        let (xi, yi) = (xs[i], yv[i]);
        let prow = p.upper_row(i);
        let m = prow.len();
        let xj = &xs[i + 1..];
        let yj = &yv[i + 1..];
        let ax_j = &mut ax[i + 1..];
        let ay_j = &mut ay[i + 1..];
        let rx_j = &mut rx[i + 1..];
        let ry_j = &mut ry[i + 1..];
        let mut acc = [[0.0; LANES]; 5];
        let chunks = m / LANES * LANES;
        let lanes = xj[..chunks]
            .chunks_exact(LANES)
            .zip(yj[..chunks].chunks_exact(LANES))
            .zip(prow[..chunks].chunks_exact(LANES))
            .zip(ax_j[..chunks].chunks_exact_mut(LANES))
            .zip(ay_j[..chunks].chunks_exact_mut(LANES))
            .zip(rx_j[..chunks].chunks_exact_mut(LANES))
            .zip(ry_j[..chunks].chunks_exact_mut(LANES));
        for ((((((xc, yc), pc), axc), ayc), rxc), ryc) in lanes {
            for l in 0..LANES {
                let dx = xi - xc[l];
                let dy = yi - yc[l];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                let pw = pc[l] * w;
                let ww = w * w;
                let (pax, pay, prx, pry) = (pw * dx, pw * dy, ww * dx, ww * dy);
                acc[0][l] += pax;
                acc[1][l] += pay;
                acc[2][l] += prx;
                acc[3][l] += pry;
                acc[4][l] += w;
                axc[l] -= pax;
                ayc[l] -= pay;
                rxc[l] -= prx;
                ryc[l] -= pry;
            }
        }
        for k in chunks..m {
            let dx = xi - xj[k];
            let dy = yi - yj[k];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            let pw = prow[k] * w;
            let ww = w * w;
            let (pax, pay, prx, pry) = (pw * dx, pw * dy, ww * dx, ww * dy);
            acc[0][0] += pax;
            acc[1][0] += pay;
            acc[2][0] += prx;
            acc[3][0] += pry;
            acc[4][0] += w;
            ax_j[k] -= pax;
            ay_j[k] -= pay;
            rx_j[k] -= prx;
            ry_j[k] -= pry;
        }
        ax[i] += fold(acc[0]);
        ay[i] += fold(acc[1]);
        rx[i] += fold(acc[2]);
        ry[i] += fold(acc[3]);
        z_half += fold(acc[4]);
    }
    for i in 0..n {
        forces[i] = [ax[i], ay[i], rx[i], ry[i]];
    }
    2.0 * z_half
}

/// `dKL(P || Q)/dy` with `P` scaled by `exaggeration`.
pub fn kl_gradient(
    p: &JointProbabilities,
    ys: &[[f64; 2]],
    exaggeration: f64,
) -> Result<Vec<[f64; 2]>> {
    check_dim("embedding rows", p.n, ys.len())?;
    let mut forces = vec![[0.0; 4]; ys.len()];
    let mut grad = vec![[0.0; 2]; ys.len()];
    gradient_into(p, ys, exaggeration, &mut forces, &mut grad);
    Ok(grad)
}

fn gradient_into(
    p: &JointProbabilities,
    ys: &[[f64; 2]],
    exaggeration: f64,
    forces: &mut [[f64; 4]],
    grad: &mut [[f64; 2]],
) {
    let z = pair_forces(p, ys, forces);
    for (g, f) in grad.iter_mut().zip(forces.iter()) {
        g[0] = 4.0 * (exaggeration * f[0] - f[2] / z);
        g[1] = 4.0 * (exaggeration * f[1] - f[3] / z);
    }
}

/// `KL(P || Q)` for the embedding `ys`, skipping zero entries of `P`.
pub fn kl_divergence(p: &JointProbabilities, ys: &[[f64; 2]]) -> Result<f64> {
    let n = p.n;
    check_dim("embedding rows", n, ys.len())?;
    let kernel = |i: usize, j: usize| {
        let dx = ys[i][0] - ys[j][0];
        let dy = ys[i][1] - ys[j][1];
        1.0 / (1.0 + dx * dx + dy * dy)
    };
    let mut z_half = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            z_half += kernel(i, j);
        }
    }
    let z = 2.0 * z_half;
    let mut kl_half = 0.0;
    for i in 0..n {
        for (k, &pij) in p.upper_row(i).iter().enumerate() {
            if pij > 0.0 {
                kl_half += pij * (pij * z / kernel(i, i + 1 + k)).ln();
            }
        }
    }
    Ok(2.0 * kl_half)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneResult {
    /// Centred 2-D coordinates, one per input row.
    pub embedding: Vec<[f64; 2]>,
    pub row_entropies: Vec<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub iterations: usize,
}

const MIN_GAIN: f64 = 0.01;

/// Exact t-SNE to two dimensions: early exaggeration, momentum switch and
/// per-coordinate adaptive gains.
pub fn tsne_embed(features: &FeatureMatrix, cfg: &TsneConfig) -> Result<TsneResult> {
    let n = features.len();
    cfg.validate(n)?;
    let p = joint_probabilities(&features.rows, cfg.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut ys: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let initial_kl = kl_divergence(&p, &ys)?;

    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut forces = vec![[0.0; 4]; n];
    let mut grad = vec![[0.0; 2]; n];
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        let exaggerating = it < cfg.exaggeration_iters;
        let exaggeration = if exaggerating { cfg.exaggeration } else { 1.0 };
        let momentum = if exaggerating {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        gradient_into(&p, &ys, exaggeration, &mut forces, &mut grad);
        let mut norm_sq = 0.0;
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                norm_sq += g * g;
                gains[i][d] = if (update[i][d] > 0.0) != (g > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                };
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * g;
                ys[i][d] += update[i][d];
            }
        }
        iterations = it + 1;
        if !exaggerating && norm_sq.sqrt() < cfg.min_grad_norm {
            break;
        }
    }

    for d in 0..2 {
        let mean = ys.iter().map(|y| y[d]).sum::<f64>() / n as f64;
        ys.iter_mut().for_each(|y| y[d] -= mean);
    }
    let final_kl = kl_divergence(&p, &ys)?;
    if ys.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::contract("t-SNE diverged"));
    }
    Ok(TsneResult {
        embedding: ys,
        row_entropies: p.row_entropies,
        initial_kl,
        final_kl,
        iterations,
    })
}
