//! Soft-margin kernel SVM trained by SMO, one binary machine per class pair,
//! combined by pairwise voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier, LabeledDataset, Prediction};
use crate::error::{Error, Result};
use crate::ingest::FaultLabel;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// RBF kernel width: `K(u, v) = exp(-gamma |u - v|^2)`.
    pub gamma: f64,
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            c: 1.0,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

/// Decision function `f(x) = sum_j coef_j K(sv_j, x) + bias` for one pair;
/// positive values vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: FaultLabel,
    pub negative: FaultLabel,
    /// Indices into the model's support vector pool.
    pub support: Vec<usize>,
    /// `alpha_j * y_j` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
}

impl BinaryMachine {
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&s, c)| c * kernel_row[s])
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub feature_dim: usize,
    pub classes: Vec<FaultLabel>,
    pub support_vectors: Vec<Vec<f64>>,
    pub machines: Vec<BinaryMachine>,
}

fn rbf(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

struct PairSolution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: u64,
}

/// SMO with maximal-violating-pair working set selection on the dual
/// `min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0`.
fn solve_pair(q: impl Fn(usize, usize) -> f64, y: &[f64], params: &SvmParams) -> Option<PairSolution> {
    let n = y.len();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0u64;
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    loop {
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !at_upper(alpha[t]) } else { !at_lower(alpha[t]) };
            let in_low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t]) };
            if in_up && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tolerance {
            break;
        }
        if iterations >= params.max_iterations {
            return None;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ii = q(i, i);
        let q_jj = q(j, j);
        let q_ij = q(i, j);
        if y[i] != y[j] {
            let quad = (q_ii + q_jj + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q_ii + q_jj - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        (ub + lb) / 2.0
    };
    Some(PairSolution {
        alpha,
        rho,
        iterations,
    })
}

pub fn train_svm(data: &LabeledDataset, params: &SvmParams) -> Result<SvmModel> {
    if !(params.gamma > 0.0 && params.c > 0.0 && params.tolerance > 0.0) {
        return Err(Error::InvalidConfig(
            "svm gamma, C and tolerance must be positive".into(),
        ));
    }
    let classes = data.require_classes()?;
    let rows = data.rows();
    let n = rows.len();

    // One Gram matrix shared by every pair.
    let gram: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| rbf(params.gamma, &rows[i].features, &rows[j].features))
        })
        .collect();

    let mut pairs = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            pairs.push((pos, neg));
        }
    }

    let solved: Vec<(FaultLabel, FaultLabel, Vec<usize>, PairSolution)> = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let members: Vec<usize> = (0..n)
                .filter(|&i| rows[i].label == pos || rows[i].label == neg)
                .collect();
            let y: Vec<f64> = members
                .iter()
                .map(|&i| if rows[i].label == pos { 1.0 } else { -1.0 })
                .collect();
            let q = |s: usize, t: usize| y[s] * y[t] * gram[members[s] * n + members[t]];
            solve_pair(q, &y, params)
                .map(|sol| {
                    let alpha_y = sol.alpha.iter().zip(&y).map(|(a, yy)| a * yy).collect();
                    (pos, neg, members.clone(), PairSolution { alpha: alpha_y, ..sol })
                })
                .ok_or_else(|| Error::NoConvergence(pos.to_string(), neg.to_string()))
        })
        .collect::<Result<_>>()?;

    // Pool support vectors across machines, keyed by training index.
    let mut pool_index = vec![usize::MAX; n];
    let mut support_vectors = Vec::new();
    let mut machines = Vec::with_capacity(solved.len());
    for (pos, neg, members, sol) in solved {
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for (k, &i) in members.iter().enumerate() {
            if sol.alpha[k] != 0.0 {
                if pool_index[i] == usize::MAX {
                    pool_index[i] = support_vectors.len();
                    support_vectors.push(rows[i].features.clone());
                }
                support.push(pool_index[i]);
                coef.push(sol.alpha[k]);
            }
        }
        machines.push(BinaryMachine {
            positive: pos,
            negative: neg,
            support,
            coef,
            bias: -sol.rho,
            iterations: sol.iterations,
        });
    }

    Ok(SvmModel {
        params: *params,
        feature_dim: data.feature_dim(),
        classes,
        support_vectors,
        machines,
    })
}

impl SvmModel {
    pub fn kernel_row(&self, x: &[f64]) -> Vec<f64> {
        self.support_vectors
            .iter()
            .map(|sv| rbf(self.params.gamma, sv, x))
            .collect()
    }

    /// Decision values of every machine, in `machines` order.
    pub fn decisions(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_dim, x)?;
        let k = self.kernel_row(x);
        Ok(self.machines.iter().map(|m| m.decision(&k)).collect())
    }
}

impl Classifier for SvmModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let decisions = self.decisions(x)?;
        let mut votes = [0usize; FaultLabel::COUNT];
        let mut margin = [0.0f64; FaultLabel::COUNT];
        for (m, &d) in self.machines.iter().zip(&decisions) {
            let winner = if d > 0.0 { m.positive } else { m.negative };
            votes[winner.code()] += 1;
            margin[winner.code()] += d.abs();
        }
        let mut best = self.classes[0];
        for &c in &self.classes[1..] {
            let (v, b) = (votes[c.code()], votes[best.code()]);
            if v > b || (v == b && margin[c.code()] > margin[best.code()]) {
                best = c;
            }
        }
        Ok(Prediction {
            label: best,
            confidence: votes[best.code()] as f64 / (self.classes.len() - 1) as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::LabeledRow;

    fn dataset(points: &[(&[f64], FaultLabel)]) -> LabeledDataset {
        LabeledDataset::new(
            points
                .iter()
                .enumerate()
                .map(|(i, (x, l))| LabeledRow {
                    station_id: i as u64,
                    label: *l,
                    features: x.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn assert_dual_feasible(model: &SvmModel) {
        for m in &model.machines {
            let sum: f64 = m.coef.iter().sum();
            assert!(sum.abs() <= 1e-6, "sum alpha y = {sum}");
            for c in &m.coef {
                assert!(c.abs() <= model.params.c + 1e-12);
            }
        }
    }

    #[test]
    fn separable_pair() {
        let ds = dataset(&[(&[0.0, 0.0], FaultLabel::GMD2), (&[1.0, 1.0], FaultLabel::Quake1)]);
        let m = train_svm(&ds, &SvmParams::default()).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap().label, FaultLabel::GMD2);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap().label, FaultLabel::Quake1);
        assert_dual_feasible(&m);
    }

    #[test]
    fn xor_with_rbf() {
        let a = FaultLabel::OpenAC;
        let b = FaultLabel::OpenDC;
        let pts: [(&[f64], FaultLabel); 4] = [
            (&[0.0, 0.0], a),
            (&[1.0, 1.0], a),
            (&[0.0, 1.0], b),
            (&[1.0, 0.0], b),
        ];
        let params = SvmParams {
            gamma: 2.0,
            c: 10.0,
            ..SvmParams::default()
        };
        let m = train_svm(&dataset(&pts), &params).unwrap();
        for (x, l) in pts {
            assert_eq!(m.predict(x).unwrap().label, l);
        }
        assert_dual_feasible(&m);
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = dataset(&[(&[0.0], FaultLabel::GMD2), (&[1.0], FaultLabel::GMD2)]);
        assert!(matches!(train_svm(&ds, &SvmParams::default()), Err(Error::SingleClass(1))));
    }

    #[test]
    fn iteration_cap_reports_pair() {
        let ds = dataset(&[
            (&[0.0], FaultLabel::GMD2),
            (&[0.1], FaultLabel::Quake1),
            (&[0.2], FaultLabel::GMD2),
        ]);
        let params = SvmParams {
            max_iterations: 0,
            ..SvmParams::default()
        };
        let err = train_svm(&ds, &params).unwrap_err();
        assert_eq!(err.to_string(), "smo did not converge for class pair (GMD2, Quake1)");
    }

    #[test]
    fn three_classes_vote() {
        let pts: Vec<(Vec<f64>, FaultLabel)> = (0..30)
            .map(|i| {
                let l = FaultLabel::ALL[i % 3];
                let c = (i % 3) as f64 * 4.0;
                (vec![c + 0.1 * (i / 3) as f64, -c], l)
            })
            .collect();
        let refs: Vec<(&[f64], FaultLabel)> = pts.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let m = train_svm(&dataset(&refs), &SvmParams::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_dual_feasible(&m);
        for (x, l) in &pts {
            let p = m.predict(x).unwrap();
            assert_eq!(p.label, *l);
            assert_eq!(p.confidence, 1.0);
        }
        assert!(matches!(m.predict(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn free_support_vectors_lie_on_margin() {
        let pts: Vec<(Vec<f64>, FaultLabel)> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                let l = if (t * 7.0).sin() > 0.0 { FaultLabel::GMD2 } else { FaultLabel::Ponderosa };
                (vec![t, (t * 3.0).cos()], l)
            })
            .collect();
        let refs: Vec<(&[f64], FaultLabel)> = pts.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let params = SvmParams {
            gamma: 5.0,
            c: 100.0,
            tolerance: 1e-6,
            ..SvmParams::default()
        };
        let m = train_svm(&dataset(&refs), &params).unwrap();
        let machine = &m.machines[0];
        for (&s, &coef) in machine.support.iter().zip(&machine.coef) {
            if coef.abs() < params.c {
                let d = machine.decision(&m.kernel_row(&m.support_vectors[s]));
                // y_j f(x_j) = 1 on free vectors.
                assert!((d * coef.signum() - 1.0).abs() < 1e-4, "{d}");
            }
        }
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let pts: Vec<(Vec<f64>, FaultLabel)> = (0..24)
            .map(|i| {
                let l = FaultLabel::ALL[i % 4];
                let f = i as f64;
                (vec![(f * 0.7).sin() + (i % 4) as f64, (f * 1.3).cos()], l)
            })
            .collect();
        let fwd: Vec<(&[f64], FaultLabel)> = pts.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let rev: Vec<(&[f64], FaultLabel)> = fwd.iter().rev().copied().collect();
        let a = train_svm(&dataset(&fwd), &SvmParams::default()).unwrap();
        let b = train_svm(&dataset(&rev), &SvmParams::default()).unwrap();
        for k in 0..50 {
            let x = [k as f64 / 10.0 - 1.0, (k as f64).sin()];
            assert_eq!(a.predict(&x).unwrap().label, b.predict(&x).unwrap().label);
        }
    }
}
