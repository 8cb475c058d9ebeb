//! Soft-margin kernel SVM trained in the dual with SMO, plus one-vs-one and
//! one-vs-rest multiclass wrappers.
//!
//! The solver minimizes `½ αᵀQα − Σα` with `Q_ij = t_i t_j K_ij`,
//! `0 ≤ α ≤ C` and `Σ α_i t_i = 0`, picking the maximal violating pair at
//! each step. The decision score is `Σ α_n t_n K(x_n, x) + b`.

use crate::error::{Error, Result};
use crate::qkernel::GramMatrix;
use crate::smallalg::symmetric_eigen;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

pub const DEFAULT_C_PENALTY: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;
/// Diagonal shift applied when the kernel has a clearly negative eigenvalue.
pub const PSD_JITTER: f64 = 1e-8;
/// Largest training set whose spectrum is checked before solving.
pub const SPECTRUM_CHECK_MAX: usize = 500;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    pub c_penalty: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c_penalty: DEFAULT_C_PENALTY,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SvmParams {
    pub fn with_c(c_penalty: f64) -> Self {
        SvmParams {
            c_penalty,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_penalty.is_finite() && self.c_penalty > 0.0) {
            return Err(Error::InvalidParams(format!(
                "C must be positive, got {}",
                self.c_penalty
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// A square kernel matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel matrix"));
        }
        Ok(KernelMatrix { size, entries })
    }

    pub fn from_gram(gram: &GramMatrix) -> Self {
        KernelMatrix {
            size: gram.size(),
            entries: gram.entries().to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// The block of rows and columns in `indices`.
    pub fn select(&self, indices: &[usize]) -> KernelMatrix {
        let mut entries = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            entries.extend(indices.iter().map(|&j| self.get(i, j)));
        }
        KernelMatrix {
            size: indices.len(),
            entries,
        }
    }

    pub fn scaled(&self, s: f64) -> KernelMatrix {
        KernelMatrix {
            size: self.size,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }
}

/// A trained two-class model over its own training samples.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryModel {
    pub alphas: Vec<f64>,
    /// `+1.0` or `-1.0` per training sample.
    pub targets: Vec<f64>,
    pub bias: f64,
    pub c_penalty: f64,
    /// Indices with `α > 0`.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryModel {
    /// `Σ α_n t_n k_n + b` for a kernel row against the training samples.
    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        if kernel_row.len() != self.alphas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.alphas.len(),
                found: kernel_row.len(),
            });
        }
        Ok(self.score(|n| kernel_row[n]))
    }

    fn score(&self, kernel: impl Fn(usize) -> f64) -> f64 {
        self.support
            .iter()
            .map(|&n| self.alphas[n] * self.targets[n] * kernel(n))
            .sum::<f64>()
            + self.bias
    }

    /// `Σ α − ½ Σ α_i α_j t_i t_j K_ij`.
    pub fn dual_objective(&self, kernel: &KernelMatrix) -> f64 {
        let mut quad = 0.0;
        for &i in &self.support {
            for &j in &self.support {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.targets[i]
                    * self.targets[j]
                    * kernel.get(i, j);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }
}

fn check_targets(targets: &[f64]) -> Result<()> {
    if let Some(t) = targets.iter().find(|&&t| t != 1.0 && t != -1.0) {
        return Err(Error::Svm(format!("targets must be ±1, found {t}")));
    }
    if !targets.contains(&1.0) || !targets.contains(&-1.0) {
        return Err(Error::Svm("training needs samples of both classes".into()));
    }
    Ok(())
}

pub fn train_binary(
    kernel: &KernelMatrix,
    targets: &[f64],
    params: &SvmParams,
) -> Result<BinaryModel> {
    train_traced(kernel, targets, params, |_, _| {})
}

/// As [`train_binary`]; `on_step` sees `α` and the gradient `Qα − 1` after
/// every update.
pub(crate) fn train_traced(
    kernel: &KernelMatrix,
    targets: &[f64],
    params: &SvmParams,
    mut on_step: impl FnMut(&[f64], &[f64]),
) -> Result<BinaryModel> {
    params.validate()?;
    let n = kernel.size();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: targets.len(),
        });
    }
    check_targets(targets)?;

    let repaired;
    let mut k = kernel;
    if n <= SPECTRUM_CHECK_MAX {
        let (values, _) = symmetric_eigen(n, &kernel.entries, false);
        let low = values[0];
        if low < -PSD_JITTER {
            log::warn!("kernel has eigenvalue {low:e}; adding {PSD_JITTER:e} to the diagonal");
            let mut fixed = kernel.clone();
            for i in 0..n {
                fixed.entries[i * n + i] += PSD_JITTER;
            }
            repaired = fixed;
            k = &repaired;
        }
    }

    let c = params.c_penalty;
    let y = targets;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, t: f64| (t > 0.0 && a < c) || (t < 0.0 && a > 0.0);
    let in_low = |a: f64, t: f64| (t > 0.0 && a > 0.0) || (t < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        // Maximal violating pair.
        let (mut i, mut up) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut low) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > up {
                (i, up) = (t, v);
            }
            if in_low(alpha[t], y[t]) && v < low {
                (j, low) = (t, v);
            }
        }
        if i == usize::MAX || j == usize::MAX || up - low < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let (ki, kj) = (k.row(i), k.row(j));
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(TAU);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        // Move along t_i·e_i − t_j·e_j, which keeps Σ α t fixed.
        let step = (up - low) / curvature;
        // Clip back into the box along the same direction.
        let sum = y[i] * old_i + y[j] * old_j;
        let mut ai = (old_i + y[i] * step).clamp(0.0, c);
        let mut aj = y[j] * (sum - y[i] * ai);
        if !(0.0..=c).contains(&aj) {
            aj = aj.clamp(0.0, c);
            ai = y[i] * (sum - y[j] * aj);
            ai = ai.clamp(0.0, c);
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
        on_step(&alpha, &grad);
    }
    if !converged {
        log::warn!(
            "SMO stopped at the iteration cap ({}) before convergence",
            params.max_iterations
        );
    }

    let bias = bias(&alpha, &grad, y, c);
    let support = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(BinaryModel {
        alphas: alpha,
        targets: y.to_vec(),
        bias,
        c_penalty: c,
        support,
        iterations,
        converged,
    })
}

/// `b` from free vectors (`t·f(x) = 1` there); the midpoint of the feasible
/// interval when every α sits at a bound.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            upper = upper.min(yg);
        } else {
            lower = lower.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) / 2.0
    } else if upper.is_finite() {
        upper
    } else {
        lower
    };
    -rho
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    OneVsOne,
    OneVsRest,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::OneVsOne => "one-vs-one",
            Strategy::OneVsRest => "one-vs-rest",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-vs-one" | "ovo" => Ok(Strategy::OneVsOne),
            "one-vs-rest" | "ovr" => Ok(Strategy::OneVsRest),
            other => Err(Error::InvalidParams(format!("unknown strategy `{other}`"))),
        }
    }
}

/// One binary model inside a multiclass model.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    /// Class trained as `+1`.
    pub positive: u32,
    /// Class trained as `-1`; `None` means every other class.
    pub negative: Option<u32>,
    /// Training-set indices this model was fitted on, in model order.
    pub indices: Vec<usize>,
    pub model: BinaryModel,
}

impl Member {
    fn score(&self, kernel_row: &[f64]) -> f64 {
        self.model.score(|n| kernel_row[self.indices[n]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassModel {
    pub strategy: Strategy,
    /// Sorted distinct labels.
    pub classes: Vec<u32>,
    pub train_size: usize,
    pub members: Vec<Member>,
}

pub fn train_multiclass(
    kernel: &KernelMatrix,
    labels: &[u32],
    strategy: Strategy,
    params: &SvmParams,
) -> Result<MulticlassModel> {
    let n = kernel.size();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Svm(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }
    let tasks: Vec<(u32, Option<u32>)> = match strategy {
        Strategy::OneVsOne => classes
            .iter()
            .enumerate()
            .flat_map(|(k, &a)| classes[k + 1..].iter().map(move |&b| (a, Some(b))))
            .collect(),
        Strategy::OneVsRest if classes.len() == 2 => vec![(classes[0], Some(classes[1]))],
        Strategy::OneVsRest => classes.iter().map(|&a| (a, None)).collect(),
    };
    let members = tasks
        .par_iter()
        .map(|&(positive, negative)| {
            let indices: Vec<usize> = (0..n)
                .filter(|&t| labels[t] == positive || negative.is_none_or(|b| labels[t] == b))
                .collect();
            let targets: Vec<f64> = indices
                .iter()
                .map(|&t| if labels[t] == positive { 1.0 } else { -1.0 })
                .collect();
            let model = train_binary(&kernel.select(&indices), &targets, params)?;
            Ok(Member {
                positive,
                negative,
                indices,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassModel {
        strategy,
        classes,
        train_size: n,
        members,
    })
}

impl MulticlassModel {
    /// Class for each test sample. Each row holds kernel values against the
    /// full training set.
    pub fn predict(&self, kernel_rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        kernel_rows
            .iter()
            .map(|row| self.predict_one(row))
            .collect()
    }

    pub fn predict_one(&self, kernel_row: &[f64]) -> Result<u32> {
        if kernel_row.len() != self.train_size {
            return Err(Error::DimensionMismatch {
                expected: self.train_size,
                found: kernel_row.len(),
            });
        }
        let slot = |c: u32| {
            self.classes
                .binary_search(&c)
                .expect("member classes are known")
        };
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut totals = vec![0.0; k];
        for m in &self.members {
            let s = m.score(kernel_row);
            match m.negative {
                Some(b) => {
                    let (a, b) = (slot(m.positive), slot(b));
                    votes[if s > 0.0 { a } else { b }] += 1;
                    totals[a] += s;
                    totals[b] -= s;
                }
                None => totals[slot(m.positive)] += s,
            }
        }
        // Most votes, then highest summed score, then smallest label.
        let best = (0..k)
            .max_by(|&p, &q| {
                votes[p]
                    .cmp(&votes[q])
                    .then(totals[p].total_cmp(&totals[q]))
                    .then(q.cmp(&p))
            })
            .expect("at least two classes");
        Ok(self.classes[best])
    }

    /// Text format:
    ///
    /// ```text
    /// aqce-svm 1
    /// strategy one-vs-one
    /// classes 0 1 2
    /// train-size 60
    /// member <positive> <negative|rest>
    /// bias <b>
    /// c-penalty <C>
    /// indices <i…>
    /// targets <±1…>
    /// alphas <α…>
    /// ```
    ///
    /// with one `member` block per binary model.
    pub fn to_text(&self) -> String {
        let mut s = format!("aqce-svm 1\nstrategy {}\n", self.strategy.name());
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            s,
            "classes {}",
            join(&mut self.classes.iter().map(u32::to_string))
        );
        let _ = writeln!(s, "train-size {}", self.train_size);
        for m in &self.members {
            let neg = m.negative.map_or("rest".to_string(), |b| b.to_string());
            let _ = writeln!(s, "member {} {neg}", m.positive);
            let _ = writeln!(s, "bias {}", m.model.bias);
            let _ = writeln!(s, "c-penalty {}", m.model.c_penalty);
            let _ = writeln!(
                s,
                "indices {}",
                join(&mut m.indices.iter().map(usize::to_string))
            );
            let _ = writeln!(
                s,
                "targets {}",
                join(&mut m.model.targets.iter().map(|t| t.to_string()))
            );
            let _ = writeln!(
                s,
                "alphas {}",
                join(&mut m.model.alphas.iter().map(|a| a.to_string()))
            );
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |key: &str| -> std::result::Result<Vec<String>, String> {
            let line = lines
                .next()
                .ok_or_else(|| format!("missing `{key}` line"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(format!("expected `{key}`, found `{line}`"));
            }
            Ok(parts.map(String::from).collect())
        };
        fn nums<T: FromStr>(v: &[String], what: &str) -> std::result::Result<Vec<T>, String> {
            v.iter()
                .map(|s| s.parse().map_err(|_| format!("bad {what} `{s}`")))
                .collect()
        }
        if next("aqce-svm")? != ["1"] {
            return Err("unsupported aqce-svm version".into());
        }
        let strategy: Strategy = next("strategy")?
            .first()
            .ok_or("missing strategy")?
            .parse()
            .map_err(|e: Error| e.to_string())?;
        let classes: Vec<u32> = nums(&next("classes")?, "class")?;
        let train_size = *nums::<usize>(&next("train-size")?, "size")?
            .first()
            .ok_or("missing size")?;
        let mut members = Vec::new();
        while let Ok(head) = next("member") {
            let [pos, neg] = &head[..] else {
                return Err("member needs two classes".into());
            };
            let positive: u32 = pos.parse().map_err(|_| format!("bad class `{pos}`"))?;
            let negative = match neg.as_str() {
                "rest" => None,
                b => Some(b.parse::<u32>().map_err(|_| format!("bad class `{b}`"))?),
            };
            let bias = *nums::<f64>(&next("bias")?, "bias")?
                .first()
                .ok_or("missing bias")?;
            let c_penalty = *nums::<f64>(&next("c-penalty")?, "C")?
                .first()
                .ok_or("missing C")?;
            let indices: Vec<usize> = nums(&next("indices")?, "index")?;
            let targets: Vec<f64> = nums(&next("targets")?, "target")?;
            let alphas: Vec<f64> = nums(&next("alphas")?, "alpha")?;
            if targets.len() != indices.len() || alphas.len() != indices.len() {
                return Err(format!(
                    "member {positive}: indices, targets and alphas differ in length"
                ));
            }
            if let Some(i) = indices.iter().find(|&&i| i >= train_size) {
                return Err(format!(
                    "member {positive}: index {i} beyond train-size {train_size}"
                ));
            }
            for c in std::iter::once(positive).chain(negative) {
                if classes.binary_search(&c).is_err() {
                    return Err(format!("member class {c} not in the class list"));
                }
            }
            let support = (0..alphas.len()).filter(|&t| alphas[t] > 0.0).collect();
            members.push(Member {
                positive,
                negative,
                indices,
                model: BinaryModel {
                    alphas,
                    targets,
                    bias,
                    c_penalty,
                    support,
                    iterations: 0,
                    converged: true,
                },
            });
        }
        if members.is_empty() {
            return Err("model has no members".into());
        }
        Ok(MulticlassModel {
            strategy,
            classes,
            train_size,
            members,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|m| Error::format(path, m))
    }
}

/// Fraction of positions where `predicted` equals `truth`; 0 for empty input.
pub fn accuracy(predicted: &[u32], truth: &[u32]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / predicted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(points: &[Vec<f64>]) -> KernelMatrix {
        let n = points.len();
        let mut e = Vec::with_capacity(n * n);
        for a in points {
            e.extend(
                points
                    .iter()
                    .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()),
            );
        }
        KernelMatrix::new(n, e).unwrap()
    }

    fn rbf(points: &[Vec<f64>], gamma: f64) -> KernelMatrix {
        let n = points.len();
        let mut e = Vec::with_capacity(n * n);
        for a in points {
            e.extend(points.iter().map(|b| {
                (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
            }));
        }
        KernelMatrix::new(n, e).unwrap()
    }

    fn clusters(rng: &mut impl Rng, per: usize) -> (Vec<Vec<f64>>, Vec<u32>) {
        let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(vec![
                    center[0] + rng.gen_range(-0.5..0.5),
                    center[1] + rng.gen_range(-0.5..0.5),
                ]);
                labels.push(c as u32);
            }
        }
        (pts, labels)
    }

    fn rows(k: &KernelMatrix) -> Vec<Vec<f64>> {
        (0..k.size()).map(|i| k.row(i).to_vec()).collect()
    }

    /// Exact dual optimum by enumerating which α are at 0, at C or free and
    /// solving the equality-constrained stationarity system for the free ones.
    fn brute_force_dual(k: &KernelMatrix, y: &[f64], c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let state: Vec<usize> = (0..n).map(|t| code / 3usize.pow(t as u32) % 3).collect();
            let free: Vec<usize> = (0..n).filter(|&t| state[t] == 2).collect();
            let mut alpha: Vec<f64> = state
                .iter()
                .map(|&s| if s == 1 { c } else { 0.0 })
                .collect();
            if !free.is_empty() {
                // [Q_FF  y_F] [α_F]   [1 − Q_FB α_B]
                // [y_Fᵀ   0 ] [ λ ] = [  −y_Bᵀ α_B  ]
                let m = free.len() + 1;
                let mut a = vec![0.0; m * m];
                let mut rhs = vec![0.0; m];
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        a[r * m + s] = y[i] * y[j] * k.get(i, j);
                    }
                    a[r * m + m - 1] = y[i];
                    a[(m - 1) * m + r] = y[i];
                    rhs[r] = 1.0
                        - (0..n)
                            .filter(|t| state[*t] == 1)
                            .map(|t| y[i] * y[t] * k.get(i, t) * c)
                            .sum::<f64>();
                }
                rhs[m - 1] = -(0..n)
                    .filter(|t| state[*t] == 1)
                    .map(|t| y[t] * c)
                    .sum::<f64>();
                let Some(sol) = solve(a, rhs) else { continue };
                for (r, &i) in free.iter().enumerate() {
                    alpha[i] = sol[r];
                }
            }
            if alpha.iter().any(|&a| a < -1e-9 || a > c + 1e-9) {
                continue;
            }
            if alpha.iter().zip(y).map(|(a, t)| a * t).sum::<f64>().abs() > 1e-9 {
                continue;
            }
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += alpha[i] * alpha[j] * y[i] * y[j] * k.get(i, j);
                }
            }
            best = best.max(alpha.iter().sum::<f64>() - 0.5 * quad);
        }
        best
    }

    /// Gaussian elimination with partial pivoting; `None` when singular.
    fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let piv =
                (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
            if a[piv * n + col].abs() < 1e-12 {
                return None;
            }
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|j| a[r * n + j] * x[j]).sum();
            x[r] = (b[r] - s) / a[r * n + r];
        }
        Some(x)
    }

    fn check_invariants(m: &BinaryModel, k: &KernelMatrix) {
        let c = m.c_penalty;
        assert!(m.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = m.alphas.iter().zip(&m.targets).map(|(a, t)| a * t).sum();
        assert!(balance.abs() <= 1e-6, "Σαt = {balance}");
        for n in 0..m.alphas.len() {
            if m.alphas[n] > 1e-9 && m.alphas[n] < c - 1e-9 {
                let f = m.decision(k.row(n)).unwrap();
                assert!((m.targets[n] * f - 1.0).abs() <= 1e-3, "KKT at {n}: {f}");
            }
        }
    }

    #[test]
    fn two_point_identity() {
        let k = KernelMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        for c in [1.0, 5.0] {
            let m = train_binary(&k, &[1.0, -1.0], &SvmParams::with_c(c)).unwrap();
            assert!((m.alphas[0] - 1.0).abs() < 1e-9 && (m.alphas[1] - 1.0).abs() < 1e-9);
            assert!(m.bias.abs() < 1e-9);
            assert!((m.decision(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
            assert!((m.decision(&[0.0, 1.0]).unwrap() + 1.0).abs() < 1e-9);
            assert_eq!(m.decision(&[0.0, 0.0]).unwrap(), m.bias);
        }
    }

    #[test]
    fn separable_linear_four_points() {
        let pts = vec![
            vec![2.0, 2.0],
            vec![1.5, 3.0],
            vec![-1.0, -2.0],
            vec![-2.5, -0.5],
        ];
        let y = [1.0, 1.0, -1.0, -1.0];
        let k = linear(&pts);
        let m = train_binary(&k, &y, &SvmParams::with_c(10.0)).unwrap();
        check_invariants(&m, &k);
        for (i, t) in y.iter().enumerate() {
            assert!(m.decision(k.row(i)).unwrap() * t > 0.0);
        }
        assert!((m.dual_objective(&k) - brute_force_dual(&k, &y, 10.0)).abs() < 1e-4);
    }

    #[test]
    fn identical_rows_cannot_separate() {
        let k = KernelMatrix::new(4, vec![1.0; 16]).unwrap();
        let y = [1.0, -1.0, 1.0, -1.0];
        let m = train_binary(&k, &y, &SvmParams::default()).unwrap();
        check_invariants(&m, &k);
        let errors = (0..4)
            .filter(|&i| m.decision(k.row(i)).unwrap() * y[i] <= 0.0)
            .count();
        assert!(errors > 0);
    }

    #[test]
    fn rejects_bad_input() {
        let k = KernelMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            train_binary(&k, &[1.0, 1.0], &SvmParams::default()),
            Err(Error::Svm(_))
        ));
        assert!(matches!(
            train_binary(&k, &[1.0, 0.0], &SvmParams::default()),
            Err(Error::Svm(_))
        ));
        assert!(train_binary(&k, &[1.0], &SvmParams::default()).is_err());
        assert!(train_binary(&k, &[1.0, -1.0], &SvmParams::with_c(0.0)).is_err());
        let m = train_binary(&k, &[1.0, -1.0], &SvmParams::default()).unwrap();
        assert!(matches!(
            m.decision(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train_multiclass(&k, &[3, 3], Strategy::OneVsOne, &SvmParams::default()),
            Err(Error::Svm(_))
        ));
    }

    #[test]
    fn non_psd_kernel_gets_jitter() {
        // eigenvalues 1 ± 1.001
        let k = KernelMatrix::new(2, vec![1.0, 1.001, 1.001, 1.0]).unwrap();
        let m = train_binary(&k, &[1.0, -1.0], &SvmParams::default()).unwrap();
        assert!(m.converged);
        assert!(m.alphas.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn matches_brute_force_on_small_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let n = rng.gen_range(2..=6);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut y: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let k = if trial % 2 == 0 {
                rbf(&pts, 1.5)
            } else {
                linear(&pts)
            };
            let c = [0.5, 1.0, 4.0][trial % 3];
            let m = train_binary(&k, &y, &SvmParams::with_c(c)).unwrap();
            check_invariants(&m, &k);
            let exact = brute_force_dual(&k, &y, c);
            assert!(
                (m.dual_objective(&k) - exact).abs() < 1e-4,
                "trial {trial}: {} vs {exact}",
                m.dual_objective(&k)
            );
        }
    }

    #[test]
    fn dual_objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (pts, labels) = clusters(&mut rng, 10);
        let k = rbf(&pts, 0.3);
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 0 { 1.0 } else { -1.0 })
            .collect();
        let mut last = 0.0;
        let mut steps = 0;
        train_traced(&k, &y, &SvmParams::with_c(2.0), |alpha, grad| {
            let dual = -0.5
                * alpha
                    .iter()
                    .zip(grad)
                    .map(|(a, g)| a * (g - 1.0))
                    .sum::<f64>();
            assert!(dual >= last - 1e-12, "{dual} < {last}");
            last = dual;
            steps += 1;
        })
        .unwrap();
        assert!(steps > 0);
    }

    #[test]
    fn clusters_both_strategies() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (pts, labels) = clusters(&mut rng, 12);
        let k = rbf(&pts, 0.5);
        let ovo = train_multiclass(&k, &labels, Strategy::OneVsOne, &SvmParams::default()).unwrap();
        let ovr =
            train_multiclass(&k, &labels, Strategy::OneVsRest, &SvmParams::default()).unwrap();
        assert_eq!(ovo.members.len(), 3);
        assert_eq!(ovr.members.len(), 3);
        let a = ovo.predict(&rows(&k)).unwrap();
        let b = ovr.predict(&rows(&k)).unwrap();
        assert_eq!(accuracy(&a, &labels), 1.0);
        assert_eq!(accuracy(&b, &labels), 1.0);
        assert!(ovo.predict(&[]).unwrap().is_empty());

        let (test_pts, test_labels) = clusters(&mut rng, 5);
        let cross: Vec<Vec<f64>> = test_pts
            .iter()
            .map(|p| {
                pts.iter()
                    .map(|q| {
                        (-0.5 * p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
                    })
                    .collect()
            })
            .collect();
        assert_eq!(ovo.predict(&cross).unwrap(), ovr.predict(&cross).unwrap());
        assert_eq!(accuracy(&ovo.predict(&cross).unwrap(), &test_labels), 1.0);
    }

    #[test]
    fn member_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels: Vec<u32> = (0..40).map(|i| (i % 5) as u32 * 2).collect();
        let k = rbf(&pts, 1.0);
        let ovo = train_multiclass(&k, &labels, Strategy::OneVsOne, &SvmParams::default()).unwrap();
        assert_eq!(ovo.members.len(), 10);
        let mut pairs: Vec<_> = ovo
            .members
            .iter()
            .map(|m| (m.positive, m.negative))
            .collect();
        pairs.dedup();
        assert_eq!(pairs.len(), 10);
        let ovr =
            train_multiclass(&k, &labels, Strategy::OneVsRest, &SvmParams::default()).unwrap();
        assert_eq!(ovr.members.len(), 5);
        assert!(ovr
            .members
            .iter()
            .all(|m| m.negative.is_none() && m.indices.len() == 40));
    }

    #[test]
    fn two_classes_reduce_to_one_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (pts, labels) = clusters(&mut rng, 8);
        let keep: Vec<usize> = (0..pts.len()).filter(|&i| labels[i] != 2).collect();
        let pts: Vec<Vec<f64>> = keep.iter().map(|&i| pts[i].clone()).collect();
        let labels: Vec<u32> = keep.iter().map(|&i| labels[i]).collect();
        let k = rbf(&pts, 0.5);
        let ovo = train_multiclass(&k, &labels, Strategy::OneVsOne, &SvmParams::default()).unwrap();
        let ovr =
            train_multiclass(&k, &labels, Strategy::OneVsRest, &SvmParams::default()).unwrap();
        assert_eq!(ovo.members.len(), 1);
        assert_eq!(ovr.members.len(), 1);
        assert_eq!(
            ovo.predict(&rows(&k)).unwrap(),
            ovr.predict(&rows(&k)).unwrap()
        );
    }

    #[test]
    fn vote_ties_go_to_the_larger_score() {
        // Three classes, each pair model hand-set so every class wins once.
        let member = |positive, negative, bias| Member {
            positive,
            negative: Some(negative),
            indices: vec![0],
            model: BinaryModel {
                alphas: vec![0.0],
                targets: vec![1.0],
                bias,
                c_penalty: 1.0,
                support: vec![],
                iterations: 0,
                converged: true,
            },
        };
        let mut model = MulticlassModel {
            strategy: Strategy::OneVsOne,
            classes: vec![0, 1, 2],
            train_size: 1,
            members: vec![member(0, 1, 0.5), member(1, 2, 0.2), member(0, 2, -0.1)],
        };
        // votes: 0, 1, 2 one each; totals: 0 → 0.4, 1 → -0.3, 2 → -0.1
        assert_eq!(model.predict_one(&[0.0]).unwrap(), 0);
        model.members[2] = member(0, 2, -0.9);
        // totals: 0 → -0.4, 1 → -0.3, 2 → 0.7
        assert_eq!(model.predict_one(&[0.0]).unwrap(), 2);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (pts, labels) = clusters(&mut rng, 6);
        let k = rbf(&pts, 0.5);
        for strategy in [Strategy::OneVsOne, Strategy::OneVsRest] {
            let m = train_multiclass(&k, &labels, strategy, &SvmParams::default()).unwrap();
            let back = MulticlassModel::from_text(&m.to_text()).unwrap();
            assert_eq!(
                back.predict(&rows(&k)).unwrap(),
                m.predict(&rows(&k)).unwrap()
            );
            for (a, b) in back.members.iter().zip(&m.members) {
                assert_eq!(a.model.alphas, b.model.alphas);
                assert_eq!(a.model.bias, b.model.bias);
            }
        }
        assert!(MulticlassModel::from_text(
            "aqce-svm 1\nstrategy one-vs-one\nclasses 0 1\ntrain-size 2\n"
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gram_scaling_keeps_predictions(seed in any::<u64>(), s in 0.05f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pts, labels) = clusters(&mut rng, 5);
            let k = rbf(&pts, 0.2);
            let base = train_multiclass(&k, &labels, Strategy::OneVsOne, &SvmParams::with_c(1.0)).unwrap();
            let scaled = train_multiclass(&k.scaled(s), &labels, Strategy::OneVsOne, &SvmParams::with_c(1.0 / s)).unwrap();
            let (test_pts, _) = clusters(&mut rng, 4);
            let cross = |scale: f64| -> Vec<Vec<f64>> {
                test_pts.iter().map(|p| pts.iter().map(|q| scale * (-0.2 * p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()).collect()).collect()
            };
            prop_assert_eq!(base.predict(&cross(1.0)).unwrap(), scaled.predict(&cross(s)).unwrap());
        }

        #[test]
        fn model_invariants(seed in any::<u64>(), c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..30);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let mut y: Vec<f64> = pts.iter().map(|p| if p[0] + 0.3 * p[1] > 0.0 { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let k = rbf(&pts, 2.0);
            let m = train_binary(&k, &y, &SvmParams::with_c(c)).unwrap();
            prop_assert!(m.converged);
            check_invariants(&m, &k);
        }
    }
}
