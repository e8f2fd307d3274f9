//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! Each class gets the problem
//! `min_w ½‖w‖² + C Σ max(0, 1 − yᵢ wᵀx̃ᵢ)` with `x̃ = [x, 1]`, so the bias is
//! the last weight and is regularized like the others. Training stops when the
//! duality gap falls below `tolerance` times the primal objective.
//!
//! SCM1 layout (little-endian): magic `b"SCM1"`, version u32, class count u64,
//! feature width u64, class labels as u32, C f64, seed u64, weights
//! (classes × width f64, row-major), biases (classes × f64).

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Result, ScatterError};
use crate::features::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"SCM1";
pub const MODEL_VERSION: u32 = 1;

const MAX_CLASSES: u64 = 1 << 20;
const MAX_WIDTH: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub c: f64,
    pub seed: u64,
    /// Relative duality gap at which a subproblem counts as solved.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            c: 1.0,
            seed: 0,
            tolerance: 1e-4,
            max_epochs: 50_000,
        }
    }
}

/// Solver outcome for one binary subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemReport {
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
    pub converged: bool,
}

impl SubproblemReport {
    pub fn relative_gap(&self) -> f64 {
        (self.primal - self.dual) / self.primal.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Row-major, one row per class.
    weights: Vec<f64>,
    biases: Vec<f64>,
    classes: Vec<u32>,
    width: usize,
    pub c: f64,
    pub seed: u64,
}

impl LinearModel {
    pub fn new(weights: Matrix, biases: Vec<f64>, classes: Vec<u32>, c: f64, seed: u64) -> Result<Self> {
        let model = LinearModel {
            width: weights.cols(),
            weights: weights.data().to_vec(),
            biases,
            classes,
            c,
            seed,
        };
        model.check().map_err(ScatterError::Parameter)?;
        Ok(model)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let k = self.classes.len();
        if k == 0 {
            return Err("model has no classes".into());
        }
        let mut sorted = self.classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err("class labels are not distinct".into());
        }
        if self.weights.len() != k * self.width || self.biases.len() != k {
            return Err(format!("weights do not match {k} classes of width {}", self.width));
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err("non-finite weight".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self, class_index: usize) -> &[f64] {
        &self.weights[class_index * self.width..(class_index + 1) * self.width]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn scores(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.width {
            return Err(ScatterError::param(format!(
                "feature vector of length {} given to a model of width {}",
                v.len(),
                self.width
            )));
        }
        Ok((0..self.classes.len())
            .map(|k| dot(self.weights(k), v) + self.biases[k])
            .collect())
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn predict_index(&self, v: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(v)?))
    }

    pub fn predict(&self, v: &[f64]) -> Result<u32> {
        Ok(self.classes[self.predict_index(v)?])
    }

    pub fn evaluate(&self, x: &Matrix, labels: &[u32]) -> Result<Evaluation> {
        if x.rows() != labels.len() {
            return Err(ScatterError::param(format!("{} rows but {} labels", x.rows(), labels.len())));
        }
        let k = self.classes.len();
        let mut confusion = vec![vec![0u64; k]; k];
        for (row, &label) in x.iter_rows().zip(labels) {
            let truth = self
                .classes
                .iter()
                .position(|&c| c == label)
                .ok_or_else(|| ScatterError::Data(format!("label {label} was not seen in training")))?;
            confusion[truth][self.predict_index(row)?] += 1;
        }
        Ok(Evaluation::from_confusion(self.classes.clone(), confusion))
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ByteWriter::new(w);
        out.bytes(MODEL_MAGIC)?;
        out.u32(MODEL_VERSION)?;
        out.u64(self.classes.len() as u64)?;
        out.u64(self.width as u64)?;
        out.u32s(&self.classes)?;
        out.f64(self.c)?;
        out.u64(self.seed)?;
        out.f64s(&self.weights)?;
        out.f64s(&self.biases)?;
        out.finish()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = ByteReader::new(r);
        input.magic(MODEL_MAGIC)?;
        let at = input.offset();
        let version = input.u32("version")?;
        if version != MODEL_VERSION {
            return Err(ScatterError::format(at, format!("unsupported version {version}")));
        }
        let k = input.count("class count", MAX_CLASSES)?;
        let width = input.count("feature width", MAX_WIDTH)?;
        let classes = input.u32s(k, "class labels")?;
        let c = input.f64("C")?;
        let seed = input.u64("seed")?;
        let weights = input.f64s(k * width, "weights")?;
        let biases = input.f64s(k, "biases")?;
        input.expect_end()?;
        let model = LinearModel {
            weights,
            biases,
            classes,
            width,
            c,
            seed,
        };
        model.check().map_err(|m| ScatterError::format(at, m))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub classes: Vec<u32>,
    /// `confusion[true][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    /// `None` for classes without test examples.
    pub per_class: Vec<Option<f64>>,
    /// Mean of the defined per-class accuracies.
    pub mean_per_class: f64,
}

impl Evaluation {
    pub fn from_confusion(classes: Vec<u32>, confusion: Vec<Vec<u64>>) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let per_class: Vec<Option<f64>> = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean_per_class = if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        Evaluation {
            classes,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            confusion,
            per_class,
            mean_per_class,
        }
    }
}

pub fn train(x: &Matrix, labels: &[u32], c: f64, seed: u64) -> Result<LinearModel> {
    train_with(
        x,
        labels,
        &TrainOptions {
            c,
            seed,
            ..TrainOptions::default()
        },
    )
    .map(|(m, _)| m)
}

/// Trains every one-vs-rest subproblem; classes are the distinct labels in
/// increasing order.
pub fn train_with(x: &Matrix, labels: &[u32], opts: &TrainOptions) -> Result<(LinearModel, Vec<SubproblemReport>)> {
    if x.rows() != labels.len() {
        return Err(ScatterError::param(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    if !(opts.c.is_finite() && opts.c > 0.0) {
        return Err(ScatterError::param(format!("C must be positive, got {}", opts.c)));
    }
    if !(opts.tolerance > 0.0) || opts.max_epochs == 0 {
        return Err(ScatterError::param("tolerance and epoch limit must be positive"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ScatterError::param(format!(
            "need at least 2 classes, got {}",
            classes.len()
        )));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(ScatterError::Data("non-finite value in training features".into()));
    }

    let sq_norms: Vec<f64> = x.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let solved: Vec<(Vec<f64>, SubproblemReport)> = classes
        .par_iter()
        .enumerate()
        .map(|(k, &class)| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            solve_binary(x, &y, &sq_norms, opts, k as u64)
        })
        .collect();

    let width = x.cols();
    let mut weights = Vec::with_capacity(classes.len() * width);
    let mut biases = Vec::with_capacity(classes.len());
    let mut reports = Vec::with_capacity(classes.len());
    for (w, report) in solved {
        weights.extend_from_slice(&w[..width]);
        biases.push(w[width]);
        reports.push(report);
    }
    let model = LinearModel {
        weights,
        biases,
        classes,
        width,
        c: opts.c,
        seed: opts.seed,
    };
    model.check().map_err(ScatterError::Internal)?;
    Ok((model, reports))
}

// Returns the augmented weight vector, bias last.
fn solve_binary(x: &Matrix, y: &[f64], sq_norms: &[f64], opts: &TrainOptions, stream: u64) -> (Vec<f64>, SubproblemReport) {
    let n = x.rows();
    let d = x.cols();
    let c = opts.c;
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);

    let mut report = SubproblemReport {
        epochs: 0,
        primal: f64::INFINITY,
        dual: 0.0,
        converged: false,
    };
    while report.epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = x.row(i);
            let g = y[i] * (dot(&w[..d], xi) + w[d]) - 1.0;
            let a = alpha[i];
            let pg = if a == 0.0 {
                g.min(0.0)
            } else if a == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let next = (a - g / sq_norms[i]).clamp(0.0, c);
            let step = (next - a) * y[i];
            if step != 0.0 {
                for (wj, xj) in w[..d].iter_mut().zip(xi) {
                    *wj += step * xj;
                }
                w[d] += step;
                alpha[i] = next;
            }
        }
        report.epochs += 1;

        let w_sq = dot(&w, &w);
        let hinge: f64 = (0..n)
            .map(|i| (1.0 - y[i] * (dot(&w[..d], x.row(i)) + w[d])).max(0.0))
            .sum();
        report.primal = 0.5 * w_sq + c * hinge;
        report.dual = alpha.iter().sum::<f64>() - 0.5 * w_sq;
        if report.primal - report.dual <= opts.tolerance * report.primal {
            report.converged = true;
            break;
        }
    }
    (w, report)
}

/// Splits example indices into train and test sets by taking
/// `train_per_class` examples of each label after a seeded shuffle. Both
/// outputs are sorted.
pub fn holdout_split(labels: &[u32], train_per_class: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() <= train_per_class {
            return Err(ScatterError::Data(format!(
                "class {class} has {} examples, need more than {train_per_class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..train_per_class]);
        test.extend_from_slice(&members[train_per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    // Box-Muller.
    fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    fn blobs(per_class: usize, sigma: f64, seed: u64) -> (Matrix, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..4 {
            for _ in 0..per_class {
                rows.push(
                    (0..4)
                        .map(|j| f64::from(u8::from(j == k)) + sigma * normal(&mut rng))
                        .collect::<Vec<f64>>(),
                );
                labels.push(k as u32);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn toy() -> (Matrix, Vec<u32>) {
        let rows = vec![
            vec![1.0, 0.0],
            vec![2.0, 0.5],
            vec![1.5, -1.0],
            vec![-1.0, 0.0],
            vec![-2.0, -0.5],
            vec![-1.5, 1.0],
        ];
        (Matrix::from_rows(&rows).unwrap(), vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (x, y) = toy();
        let (model, reports) = train_with(&x, &y, &TrainOptions::default()).unwrap();
        assert!(reports.iter().all(|r| r.converged && r.relative_gap() <= 1e-4));
        assert_eq!(model.evaluate(&x, &y).unwrap().accuracy, 1.0);
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let (x, y) = toy();
        let flipped: Vec<u32> = y.iter().map(|l| 1 - l).collect();
        let a = train(&x, &y, 1.0, 3).unwrap();
        let b = train(&x, &flipped, 1.0, 3).unwrap();
        for (wa, wb) in a.weights(0).iter().zip(b.weights(0)) {
            assert!((wa + wb).abs() <= 1e-2 * wa.abs().max(1e-3), "{wa} vs {wb}");
        }
    }

    #[test]
    fn blobs_generalize() {
        let (train_x, train_y) = blobs(50, 0.1, 1);
        let (test_x, test_y) = blobs(50, 0.1, 2);
        let model = train(&train_x, &train_y, 1.0, 0).unwrap();
        let eval = model.evaluate(&test_x, &test_y).unwrap();
        assert!(eval.accuracy >= 0.99, "accuracy {}", eval.accuracy);
        for (row, n) in eval.confusion.iter().zip([50u64; 4]) {
            assert_eq!(row.iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let zero = LinearModel::new(Matrix::zeros(3, 2), vec![0.0; 3], vec![4, 7, 9], 1.0, 0).unwrap();
        assert_eq!(zero.predict(&[5.0, -1.0]).unwrap(), 4);
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let m = LinearModel::new(w, vec![0.0, 0.0], vec![0, 1], 1.0, 0).unwrap();
        assert_eq!(m.predict(&[1.0, 0.0]).unwrap(), 0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_training_input() {
        let (x, _) = toy();
        assert!(matches!(train(&x, &[0; 6], 1.0, 0), Err(ScatterError::Parameter(_))));
        let bad = Matrix::new(2, 1, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(train(&bad, &[0, 1], 1.0, 0), Err(ScatterError::Data(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(30, 0.3, 5);
        let a = train(&x, &y, 0.5, 9).unwrap();
        let b = train(&x, &y, 0.5, 9).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| train(&x, &y, 0.5, 9).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn positive_score_scaling_keeps_predictions() {
        let (x, y) = blobs(20, 0.5, 6);
        let m = train(&x, &y, 1.0, 0).unwrap();
        for row in x.iter_rows() {
            let s = m.scores(row).unwrap();
            for c in [1e-6, 0.3, 7.0, 1e6] {
                let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
                assert_eq!(argmax(&scaled), argmax(&s));
            }
        }
    }

    #[test]
    fn train_accuracy_falls_with_c() {
        let (x, y) = blobs(50, 0.4, 7);
        let mut prev = f64::INFINITY;
        for c in [10.0, 1.0, 0.1, 0.01] {
            let acc = train(&x, &y, c, 0).unwrap().evaluate(&x, &y).unwrap().accuracy;
            assert!(acc <= prev + 0.01, "C={c}: {acc} after {prev}");
            prev = acc;
        }
    }

    #[test]
    fn split_is_per_class_and_reproducible() {
        let labels: Vec<u32> = (0..30).map(|i| i % 3).collect();
        let (tr, te) = holdout_split(&labels, 4, 1).unwrap();
        assert_eq!(tr.len(), 12);
        assert_eq!(te.len(), 18);
        for k in 0..3 {
            assert_eq!(tr.iter().filter(|&&i| labels[i] == k).count(), 4);
        }
        assert_eq!(holdout_split(&labels, 4, 1).unwrap(), (tr.clone(), te));
        assert_ne!(holdout_split(&labels, 4, 2).unwrap().0, tr);
        assert!(holdout_split(&labels, 10, 0).is_err());
    }

    #[test]
    fn model_file_round_trips() {
        let (x, y) = blobs(10, 0.2, 8);
        let m = train(&x, &y, 2.0, 5).unwrap();
        let mut bytes = Vec::new();
        m.write(&mut bytes).unwrap();
        let back = LinearModel::read(&bytes[..]).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, bytes);
        assert!(matches!(
            LinearModel::read(&bytes[..bytes.len() - 3]),
            Err(ScatterError::Format { .. })
        ));
    }
}
