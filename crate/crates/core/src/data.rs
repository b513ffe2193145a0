//! Datasets, file ingestion, PU subsampling and the Gaussian generators.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, Error, Result};
use crate::rng;

/// Probability `p(y = +1)` of the positive class. The negative prior is always
/// derived as `1 - theta_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ClassPrior(f64);

impl ClassPrior {
    pub fn new(theta_p: f64) -> Result<Self> {
        if theta_p > 0.0 && theta_p < 1.0 {
            Ok(ClassPrior(theta_p))
        } else {
            Err(precondition(format!(
                "class prior must lie in (0, 1), got {theta_p}"
            )))
        }
    }

    pub fn theta_p(self) -> f64 {
        self.0
    }

    pub fn theta_n(self) -> f64 {
        1.0 - self.0
    }

    /// `theta_p / theta_n`.
    pub fn ratio(self) -> f64 {
        self.0 / (1.0 - self.0)
    }
}

impl TryFrom<f64> for ClassPrior {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        ClassPrior::new(value)
    }
}

impl From<ClassPrior> for f64 {
    fn from(p: ClassPrior) -> f64 {
        p.0
    }
}

/// Fully labeled samples with labels in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<i8>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(precondition(format!("label {bad} is not +1 or -1")));
        }
        if features.nrows() > 0 && features.ncols() == 0 {
            return Err(shape("non-empty dataset with zero features"));
        }
        Ok(LabeledDataset { features, labels })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn count(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    /// Row indices carrying `label`.
    pub fn indices_of(&self, label: i8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (y == label).then_some(i))
            .collect()
    }

    pub fn rows_with(&self, label: i8) -> Array2<f64> {
        self.features.select(Axis(0), &self.indices_of(label))
    }
}

/// Positive samples and unlabeled samples sharing a feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PuDataset {
    positives: Array2<f64>,
    unlabeled: Array2<f64>,
}

impl PuDataset {
    pub fn new(positives: Array2<f64>, unlabeled: Array2<f64>) -> Result<Self> {
        if positives.ncols() != unlabeled.ncols() {
            return Err(shape(format!(
                "positives have {} columns, unlabeled have {}",
                positives.ncols(),
                unlabeled.ncols()
            )));
        }
        if positives.ncols() == 0 {
            return Err(shape("feature dimension must be at least 1"));
        }
        Ok(PuDataset {
            positives,
            unlabeled,
        })
    }

    pub fn positives(&self) -> &Array2<f64> {
        &self.positives
    }

    pub fn unlabeled(&self) -> &Array2<f64> {
        &self.unlabeled
    }

    pub fn n_p(&self) -> usize {
        self.positives.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.unlabeled.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positives.ncols()
    }

    /// Both sample sets non-empty, as every estimator requires.
    pub fn ensure_nonempty(&self) -> Result<()> {
        if self.n_p() == 0 || self.n_u() == 0 {
            return Err(precondition(format!(
                "need at least one positive and one unlabeled sample (nP={}, nU={})",
                self.n_p(),
                self.n_u()
            )));
        }
        Ok(())
    }

    /// Subset by row indices of each part.
    pub fn select(&self, pos_idx: &[usize], unl_idx: &[usize]) -> PuDataset {
        PuDataset {
            positives: self.positives.select(Axis(0), pos_idx),
            unlabeled: self.unlabeled.select(Axis(0), unl_idx),
        }
    }
}

/// Two-class Gaussian mixture with a shared diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub theta_p: ClassPrior,
}

impl GaussianMixtureSpec {
    pub fn new(
        mean_pos: Vec<f64>,
        mean_neg: Vec<f64>,
        cov_diag: Vec<f64>,
        theta_p: ClassPrior,
    ) -> Result<Self> {
        let spec = GaussianMixtureSpec {
            mean_pos,
            mean_neg,
            cov_diag,
            theta_p,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The two-dimensional illustration: classes at `(-1, 0)` and `(1, 0)`
    /// with covariance `diag(0.5, 3.5)`. The large vertical variance makes
    /// the top principal axis vertical while the classes separate
    /// horizontally.
    pub fn toy(theta_p: ClassPrior) -> Self {
        GaussianMixtureSpec {
            mean_pos: vec![-1.0, 0.0],
            mean_neg: vec![1.0, 0.0],
            cov_diag: vec![0.5, 3.5],
            theta_p,
        }
    }

    /// The toy geometry with both classes at the origin: `x` and `y` are
    /// independent.
    pub fn toy_null(theta_p: ClassPrior) -> Self {
        GaussianMixtureSpec {
            mean_pos: vec![0.0, 0.0],
            mean_neg: vec![0.0, 0.0],
            cov_diag: vec![0.5, 3.5],
            theta_p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean_pos.len();
        if d == 0 || self.mean_neg.len() != d || self.cov_diag.len() != d {
            return Err(shape(format!(
                "mixture spec dimensions disagree: {} / {} / {}",
                d,
                self.mean_neg.len(),
                self.cov_diag.len()
            )));
        }
        if self.cov_diag.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(precondition("covariance diagonal entries must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean_pos.len()
    }

    fn log_density(&self, mean: &[f64], x: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for ((&m, &c), &xi) in mean.iter().zip(&self.cov_diag).zip(x.iter()) {
            let z = xi - m;
            acc += -0.5 * z * z / c - 0.5 * (2.0 * std::f64::consts::PI * c).ln();
        }
        acc
    }

    /// `p(x | y = +1)`.
    pub fn density_pos(&self, x: ArrayView1<f64>) -> f64 {
        self.log_density(&self.mean_pos, x).exp()
    }

    /// `p(x | y = -1)`.
    pub fn density_neg(&self, x: ArrayView1<f64>) -> f64 {
        self.log_density(&self.mean_neg, x).exp()
    }

    /// Marginal `p(x)`.
    pub fn density(&self, x: ArrayView1<f64>) -> f64 {
        let t = self.theta_p.theta_p();
        t * self.density_pos(x) + (1.0 - t) * self.density_neg(x)
    }

    fn draw_row(&self, mean: &[f64], rng: &mut rng::Rng, out: &mut [f64]) {
        for ((o, &m), &c) in out.iter_mut().zip(mean).zip(&self.cov_diag) {
            let z: f64 = StandardNormal.sample(rng);
            *o = m + c.sqrt() * z;
        }
    }
}

/// Positives from `N(mean_pos, diag(cov))`, unlabeled from the mixture.
pub fn sample_gaussian_pu(
    spec: &GaussianMixtureSpec,
    n_p: usize,
    n_u: usize,
    seed: u64,
) -> Result<PuDataset> {
    spec.validate()?;
    if n_p == 0 || n_u == 0 {
        return Err(precondition(
            "sample_gaussian_pu needs n_p >= 1 and n_u >= 1",
        ));
    }
    let d = spec.dim();
    let mut rng = rng::from_seed(seed);
    let mut positives = Array2::zeros((n_p, d));
    for mut row in positives.rows_mut() {
        spec.draw_row(&spec.mean_pos, &mut rng, row.as_slice_mut().unwrap());
    }
    let mut unlabeled = Array2::zeros((n_u, d));
    let theta = spec.theta_p.theta_p();
    for mut row in unlabeled.rows_mut() {
        let mean = if rng.random::<f64>() < theta {
            &spec.mean_pos
        } else {
            &spec.mean_neg
        };
        spec.draw_row(mean, &mut rng, row.as_slice_mut().unwrap());
    }
    PuDataset::new(positives, unlabeled)
}

/// Labeled draws from the joint distribution: `y ~ Bernoulli(theta_p)`, then
/// `x | y`.
pub fn sample_gaussian_labeled(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    spec.validate()?;
    let d = spec.dim();
    let mut rng = rng::from_seed(seed);
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let theta = spec.theta_p.theta_p();
    for mut row in features.rows_mut() {
        let positive = rng.random::<f64>() < theta;
        let mean = if positive {
            &spec.mean_pos
        } else {
            &spec.mean_neg
        };
        spec.draw_row(mean, &mut rng, row.as_slice_mut().unwrap());
        labels.push(if positive { 1 } else { -1 });
    }
    LabeledDataset::new(features, labels)
}

/// Draws a PU dataset from a labeled corpus.
///
/// Positives are sampled without replacement from the positive class. Each
/// unlabeled draw flips a `Bernoulli(theta_p)` coin and takes the next unused
/// row of the chosen class, so labeled positives and unlabeled rows never
/// overlap.
pub fn make_pu(
    data: &LabeledDataset,
    n_p: usize,
    n_u: usize,
    prior: ClassPrior,
    seed: u64,
) -> Result<PuDataset> {
    if n_p == 0 || n_u == 0 {
        return Err(precondition("make_pu needs n_p >= 1 and n_u >= 1"));
    }
    let mut rng = rng::from_seed(seed);
    let mut pos = data.indices_of(1);
    let mut neg = data.indices_of(-1);
    if pos.len() < n_p {
        return Err(Error::Capacity {
            class: "positive",
            needed: n_p,
            available: pos.len(),
        });
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let (labeled_pos, mut spare_pos) = (pos[..n_p].to_vec(), pos[n_p..].iter());
    let mut spare_neg = neg.iter();
    let mut unl = Vec::with_capacity(n_u);
    let (mut want_pos, mut want_neg) = (0usize, 0usize);
    for _ in 0..n_u {
        if rng.random::<f64>() < prior.theta_p() {
            want_pos += 1;
            match spare_pos.next() {
                Some(&i) => unl.push(i),
                None => {
                    return Err(Error::Capacity {
                        class: "positive",
                        needed: n_p + want_pos,
                        available: pos.len(),
                    })
                }
            }
        } else {
            want_neg += 1;
            match spare_neg.next() {
                Some(&i) => unl.push(i),
                None => {
                    return Err(Error::Capacity {
                        class: "negative",
                        needed: want_neg,
                        available: neg.len(),
                    })
                }
            }
        }
    }
    PuDataset::new(
        data.features.select(Axis(0), &labeled_pos),
        data.features.select(Axis(0), &unl),
    )
}

/// Reads a LIBSVM/svmlight file into a dense dataset. The feature dimension
/// is the largest index present; labels `> 0` map to `+1`, everything else
/// to `-1`.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("invalid label {label_tok:?}")))?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(
                    lineno,
                    format!("feature indices must be ascending ({idx} after {last})"),
                ));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature value {val:?}")))?;
            last = idx;
            entries.push((idx - 1, val));
        }
        dim = dim.max(last);
        labels.push(if label > 0.0 { 1 } else { -1 });
        rows.push(entries);
    }

    let mut features = Array2::zeros((rows.len(), dim));
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[[i, j]] = v;
        }
    }
    LabeledDataset::new(features, labels)
}

/// Writes a dataset in LIBSVM format. Zero entries are omitted except in the
/// last column, which is always written so the dimension survives a reload.
pub fn write_libsvm(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let d = data.dim();
    for (row, &y) in data.features.rows().into_iter().zip(&data.labels) {
        write!(out, "{}", if y > 0 { "+1" } else { "-1" })?;
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 || j + 1 == d {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a CSV file. A header row is optional; it is recognised by any
/// non-numeric field. The label column is the one named `y` when a header is
/// present, otherwise the last column.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records().enumerate().peekable();

    let mut label_col: Option<usize> = None;
    if let Some((_, Ok(first))) = records.peek() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            label_col = first.iter().position(|f| f == "y");
            let width = first.len();
            records.next();
            label_col = Some(label_col.unwrap_or(width.saturating_sub(1)));
        }
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, rec) in records {
        let rec = rec?;
        let lineno = i + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        if rec.len() < 2 {
            return Err(err("need at least one feature and a label".into()));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(err(format!("expected {w} fields, found {}", rec.len())))
            }
            _ => {}
        }
        let lc = label_col.unwrap_or(rec.len() - 1);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| err(format!("non-numeric field {field:?}")))?;
            if j == lc {
                labels.push(if v > 0.0 { 1 } else { -1 });
            } else {
                values.push(v);
            }
        }
    }
    let d = width.map_or(0, |w| w - 1);
    let features =
        Array2::from_shape_vec((labels.len(), d), values).map_err(|e| shape(e.to_string()))?;
    LabeledDataset::new(features, labels)
}

/// Dispatches on extension: `.csv` is CSV, anything else LIBSVM.
pub fn load_labeled(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_csv(path),
        _ => load_libsvm(path),
    }
}

/// Per-feature min-max scaling to `[0, 1]`. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(precondition("cannot fit a scaler on zero rows"));
        }
        let min = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let max = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        Ok(MinMaxScaler {
            min: min.to_vec(),
            max: max.to_vec(),
        })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.min.len() {
            return Err(shape(format!(
                "scaler fitted on {} features, got {}",
                self.min.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let span = self.max[j] - self.min[j];
            let lo = self.min[j];
            col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
        }
        Ok(out)
    }

    pub fn transform_labeled(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        LabeledDataset::new(self.transform(&data.features)?, data.labels.clone())
    }
}

/// Column means of a matrix.
pub(crate) fn column_means(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn libsvm_zero_fills_to_max_index() {
        let f = write_tmp("1 1:0.5 3:2.0\n-1 2:1.0\n", ".svm");
        let data = load_libsvm(f.path()).unwrap();
        assert_eq!(data.labels(), &[1, -1]);
        assert_eq!(data.features(), &array![[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn libsvm_label_mapping() {
        let f = write_tmp("0 1:1\n2 1:1\n-3 1:1\n", ".svm");
        assert_eq!(load_libsvm(f.path()).unwrap().labels(), &[-1, 1, -1]);
    }

    #[test]
    fn libsvm_empty_file() {
        let f = write_tmp("", ".svm");
        let data = load_libsvm(f.path()).unwrap();
        assert_eq!(data.len(), 0);
        let err = make_pu(&data, 1, 1, ClassPrior::new(0.5).unwrap(), 0).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        let f = write_tmp("1 1:0.5\n1 3:1 2:4\n", ".svm");
        match load_libsvm(f.path()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("ascending"));
            }
            e => panic!("unexpected {e}"),
        }
        let f = write_tmp("1 1:0.5\n\n1 2-4\n", ".svm");
        match load_libsvm(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let f = write_tmp("1 0:1\n", ".svm");
        assert!(matches!(
            load_libsvm(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_header_and_label_column() {
        let f = write_tmp("a,y,b\n1.0,1,2.0\n3.0,-1,4.0\n", ".csv");
        let data = load_csv(f.path()).unwrap();
        assert_eq!(data.labels(), &[1, -1]);
        assert_eq!(data.features(), &array![[1.0, 2.0], [3.0, 4.0]]);

        let f = write_tmp("1.0,2.0,1\n3.0,4.0,0\n", ".csv");
        let data = load_labeled(f.path()).unwrap();
        assert_eq!(data.labels(), &[1, -1]);
        assert_eq!(data.features(), &array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn make_pu_rejects_zero_positives() {
        let data = sample_gaussian_labeled(&GaussianMixtureSpec::toy(half()), 100, 1).unwrap();
        assert!(matches!(
            make_pu(&data, 0, 10, half(), 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn make_pu_names_the_short_class() {
        let features = Array2::zeros((6, 1));
        let data = LabeledDataset::new(features, vec![1, 1, 1, 1, 1, -1]).unwrap();
        match make_pu(&data, 2, 4, half(), 3).unwrap_err() {
            Error::Capacity { class, .. } => assert!(class == "negative" || class == "positive"),
            e => panic!("unexpected {e}"),
        }
        match make_pu(&data, 6, 1, half(), 3).unwrap_err() {
            Error::Capacity { class, .. } => assert_eq!(class, "positive"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn make_pu_is_deterministic() {
        let data = sample_gaussian_labeled(&GaussianMixtureSpec::toy(half()), 3000, 5).unwrap();
        let a = make_pu(&data, 200, 400, half(), 11).unwrap();
        let b = make_pu(&data, 200, 400, half(), 11).unwrap();
        assert_eq!(a, b);
        let c = make_pu(&data, 200, 400, half(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn make_pu_unlabeled_fraction_within_binomial_bound() {
        // Tag each row with its label in a spare feature so we can count.
        let n = 10_000;
        let labels: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let features = Array2::from_shape_fn((n, 1), |(i, _)| labels[i] as f64);
        let data = LabeledDataset::new(features, labels).unwrap();
        let pu = make_pu(&data, 1000, 2000, half(), 42).unwrap();
        assert!(pu.positives().iter().all(|&v| v == 1.0));
        let frac = pu.unlabeled().iter().filter(|&&v| v == 1.0).count() as f64 / 2000.0;
        // 3 sigma of Binomial(2000, 0.5) / 2000.
        let bound = 3.0 * (0.25f64 / 2000.0).sqrt();
        assert!((frac - 0.5).abs() <= bound, "fraction {frac}");
    }

    #[test]
    fn toy_generator_shapes() {
        let pu = sample_gaussian_pu(&GaussianMixtureSpec::toy(half()), 200, 400, 0).unwrap();
        assert_eq!(pu.positives().dim(), (200, 2));
        assert_eq!(pu.unlabeled().dim(), (400, 2));
    }

    #[test]
    fn positive_sample_mean_within_clt_bound() {
        let spec = GaussianMixtureSpec::toy(half());
        let n = 100_000;
        let pu = sample_gaussian_pu(&spec, n, 1, 9).unwrap();
        let mean = column_means(pu.positives());
        for j in 0..2 {
            let sd = spec.cov_diag[j].sqrt();
            assert!((mean[j] - spec.mean_pos[j]).abs() <= 4.0 * sd / (n as f64).sqrt());
        }
    }

    #[test]
    fn equal_means_give_identical_marginals() {
        let spec = GaussianMixtureSpec::toy_null(ClassPrior::new(0.3).unwrap());
        let x = array![0.3, -1.2];
        assert!((spec.density_pos(x.view()) - spec.density(x.view())).abs() < 1e-15);
    }

    #[test]
    fn class_prior_bounds() {
        assert!(ClassPrior::new(0.0).is_err());
        assert!(ClassPrior::new(1.0).is_err());
        assert!(ClassPrior::new(f64::NAN).is_err());
        let p = ClassPrior::new(0.25).unwrap();
        assert_eq!(p.theta_n(), 0.75);
        assert!((p.ratio() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaler_maps_to_unit_interval() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]];
        let s = MinMaxScaler::fit(&x).unwrap();
        assert_eq!(
            s.transform(&x).unwrap(),
            array![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]]
        );
    }

    fn half() -> ClassPrior {
        ClassPrior::new(0.5).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn generated_datasets_respect_dimension(
            d in 1usize..5,
            n_p in 1usize..30,
            n_u in 1usize..30,
            theta in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let spec = GaussianMixtureSpec::new(
                vec![1.0; d], vec![-1.0; d], vec![0.7; d], ClassPrior::new(theta).unwrap()
            ).unwrap();
            let a = sample_gaussian_pu(&spec, n_p, n_u, seed).unwrap();
            prop_assert_eq!(a.positives().ncols(), d);
            prop_assert_eq!(a.unlabeled().ncols(), d);
            prop_assert_eq!(a.n_p(), n_p);
            prop_assert_eq!(a.n_u(), n_u);
            let b = sample_gaussian_pu(&spec, n_p, n_u, seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn libsvm_round_trip(
            rows in proptest::collection::vec(
                (prop_oneof![Just(1i8), Just(-1i8)],
                 proptest::collection::vec(prop_oneof![Just(0.0f64), -1e6f64..1e6], 4)),
                1..12)
        ) {
            let labels: Vec<i8> = rows.iter().map(|r| r.0).collect();
            let flat: Vec<f64> = rows.iter().flat_map(|r| r.1.clone()).collect();
            let data = LabeledDataset::new(
                Array2::from_shape_vec((rows.len(), 4), flat).unwrap(), labels
            ).unwrap();
            let f = tempfile::Builder::new().suffix(".svm").tempfile().unwrap();
            write_libsvm(&data, f.path()).unwrap();
            prop_assert_eq!(load_libsvm(f.path()).unwrap(), data);
        }
    }
}
