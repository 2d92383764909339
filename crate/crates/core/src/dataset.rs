//! Design matrices, priors, and the libsvm text format.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{sym_eigen, SymMatrix};
use crate::rng;

/// `n × d` matrix of candidate experiments, one row per experiment.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    matrix: DMatrix<f64>,
    labels: Option<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let (n, d) = matrix.shape();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!("design matrix must be nonempty, got {n}x{d}")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix has non-finite entries"));
        }
        let mut rows = Vec::with_capacity(n * d);
        for i in 0..n {
            rows.extend(matrix.row(i).iter());
        }
        Ok(DesignMatrix { n, d, rows, matrix, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Self::from_matrix(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(i))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales every row by one common factor so the largest row has unit
    /// Euclidean norm. All-zero matrices are returned unchanged.
    pub fn normalized(&self) -> DesignMatrix {
        let max = (0..self.n).map(|i| self.row_norm(i)).fold(0.0, f64::max);
        if max == 0.0 {
            return self.clone();
        }
        let mut out = DesignMatrix::from_matrix(&self.matrix / max).expect("finite");
        out.labels = self.labels.clone();
        out
    }

    /// `Σ_{i∈subset} xᵢxᵢᵀ`.
    pub fn subset_covariance(&self, subset: &[usize]) -> SymMatrix {
        let mut m = DMatrix::zeros(self.d, self.d);
        for &i in subset {
            crate::numerics::add_outer_in_place(&mut m, self.row(i), 1.0);
        }
        SymMatrix::symmetrized(m)
    }

    /// Stable content hash of the shape and the bit patterns of every entry.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for v in &self.rows {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Precision matrix of the Gaussian prior plus an optional C-optimality
/// direction.
#[derive(Debug, Clone)]
pub struct Prior {
    pub a: SymMatrix,
    pub c: Option<DVector<f64>>,
}

impl Prior {
    pub fn new(a: SymMatrix) -> Result<Self> {
        if a.dim() > 0 {
            let eig = sym_eigen(&a)?;
            let max = eig.max_value().max(0.0);
            if eig.min_value() < -1e-10 * max.max(f64::MIN_POSITIVE) {
                return Err(Error::invalid(format!(
                    "prior precision is not PSD (smallest eigenvalue {})",
                    eig.min_value()
                )));
            }
        }
        Ok(Prior { a, c: None })
    }

    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        assert!(scale >= 0.0 && scale.is_finite(), "prior scale must be finite and >= 0");
        Prior { a: SymMatrix::scaled_identity(d, scale), c: None }
    }

    pub fn with_c(mut self, c: DVector<f64>) -> Self {
        self.c = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Parses libsvm-format text: `label idx:val idx:val ...` per line, 1-based
/// strictly increasing indices, `#` to end of line is a comment. `d` is the
/// largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<DesignMatrix> {
    let mut labels = Vec::new();
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut d = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("bad label {label_tok:?}")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            let idx: i64 = idx.parse().map_err(|_| err(format!("bad index in {tok:?}")))?;
            if idx <= 0 {
                return Err(err(format!("index must be positive, got {idx}")));
            }
            let idx = idx as usize;
            if idx <= last {
                return Err(err(format!("indices must increase, {idx} after {last}")));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in {tok:?}")));
            }
            last = idx;
            row.push((idx, val));
        }
        d = d.max(last);
        labels.push(label);
        sparse.push(row);
    }
    if sparse.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data rows".into() });
    }
    if d == 0 {
        return Err(Error::Parse { line: 0, msg: "no features".into() });
    }
    let n = sparse.len();
    let mut m = DMatrix::zeros(n, d);
    for (i, row) in sparse.iter().enumerate() {
        for &(j, v) in row {
            m[(i, j - 1)] = v;
        }
    }
    DesignMatrix::from_matrix(m)?.with_labels(labels)
}

/// Writes libsvm text; zero entries are omitted and floats use the shortest
/// representation that parses back to the same bits.
pub fn write_libsvm<W: Write>(x: &DesignMatrix, mut out: W) -> Result<()> {
    for i in 0..x.n() {
        let label = x.labels().map_or(0.0, |l| l[i]);
        write!(out, "{label}")?;
        for (j, v) in x.row(i).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a libsvm file, with `-` meaning stdin.
pub fn load_libsvm(path: &str) -> Result<DesignMatrix> {
    if path == "-" {
        parse_libsvm(std::io::stdin().lock())
    } else {
        let f = std::fs::File::open(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{path}: {e}")))?;
        parse_libsvm(std::io::BufReader::new(f))
    }
}

/// `Σᵢ wᵢ xᵢxᵢᵀ`, with `wᵢ = 1` when no weights are given.
pub fn covariance(x: &DesignMatrix, weights: Option<&[f64]>) -> Result<SymMatrix> {
    let m = x.as_matrix();
    let cov = match weights {
        None => m.transpose() * m,
        Some(w) => {
            if w.len() != x.n() {
                return Err(Error::invalid(format!("{} weights for {} rows", w.len(), x.n())));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite weight"));
            }
            let mut scaled = m.clone();
            for (i, &wi) in w.iter().enumerate() {
                scaled.row_mut(i).scale_mut(wi);
            }
            m.transpose() * scaled
        }
    };
    Ok(SymMatrix::symmetrized(cov))
}

/// Diagonal of `(1−ε)(d/s)·I_S + ε·I` with `S` the first `s` coordinates.
pub fn lowrank_diagonal(d: usize, s: usize, eps: f64) -> Vec<f64> {
    (0..d)
        .map(|j| if j < s { (1.0 - eps) * d as f64 / s as f64 + eps } else { eps })
        .collect()
}

/// Builds `n` axis-aligned rows whose covariance is exactly
/// `(1−ε)(d/s)·I_S + ε·I`, `S` being the first `s` coordinates. Rows for axis
/// `j` are `√(σⱼ/mⱼ)·eⱼ` repeated `mⱼ ≈ n/d` times; the seed shuffles row
/// order. With `s = d` the covariance is the identity.
pub fn synth_lowrank(d: usize, s: usize, eps: f64, n: usize, seed: u64) -> Result<DesignMatrix> {
    if d == 0 || s == 0 || s > d {
        return Err(Error::invalid(format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if n < d {
        return Err(Error::invalid(format!("need n >= d to realize the covariance, got n={n}")));
    }
    let diag = lowrank_diagonal(d, s, eps);
    let mut axes: Vec<usize> = (0..n).map(|i| i % d).collect();
    axes.shuffle(&mut rng::seeded(seed));
    let counts: Vec<usize> = (0..d).map(|j| n / d + usize::from(j < n % d)).collect();
    let m = DMatrix::from_fn(n, d, |i, j| {
        if axes[i] == j {
            (diag[j] / counts[j] as f64).sqrt()
        } else {
            0.0
        }
    });
    DesignMatrix::from_matrix(m)
}
