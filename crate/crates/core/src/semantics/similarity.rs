use super::commuting::CommutingMatrix;
use super::SemanticsError;
use crate::linalg::Matrix;

/// Per-structure normalized instance counts,
/// `S(i,j) = 2·C(i,j) / (C(i,i) + C(j,j))`, with `S(i,i) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    structure: String,
    values: Matrix,
}

impl SimilarityMatrix {
    pub fn new(structure: impl Into<String>, values: Matrix) -> Self {
        Self {
            structure: structure.into(),
            values,
        }
    }

    pub fn structure(&self) -> &str {
        &self.structure
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }
}

pub fn structure_similarity(c: &CommutingMatrix) -> SimilarityMatrix {
    let n = c.n();
    let values = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        // u128: the sum of two u64 diagonals cannot overflow
        let denom = c.get(i, i) as u128 + c.get(j, j) as u128;
        if denom == 0 {
            0.0
        } else {
            (2 * c.get(i, j) as u128) as f64 / denom as f64
        }
    });
    SimilarityMatrix::new(c.structure().to_string(), values)
}

/// `A = Σ_m ω_m · S_m` for weights on the probability simplex.
pub fn semsim_adjacency(sims: &[SimilarityMatrix], omega: &[f64]) -> Result<Matrix, SemanticsError> {
    if sims.is_empty() || sims.len() != omega.len() {
        return Err(SemanticsError::Shape(format!(
            "{} similarity matrices but {} weights",
            sims.len(),
            omega.len()
        )));
    }
    let n = sims[0].n();
    if let Some(s) = sims.iter().find(|s| s.values().shape() != (n, n)) {
        return Err(SemanticsError::Shape(format!(
            "similarity for `{}` is {:?}, expected ({n}, {n})",
            s.structure(),
            s.values().shape()
        )));
    }
    let total: f64 = omega.iter().sum();
    if omega.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(SemanticsError::Simplex(format!("{omega:?} sums to {total}")));
    }
    let mut a = Matrix::zeros(n, n);
    for (s, &w) in sims.iter().zip(omega) {
        a.axpy(w, s.values());
    }
    // a convex combination of values in [0,1]; only rounding can leave it
    for v in a.as_mut_slice() {
        *v = v.min(1.0);
    }
    Ok(a)
}

/// `D^{-1/2} A D^{-1/2}` with `D = diag(row sums of A)`.
pub fn sym_normalize(a: &Matrix) -> Result<Matrix, SemanticsError> {
    if a.rows() != a.cols() {
        return Err(SemanticsError::Shape(format!("{:?} is not square", a.shape())));
    }
    let sums = a.row_sums();
    if let Some(i) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(SemanticsError::ZeroDegree(i));
    }
    let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s.sqrt()).collect();
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| inv[i] * a[(i, j)] * inv[j]))
}
