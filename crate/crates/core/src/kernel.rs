//! Garrotized kernels `K(z_i, z_j; delta) = K_base(sqrt(delta) * z_i, sqrt(delta) * z_j)`
//! and their derivatives with respect to the garrote weights.
//!
//! Pairwise terms are precomputed once per design because they do not depend
//! on `delta`; the optimizer then re-evaluates the Gram matrix and the
//! `dK/d delta` contraction many times at O(n^2 Q) each without ever storing
//! a Q x n^2 derivative tensor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-sum_q delta_q (z_iq - z_jq)^2)`
    GaussianGarrote,
    /// `(sum_q delta_q z_iq z_jq + offset)^degree`
    PolynomialGarrote { degree: u32, offset: f64 },
}

impl Default for KernelFamily {
    fn default() -> Self {
        KernelFamily::GaussianGarrote
    }
}

impl KernelFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelFamily::GaussianGarrote => Ok(()),
            KernelFamily::PolynomialGarrote { degree, offset } => {
                if degree < 1 {
                    return Err(Error::InvalidConfig("polynomial degree must be >= 1".into()));
                }
                if !(offset >= 0.0) || !offset.is_finite() {
                    return Err(Error::InvalidConfig("polynomial offset must be >= 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// A kernel family together with garrote weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarroteKernelSpec {
    pub family: KernelFamily,
    pub delta: Vec<f64>,
}

impl GarroteKernelSpec {
    pub fn new(family: KernelFamily, delta: Vec<f64>) -> Result<Self> {
        family.validate()?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("delta"));
        }
        if delta.iter().any(|d| *d < 0.0) {
            return Err(Error::InvalidConfig("garrote weights must be nonnegative".into()));
        }
        Ok(Self { family, delta })
    }
}

/// Squared coordinate differences `(z_iq - z_jq)^2` for every pair `i < j`.
///
/// Layout is pair-major: pair `(i, j)` in row-major upper-triangle order owns
/// `Q` contiguous values.
#[derive(Debug, Clone)]
pub struct PairwiseSqDiff {
    n: usize,
    q: usize,
    values: Vec<f64>,
}

impl PairwiseSqDiff {
    pub fn new(z: &DMatrix<f64>) -> Self {
        Self::from_fn(z, |a, b| (a - b) * (a - b), false)
    }

    fn from_fn(z: &DMatrix<f64>, f: impl Fn(f64, f64) -> f64, with_diag: bool) -> Self {
        let (n, q) = z.shape();
        let npairs = if with_diag { n * (n + 1) / 2 } else { n * n.saturating_sub(1) / 2 };
        let mut values = Vec::with_capacity(npairs * q);
        // Row-major copy so each row's coordinates are contiguous.
        let rows: Vec<f64> = z.transpose().as_slice().to_vec();
        for i in 0..n {
            let zi = &rows[i * q..(i + 1) * q];
            let start = if with_diag { i } else { i + 1 };
            for j in start..n {
                let zj = &rows[j * q..(j + 1) * q];
                values.extend(zi.iter().zip(zj).map(|(&a, &b)| f(a, b)));
            }
        }
        Self { n, q, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `(z_iq - z_jq)^2`, symmetric in `i, j` and zero on the diagonal.
    pub fn get(&self, i: usize, j: usize, q: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.values[pair_offset(self.n, i, j) * self.q + q],
            std::cmp::Ordering::Greater => self.values[pair_offset(self.n, j, i) * self.q + q],
        }
    }

    fn pair(&self, p: usize) -> &[f64] {
        &self.values[p * self.q..(p + 1) * self.q]
    }
}

/// Index of pair `(i, j)`, `i < j`, in row-major strict upper-triangle order.
fn pair_offset(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Products `z_iq z_jq` for every pair `i <= j` (diagonal included).
#[derive(Debug, Clone)]
struct PairwiseProducts {
    q: usize,
    values: Vec<f64>,
}

impl PairwiseProducts {
    fn new(z: &DMatrix<f64>) -> Self {
        let t = PairwiseSqDiff::from_fn(z, |a, b| a * b, true);
        Self { q: t.q, values: t.values }
    }

    fn pair(&self, p: usize) -> &[f64] {
        &self.values[p * self.q..(p + 1) * self.q]
    }
}

#[derive(Debug, Clone)]
enum PairTerms {
    SqDiff(PairwiseSqDiff),
    Products(PairwiseProducts),
}

/// Precomputed, delta-free pairwise terms for one training design.
#[derive(Debug, Clone)]
pub struct KernelCache {
    family: KernelFamily,
    n: usize,
    q: usize,
    terms: PairTerms,
}

impl KernelCache {
    pub fn new(family: KernelFamily, z: &DMatrix<f64>) -> Result<Self> {
        family.validate()?;
        let terms = match family {
            KernelFamily::GaussianGarrote => PairTerms::SqDiff(PairwiseSqDiff::new(z)),
            KernelFamily::PolynomialGarrote { .. } => PairTerms::Products(PairwiseProducts::new(z)),
        };
        Ok(Self { family, n: z.nrows(), q: z.ncols(), terms })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    fn check_delta(&self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "delta has {} entries, kernel expects {}",
                delta.len(),
                self.q
            )));
        }
        Ok(())
    }

    /// The n x n Gram matrix `K(delta)`. Symmetry is exact by construction.
    pub fn gram(&self, delta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_delta(delta)?;
        let n = self.n;
        let active: Vec<usize> = (0..self.q).filter(|&q| delta[q] != 0.0).collect();
        let mut k = DMatrix::zeros(n, n);
        match (&self.terms, self.family) {
            (PairTerms::SqDiff(sq), _) => {
                let mut p = 0;
                for i in 0..n {
                    k[(i, i)] = 1.0;
                    for j in i + 1..n {
                        let s = sq.pair(p);
                        let e: f64 = active.iter().map(|&q| delta[q] * s[q]).sum();
                        let v = (-e).exp();
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                        p += 1;
                    }
                }
            }
            (PairTerms::Products(pr), KernelFamily::PolynomialGarrote { degree, offset }) => {
                let mut p = 0;
                for i in 0..n {
                    for j in i..n {
                        let s = pr.pair(p);
                        let u: f64 = active.iter().map(|&q| delta[q] * s[q]).sum::<f64>() + offset;
                        let v = u.powi(degree as i32);
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                        p += 1;
                    }
                }
            }
            _ => unreachable!("pair terms always match the family"),
        }
        Ok(k)
    }

    /// `v_q = sum_{i,j} M_ij dK_ij/d delta_q`. For the Gaussian garrote
    /// `dK_ij/d delta_q = -K_ij (z_iq - z_jq)^2`.
    ///
    /// Summation order is fixed: pairs in row-major upper-triangle order,
    /// each pair's contribution added to all `q` before the next pair.
    pub fn delta_contraction(&self, delta: &[f64], gram: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        if m.shape() != (self.n, self.n) || gram.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch("contraction weight and Gram must be n x n".into()));
        }
        self.contract_pairs(delta, gram, |i, j| m[(i, j)] + m[(j, i)], |i| m[(i, i)])
    }

    /// Contraction with a weight given pairwise: `off(i, j)` is the combined
    /// weight `M_ij + M_ji` for `i < j`, `diag(i)` is `M_ii`.
    pub(crate) fn contract_pairs(
        &self,
        delta: &[f64],
        gram: &DMatrix<f64>,
        off: impl Fn(usize, usize) -> f64,
        diag: impl Fn(usize) -> f64,
    ) -> Result<Vec<f64>> {
        self.check_delta(delta)?;
        let n = self.n;
        let mut v = vec![0.0; self.q];
        match (&self.terms, self.family) {
            (PairTerms::SqDiff(sq), _) => {
                let mut p = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        let c = -off(i, j) * gram[(i, j)];
                        if c != 0.0 {
                            for (acc, s) in v.iter_mut().zip(sq.pair(p)) {
                                *acc += c * s;
                            }
                        }
                        p += 1;
                    }
                }
            }
            (PairTerms::Products(pr), KernelFamily::PolynomialGarrote { degree, offset }) => {
                let d = degree as i32;
                let mut p = 0;
                for i in 0..n {
                    for j in i..n {
                        let s = pr.pair(p);
                        let w = if i == j { diag(i) } else { off(i, j) };
                        if w != 0.0 {
                            let u: f64 = (0..self.q).filter(|&q| delta[q] != 0.0).map(|q| delta[q] * s[q]).sum::<f64>()
                                + offset;
                            let c = w * degree as f64 * u.powi(d - 1);
                            for (acc, sq) in v.iter_mut().zip(s) {
                                *acc += c * sq;
                            }
                        }
                        p += 1;
                    }
                }
            }
            _ => unreachable!("pair terms always match the family"),
        }
        Ok(v)
    }
}

/// Gram matrix of `spec` on the rows of `z`.
pub fn gram(spec: &GarroteKernelSpec, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    KernelCache::new(spec.family, z)?.gram(&spec.delta)
}

/// Kernel evaluations `K(z_new, z_train_j; delta)` for every training row.
pub fn kernel_row(spec: &GarroteKernelSpec, z_new: &[f64], z_train: &DMatrix<f64>) -> Result<DVector<f64>> {
    let q = z_train.ncols();
    if z_new.len() != q || spec.delta.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "new point has {} coordinates, delta {}, training rows {q}",
            z_new.len(),
            spec.delta.len()
        )));
    }
    let delta = &spec.delta;
    let active: Vec<usize> = (0..q).filter(|&c| delta[c] != 0.0).collect();
    let row = DVector::from_iterator(
        z_train.nrows(),
        (0..z_train.nrows()).map(|j| match spec.family {
            KernelFamily::GaussianGarrote => {
                let e: f64 = active
                    .iter()
                    .map(|&c| {
                        let d = z_new[c] - z_train[(j, c)];
                        delta[c] * (d * d)
                    })
                    .sum();
                (-e).exp()
            }
            KernelFamily::PolynomialGarrote { degree, offset } => {
                let u: f64 = active.iter().map(|&c| delta[c] * (z_new[c] * z_train[(j, c)])).sum::<f64>() + offset;
                u.powi(degree as i32)
            }
        }),
    );
    Ok(row)
}

/// Free-function form of [`KernelCache::delta_contraction`].
pub fn delta_contraction(
    spec: &GarroteKernelSpec,
    cache: &KernelCache,
    gram: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if cache.family() != spec.family {
        return Err(Error::InvalidConfig("kernel cache built for a different family".into()));
    }
    cache.delta_contraction(&spec.delta, gram, m)
}
