//! Solvable hierarchical teacher with degree-2 Hermite features, its
//! random-feature spectral estimator, and a planted multi-spike model.

use serde::Serialize;

use crate::activation::Activation;
use crate::dataio::Dataset;
use crate::error::{invalid, mismatch, LofiError, Result};
use crate::linalg::{dot, mean, norm, ridge_solve, sym_eig_all, DenseMatrix, EigMethod};
use crate::lofi::moments::{linear_moment, MomentAccumulator, MOMENT_BATCH};
use crate::rng::Rng;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `d(d+1)/2`.
pub fn hermite2_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Flattening of `H₂(x) = (xxᵀ − I)/√2`: diagonal entries `(x_i² − 1)/√2`
/// first, then `x_i x_j` for `i < j` in lexicographic order.
pub fn hermite2_features(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(hermite2_dim(d));
    out.extend(x.iter().map(|v| (v * v - 1.0) / SQRT2));
    for i in 0..d {
        for j in i + 1..d {
            out.push(x[i] * x[j]);
        }
    }
    out
}

pub fn hermite2_matrix(x: &DenseMatrix) -> DenseMatrix {
    let (n, d) = x.shape();
    let mut out = DenseMatrix::zeros(n, hermite2_dim(d));
    for r in 0..n {
        out.row_mut(r).copy_from_slice(&hermite2_features(x.row(r)));
    }
    out
}

/// Same ordering as [`hermite2_features`]; off-diagonals carry `√2` so that
/// Euclidean products of flattenings equal Frobenius products.
pub fn flatten_symmetric(a: &DenseMatrix) -> Result<Vec<f64>> {
    let d = a.rows();
    if a.cols() != d {
        return invalid("flattening needs a square matrix");
    }
    let mut out = a.diagonal();
    for i in 0..d {
        for j in i + 1..d {
            out.push(SQRT2 * 0.5 * (a[(i, j)] + a[(j, i)]));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Tanh,
    Identity,
}

impl Link {
    pub fn eval(self, h: f64) -> f64 {
        match self {
            Link::Tanh => h.tanh(),
            Link::Identity => h,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Link::Tanh => "tanh",
            Link::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Link {
    type Err = LofiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Link::Tanh),
            "identity" => Ok(Link::Identity),
            other => Err(LofiError::UnknownTag(other.to_string())),
        }
    }
}

/// `y = g*(⟨A2, H₂(h1)⟩)` with `h1 = A1 · H₂(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierTeacher {
    pub d: usize,
    pub d1: usize,
    /// `d1 × D₂`, unit rows.
    pub a1: DenseMatrix,
    /// `d1 × d1`, symmetric with unit Frobenius norm.
    pub a2: DenseMatrix,
    pub link: Link,
}

/// `⌊d^e⌋`, robust to the power landing a hair under an integer.
pub fn floor_pow(d: usize, e: f64) -> usize {
    ((d as f64).powf(e) + 1e-9).floor() as usize
}

pub fn gen_teacher(d: usize, epsilon: f64, link: Link, rng: &mut Rng) -> Result<HierTeacher> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if d < 4 {
        return invalid(format!("input dimension must be at least 4, got {d}"));
    }
    let d1 = floor_pow(d, epsilon).max(1);
    let a1 = rng.sphere_rows(d1, hermite2_dim(d));
    let b = rng.gaussian_matrix(d1, d1);
    let mut a2 = b.add(&b.transpose())?.scale(0.5);
    let f = a2.frobenius_norm();
    a2.scale_in_place(1.0 / f);
    Ok(HierTeacher { d, d1, a1, a2, link })
}

impl HierTeacher {
    pub fn hidden(&self, x: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
        if x.cols() != self.d {
            return mismatch(format!("teacher expects {} inputs, got {}", self.d, x.cols()));
        }
        let h1 = hermite2_matrix(x).matmul_t(&self.a1)?;
        let tr = self.a2.trace();
        let h2 = (0..x.rows())
            .map(|r| {
                let h = h1.row(r);
                (dot(h, &self.a2.mul_vec(h).expect("square")) - tr) / SQRT2
            })
            .collect();
        Ok((h1, h2))
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    /// Labels are centered; `label_mean` holds the removed mean.
    pub dataset: Dataset,
    pub label_mean: f64,
    pub h1: DenseMatrix,
    pub h2: Vec<f64>,
}

impl SynthSample {
    pub fn raw_labels(&self) -> Vec<f64> {
        self.dataset.y.iter().map(|v| v + self.label_mean).collect()
    }
}

pub fn sample_synth(teacher: &HierTeacher, n: usize, rng: &mut Rng) -> Result<SynthSample> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let x = rng.gaussian_matrix(n, teacher.d);
    let (h1, h2) = teacher.hidden(&x)?;
    let y: Vec<f64> = h2.iter().map(|h| teacher.link.eval(*h)).collect();
    let label_mean = mean(&y);
    let dataset = Dataset::new(x, y.iter().map(|v| v - label_mean).collect(), "hier_teacher")?;
    Ok(SynthSample { dataset, label_mean, h1, h2 })
}

fn centered_columns(h: &DenseMatrix) -> DenseMatrix {
    let mut out = h.clone();
    for c in 0..h.cols() {
        let m = mean(&h.col(c));
        for r in 0..h.rows() {
            out[(r, c)] -= m;
        }
    }
    out
}

/// Orthonormal basis of the centered column span (rank-revealing through
/// the eigendecomposition of the Gram matrix).
fn column_basis(h: &DenseMatrix) -> Result<DenseMatrix> {
    let hc = centered_columns(h);
    let eig = sym_eig_all(&hc.t_matmul(&hc)?)?;
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut cols = Vec::new();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * top && l > 0.0 {
            let mut q = hc.mul_vec(&eig.vector(i))?;
            let s = norm(&q);
            q.iter_mut().for_each(|v| *v /= s);
            cols.push(q);
        }
    }
    if cols.is_empty() {
        return Err(LofiError::DegenerateFeatures("all columns are constant".into()));
    }
    DenseMatrix::from_columns(&cols)
}

/// Normalized overlap in `[0, 1]`: `‖Q_Hᵀ Q_Ĥ‖²_F / max(k, k')` on
/// orthonormal bases of the centered column spans. Equals 1 exactly when the
/// spans coincide, 0 when they are orthogonal.
pub fn representation_overlap(h: &DenseMatrix, h_hat: &DenseMatrix) -> Result<f64> {
    if h.rows() != h_hat.rows() {
        return mismatch(format!("{} vs {} rows", h.rows(), h_hat.rows()));
    }
    let (q, qh) = (column_basis(h)?, column_basis(h_hat)?);
    let m = q.t_matmul(&qh)?;
    Ok(m.frobenius_norm().powi(2) / q.cols().max(qh.cols()) as f64)
}

/// Columns centered and scaled to unit norm, then `‖HᵀĤ‖²_F / (k k')`.
/// Unlike [`representation_overlap`] this equals `1/k` for identical
/// orthogonal representations.
pub fn standardized_overlap(h: &DenseMatrix, h_hat: &DenseMatrix) -> Result<f64> {
    if h.rows() != h_hat.rows() {
        return mismatch(format!("{} vs {} rows", h.rows(), h_hat.rows()));
    }
    let unit = |m: &DenseMatrix| -> Result<DenseMatrix> {
        let mut c = centered_columns(m);
        for j in 0..c.cols() {
            let s = norm(&c.col(j));
            if s == 0.0 {
                return Err(LofiError::DegenerateFeatures(format!("column {j} is constant")));
            }
            for r in 0..c.rows() {
                c[(r, j)] /= s;
            }
        }
        Ok(c)
    };
    let m = unit(h)?.t_matmul(&unit(h_hat)?)?;
    Ok(m.frobenius_norm().powi(2) / (h.cols() * h_hat.cols()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfConfig {
    pub p1: usize,
    pub p2: usize,
    /// Rank of the first spectral filter; usually `d1`.
    pub rank: usize,
    pub batch_norm: bool,
    pub poly_degree: usize,
    pub ridge: f64,
    pub eig_method: EigMethod,
    pub activation: Activation,
}

impl RfConfig {
    /// `p1 = D₂ + 32` (so `p1 ≥ D₂`), `p2 = 256`, rank `d1`.
    pub fn for_teacher(t: &HierTeacher) -> Self {
        Self {
            p1: hermite2_dim(t.d) + 32,
            p2: 256,
            rank: t.d1,
            batch_norm: true,
            poly_degree: 5,
            ridge: 1e-6,
            eig_method: EigMethod::Auto,
            activation: Activation::ReluPerp01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RfHierModel {
    pub w1: DenseMatrix,
    pub v1: DenseMatrix,
    pub bn_mean: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub w2: DenseMatrix,
    pub v2: Vec<f64>,
    pub poly_scale: f64,
    pub poly_coef: Vec<f64>,
    pub label_mean: f64,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RfMetrics {
    pub test_mse: f64,
    /// Normalized overlap between the planted and recovered first layer on
    /// the test set.
    pub overlap: f64,
    /// All eigenvalues of `Ĉ₁`, ordered by decreasing magnitude.
    pub spectrum: Vec<f64>,
    /// `|λ_rank| / |λ_rank+1|`.
    pub gap_ratio: f64,
}

fn rf_features(x: &[f64], rows: usize, w: &DenseMatrix, act: Activation) -> DenseMatrix {
    let p = w.rows();
    let mut out = DenseMatrix::zeros(rows, p);
    let xb = DenseMatrix::from_vec(rows, w.cols(), x.to_vec());
    crate::linalg::gemm(1.0, &xb, false, w, true, 0.0, &mut out);
    let s = 1.0 / (p as f64).sqrt();
    out.as_mut_slice().iter_mut().for_each(|v| *v = act.eval(*v) * s);
    out
}

/// `φ(x) V` computed in row batches so the `n × p` feature matrix is never
/// held in memory.
fn project_batched(x: &DenseMatrix, w: &DenseMatrix, v: &DenseMatrix, act: Activation) -> Result<DenseMatrix> {
    let (n, d) = x.shape();
    let mut out = DenseMatrix::zeros(n, v.cols());
    for start in (0..n).step_by(MOMENT_BATCH) {
        let end = (start + MOMENT_BATCH).min(n);
        let phi = rf_features(&x.as_slice()[start * d..end * d], end - start, w, act);
        let g = phi.matmul(v)?;
        out.as_mut_slice()[start * v.cols()..end * v.cols()].copy_from_slice(g.as_slice());
    }
    Ok(out)
}

fn poly_features(t: &[f64], scale: f64, degree: usize) -> DenseMatrix {
    DenseMatrix::from_fn(t.len(), degree + 1, |r, k| (t[r] / scale).powi(k as i32))
}

impl RfHierModel {
    pub fn first_layer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut h = project_batched(x, &self.w1, &self.v1, self.activation)?;
        for r in 0..h.rows() {
            for (c, v) in h.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.bn_mean[c]) / self.bn_scale[c];
            }
        }
        Ok(h)
    }

    pub fn second_layer(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let h1 = self.first_layer(x)?;
        let v2 = DenseMatrix::column(&self.v2);
        Ok(project_batched(&h1, &self.w2, &v2, self.activation)?.into_vec())
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let t = self.second_layer(x)?;
        let f = poly_features(&t, self.poly_scale, self.poly_coef.len() - 1);
        Ok(f.mul_vec(&self.poly_coef)?.into_iter().map(|v| v + self.label_mean).collect())
    }
}

/// Two spectral layers on spherical random features with `relu_perp01`:
/// rank-`d1` filter of `Ĉ₁`, optional standardization, normalized
/// first-moment direction on the second random layer, and a polynomial ridge
/// readout.
pub fn rf_hierarchical_estimator(
    train: &SynthSample,
    test: &SynthSample,
    cfg: &RfConfig,
    rng: &mut Rng,
) -> Result<(RfHierModel, RfMetrics)> {
    let x = &train.dataset.x;
    let y = &train.dataset.y;
    let (n, d) = x.shape();
    if cfg.rank == 0 || cfg.p1 <= cfg.rank || cfg.p2 == 0 {
        return invalid(format!("need p1 > rank > 0 and p2 > 0 (p1={}, p2={}, rank={})", cfg.p1, cfg.p2, cfg.rank));
    }
    let w1 = rng.derive(1).sphere_rows(cfg.p1, d);
    let mut acc = MomentAccumulator::new(cfg.p1);
    for start in (0..n).step_by(MOMENT_BATCH) {
        let end = (start + MOMENT_BATCH).min(n);
        let phi = rf_features(&x.as_slice()[start * d..end * d], end - start, &w1, cfg.activation);
        acc.push(&phi, &y[start..end])?;
    }
    let c1 = acc.finish(n as f64);
    let eig = sym_eig_all(&c1)?;
    let spectrum = eig.eigenvalues.clone();
    let gap_ratio = spectrum[cfg.rank - 1].abs() / spectrum[cfg.rank].abs().max(f64::MIN_POSITIVE);
    let v1 = DenseMatrix::from_columns(&(0..cfg.rank).map(|i| eig.vector(i)).collect::<Vec<_>>())?;

    let raw = project_batched(x, &w1, &v1, cfg.activation)?;
    let (mut bn_mean, mut bn_scale) = (vec![0.0; cfg.rank], vec![1.0; cfg.rank]);
    if cfg.batch_norm {
        for c in 0..cfg.rank {
            let col = raw.col(c);
            let m = mean(&col);
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            bn_mean[c] = m;
            bn_scale[c] = if sd > 0.0 { sd } else { 1.0 };
        }
    }
    let mut model = RfHierModel {
        w1,
        v1,
        bn_mean,
        bn_scale,
        w2: rng.derive(2).sphere_rows(cfg.p2, cfg.rank),
        v2: Vec::new(),
        poly_scale: 1.0,
        poly_coef: Vec::new(),
        label_mean: train.label_mean,
        activation: cfg.activation,
    };
    let h1 = model.first_layer(x)?;
    let mut u = DenseMatrix::zeros(n, cfg.p2);
    for start in (0..n).step_by(MOMENT_BATCH) {
        let end = (start + MOMENT_BATCH).min(n);
        let phi = rf_features(&h1.as_slice()[start * cfg.rank..end * cfg.rank], end - start, &model.w2, cfg.activation);
        u.as_mut_slice()[start * cfg.p2..end * cfg.p2].copy_from_slice(phi.as_slice());
    }
    let u2 = linear_moment(&u, y)?;
    let nu = norm(&u2);
    if nu == 0.0 {
        return Err(LofiError::ZeroLinearComponent);
    }
    model.v2 = u2.iter().map(|v| v / nu).collect();
    let t = u.mul_vec(&model.v2)?;
    let tm = mean(&t);
    model.poly_scale = (t.iter().map(|v| (v - tm).powi(2)).sum::<f64>() / n as f64).sqrt().max(f64::MIN_POSITIVE);
    let f = poly_features(&t, model.poly_scale, cfg.poly_degree);
    model.poly_coef = ridge_solve(&f, y, cfg.ridge)?;

    let pred = model.predict(&test.dataset.x)?;
    let truth = test.raw_labels();
    let test_mse = pred.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64;
    let overlap = representation_overlap(&test.h1, &model.first_layer(&test.dataset.x)?)?;
    Ok((model, RfMetrics { test_mse, overlap, spectrum, gap_ratio }))
}

/// `y = Σ_j c_j H₂(⟨v_j, x⟩)` with orthonormal planted directions `v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeModel {
    /// `d × k`, orthonormal columns.
    pub directions: DenseMatrix,
    pub coeffs: Vec<f64>,
}

impl SpikeModel {
    pub fn new(d: usize, coeffs: &[f64], rng: &mut Rng) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > d {
            return invalid(format!("{} spikes in dimension {d}", coeffs.len()));
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < coeffs.len() {
            let mut v = rng.gaussian_vec(d);
            for c in &cols {
                let a = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= a * y);
            }
            let s = norm(&v);
            if s > 1e-8 {
                v.iter_mut().for_each(|x| *x /= s);
                cols.push(v);
            }
        }
        Ok(Self { directions: DenseMatrix::from_columns(&cols)?, coeffs: coeffs.to_vec() })
    }

    /// Population signed moment `E[y xxᵀ] = √2 Σ_j c_j v_j v_jᵀ`.
    pub fn population_moment(&self) -> DenseMatrix {
        let d = self.directions.rows();
        DenseMatrix::from_fn(d, d, |a, b| {
            self.coeffs.iter().enumerate().map(|(j, c)| SQRT2 * c * self.directions[(a, j)] * self.directions[(b, j)]).sum()
        })
    }

    /// Labels are left uncentered (their population mean is zero).
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        let d = self.directions.rows();
        let x = rng.gaussian_matrix(n, d);
        let proj = x.matmul(&self.directions)?;
        let y = (0..n)
            .map(|r| proj.row(r).iter().zip(&self.coeffs).map(|(t, c)| c * (t * t - 1.0) / SQRT2).sum())
            .collect();
        Dataset::new(x, y, "spikes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_examples() {
        let f = hermite2_features(&[1.0, 0.0]);
        assert_eq!(f, vec![0.0, -1.0 / SQRT2, 0.0]);
        let z = hermite2_features(&[0.0; 4]);
        assert!(z[..4].iter().all(|v| *v == -1.0 / SQRT2) && z[4..].iter().all(|v| *v == 0.0));
        assert_eq!(hermite2_features(&[1.0, 2.0, 3.0]).len(), 6);
        assert_eq!(hermite2_features(&[1.0, 2.0, 3.0])[3..], [2.0, 3.0, 6.0]);
    }

    #[test]
    fn frobenius_preserved() {
        let mut rng = Rng::new(4);
        for d in [2, 5, 9] {
            let sym = |rng: &mut Rng| {
                let b = rng.gaussian_matrix(d, d);
                b.add(&b.transpose()).unwrap()
            };
            let (a, b) = (sym(&mut rng), sym(&mut rng));
            let frob: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
            let flat = dot(&flatten_symmetric(&a).unwrap(), &flatten_symmetric(&b).unwrap());
            assert!((frob - flat).abs() < 1e-12 * frob.abs().max(1.0));
        }
        // H₂(x) flattens to the Hermite features.
        let x = [0.3, -1.2, 2.0];
        let h = DenseMatrix::from_fn(3, 3, |i, j| (x[i] * x[j] - f64::from(u8::from(i == j))) / SQRT2);
        let a = flatten_symmetric(&h).unwrap();
        let b = hermite2_features(&x);
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn hermite_orthonormal_monte_carlo() {
        let mut rng = Rng::new(11);
        for d in [3, 5, 8] {
            let n = 100_000;
            let f = hermite2_matrix(&rng.gaussian_matrix(n, d));
            let cov = f.t_matmul(&f).unwrap().scale(1.0 / n as f64);
            let err = cov.sub(&DenseMatrix::identity(hermite2_dim(d))).unwrap().max_abs();
            assert!(err < 0.05, "d={d}: {err}");
        }
    }

    #[test]
    fn teacher_shape_and_norms() {
        assert_eq!(floor_pow(100, 0.5), 10);
        assert_eq!(floor_pow(40, 0.5), 6);
        assert_eq!(floor_pow(40, 3.0), 64_000);
        let t = gen_teacher(100, 0.5, Link::Tanh, &mut Rng::new(1)).unwrap();
        assert_eq!((t.d1, t.a1.shape()), (10, (10, 5050)));
        for r in 0..10 {
            assert!((norm(t.a1.row(r)) - 1.0).abs() < 1e-12);
        }
        assert!(t.a2.asymmetry() == 0.0 && (t.a2.frobenius_norm() - 1.0).abs() < 1e-12);
        assert_eq!(t, gen_teacher(100, 0.5, Link::Tanh, &mut Rng::new(1)).unwrap());
        assert!(gen_teacher(3, 0.5, Link::Tanh, &mut Rng::new(1)).is_err());
        assert!(gen_teacher(10, 1.0, Link::Tanh, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn sample_statistics() {
        let mut rng = Rng::new(2);
        let mut t = gen_teacher(12, 0.5, Link::Identity, &mut rng).unwrap();
        t.a2 = DenseMatrix::identity(t.d1).scale(1.0 / (t.d1 as f64).sqrt());
        let s = sample_synth(&t, 100_000, &mut rng).unwrap();
        for c in 0..t.d1 {
            let v = crate::linalg::variance(&s.h1.col(c));
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
        assert!(s.label_mean.abs() < 0.05);
        let h1 = s.h1.row(7);
        let expect = (dot(h1, h1) - t.d1 as f64) / (2.0 * t.d1 as f64).sqrt();
        assert!((s.h2[7] - expect).abs() < 1e-12);
        assert!(s.dataset.labels_are_centered());
        let again = sample_synth(&t, 50, &mut Rng::new(9)).unwrap();
        assert_eq!(again.dataset.x, sample_synth(&t, 50, &mut Rng::new(9)).unwrap().dataset.x);
    }

    #[test]
    fn overlap_properties() {
        let mut rng = Rng::new(5);
        let h = rng.gaussian_matrix(400, 3);
        assert!((representation_overlap(&h, &h).unwrap() - 1.0).abs() < 1e-12);
        let mixed = h.select_cols(&[2, 0, 1]).map(|v| -v);
        assert!((representation_overlap(&h, &mixed).unwrap() - 1.0).abs() < 1e-12);
        // Orthogonal spans.
        let a = DenseMatrix::from_fn(4, 1, |r, _| [1.0, -1.0, 0.0, 0.0][r]);
        let b = DenseMatrix::from_fn(4, 1, |r, _| [0.0, 0.0, 1.0, -1.0][r]);
        assert!(representation_overlap(&a, &b).unwrap() < 1e-24);
        let noise = rng.gaussian_matrix(400, 3);
        assert!(representation_overlap(&h, &noise).unwrap() < 0.1);
        assert!(representation_overlap(&h, &h.select_cols(&[0])).unwrap() < 0.34);
        assert!(matches!(representation_overlap(&h, &DenseMatrix::zeros(400, 2)), Err(LofiError::DegenerateFeatures(_))));

        let q = column_basis(&h).unwrap();
        assert!((standardized_overlap(&q, &q).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let one = h.select_cols(&[1]);
        assert!((standardized_overlap(&one, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spike_model_moments() {
        let mut rng = Rng::new(8);
        let m = SpikeModel::new(6, &[1.0, 0.5], &mut rng).unwrap();
        let g = m.directions.t_matmul(&m.directions).unwrap();
        assert!(g.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-12);
        let ds = m.sample(200_000, &mut rng).unwrap();
        let c = crate::lofi::moments::moment_operator(&ds.x, &ds.y).unwrap();
        assert!(c.sub(&m.population_moment()).unwrap().max_abs() < 0.05);
    }

    #[test]
    fn estimator_runs_and_permuted_labels_carry_no_signal() {
        let mut rng = Rng::new(3);
        let t = gen_teacher(12, 0.5, Link::Tanh, &mut rng).unwrap();
        let train = sample_synth(&t, 3000, &mut rng).unwrap();
        let test = sample_synth(&t, 1000, &mut rng).unwrap();
        let cfg = RfConfig::for_teacher(&t);
        let (model, m) = rf_hierarchical_estimator(&train, &test, &cfg, &mut Rng::new(1)).unwrap();
        assert_eq!(m.spectrum.len(), cfg.p1);
        assert!(m.test_mse.is_finite() && m.overlap > 0.0 && m.overlap <= 1.0);
        assert_eq!(model.predict(&test.dataset.x).unwrap().len(), 1000);

        let mut shuffled = train.clone();
        let perm = Rng::new(77).permutation(train.dataset.len());
        shuffled.dataset.y = perm.iter().map(|&i| train.dataset.y[i]).collect();
        let (_, null) = rf_hierarchical_estimator(&shuffled, &test, &cfg, &mut Rng::new(1)).unwrap();
        assert!(null.overlap <= 0.1, "{}", null.overlap);
    }
}
