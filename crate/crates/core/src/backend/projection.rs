use crate::codec::{Reader, Writer};
use crate::data::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{self, sym_eig, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Pca,
    Lda,
    Whiten,
}

impl ProjectionKind {
    fn code(self) -> u8 {
        match self {
            ProjectionKind::Pca => 0,
            ProjectionKind::Lda => 1,
            ProjectionKind::Whiten => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(ProjectionKind::Pca),
            1 => Ok(ProjectionKind::Lda),
            2 => Ok(ProjectionKind::Whiten),
            _ => Err(Error::Format(format!("unknown projection kind {c}"))),
        }
    }
}

/// Affine map `x ↦ basis·(x − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `out × in`
    pub basis: Matrix,
    pub kind: ProjectionKind,
}

impl Projection {
    pub fn new(mean: Vec<f64>, basis: Matrix, kind: ProjectionKind) -> Result<Self> {
        if basis.cols() != mean.len() || basis.rows() > basis.cols() {
            return Err(Error::shape(
                format!("basis out×{} with out ≤ in", mean.len()),
                format!("{}x{}", basis.rows(), basis.cols()),
            ));
        }
        Ok(Projection { mean, basis, kind })
    }

    pub fn input_dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        project(self, x)
    }

    pub fn apply_set(&self, data: &EmbeddingSet) -> Result<EmbeddingSet> {
        data.map_vectors(self.output_dim(), |v| project(self, v))
    }

    /// `PRJ1`: u8 kind, u32 out, u32 in, mean (in f64), basis row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(b"PRJ1");
        w.u8(self.kind.code());
        w.u32(self.output_dim());
        w.u32(self.input_dim());
        w.f64s(&self.mean);
        w.f64s(self.basis.as_slice());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, b"PRJ1")?;
        let kind = ProjectionKind::from_code(r.u8()?)?;
        let out = r.u32()?;
        let inp = r.u32()?;
        let mean = r.f64s(inp)?;
        let basis = Matrix::from_vec(out, inp, r.f64s(out * inp)?)?;
        r.finish()?;
        Projection::new(mean, basis, kind)
    }
}

pub fn project(p: &Projection, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.input_dim() {
        return Err(Error::shape(
            format!("vector of dim {}", p.input_dim()),
            x.len(),
        ));
    }
    p.basis.matvec(&linalg::sub(x, &p.mean))
}

/// Sample mean and population (1/N) covariance.
pub fn mean_and_covariance(data: &EmbeddingSet) -> (Vec<f64>, Matrix) {
    let n = data.len() as f64;
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for r in data.iter() {
        linalg::axpy(1.0 / n, &r.vector, &mut mean);
    }
    let mut cov = Matrix::zeros(d, d);
    for r in data.iter() {
        let c = linalg::sub(&r.vector, &mean);
        cov.add_outer(1.0 / n, &c, &c);
    }
    (mean, cov.symmetrized())
}

/// Within-class and between-class scatter, both normalized by the total
/// sample count.
pub fn class_scatter(data: &EmbeddingSet) -> (Vec<f64>, Matrix, Matrix) {
    let n = data.len() as f64;
    let d = data.dim();
    let (mean, _) = mean_and_covariance(data);
    let mut within = Matrix::zeros(d, d);
    let mut between = Matrix::zeros(d, d);
    for (_, idx) in data.speaker_groups() {
        let mut m = vec![0.0; d];
        for &i in &idx {
            linalg::axpy(1.0 / idx.len() as f64, &data.records()[i].vector, &mut m);
        }
        for &i in &idx {
            let c = linalg::sub(&data.records()[i].vector, &m);
            within.add_outer(1.0 / n, &c, &c);
        }
        let c = linalg::sub(&m, &mean);
        between.add_outer(idx.len() as f64 / n, &c, &c);
    }
    (mean, within.symmetrized(), between.symmetrized())
}

/// Trace-scaled ridge `1e-6·tr(A)/D` added to the diagonal.
pub(crate) fn add_ridge(a: &mut Matrix) {
    let ridge = 1e-6 * a.trace() / a.rows() as f64;
    a.add_diag(ridge);
}

/// Rows `v_i/√λ_i` for the eigenpairs of a covariance; errors when the
/// spectrum is numerically rank deficient.
fn whitening_basis(cov: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(cov)?;
    let max = eig.values[0];
    let min = *eig.values.last().unwrap();
    if !(max > 0.0) || min < 1e-10 * max {
        return Err(Error::RankDeficient {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    let d = cov.rows();
    let mut basis = Matrix::zeros(d, d);
    for (i, &lam) in eig.values.iter().enumerate() {
        let s = 1.0 / lam.sqrt();
        for j in 0..d {
            basis[(i, j)] = s * eig.vectors[(j, i)];
        }
    }
    Ok(basis)
}

/// Centering plus `Λ^{-1/2}Vᵀ` from the sample covariance.
pub fn fit_whitener(data: &EmbeddingSet) -> Result<Projection> {
    if data.len() < data.dim() + 1 {
        return Err(Error::TooFewSamples {
            needed: data.dim() + 1,
            have: data.len(),
        });
    }
    let (mean, cov) = mean_and_covariance(data);
    let basis = whitening_basis(&cov)?;
    Projection::new(mean, basis, ProjectionKind::Whiten)
}

/// Top `out_dim` principal directions of the sample covariance.
pub fn fit_pca(data: &EmbeddingSet, out_dim: usize) -> Result<Projection> {
    if out_dim == 0 || out_dim > data.dim() {
        return Err(Error::InvalidDim(format!(
            "PCA output dim {out_dim} must be in 1..={}",
            data.dim()
        )));
    }
    if data.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: data.len(),
        });
    }
    let (mean, cov) = mean_and_covariance(data);
    let eig = sym_eig(&cov)?;
    let mut basis = Matrix::zeros(out_dim, data.dim());
    for i in 0..out_dim {
        for j in 0..data.dim() {
            basis[(i, j)] = eig.vectors[(j, i)];
        }
    }
    Projection::new(mean, basis, ProjectionKind::Pca)
}

/// Fisher LDA: whiten the (ridged) within-class covariance, then take the
/// principal directions of the whitened between-class covariance.
pub fn fit_lda(data: &EmbeddingSet, out_dim: usize) -> Result<Projection> {
    let n_spk = data.speakers().len();
    if n_spk < 2 {
        return Err(Error::InvalidDim(format!(
            "LDA needs at least 2 speakers, got {n_spk}"
        )));
    }
    let max_dim = data.dim().min(n_spk - 1);
    if out_dim == 0 || out_dim > max_dim {
        return Err(Error::InvalidDim(format!(
            "LDA output dim {out_dim} must be in 1..={max_dim}"
        )));
    }
    let (mean, mut within, between) = class_scatter(data);
    if !(within.trace() > 0.0) {
        return Err(Error::SingularWithin);
    }
    add_ridge(&mut within);
    let wh = whitening_basis(&within).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::SingularWithin,
        other => other,
    })?;
    let b_white = wh.matmul(&between)?.matmul_t(&wh)?.symmetrized();
    let eig = sym_eig(&b_white)?;
    let mut top = Matrix::zeros(out_dim, data.dim());
    for i in 0..out_dim {
        for j in 0..data.dim() {
            top[(i, j)] = eig.vectors[(j, i)];
        }
    }
    let basis = top.matmul(&wh)?;
    Projection::new(mean, basis, ProjectionKind::Lda)
}
