//! Zero-mean Gaussian-process regression over vector-valued outputs.
//!
//! The joint covariance over all tasks is `C = F ⊗ K + σ² I` (task-major
//! ordering). Rotating the tasks onto the eigenvectors of `F = U Λ Uᵀ` makes
//! `C` block diagonal with blocks `λ_e K + σ² I`, so each fit costs `T`
//! Cholesky factorisations of size `n` instead of one of size `nT`.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result, invalid};

pub const DEFAULT_NOISE: f64 = 1e-4;
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_RETRIES: usize = 3;
pub const DEFAULT_EVIDENCE_ITERS: usize = 10;

const LOG_LENGTH_BOUNDS: (f64, f64) = (-7.0, 7.0);
/// Bounds on `ln σ²` when the noise is learned.
pub const LOG_NOISE_BOUNDS: (f64, f64) = (-13.8, 4.6);
const MAX_BACKTRACKS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SquaredExponential,
    MultiTask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    length_scales: Vec<f64>,
    /// Lower-triangular `L_F` with `F = L_F L_Fᵀ`; empty for the SE kernel.
    task_factor: DMatrix<f64>,
}

impl Kernel {
    pub fn squared_exponential(length_scales: Vec<f64>) -> Result<Self> {
        check_length_scales(&length_scales)?;
        Ok(Kernel {
            kind: KernelKind::SquaredExponential,
            length_scales,
            task_factor: DMatrix::zeros(0, 0),
        })
    }

    /// Multi-task kernel with `F = I`.
    pub fn multi_task(length_scales: Vec<f64>, num_tasks: usize) -> Result<Self> {
        Self::with_task_factor(length_scales, DMatrix::identity(num_tasks, num_tasks))
    }

    /// Multi-task kernel with `F = L Lᵀ`; entries above the diagonal are ignored.
    pub fn with_task_factor(length_scales: Vec<f64>, factor: DMatrix<f64>) -> Result<Self> {
        check_length_scales(&length_scales)?;
        if factor.nrows() == 0 || factor.nrows() != factor.ncols() {
            return Err(invalid("task factor must be a nonempty square matrix"));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("task factor is not finite".into()));
        }
        Ok(Kernel {
            kind: KernelKind::MultiTask,
            length_scales,
            task_factor: factor.lower_triangle(),
        })
    }

    /// Unit length scales, and `F = I` for the multi-task kind.
    pub fn default_for(kind: KernelKind, input_dim: usize, num_tasks: usize) -> Result<Self> {
        match kind {
            KernelKind::SquaredExponential => Self::squared_exponential(vec![1.0; input_dim]),
            KernelKind::MultiTask => Self::multi_task(vec![1.0; input_dim], num_tasks),
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    /// `F`, or `None` for the SE kernel (independent unit-variance tasks).
    pub fn cross_covariance(&self) -> Option<DMatrix<f64>> {
        match self.kind {
            KernelKind::SquaredExponential => None,
            KernelKind::MultiTask => Some(&self.task_factor * self.task_factor.transpose()),
        }
    }

    fn task_cov(&self, num_tasks: usize) -> DMatrix<f64> {
        self.cross_covariance()
            .unwrap_or_else(|| DMatrix::identity(num_tasks, num_tasks))
    }

    fn se(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.length_scales)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum();
        (-0.5 * r2).exp()
    }
}

fn check_length_scales(ls: &[f64]) -> Result<()> {
    if ls.is_empty() {
        return Err(invalid("kernel needs at least one input dimension"));
    }
    if ls.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(invalid(format!("length scales must be positive, got {ls:?}")));
    }
    Ok(())
}

/// `k_SE(x, x′) · F[e, e′]`, or `k_SE(x, x′)` for the SE kernel.
pub fn kernel_eval(k: &Kernel, x: &[f64], x2: &[f64], e: usize, e2: usize) -> Result<f64> {
    if x.len() != k.input_dim() || x2.len() != k.input_dim() {
        return Err(invalid(format!(
            "kernel expects {}-dimensional inputs, got {} and {}",
            k.input_dim(),
            x.len(),
            x2.len()
        )));
    }
    let base = k.se(x, x2);
    match k.cross_covariance() {
        None => Ok(base),
        Some(f) => {
            if e >= f.nrows() || e2 >= f.nrows() {
                return Err(invalid(format!("task index out of range for {} tasks", f.nrows())));
            }
            Ok(base * f[(e, e2)])
        }
    }
}

#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: Kernel,
    noise: f64,
    jitter: f64,
    inputs: Vec<Vec<f64>>,
    /// `n × T`, column `e` holds the targets of task `e`.
    targets: DMatrix<f64>,
    task_cov: DMatrix<f64>,
    gram: DMatrix<f64>,
    /// Eigenpairs of `F`.
    f_vals: DVector<f64>,
    f_vecs: DMatrix<f64>,
    /// Factor of `λ_e K + (σ² + jitter) I` for each rotated task `e`.
    blocks: Vec<Cholesky<f64, Dyn>>,
    /// `C⁻¹ vec(Y)` reshaped to `n × T`.
    alpha: DMatrix<f64>,
}

/// Fits a model and caches the factorisation. Jitter is added to the
/// diagonal when `C` is numerically singular.
pub fn fit(kernel: Kernel, noise: f64, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<GpModel> {
    if inputs.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if inputs.len() != targets.len() {
        return Err(invalid("inputs and targets differ in count"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid(format!("noise variance must be nonnegative, got {noise}")));
    }
    let dim = kernel.input_dim();
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(invalid(format!("training inputs must be {dim}-dimensional")));
    }
    let tasks = targets[0].len();
    if tasks == 0 || targets.iter().any(|y| y.len() != tasks) {
        return Err(invalid("training targets must share a nonzero length"));
    }
    if let Some(f) = kernel.cross_covariance()
        && f.nrows() != tasks
    {
        return Err(invalid(format!("kernel has {} tasks, targets have {tasks}", f.nrows())));
    }
    if inputs
        .iter()
        .flatten()
        .chain(targets.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NumericDomain("training data is not finite".into()));
    }
    let y = DMatrix::from_fn(inputs.len(), tasks, |i, e| targets[i][e]);
    factorise(kernel, noise, inputs.to_vec(), y)
}

fn gram(kernel: &Kernel, inputs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in 0..i {
            let v = kernel.se(&inputs[i], &inputs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn factorise(kernel: Kernel, noise: f64, inputs: Vec<Vec<f64>>, targets: DMatrix<f64>) -> Result<GpModel> {
    let n = inputs.len();
    let tasks = targets.ncols();
    let gram = gram(&kernel, &inputs);
    let task_cov = kernel.task_cov(tasks);
    let f_eig = task_cov.clone().symmetric_eigen();
    // Rounding can make PSD eigenvalues slightly negative.
    let f_vals = f_eig.eigenvalues.map(|v| v.max(0.0));

    let mut jitter = 0.0;
    let mut next_jitter = JITTER_START;
    let mut attempt = 0;
    let blocks = loop {
        let blocks: Option<Vec<_>> = f_vals
            .iter()
            .map(|&lam| {
                let mut b = &gram * lam;
                for i in 0..n {
                    b[(i, i)] += noise + jitter;
                }
                let scale = b.diagonal().max();
                let ch = Cholesky::new(b)?;
                // Reject factorisations with vanishing pivots.
                let ok = ch
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .all(|d| d.is_finite() && d * d > scale * 1e-13);
                ok.then_some(ch)
            })
            .collect();
        if let Some(b) = blocks {
            break b;
        }
        if attempt > JITTER_RETRIES {
            return Err(Error::NumericDomain(format!(
                "covariance stays singular with jitter {jitter:e}"
            )));
        }
        jitter = next_jitter;
        next_jitter *= 10.0;
        attempt += 1;
    };

    let u = f_eig.eigenvectors;
    let mut z = &targets * &u;
    for (e, ch) in blocks.iter().enumerate() {
        let col = ch.solve(&z.column(e).into_owned());
        z.set_column(e, &col);
    }
    let alpha = z * u.transpose();
    Ok(GpModel {
        kernel,
        noise,
        jitter,
        inputs,
        targets,
        task_cov,
        gram,
        f_vals,
        f_vecs: u,
        blocks,
        alpha,
    })
}

impl GpModel {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal jitter that was needed on top of the noise.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.targets.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.kernel.input_dim()
    }

    /// Input Gram matrix `K`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        self.gram.clone()
    }

    /// Dense `C = F ⊗ K + (σ² + jitter) I`, task-major.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let k = self.gram_matrix();
        let f = &self.task_cov;
        let (n, t) = (self.len(), self.num_tasks());
        let mut c = f.kronecker(&k);
        for i in 0..n * t {
            c[(i, i)] += self.noise + self.jitter;
        }
        c
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.inputs.iter().map(|xi| self.kernel.se(x, xi)))
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.input_dim(), "query has the wrong dimension");
    }

    /// Posterior mean of every task at `x`.
    pub fn posterior_mean(&self, x: &[f64]) -> Vec<f64> {
        self.check_input(x);
        let kx = self.cross(x);
        let af = &self.alpha * &self.task_cov;
        (af.transpose() * kx).iter().copied().collect()
    }

    /// Posterior variance of every task at `x`, clipped at 0.
    pub fn posterior_variance(&self, x: &[f64]) -> Vec<f64> {
        self.check_input(x);
        let kx = self.cross(x);
        // kᵀ (λ_e K + σ² I)⁻¹ k for every rotated task.
        let quads: Vec<f64> = self
            .blocks
            .iter()
            .map(|ch| {
                let mut w = kx.clone();
                ch.l_dirty().solve_lower_triangular_mut(&mut w);
                w.norm_squared()
            })
            .collect();
        (0..self.num_tasks())
            .map(|e| {
                let quad: f64 = (0..self.num_tasks())
                    .map(|e2| (self.f_vals[e2] * self.f_vecs[(e, e2)]).powi(2) * quads[e2])
                    .sum();
                (self.task_cov[(e, e)] - quad).max(0.0)
            })
            .collect()
    }

    /// Jacobian `∂μ/∂x`, one row per task.
    pub fn posterior_mean_input_gradient(&self, x: &[f64]) -> DMatrix<f64> {
        self.check_input(x);
        let af = &self.alpha * &self.task_cov;
        let d = self.input_dim();
        let mut jac = DMatrix::zeros(self.num_tasks(), d);
        for (i, xi) in self.inputs.iter().enumerate() {
            let k = self.kernel.se(x, xi);
            for (dd, ((a, b), l)) in x.iter().zip(xi).zip(&self.kernel.length_scales).enumerate() {
                let dk = -k * (a - b) / (l * l);
                for e in 0..self.num_tasks() {
                    jac[(e, dd)] += dk * af[(i, e)];
                }
            }
        }
        jac
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_evidence(&self) -> f64 {
        let fit = self.targets.dot(&self.alpha);
        let logdet: f64 = self
            .blocks
            .iter()
            .flat_map(|ch| ch.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).collect::<Vec<_>>())
            .sum();
        let m = self.targets.len() as f64;
        -0.5 * fit - 0.5 * logdet - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
    }

    fn hyper(&self, learn_noise: bool) -> Vec<f64> {
        let mut eta: Vec<f64> = self.kernel.length_scales.iter().map(|l| l.ln()).collect();
        if self.kernel.kind == KernelKind::MultiTask {
            let l = &self.kernel.task_factor;
            for a in 0..l.nrows() {
                for b in 0..=a {
                    eta.push(l[(a, b)]);
                }
            }
        }
        if learn_noise {
            eta.push(self.noise.ln());
        }
        eta
    }

    fn with_hyper(&self, eta: &[f64], learn_noise: bool) -> Result<GpModel> {
        let d = self.input_dim();
        let ls: Vec<f64> = eta[..d]
            .iter()
            .map(|v| v.clamp(LOG_LENGTH_BOUNDS.0, LOG_LENGTH_BOUNDS.1).exp())
            .collect();
        let kernel = match self.kernel.kind {
            KernelKind::SquaredExponential => Kernel::squared_exponential(ls)?,
            KernelKind::MultiTask => {
                let t = self.num_tasks();
                let mut l = DMatrix::zeros(t, t);
                let mut it = eta[d..].iter();
                for a in 0..t {
                    for b in 0..=a {
                        l[(a, b)] = *it.next().expect("hyperparameter vector too short");
                    }
                }
                Kernel::with_task_factor(ls, l)?
            }
        };
        let noise = if learn_noise {
            let v = *eta.last().expect("hyperparameter vector too short");
            v.clamp(LOG_NOISE_BOUNDS.0, LOG_NOISE_BOUNDS.1).exp()
        } else {
            self.noise
        };
        factorise(kernel, noise, self.inputs.clone(), self.targets.clone())
    }

    /// Derivative of the log evidence w.r.t. `ln σ²`:
    /// `½ σ² (αᵀα − tr C⁻¹)`.
    pub fn log_evidence_noise_gradient(&self) -> f64 {
        let trace: f64 = self.blocks.iter().map(|ch| ch.inverse().trace()).sum();
        0.5 * self.noise * (self.alpha.norm_squared() - trace)
    }

    /// Gradient of the log evidence w.r.t. log length scales followed by the
    /// lower-triangular entries of `L_F` (row-major).
    pub fn log_evidence_gradient(&self) -> Vec<f64> {
        let n = self.len();
        let t = self.num_tasks();
        let f = &self.task_cov;
        let af = &self.alpha * f;
        let k = &self.gram;
        let mut grad = Vec::new();

        // tr(C⁻¹ (F ⊗ A)) = Σ_e λ_e tr(B_e⁻¹ A) with B_e the rotated blocks.
        let inverses: Vec<DMatrix<f64>> = self.blocks.iter().map(Cholesky::inverse).collect();
        let mut weighted = DMatrix::zeros(n, n);
        for (lam, inv) in self.f_vals.iter().zip(&inverses) {
            weighted += inv * *lam;
        }
        for (dd, l) in self.kernel.length_scales.iter().enumerate() {
            let mut p = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..i {
                    let r = (self.inputs[i][dd] - self.inputs[j][dd]) / l;
                    let v = k[(i, j)] * r * r;
                    p[(i, j)] = v;
                    p[(j, i)] = v;
                }
            }
            let fit = (&p * &self.alpha).dot(&af);
            let trace = weighted.dot(&p);
            grad.push(0.5 * fit - 0.5 * trace);
        }

        if self.kernel.kind == KernelKind::MultiTask {
            let l = &self.kernel.task_factor;
            let m = self.alpha.transpose() * k * &self.alpha;
            let w_f: Vec<f64> = inverses.iter().map(|inv| inv.dot(k)).collect();
            let q = &self.f_vecs * DMatrix::from_diagonal(&DVector::from_vec(w_f)) * self.f_vecs.transpose();
            let g = (m - q) * l;
            for a in 0..t {
                for b in 0..=a {
                    grad.push(g[(a, b)]);
                }
            }
        }
        grad
    }

    /// Gradient ascent on the log evidence with backtracking; a step is only
    /// accepted when it strictly improves the evidence.
    pub fn optimize_evidence(&self, max_iters: usize) -> Result<GpModel> {
        self.ascend_evidence(max_iters, false)
    }

    /// As [`GpModel::optimize_evidence`], additionally treating the noise
    /// variance as a hyperparameter (within `LOG_NOISE_BOUNDS`).
    pub fn optimize_evidence_with_noise(&self, max_iters: usize) -> Result<GpModel> {
        if self.noise <= 0.0 {
            return Err(invalid("noise learning needs a positive starting noise variance"));
        }
        self.ascend_evidence(max_iters, true)
    }

    fn ascend_evidence(&self, max_iters: usize, learn_noise: bool) -> Result<GpModel> {
        if self.len() < 2 {
            return Err(invalid("evidence optimisation needs at least two training points"));
        }
        let mut best = self.clone();
        let mut best_val = best.log_evidence();
        if !best_val.is_finite() {
            warn!("log evidence is not finite; keeping hyperparameters");
            return Ok(best);
        }
        let mut step = 0.1;
        for _ in 0..max_iters {
            let mut g = best.log_evidence_gradient();
            if learn_noise {
                g.push(best.log_evidence_noise_gradient());
            }
            if g.iter().any(|v| !v.is_finite()) {
                warn!("evidence gradient is not finite; keeping hyperparameters");
                break;
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-10 {
                break;
            }
            let eta = best.hyper(learn_noise);
            let mut improved = false;
            for _ in 0..MAX_BACKTRACKS {
                let trial_eta: Vec<f64> = eta
                    .iter()
                    .zip(&g)
                    .map(|(e, gi)| e + step * gi / norm.max(1.0))
                    .collect();
                if let Ok(candidate) = best.with_hyper(&trial_eta, learn_noise) {
                    let val = candidate.log_evidence();
                    if val.is_finite() && val > best_val {
                        best = candidate;
                        best_val = val;
                        improved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
            step = (step * 2.0).min(2.0);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mean(model: &GpModel, x: &[f64]) -> Vec<f64> {
        // Independent oracle: dense solve of the full task-major system.
        let c = model.covariance_matrix();
        let (n, t) = (model.len(), model.num_tasks());
        let y = DVector::from_iterator(n * t, model.targets.iter().copied());
        let a = c.cholesky().expect("oracle factorisation").solve(&y);
        let f = &model.task_cov;
        (0..t)
            .map(|e| {
                let mut s = 0.0;
                for e2 in 0..t {
                    for i in 0..n {
                        s += f[(e, e2)] * model.kernel.se(x, &model.inputs[i]) * a[e2 * n + i];
                    }
                }
                s
            })
            .collect()
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize, t: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| (0..t).map(|e| (x[0] * (e + 1) as f64).sin() + 0.3 * x[d - 1]).collect())
            .collect();
        (xs, ys)
    }

    #[test]
    fn kernel_values() {
        let k = Kernel::squared_exponential(vec![1.0, 2.0]).unwrap();
        assert_eq!(kernel_eval(&k, &[0.3, -1.0], &[0.3, -1.0], 0, 5).unwrap(), 1.0);
        let v = kernel_eval(&k, &[0.0, 0.0], &[1.0, 2.0], 0, 0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(kernel_eval(&k, &[0.0], &[1.0, 2.0], 0, 0).is_err());

        let l = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.5, 2.0]);
        let m = Kernel::with_task_factor(vec![1.0], l).unwrap();
        let f = m.cross_covariance().unwrap();
        assert_eq!(kernel_eval(&m, &[0.4], &[0.4], 1, 1).unwrap(), f[(1, 1)]);
        assert_eq!(f[(1, 1)], 0.25 + 4.0);
        let ind = Kernel::multi_task(vec![1.0], 2).unwrap();
        assert_eq!(kernel_eval(&ind, &[0.0], &[0.1], 0, 1).unwrap(), 0.0);
        assert!(kernel_eval(&ind, &[0.0], &[0.1], 0, 2).is_err());
        assert!(Kernel::squared_exponential(vec![0.0]).is_err());
    }

    #[test]
    fn single_point_interpolates() {
        let k = Kernel::squared_exponential(vec![1.0, 1.0]).unwrap();
        let m = fit(k, 0.0, &[vec![0.2, -0.4]], &[vec![1.7]]).unwrap();
        assert!((m.posterior_mean(&[0.2, -0.4])[0] - 1.7).abs() < 1e-9);
        assert!(m.posterior_variance(&[0.2, -0.4])[0] <= 1e-8);
        let far = [50.0, -60.0];
        assert!(m.posterior_mean(&far)[0].abs() < 1e-6);
        assert!((m.posterior_variance(&far)[0] - 1.0).abs() < 1e-6);
        let g = m.posterior_mean_input_gradient(&[0.2, -0.4]);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let k = Kernel::squared_exponential(vec![1.0]).unwrap();
        assert!(matches!(fit(k.clone(), 1e-4, &[], &[]), Err(Error::InvalidArgument(_))));
        assert!(fit(k.clone(), 1e-4, &[vec![0.0, 1.0]], &[vec![0.0]]).is_err());
        assert!(fit(k.clone(), 1e-4, &[vec![0.0]], &[vec![0.0], vec![1.0]]).is_err());
        let m = fit(k, 1e-4, &[vec![0.0]], &[vec![1.0]]).unwrap();
        assert!(m.optimize_evidence(5).is_err());
    }

    #[test]
    fn duplicate_inputs_are_regularised() {
        let k = Kernel::multi_task(vec![1.0], 2).unwrap();
        let xs = vec![vec![0.5]; 4];
        let ys = vec![vec![1.0, 2.0], vec![1.1, 2.1], vec![0.9, 1.9], vec![1.0, 2.0]];
        let m = fit(k, DEFAULT_NOISE, &xs, &ys).unwrap();
        let eig = m.covariance_matrix().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= DEFAULT_NOISE - 1e-12));
        // Without noise, jitter takes over.
        let k = Kernel::squared_exponential(vec![1.0]).unwrap();
        let m = fit(k, 0.0, &xs, &ys).unwrap();
        assert!(m.jitter() > 0.0);
        let mean = m.posterior_mean(&[0.5]);
        assert!((mean[0] - 1.0).abs() < 1e-3 && (mean[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (xs, _) = random_data(&mut rng, 10, 3, 2);
        let ys = vec![vec![0.0, 0.0]; 10];
        let m = fit(Kernel::multi_task(vec![1.0; 3], 2).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
        assert!(m.posterior_mean(&[0.1, 0.2, 0.3]).iter().all(|v| *v == 0.0));
        assert!(
            m.posterior_mean_input_gradient(&[0.1, 0.2, 0.3])
                .iter()
                .all(|v| *v == 0.0)
        );
    }

    #[test]
    fn odd_function_is_zero_at_origin() {
        let xs: Vec<Vec<f64>> = [-1.5, -0.7, -0.2, 0.2, 0.7, 1.5].iter().map(|&x| vec![x]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0].powi(3)]).collect();
        let m = fit(Kernel::squared_exponential(vec![1.0]).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
        assert!(m.posterior_mean(&[0.0])[0].abs() < 1e-6);
    }

    #[test]
    fn smooth_function_within_noise_band() {
        let noise: f64 = 1e-2;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = |x: &[f64]| (1.3 * x[0]).sin() * (0.7 * x[1]).cos();
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| vec![f(x) + noise.sqrt() * (rng.r#gen::<f64>() - 0.5)])
            .collect();
        let m = fit(Kernel::squared_exponential(vec![1.0, 1.0]).unwrap(), noise, &xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.posterior_mean(x)[0] - y[0]).abs() <= 2.0 * noise.sqrt());
        }
    }

    #[test]
    fn identity_task_covariance_matches_independent_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (xs, ys) = random_data(&mut rng, 15, 2, 3);
        let joint = fit(Kernel::multi_task(vec![0.8, 1.3], 3).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
        for e in 0..3 {
            let col: Vec<Vec<f64>> = ys.iter().map(|y| vec![y[e]]).collect();
            let single = fit(
                Kernel::squared_exponential(vec![0.8, 1.3]).unwrap(),
                DEFAULT_NOISE,
                &xs,
                &col,
            )
            .unwrap();
            for q in [[0.0, 0.0], [1.1, -0.3], [-1.9, 1.7]] {
                assert!((joint.posterior_mean(&q)[e] - single.posterior_mean(&q)[0]).abs() < 1e-9);
                assert!((joint.posterior_variance(&q)[e] - single.posterior_variance(&q)[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (xs, ys) = random_data(&mut rng, 12, 3, 2);
        let l = DMatrix::from_row_slice(2, 2, &[1.2, 0.0, -0.6, 0.9]);
        let m = fit(
            Kernel::with_task_factor(vec![0.9, 1.1, 1.4], l).unwrap(),
            1e-3,
            &xs,
            &ys,
        )
        .unwrap();
        for q in [[0.1, 0.2, 0.3], [-1.0, 0.5, 1.5]] {
            let a = m.posterior_mean(&q);
            let b = dense_mean(&m, &q);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            }
        }
        // Log evidence against a dense computation.
        let c = m.covariance_matrix();
        let y = DVector::from_iterator(24, m.targets.iter().copied());
        let ch = c.clone().cholesky().unwrap();
        let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let dense = -0.5 * y.dot(&ch.solve(&y)) - 0.5 * logdet - 12.0 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_evidence() - dense).abs() < 1e-8);
        let gram = m.gram_matrix();
        assert!((&gram - gram.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn evidence_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (xs, ys) = random_data(&mut rng, 10, 2, 2);
        let l = DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.3, 0.8]);
        let m = fit(Kernel::with_task_factor(vec![0.7, 1.6], l).unwrap(), 1e-2, &xs, &ys).unwrap();
        let mut g = m.log_evidence_gradient();
        g.push(m.log_evidence_noise_gradient());
        let eta = m.hyper(true);
        for i in 0..eta.len() {
            let h = 1e-5;
            let mut up = eta.clone();
            up[i] += h;
            let mut dn = eta.clone();
            dn[i] -= h;
            let at = |e: &[f64]| m.with_hyper(e, true).unwrap().log_evidence();
            let fd = (at(&up) - at(&dn)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-5 * fd.abs().max(1.0),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn evidence_optimisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (xs, ys) = random_data(&mut rng, 20, 2, 2);
        let m = fit(Kernel::multi_task(vec![1.0, 1.0], 2).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
        let same = m.optimize_evidence(0).unwrap();
        assert_eq!(same.kernel(), m.kernel());
        let opt = m.optimize_evidence(25).unwrap();
        assert!(opt.log_evidence() >= m.log_evidence() - 1e-9);

        // Long-wavelength data prefers a longer length scale.
        let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![-3.0 + 0.25 * i as f64]).collect();
        let fit_ls = |freq: f64| {
            let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(freq * x[0]).sin()]).collect();
            let m = fit(Kernel::squared_exponential(vec![1.0]).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
            m.optimize_evidence(60).unwrap().kernel().length_scales()[0]
        };
        let slow = fit_ls(0.3);
        let fast = fit_ls(3.0);
        assert!(slow > fast, "{slow} vs {fast}");
    }

    #[test]
    fn learned_noise_tracks_target_noise() {
        // Pure noise of variance 0.25 around a constant: the evidence should
        // move σ² up from its tiny starting value towards 0.25.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|_| vec![rng.gen_range(-0.866..0.866)]).collect();
        let m = fit(Kernel::squared_exponential(vec![1.0]).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
        let opt = m.optimize_evidence_with_noise(200).unwrap();
        assert!(opt.log_evidence() >= m.log_evidence());
        assert!(opt.noise() > 0.05 && opt.noise() < 1.0, "noise {}", opt.noise());
        let fixed = m.optimize_evidence(5).unwrap();
        assert_eq!(fixed.noise(), DEFAULT_NOISE);
        let zero = fit(Kernel::squared_exponential(vec![1.0]).unwrap(), 0.0, &xs, &ys).unwrap();
        assert!(zero.optimize_evidence_with_noise(5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn input_gradient_matches_finite_differences(seed in 0u64..10_000, q in prop::collection::vec(-1.5f64..1.5, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (xs, ys) = random_data(&mut rng, 8, 3, 2);
            let ls: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..2.0)).collect();
            let l = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)) + DMatrix::identity(2, 2);
            let m = fit(Kernel::with_task_factor(ls, l).unwrap(), 1e-3, &xs, &ys).unwrap();
            let jac = m.posterior_mean_input_gradient(&q);
            for d in 0..3 {
                let h = 1e-6;
                let mut up = q.clone();
                up[d] += h;
                let mut dn = q.clone();
                dn[d] -= h;
                let (a, b) = (m.posterior_mean(&up), m.posterior_mean(&dn));
                for e in 0..2 {
                    let fd = (a[e] - b[e]) / (2.0 * h);
                    prop_assert!((fd - jac[(e, d)]).abs() <= 1e-5 * fd.abs().max(1e-3));
                }
            }
        }

        #[test]
        fn variance_bounded_by_prior(seed in 0u64..10_000, q in prop::collection::vec(-3.0f64..3.0, 2)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (xs, ys) = random_data(&mut rng, 10, 2, 2);
            let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.7]);
            let m = fit(Kernel::with_task_factor(vec![1.0, 0.6], l).unwrap(), DEFAULT_NOISE, &xs, &ys).unwrap();
            let f = m.kernel().cross_covariance().unwrap();
            for (e, v) in m.posterior_variance(&q).iter().enumerate() {
                prop_assert!(*v >= 0.0 && *v <= f[(e, e)] + 1e-12);
            }
        }
    }
}
