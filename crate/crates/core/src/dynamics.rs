//! Schrödinger propagation, transfer probabilities and their sensitivities.
//!
//! Everything is computed from one Hermitian eigendecomposition of `H + D`:
//! the propagator `V diag(e^{-iλt}) V^H`, the long-time average through the
//! eigenprojections, and the Fréchet derivative of the exponential through
//! the Daleckii–Krein divided differences.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, HermitianEigen};
use crate::network::{total_hamiltonian, BiasField, Hamiltonian, PerturbationStructure};
use crate::par::{map_slice, ExecMode};
use crate::synthesis::ControllerEnsemble;

/// Transfer of the excitation from spin `in_spin` to spin `out_spin` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferProblem {
    #[serde(rename = "in")]
    pub in_spin: usize,
    #[serde(rename = "out")]
    pub out_spin: usize,
    #[serde(skip)]
    pub n: usize,
}

impl TransferProblem {
    pub fn new(n: usize, in_spin: usize, out_spin: usize) -> Result<Self> {
        let p = TransferProblem { in_spin, out_spin, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("in", self.in_spin), ("out", self.out_spin)] {
            if k < 1 || k > self.n {
                return Err(Error::Invalid(format!(
                    "{name} spin {k} outside 1..={}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.in_spin == self.out_spin
    }

    pub(crate) fn in_idx(&self) -> usize {
        self.in_spin - 1
    }

    pub(crate) fn out_idx(&self) -> usize {
        self.out_spin - 1
    }
}

/// Normalized single-excitation wave function.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub psi: CVec,
}

impl QuantumState {
    pub fn new(psi: CVec) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("state norm {norm} is not 1")));
        }
        Ok(QuantumState { psi })
    }

    /// `e_k`, 1-based.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut psi = CVec::zeros(n);
        psi[k - 1] = c(1.0);
        QuantumState { psi }
    }

    pub fn population(&self, k: usize) -> f64 {
        self.psi[k - 1].norm_sqr()
    }
}

/// Differential sensitivity of the squared fidelity at one readout time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRecord {
    /// `∂p/∂δ` at δ = 0.
    pub value: f64,
    /// `value / (1 - p)`; `None` when `1 - p < 1e-12`.
    pub log_value: Option<f64>,
    pub structure_label: String,
    pub t: f64,
    pub p: f64,
}

impl SensitivityRecord {
    fn new(value: f64, p: f64, t: f64, structure_label: String) -> Self {
        let err = 1.0 - p;
        let log_value = (err >= 1e-12).then(|| value / err);
        SensitivityRecord {
            value,
            log_value,
            structure_label,
            t,
            p,
        }
    }
}

/// Eigendecomposition of a total Hamiltonian, reused for every quantity
/// derived from `exp(-iHt)`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eig: HermitianEigen,
}

impl Spectrum {
    pub fn new(h_total: &Hamiltonian) -> Result<Self> {
        Ok(Spectrum {
            eig: HermitianEigen::new(&h_total.matrix)?,
        })
    }

    pub fn of(h: &Hamiltonian, d: &BiasField) -> Result<Self> {
        Self::new(&total_hamiltonian(h, d, &[])?)
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eig
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.eig
            .values
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * t))
            .collect()
    }

    /// `exp(-iHt) ψ`.
    pub fn evolve(&self, psi: &CVec, t: f64) -> CVec {
        let v = &self.eig.vectors;
        let mut coeff = v.adjoint() * psi;
        for (z, ph) in coeff.iter_mut().zip(self.phases(t)) {
            *z *= ph;
        }
        v * coeff
    }

    /// `⟨e_out| exp(-iHt) |e_in⟩` for 0-based indices.
    pub fn amplitude(&self, out: usize, inp: usize, t: f64) -> Complex64 {
        let v = &self.eig.vectors;
        self.phases(t)
            .iter()
            .enumerate()
            .map(|(k, ph)| v[(out, k)] * ph * v[(inp, k)].conj())
            .sum()
    }

    pub fn probability(&self, prob: &TransferProblem, t: f64) -> f64 {
        self.amplitude(prob.out_idx(), prob.in_idx(), t).norm_sqr()
    }

    /// `dp/dt` at time `t`.
    pub fn probability_rate(&self, prob: &TransferProblem, t: f64) -> f64 {
        let v = &self.eig.vectors;
        let (o, i) = (prob.out_idx(), prob.in_idx());
        let mut a = Complex64::new(0.0, 0.0);
        let mut da = Complex64::new(0.0, 0.0);
        for (k, ph) in self.phases(t).into_iter().enumerate() {
            let term = v[(o, k)] * ph * v[(i, k)].conj();
            a += term;
            da += term * Complex64::new(0.0, -self.eig.values[k]);
        }
        2.0 * (a.conj() * da).re
    }

    /// Daleckii–Krein kernel `F_ij = f[λ_i, λ_j]` for `f(λ) = exp(-iλt)`.
    pub fn divided_differences(&self, t: f64) -> CMat {
        let l = &self.eig.values;
        let n = l.len();
        CMat::from_fn(n, n, |i, j| {
            let mid = 0.5 * (l[i] + l[j]);
            let gap = l[i] - l[j];
            let phase = Complex64::from_polar(1.0, -mid * t);
            if gap.abs() < 1e-9 {
                Complex64::new(0.0, -t) * phase
            } else {
                // (e^{-iλ_i t} - e^{-iλ_j t}) / (λ_i - λ_j), written without cancellation
                Complex64::new(0.0, -2.0 * (0.5 * t * gap).sin() / gap) * phase
            }
        })
    }

    /// Directional derivative of `⟨e_out| exp(-i(H + εE)t) |e_in⟩` at ε = 0.
    pub fn amplitude_derivative(&self, direction: &CMat, out: usize, inp: usize, t: f64) -> Complex64 {
        let v = &self.eig.vectors;
        let kernel = self.divided_differences(t);
        let rotated = v.adjoint() * direction * v;
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let left = v[(out, i)];
            for j in 0..n {
                acc += left * kernel[(i, j)] * rotated[(i, j)] * v[(inp, j)].conj();
            }
        }
        acc
    }

    /// Derivative of the transfer probability along a Hermitian direction.
    pub fn probability_derivative(&self, direction: &CMat, prob: &TransferProblem, t: f64) -> f64 {
        let (o, i) = (prob.out_idx(), prob.in_idx());
        let a = self.amplitude(o, i, t);
        let da = self.amplitude_derivative(direction, o, i, t);
        2.0 * (a.conj() * da).re
    }

    /// Gradient of the transfer probability with respect to every bias entry
    /// `D_k` (direction `e_k e_k^T`), in O(n^3).
    pub fn bias_gradient(&self, prob: &TransferProblem, t: f64) -> Vec<f64> {
        let v = &self.eig.vectors;
        let (o, i) = (prob.out_idx(), prob.in_idx());
        let n = self.dim();
        let kernel = self.divided_differences(t);
        let a = self.amplitude(o, i, t);
        // alpha_p = V[out,p], beta_q = conj(V[in,q])
        (0..n)
            .map(|k| {
                let mut da = Complex64::new(0.0, 0.0);
                for p in 0..n {
                    let left = v[(o, p)] * v[(k, p)].conj();
                    let mut inner = Complex64::new(0.0, 0.0);
                    for q in 0..n {
                        inner += kernel[(p, q)] * v[(k, q)] * v[(i, q)].conj();
                    }
                    da += left * inner;
                }
                2.0 * (a.conj() * da).re
            })
            .collect()
    }

    /// `Σ_λ |⟨OUT|Π_λ|IN⟩|²` over eigenprojections of distinct eigenvalues.
    pub fn time_average(&self, prob: &TransferProblem) -> f64 {
        let v = &self.eig.vectors;
        let (o, i) = (prob.out_idx(), prob.in_idx());
        let scale = self.eig.values.iter().map(|l| l.abs()).fold(1.0, f64::max);
        self.eig
            .clusters(1e-9 * scale)
            .into_iter()
            .map(|r| {
                r.map(|k| v[(o, k)] * v[(i, k)].conj())
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum::<f64>()
            .min(1.0)
    }
}

pub fn propagate(h_total: &Hamiltonian, psi0: &QuantumState, t: f64) -> Result<QuantumState> {
    if !t.is_finite() {
        return Err(Error::Invalid("propagation time must be finite".into()));
    }
    if psi0.psi.len() != h_total.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_total.dim(),
            got: psi0.psi.len(),
        });
    }
    let spec = Spectrum::new(h_total)?;
    Ok(QuantumState {
        psi: spec.evolve(&psi0.psi, t),
    })
}

fn check_problem(h: &Hamiltonian, prob: &TransferProblem) -> Result<()> {
    if prob.n != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: prob.n,
        });
    }
    prob.validate()
}

/// `|⟨OUT| exp(-i(H+D)t) |IN⟩|²`.
pub fn transfer_probability(h: &Hamiltonian, d: &BiasField, prob: &TransferProblem, t: f64) -> Result<f64> {
    check_problem(h, prob)?;
    if !t.is_finite() {
        return Err(Error::Invalid("readout time must be finite".into()));
    }
    Ok(Spectrum::of(h, d)?.probability(prob, t))
}

/// Long-run mean of the transfer probability, in closed form.
pub fn time_averaged_probability(h: &Hamiltonian, d: &BiasField, prob: &TransferProblem) -> Result<f64> {
    check_problem(h, prob)?;
    Ok(Spectrum::of(h, d)?.time_average(prob))
}

/// Trapezoidal `(1/T) ∫_0^T p(t) dt` on `steps` equal intervals.
pub fn windowed_average_probability(
    h: &Hamiltonian,
    d: &BiasField,
    prob: &TransferProblem,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    check_problem(h, prob)?;
    if !(horizon > 0.0) || steps < 2 {
        return Err(Error::Invalid("need horizon > 0 and at least 2 steps".into()));
    }
    let spec = Spectrum::of(h, d)?;
    let dt = horizon / steps as f64;
    let mut acc = 0.5 * (spec.probability(prob, 0.0) + spec.probability(prob, horizon));
    for k in 1..steps {
        acc += spec.probability(prob, k as f64 * dt);
    }
    Ok(acc * dt / horizon)
}

/// `∂/∂δ |⟨OUT| exp(-i(H + D + δ·scale·S)t) |IN⟩|²` at δ = 0.
pub fn differential_sensitivity(
    h: &Hamiltonian,
    d: &BiasField,
    s: &PerturbationStructure,
    scale: f64,
    prob: &TransferProblem,
    t: f64,
) -> Result<SensitivityRecord> {
    check_problem(h, prob)?;
    let spec = Spectrum::of(h, d)?;
    sensitivity_from_spectrum(&spec, &s.s, &s.label, scale, prob, t)
}

pub(crate) fn sensitivity_from_spectrum(
    spec: &Spectrum,
    direction: &DMatrix<f64>,
    label: &str,
    scale: f64,
    prob: &TransferProblem,
    t: f64,
) -> Result<SensitivityRecord> {
    if direction.nrows() != spec.dim() || !direction.is_square() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: direction.nrows(),
        });
    }
    let asym = (direction - direction.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::NonHermitian { asymmetry: asym });
    }
    let e = direction.map(|x| c(x * scale));
    let p = spec.probability(prob, t);
    let value = spec.probability_derivative(&e, prob, t);
    Ok(SensitivityRecord::new(value, p, t, label.to_string()))
}

/// Per-structure and mean sensitivity profiles over an ensemble.
#[derive(Clone, Debug)]
pub struct SensitivitySweep {
    /// `(label, records)`, one record per controller in ensemble order.
    pub per_structure: Vec<(String, Vec<SensitivityRecord>)>,
    /// Mean of absolute sensitivities across structures, per controller.
    pub mean: Vec<SensitivityRecord>,
}

/// Evaluates every structure at each controller's readout time `t_f`.
pub fn sensitivity_sweep(
    ensemble: &ControllerEnsemble,
    structures: &[PerturbationStructure],
    mode: ExecMode,
) -> Result<SensitivitySweep> {
    if ensemble.controllers.is_empty() {
        return Err(Error::Invalid("empty ensemble".into()));
    }
    if structures.is_empty() {
        return Err(Error::Invalid("no perturbation structures given".into()));
    }
    let h = crate::network::build_hamiltonian(&ensemble.spec)?;
    let prob = ensemble.problem;
    let rows: Vec<Result<Vec<SensitivityRecord>>> = map_slice(mode, &ensemble.controllers, |ctl| {
        let spec = Spectrum::of(&h, &ctl.d)?;
        structures
            .iter()
            .map(|s| sensitivity_from_spectrum(&spec, &s.s, &s.label, s.scale_for(&ctl.d), &prob, ctl.t_f))
            .collect()
    });
    let rows: Vec<Vec<SensitivityRecord>> = rows.into_iter().collect::<Result<_>>()?;
    let per_structure = structures
        .iter()
        .enumerate()
        .map(|(j, s)| (s.label.clone(), rows.iter().map(|r| r[j].clone()).collect()))
        .collect();
    let k = structures.len() as f64;
    let mean = rows
        .iter()
        .map(|r| {
            let value = r.iter().map(|x| x.value.abs()).sum::<f64>() / k;
            SensitivityRecord::new(value, r[0].p, r[0].t, "mean".into())
        })
        .collect();
    Ok(SensitivitySweep { per_structure, mean })
}
