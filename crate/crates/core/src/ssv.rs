//! Bounds on the complex structured singular value μ_𝒟(G).
//!
//! Block structures mix repeated complex scalars `δ I_r` and full complex
//! blocks. The upper bound minimizes `σ̄(D_L G D_R^{-1})` over scalings that
//! commute with the structure; the lower bound is a power iteration for
//! `max_Q ρ(GQ)` over structured unitaries and always ships the destabilizing
//! perturbation it found. [`mu_brute_force`] enumerates perturbations
//! directly and serves as an oracle for small problems.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lft::GMatrix;
use crate::linalg::{c, determinant, dominant_eigen, spectral_norm, spectral_radius, CMat, CVec, HermitianEigen};

/// One diagonal block of the perturbation `𝚫`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    /// `δ I_dim` with complex δ.
    RepeatedScalar { dim: usize },
    /// Unstructured `rows × cols` complex block.
    #[serde(alias = "full")]
    FullComplex { rows: usize, cols: usize },
}

impl Block {
    /// Rows of the block, i.e. its share of the columns of `G`.
    pub fn rows(&self) -> usize {
        match *self {
            Block::RepeatedScalar { dim } => dim,
            Block::FullComplex { rows, .. } => rows,
        }
    }

    /// Columns of the block, i.e. its share of the rows of `G`.
    pub fn cols(&self) -> usize {
        match *self {
            Block::RepeatedScalar { dim } => dim,
            Block::FullComplex { cols, .. } => cols,
        }
    }

    fn is_scalar_like(&self) -> bool {
        matches!(self, Block::RepeatedScalar { .. } | Block::FullComplex { rows: 1, cols: 1 })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    pub blocks: Vec<Block>,
}

impl BlockStructure {
    pub fn new(blocks: Vec<Block>) -> Self {
        BlockStructure { blocks }
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Invalid("block structure has no blocks".into()));
        }
        if self.blocks.iter().any(|b| b.rows() == 0 || b.cols() == 0) {
            return Err(Error::Invalid("blocks must have positive dimensions".into()));
        }
        let rows: usize = self.blocks.iter().map(|b| b.rows()).sum();
        let cols: usize = self.blocks.iter().map(|b| b.cols()).sum();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, got: cols });
        }
        Ok(())
    }

    fn check(&self, g: &CMat) -> Result<()> {
        self.validate()?;
        if !g.is_square() || g.nrows() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                got: g.nrows(),
            });
        }
        Ok(())
    }

    /// Offsets into the row space of `G` (block columns of `𝚫`).
    fn g_row_offsets(&self) -> Vec<usize> {
        offsets(self.blocks.iter().map(|b| b.cols()))
    }

    /// Offsets into the column space of `G` (block rows of `𝚫`).
    fn g_col_offsets(&self) -> Vec<usize> {
        offsets(self.blocks.iter().map(|b| b.rows()))
    }

    pub fn repeated_scalar_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, Block::RepeatedScalar { .. }))
            .count()
    }

    /// Appends a full performance block.
    pub fn with_performance_block(&self, n: usize) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.push(Block::FullComplex { rows: n, cols: n });
        BlockStructure { blocks }
    }

    /// Assembles block-diagonal `𝚫` from per-block matrices.
    pub fn assemble(&self, parts: &[CMat]) -> CMat {
        let n = self.total_dim();
        let (ro, co) = (self.g_col_offsets(), self.g_row_offsets());
        let mut m = CMat::zeros(n, n);
        for (j, (b, p)) in self.blocks.iter().zip(parts).enumerate() {
            m.view_mut((ro[j], co[j]), (b.rows(), b.cols())).copy_from(p);
        }
        m
    }
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .map(|s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpperBoundOptions {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
}

impl Default for UpperBoundOptions {
    fn default() -> Self {
        UpperBoundOptions {
            max_iterations: 200,
            relative_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerBoundOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Defaults to the number of repeated-scalar blocks.
    pub seed: Option<u64>,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        LowerBoundOptions {
            restarts: 10,
            max_iterations: 500,
            tolerance: 1e-9,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MuOptions {
    pub upper: UpperBoundOptions,
    pub lower: LowerBoundOptions,
}

/// Per-block scaling: the full `D_i` for repeated scalars, a 1×1 positive
/// gain for full blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub blocks: Vec<CMat>,
}

#[derive(Clone, Debug)]
pub struct UpperBound {
    pub value: f64,
    pub scaling: Scaling,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct LowerBound {
    pub value: f64,
    /// Destabilizing `𝚫*` with `det(I - G𝚫*) = 0` and `‖𝚫*‖ = 1/value`.
    pub witness: Option<CMat>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct MuResult {
    pub lower: f64,
    pub upper: f64,
    pub witness: Option<CMat>,
    pub scaling: Scaling,
    pub converged: bool,
    pub iterations: usize,
}

impl MuResult {
    pub fn witness_norm(&self) -> Option<f64> {
        self.witness.as_ref().map(spectral_norm)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lower": self.lower,
            "upper": self.upper,
            "witness_norm": self.witness_norm(),
            "converged": self.converged,
            "iterations": self.iterations,
        })
    }
}

/// `|det(I - G𝚫)|` residual bound accepted for a witness.
pub fn witness_tolerance(g: &CMat) -> f64 {
    1e-6 * (1.0 + spectral_norm(g)).powi(g.nrows() as i32)
}

pub fn witness_residual(g: &CMat, delta: &CMat) -> f64 {
    let n = g.nrows();
    determinant(&(CMat::identity(n, n) - g * delta)).norm()
}

// ---------------------------------------------------------------------------
// upper bound

struct ScaleState {
    /// `D_i` and `D_i^{-1}` for each block (1×1 for full blocks).
    d: Vec<CMat>,
    d_inv: Vec<CMat>,
}

impl ScaleState {
    fn identity(structure: &BlockStructure) -> Self {
        let d: Vec<CMat> = structure
            .blocks
            .iter()
            .map(|b| match b {
                Block::RepeatedScalar { dim } => CMat::identity(*dim, *dim),
                Block::FullComplex { .. } => CMat::identity(1, 1),
            })
            .collect();
        ScaleState {
            d_inv: d.clone(),
            d,
        }
    }

    fn scaled(&self, g: &CMat, structure: &BlockStructure) -> CMat {
        let (ro, co) = (structure.g_row_offsets(), structure.g_col_offsets());
        let mut m = g.clone();
        for (j, b) in structure.blocks.iter().enumerate() {
            match b {
                Block::RepeatedScalar { dim } => {
                    let rows = &self.d[j] * m.rows(ro[j], *dim);
                    m.rows_mut(ro[j], *dim).copy_from(&rows);
                    let cols = m.columns(co[j], *dim) * &self.d_inv[j];
                    m.columns_mut(co[j], *dim).copy_from(&cols);
                }
                Block::FullComplex { rows, cols } => {
                    let s = self.d[j][(0, 0)];
                    let si = self.d_inv[j][(0, 0)];
                    for r in ro[j]..ro[j] + cols {
                        for k in 0..m.ncols() {
                            m[(r, k)] *= s;
                        }
                    }
                    for k in co[j]..co[j] + rows {
                        for r in 0..m.nrows() {
                            m[(r, k)] *= si;
                        }
                    }
                }
            }
        }
        m
    }

    /// Left-multiplies each block by `exp(-α K_j)`; `steps[j]` is Hermitian.
    fn stepped(&self, steps: &[CMat], alpha: f64) -> Result<Self> {
        let mut d = Vec::with_capacity(self.d.len());
        let mut d_inv = Vec::with_capacity(self.d.len());
        for (j, k) in steps.iter().enumerate() {
            if k.nrows() == 1 {
                let e = (-alpha * k[(0, 0)].re).exp();
                d.push(&self.d[j] * c(e));
                d_inv.push(&self.d_inv[j] * c(1.0 / e));
            } else {
                let eig = HermitianEigen::new(k)?;
                let fwd = eig.apply_fn(|l| c((-alpha * l).exp()));
                let back = eig.apply_fn(|l| c((alpha * l).exp()));
                d.push(fwd * &self.d[j]);
                d_inv.push(&self.d_inv[j] * back);
            }
        }
        Ok(ScaleState { d, d_inv })
    }
}

struct Evaluation {
    smooth: f64,
    sigma_max: f64,
    /// Descent directions per block (Hermitian; 1×1 for scalar gains).
    grad: Vec<CMat>,
    grad_sq: f64,
}

// f_p = log σ̄ + (1/p) log Σ (σ_k/σ̄)^p and its gradient with respect to
// multiplicative block updates.
fn evaluate(n_scaled: &CMat, structure: &BlockStructure, power: f64, full_blocks: bool) -> Evaluation {
    let svd = n_scaled.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Evaluation {
            smooth: f64::NEG_INFINITY,
            sigma_max,
            grad: Vec::new(),
            grad_sq: 0.0,
        };
    }
    let ratios: Vec<f64> = sv.iter().map(|s| (s / sigma_max).powf(power)).collect();
    let total: f64 = ratios.iter().sum();
    let smooth = sigma_max.ln() + total.ln() / power;
    let weights: Vec<f64> = ratios.iter().map(|r| r / total).collect();

    let (ro, co) = (structure.g_row_offsets(), structure.g_col_offsets());
    let mut grad = Vec::with_capacity(structure.blocks.len());
    let mut grad_sq = 0.0;
    for (j, b) in structure.blocks.iter().enumerate() {
        let (nl, nr) = (b.cols(), b.rows());
        // block-diagonal parts of W_L = Σ w u u^H and W_R = Σ w v v^H
        let mut wl = CMat::zeros(nl, nl);
        let mut wr = CMat::zeros(nr, nr);
        for (k, &w) in weights.iter().enumerate() {
            if w < 1e-300 {
                continue;
            }
            let uk = u.view((ro[j], k), (nl, 1));
            let vk = vt.view((k, co[j]), (1, nr)).adjoint();
            wl += (uk * uk.adjoint()) * c(w);
            wr += (&vk * vk.adjoint()) * c(w);
        }
        let g = match b {
            Block::RepeatedScalar { .. } if full_blocks => {
                let m = &wl - &wr;
                (&m + m.adjoint()) * c(0.5)
            }
            _ => CMat::from_element(1, 1, c(wl.trace().re - wr.trace().re)),
        };
        grad_sq += g.norm_squared();
        grad.push(g);
    }
    Evaluation {
        smooth,
        sigma_max,
        grad,
        grad_sq,
    }
}

// Expands a scalar gain step onto the block's full scaling.
fn expand_steps(grad: &[CMat], structure: &BlockStructure) -> Vec<CMat> {
    grad.iter()
        .zip(&structure.blocks)
        .map(|(g, b)| match b {
            Block::RepeatedScalar { dim } if g.nrows() == 1 => CMat::identity(*dim, *dim) * g[(0, 0)],
            _ => g.clone(),
        })
        .collect()
}

fn osborne_balance(g: &CMat, structure: &BlockStructure, state: &ScaleState) -> ScaleState {
    let nb = structure.blocks.len();
    let (ro, co) = (structure.g_row_offsets(), structure.g_col_offsets());
    let mut logs = vec![0.0; nb];
    for _ in 0..20 {
        let probe = state.stepped(&expand_steps(&logs.iter().map(|l| CMat::from_element(1, 1, c(-l))).collect::<Vec<_>>(), structure), 1.0);
        let Ok(probe) = probe else { break };
        let m = probe.scaled(g, structure);
        let mut moved = 0.0f64;
        for j in 0..nb {
            let b = structure.blocks[j];
            let mut r = 0.0;
            let mut cc = 0.0;
            for i in 0..m.nrows() {
                for k in 0..m.ncols() {
                    let in_row = (ro[j]..ro[j] + b.cols()).contains(&i);
                    let in_col = (co[j]..co[j] + b.rows()).contains(&k);
                    if in_row && !in_col {
                        r += m[(i, k)].norm_sqr();
                    } else if in_col && !in_row {
                        cc += m[(i, k)].norm_sqr();
                    }
                }
            }
            if r > 0.0 && cc > 0.0 {
                let step = 0.25 * (cc / r).ln();
                logs[j] += step;
                moved = moved.max(step.abs());
            }
        }
        if moved < 1e-3 {
            break;
        }
    }
    let steps: Vec<CMat> = logs.iter().map(|l| CMat::from_element(1, 1, c(-l))).collect();
    state
        .stepped(&expand_steps(&steps, structure), 1.0)
        .unwrap_or_else(|_| ScaleState {
            d: state.d.clone(),
            d_inv: state.d_inv.clone(),
        })
}

/// `min σ̄(D_L G D_R^{-1})` over structure-commuting scalings, by descent on
/// smoothed log-norms with Armijo backtracking.
pub fn mu_upper_bound(g: &CMat, structure: &BlockStructure, opts: &UpperBoundOptions) -> Result<UpperBound> {
    structure.check(g)?;
    let mut state = ScaleState::identity(structure);
    let base = spectral_norm(g);
    let mut best = (base, state.d.clone());
    let mut iterations = 0;
    if base == 0.0 || structure.blocks.len() == 1 && !matches!(structure.blocks[0], Block::RepeatedScalar { dim } if dim > 1) {
        return Ok(UpperBound {
            value: base,
            scaling: Scaling { blocks: state.d },
            iterations,
        });
    }

    if structure.blocks.len() > 1 {
        let balanced = osborne_balance(g, structure, &state);
        let s = spectral_norm(&balanced.scaled(g, structure));
        if s < best.0 {
            best = (s, balanced.d.clone());
            state = balanced;
        }
    }

    let has_full_scalings = structure
        .blocks
        .iter()
        .any(|b| matches!(b, Block::RepeatedScalar { dim } if *dim > 1));
    let phases: &[bool] = if has_full_scalings { &[false, true] } else { &[false] };
    for &full_blocks in phases {
        for &power in &[4.0, 16.0, 64.0, 256.0, 1024.0] {
            let mut eval = evaluate(&state.scaled(g, structure), structure, power, full_blocks);
            let mut alpha = 1.0;
            for _ in 0..opts.max_iterations {
                if eval.grad_sq == 0.0 || !eval.smooth.is_finite() {
                    break;
                }
                iterations += 1;
                let steps = expand_steps(&eval.grad, structure);
                let mut accepted = None;
                for _ in 0..40 {
                    let trial = state.stepped(&steps, alpha)?;
                    let te = evaluate(&trial.scaled(g, structure), structure, power, full_blocks);
                    if te.sigma_max < best.0 {
                        best = (te.sigma_max, trial.d.clone());
                    }
                    if te.smooth <= eval.smooth - 1e-4 * alpha * eval.grad_sq {
                        accepted = Some((trial, te));
                        break;
                    }
                    alpha *= 0.5;
                }
                let Some((trial, te)) = accepted else { break };
                let improvement = eval.smooth - te.smooth;
                state = trial;
                eval = te;
                alpha = (alpha * 2.0).min(1e3);
                if improvement < opts.relative_tolerance * eval.smooth.abs().max(1e-3) {
                    break;
                }
            }
        }
    }
    Ok(UpperBound {
        value: best.0,
        scaling: Scaling { blocks: best.1 },
        iterations,
    })
}

// ---------------------------------------------------------------------------
// lower bound

// Structured unitary Q aligning w = G^H z with a: w_i^H Q_i a_i ≥ 0 per block.
fn align(structure: &BlockStructure, w: &CVec, a: &CVec, prev: &[CMat]) -> Vec<CMat> {
    let (wo, ao) = (structure.g_col_offsets(), structure.g_row_offsets());
    structure
        .blocks
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let wj = w.rows(wo[j], b.rows());
            let aj = a.rows(ao[j], b.cols());
            match b {
                Block::RepeatedScalar { .. } => {
                    let s = wj.dotc(&aj);
                    if s.norm() > 1e-300 {
                        CMat::from_element(1, 1, s.conj() / c(s.norm()))
                    } else {
                        prev[j].clone()
                    }
                }
                Block::FullComplex { .. } => {
                    let (nw, na) = (wj.norm(), aj.norm());
                    if nw > 1e-300 && na > 1e-300 {
                        (wj / c(nw)) * (aj / c(na)).adjoint()
                    } else {
                        prev[j].clone()
                    }
                }
            }
        })
        .collect()
}

fn expand_q(structure: &BlockStructure, q: &[CMat]) -> CMat {
    let parts: Vec<CMat> = structure
        .blocks
        .iter()
        .zip(q)
        .map(|(b, qj)| match b {
            Block::RepeatedScalar { dim } => CMat::identity(*dim, *dim) * qj[(0, 0)],
            Block::FullComplex { .. } => qj.clone(),
        })
        .collect();
    structure.assemble(&parts)
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let nrm = v.norm();
    v / c(nrm)
}

struct Candidate {
    value: f64,
    q: CMat,
    lambda: Complex64,
}

fn exact_candidate(g: &CMat, q: CMat) -> Candidate {
    let (lambda, _, _) = dominant_eigen(&(g * &q));
    Candidate {
        value: lambda.norm(),
        q,
        lambda,
    }
}

/// Power iteration for `max_Q ρ(GQ)`, restarted from random vectors.
pub fn mu_lower_bound(g: &CMat, structure: &BlockStructure, opts: &LowerBoundOptions) -> Result<LowerBound> {
    structure.check(g)?;
    let m = g.nrows();
    let seed = opts.seed.unwrap_or(structure.repeated_scalar_count() as u64);
    let gh = g.adjoint();
    let mut best: Option<Candidate> = None;
    let mut converged_any = false;
    let mut iterations = 0;
    let identity_q: Vec<CMat> = structure
        .blocks
        .iter()
        .map(|b| match b {
            Block::RepeatedScalar { .. } => CMat::identity(1, 1),
            Block::FullComplex { rows, cols } => CMat::identity(*rows, *cols),
        })
        .collect();

    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let mut a = random_unit(&mut rng, m);
        let mut z = random_unit(&mut rng, m);
        let mut q = align(structure, &(&gh * &z), &a, &identity_q);
        let mut converged = false;
        for _ in 0..opts.max_iterations {
            iterations += 1;
            let qm = expand_q(structure, &q);
            let next_a = g * (&qm * &a);
            let beta = next_a.norm();
            if beta == 0.0 {
                break;
            }
            a = next_a / c(beta);
            let next_z = qm.adjoint() * (&gh * &z);
            let bz = next_z.norm();
            if bz == 0.0 {
                break;
            }
            z = next_z / c(bz);
            q = align(structure, &(&gh * &z), &a, &q);
            let gqa = g * (expand_q(structure, &q) * &a);
            let lambda = a.dotc(&gqa);
            let residual = (&gqa - &a * lambda).norm() / lambda.norm().max(1e-300);
            if residual < opts.tolerance {
                converged = true;
                break;
            }
        }
        converged_any |= converged;

        // polish with exact eigenvectors of GQ
        let mut cand = exact_candidate(g, expand_q(structure, &q));
        for _ in 0..50 {
            if cand.value == 0.0 {
                break;
            }
            let (_, x, y) = dominant_eigen(&(g * &cand.q));
            let qn = align(structure, &(&gh * &y), &x, &q);
            let next = exact_candidate(g, expand_q(structure, &qn));
            if next.value > cand.value * (1.0 + 1e-13) {
                q = qn;
                cand = next;
            } else {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| cand.value > b.value) {
            best = Some(cand);
        }
    }

    let best = best.expect("at least one restart");
    let scale = spectral_norm(g).max(1e-300);
    if best.value <= 1e-13 * scale {
        return Ok(LowerBound {
            value: 0.0,
            witness: None,
            converged: converged_any,
            iterations,
        });
    }
    let witness = &best.q / best.lambda;
    if witness_residual(g, &witness) <= witness_tolerance(g) {
        Ok(LowerBound {
            value: best.value,
            witness: Some(witness),
            converged: converged_any,
            iterations,
        })
    } else {
        Ok(LowerBound {
            value: 0.0,
            witness: None,
            converged: false,
            iterations,
        })
    }
}

/// Both bounds on one matrix.
pub fn mu_bounds(g: &CMat, structure: &BlockStructure, opts: &MuOptions) -> Result<MuResult> {
    let lower = mu_lower_bound(g, structure, &opts.lower)?;
    let upper = mu_upper_bound(g, structure, &opts.upper)?;
    Ok(MuResult {
        lower: lower.value,
        upper: upper.value.max(lower.value),
        witness: lower.witness,
        scaling: upper.scaling,
        converged: lower.converged,
        iterations: lower.iterations + upper.iterations,
    })
}

/// μ of the assembled `G` over `uncertainty ⊕ ℂ^{n×n}`, the full block
/// closing the performance channel `z → w`.
pub fn robust_performance_mu(g: &GMatrix, uncertainty: &BlockStructure, opts: &MuOptions) -> Result<MuResult> {
    let structure = uncertainty.with_performance_block(g.n());
    let m = g.assemble();
    if structure.total_dim() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: structure.total_dim(),
        });
    }
    mu_bounds(&m, &structure, opts)
}

// ---------------------------------------------------------------------------
// brute force oracle

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridOptions {
    pub phase_steps: usize,
    pub magnitude_steps: usize,
    /// Random rank-one draws per full block (larger than 1×1).
    pub samples: usize,
    /// Cap on grid points before switching to random sampling.
    pub budget: usize,
    pub refine_from: usize,
    pub seed: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            phase_steps: 24,
            magnitude_steps: 2,
            samples: 64,
            budget: 200_000,
            refine_from: 6,
            seed: 0,
        }
    }
}

pub const BRUTE_FORCE_MAX_DIM: usize = 6;

// Per block: [magnitude, phase] for scalar-like blocks, or
// [magnitude, phase, Re u.., Im u.., Re v.., Im v..] for larger full blocks.
fn brute_delta(structure: &BlockStructure, params: &[Vec<f64>]) -> (CMat, f64) {
    let mut norm = 0.0f64;
    let parts: Vec<CMat> = structure
        .blocks
        .iter()
        .zip(params)
        .map(|(b, p)| {
            let mag = p[0].abs().min(1.0);
            norm = norm.max(mag);
            let z = Complex64::from_polar(mag, p[1]);
            match *b {
                Block::RepeatedScalar { dim } => CMat::identity(dim, dim) * z,
                Block::FullComplex { rows: 1, cols: 1 } => CMat::from_element(1, 1, z),
                Block::FullComplex { rows, cols } => {
                    let u = CVec::from_fn(rows, |i, _| Complex64::new(p[2 + i], p[2 + rows + i]));
                    let o = 2 + 2 * rows;
                    let v = CVec::from_fn(cols, |i, _| Complex64::new(p[o + i], p[o + cols + i]));
                    let (nu, nv) = (u.norm().max(1e-300), v.norm().max(1e-300));
                    (u / c(nu)) * (v / c(nv)).adjoint() * z
                }
            }
        })
        .collect();
    (structure.assemble(&parts), norm)
}

fn brute_objective(g: &CMat, structure: &BlockStructure, params: &[Vec<f64>]) -> f64 {
    let (delta, norm) = brute_delta(structure, params);
    if norm <= 0.0 {
        return 0.0;
    }
    spectral_radius(&(g * delta)) / norm
}

/// Reciprocal of the smallest destabilizing structured norm found by
/// enumerating perturbation directions (phases × magnitudes on a grid,
/// random rank-one directions for larger full blocks), followed by a local
/// pattern search from the best grid points.
pub fn mu_brute_force(g: &CMat, structure: &BlockStructure, grid: &GridOptions) -> Result<f64> {
    structure.check(g)?;
    if g.nrows() > BRUTE_FORCE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: g.nrows(),
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let nb = structure.blocks.len();
    let phases: Vec<f64> = (0..grid.phase_steps.max(1))
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / grid.phase_steps.max(1) as f64)
        .collect();
    let mags: Vec<f64> = (1..=grid.magnitude_steps.max(1))
        .map(|k| k as f64 / grid.magnitude_steps.max(1) as f64)
        .collect();
    let per_block: Vec<usize> = structure
        .blocks
        .iter()
        .enumerate()
        .map(|(j, b)| {
            // the first block's phase is fixed: a common phase does not change ρ
            let ph = if j == 0 { 1 } else { phases.len() };
            let extra = if b.is_scalar_like() { 1 } else { grid.samples.max(1) };
            ph * mags.len() * extra
        })
        .collect();
    let grid_size = per_block.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));

    let draw_block = |rng: &mut ChaCha8Rng, b: &Block, idx: Option<usize>, j: usize| -> Vec<f64> {
        let (mag, phase, sample) = match idx {
            Some(mut i) => {
                let nm = mags.len();
                let mag = mags[i % nm];
                i /= nm;
                let (phase, rest) = if j == 0 { (0.0, i) } else { (phases[i % phases.len()], i / phases.len()) };
                (mag, phase, rest)
            }
            None => (rng.random::<f64>().max(1e-3), rng.random::<f64>() * 2.0 * std::f64::consts::PI, 0),
        };
        let _ = sample;
        let mut p = vec![mag, phase];
        if !b.is_scalar_like() {
            for _ in 0..2 * (b.rows() + b.cols()) {
                p.push(rng.random::<f64>() - 0.5);
            }
        }
        p
    };

    let mut scored: Vec<(f64, Vec<Vec<f64>>)> = Vec::new();
    match grid_size {
        Some(total) if total <= grid.budget => {
            for flat in 0..total {
                let mut rem = flat;
                let params: Vec<Vec<f64>> = (0..nb)
                    .map(|j| {
                        let idx = rem % per_block[j];
                        rem /= per_block[j];
                        draw_block(&mut rng, &structure.blocks[j], Some(idx), j)
                    })
                    .collect();
                scored.push((brute_objective(g, structure, &params), params));
            }
        }
        _ => {
            for _ in 0..grid.budget {
                let params: Vec<Vec<f64>> = (0..nb)
                    .map(|j| draw_block(&mut rng, &structure.blocks[j], None, j))
                    .collect();
                scored.push((brute_objective(g, structure, &params), params));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(grid.refine_from.max(1));

    let mut best = 0.0f64;
    for (mut value, mut params) in scored {
        let mut step = 0.25;
        while step > 1e-7 {
            let mut improved = false;
            for j in 0..nb {
                for k in 0..params[j].len() {
                    for sign in [1.0, -1.0] {
                        let mut trial = params.clone();
                        trial[j][k] += sign * step;
                        if k == 0 {
                            trial[j][0] = trial[j][0].clamp(1e-6, 1.0);
                        }
                        let v = brute_objective(g, structure, &trial);
                        if v > value {
                            value = v;
                            params = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(value);
    }
    Ok(best)
}
