//! Linear-fractional model of the perturbed, bias-controlled network.
//!
//! Signals: uncertainty channel `ζ → v`, performance output `z = CΨ`,
//! preparation disturbance `w = |IN⟩` and virtual control `u = -iDΨ`.
//! The open-loop plant `P` maps `(v, w, u)` to `(ζ, z, Ψ)`; absorbing the
//! control gives the 2×2 block `G` used for robust-performance μ tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::dynamics::TransferProblem;
use crate::error::{Error, Result};
use crate::linalg::{c, condition_number, CMat, I};
use crate::network::{BiasField, Hamiltonian, PerturbationKind, PerturbationStructure};
use crate::ssv::{Block, BlockStructure};

const MAX_CONDITION: f64 = 1e12;

/// Square selector for the OUT-orthogonal error: the identity with row
/// `out_spin` zeroed.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputMatrix {
    pub c: DMatrix<f64>,
    pub out_spin: usize,
}

impl OutputMatrix {
    pub fn complex(&self) -> CMat {
        self.c.map(c)
    }
}

pub fn output_matrix(prob: &TransferProblem) -> OutputMatrix {
    let mut m = DMatrix::identity(prob.n, prob.n);
    m[(prob.out_spin - 1, prob.out_spin - 1)] = 0.0;
    OutputMatrix {
        c: m,
        out_spin: prob.out_spin,
    }
}

/// `Φ = (s0 I + iH)^{-1}`.
pub fn resolvent(h: &Hamiltonian, s0: Complex64) -> Result<CMat> {
    let n = h.dim();
    let m = CMat::identity(n, n) * s0 + &h.matrix * I;
    let condition = condition_number(&m);
    let singular = || Error::FrequencySingular {
        s0_re: s0.re,
        s0_im: s0.im,
        condition,
        suggested: 1e-6,
    };
    if !(condition <= MAX_CONDITION) {
        return Err(singular());
    }
    m.try_inverse().ok_or_else(singular)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub label: String,
    pub kind: PerturbationKind,
    pub site: usize,
}

/// Block 3×3 open-loop plant over rows `(ζ, z, Ψ)` and columns `(v, w, u)`.
#[derive(Clone, Debug)]
pub struct PlantMatrix {
    pub blocks: [[CMat; 3]; 3],
    pub s0: Complex64,
    pub structure_labels: Vec<String>,
    pub channels: Vec<Channel>,
    pub n: usize,
}

impl PlantMatrix {
    pub fn block(&self, row: usize, col: usize) -> &CMat {
        &self.blocks[row][col]
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "s0": [self.s0.re, self.s0.im],
            "structure_labels": self.structure_labels,
            "blocks": self.blocks.iter()
                .map(|row| row.iter().map(matrix_to_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

/// Controller-absorbed map `(v, w) → (ζ, z)`.
#[derive(Clone, Debug)]
pub struct GMatrix {
    pub g11: CMat,
    pub g12: CMat,
    pub g21: CMat,
    pub g22: CMat,
    pub s0: Complex64,
    pub channels: Vec<Channel>,
}

impl GMatrix {
    pub fn n(&self) -> usize {
        self.g22.nrows()
    }

    /// `[[G11, G12], [G21, G22]]` as one square matrix.
    pub fn assemble(&self) -> CMat {
        let (a, b) = (self.g11.nrows(), self.g22.nrows());
        let mut m = CMat::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.g11);
        m.view_mut((0, a), (a, b)).copy_from(&self.g12);
        m.view_mut((a, 0), (b, a)).copy_from(&self.g21);
        m.view_mut((a, a), (b, b)).copy_from(&self.g22);
        m
    }

    /// One repeated-scalar block `δ I_n` per uncertainty channel.
    pub fn uncertainty_structure(&self) -> BlockStructure {
        BlockStructure::new(
            self.channels
                .iter()
                .map(|_| Block::RepeatedScalar { dim: self.n() })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "s0": [self.s0.re, self.s0.im],
            "g11": matrix_to_json(&self.g11),
            "g12": matrix_to_json(&self.g12),
            "g21": matrix_to_json(&self.g21),
            "g22": matrix_to_json(&self.g22),
        })
    }
}

pub fn build_plant(
    h: &Hamiltonian,
    c_out: &OutputMatrix,
    structures: &[PerturbationStructure],
    s0: Complex64,
) -> Result<PlantMatrix> {
    if structures.is_empty() {
        return Err(Error::Invalid("at least one uncertainty structure is required".into()));
    }
    let n = h.dim();
    if c_out.c.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c_out.c.nrows(),
        });
    }
    for s in structures {
        if s.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
        }
    }
    let phi = resolvent(h, s0)?;
    let cm = c_out.complex();
    let k = structures.len();
    let kn = k * n;
    let c_phi = &cm * &phi;

    let mut p11 = CMat::zeros(kn, kn);
    let mut p12 = CMat::zeros(kn, n);
    for (j, s) in structures.iter().enumerate() {
        let s_phi = s.complex() * &phi * I;
        // every v-column of channel row j carries -iS_jΦ
        for l in 0..k {
            p11.view_mut((j * n, l * n), (n, n)).copy_from(&(-&s_phi));
        }
        p12.view_mut((j * n, 0), (n, n)).copy_from(&s_phi);
    }
    let mut p21 = CMat::zeros(n, kn);
    let mut p31 = CMat::zeros(n, kn);
    for l in 0..k {
        p21.view_mut((0, l * n), (n, n)).copy_from(&(-&c_phi));
        p31.view_mut((0, l * n), (n, n)).copy_from(&(-&phi));
    }
    let blocks = [
        [p11, p12.clone(), p12],
        [p21, c_phi.clone(), c_phi],
        [p31, phi.clone(), phi],
    ];
    Ok(PlantMatrix {
        blocks,
        s0,
        structure_labels: structures.iter().map(|s| s.label.clone()).collect(),
        channels: structures
            .iter()
            .map(|s| Channel {
                label: s.label.clone(),
                kind: s.kind,
                site: s.site,
            })
            .collect(),
        n,
    })
}

/// Closes `u = -iDΨ` around the plant. Leakage channel outputs are scaled
/// by their nominal bias `D_k`, so a channel gain δ realizes `δ·D_k·S_kk`.
pub fn absorb_controller(p: &PlantMatrix, d: &BiasField) -> Result<GMatrix> {
    let n = p.n;
    if d.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d.dim() });
    }
    let mut zeta_rows = [p.blocks[0][0].clone(), p.blocks[0][1].clone(), p.blocks[0][2].clone()];
    for (j, ch) in p.channels.iter().enumerate() {
        if ch.kind == PerturbationKind::Leakage {
            let gain = c(d.d[ch.site - 1]);
            for blk in zeta_rows.iter_mut() {
                for r in j * n..(j + 1) * n {
                    for col in 0..blk.ncols() {
                        blk[(r, col)] *= gain;
                    }
                }
            }
        }
    }
    let [p11, p12, p13] = zeta_rows;
    let (p21, p22, p23) = (&p.blocks[1][0], &p.blocks[1][1], &p.blocks[1][2]);
    let (p31, p32, p33) = (&p.blocks[2][0], &p.blocks[2][1], &p.blocks[2][2]);

    let i_d = d.matrix() * I;
    let loop_matrix = CMat::identity(n, n) + p33 * &i_d;
    if !(condition_number(&loop_matrix) <= MAX_CONDITION) {
        return Err(Error::Singular("I + P33 iD"));
    }
    let inv = loop_matrix.try_inverse().ok_or(Error::Singular("I + P33 iD"))?;
    let k = &i_d * inv;
    Ok(GMatrix {
        g11: &p11 - &p13 * &k * p31,
        g12: &p12 - &p13 * &k * p32,
        g21: p21 - p23 * &k * p31,
        g22: p22 - p23 * &k * p32,
        s0: p.s0,
        channels: p.channels.clone(),
    })
}

/// Upper LFT `T_zw = G22 + G21 Δ (I - G11 Δ)^{-1} G12`.
pub fn closed_loop_tzw(g: &GMatrix, delta: &CMat) -> Result<CMat> {
    let m = g.g11.nrows();
    if delta.nrows() != g.g11.ncols() || delta.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: delta.nrows(),
        });
    }
    let loop_matrix = CMat::identity(m, m) - &g.g11 * delta;
    if !(condition_number(&loop_matrix) <= MAX_CONDITION) {
        return Err(Error::AtMuBoundary);
    }
    let inv = loop_matrix.try_inverse().ok_or(Error::AtMuBoundary)?;
    Ok(&g.g22 + &g.g21 * delta * inv * &g.g12)
}

pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Parses nested arrays of `[re, im]` pairs (bare numbers are read as real).
pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let bad = |msg: &str| Error::Invalid(format!("complex matrix JSON: {msg}"));
    let rows = v.as_array().ok_or_else(|| bad("expected an array of rows"))?;
    let ncols = rows
        .first()
        .and_then(|r| r.as_array())
        .map(|r| r.len())
        .unwrap_or(0);
    let mut m = CMat::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| bad("row is not an array"))?;
        if row.len() != ncols {
            return Err(bad("ragged rows"));
        }
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = match entry {
                Value::Number(x) => c(x.as_f64().ok_or_else(|| bad("bad number"))?),
                Value::Array(pair) if pair.len() == 2 => Complex64::new(
                    pair[0].as_f64().ok_or_else(|| bad("bad real part"))?,
                    pair[1].as_f64().ok_or_else(|| bad("bad imaginary part"))?,
                ),
                _ => return Err(bad("entries must be [re, im] pairs")),
            };
        }
    }
    Ok(m)
}

/// Reads either a bare square matrix or a `{"g11", "g12", "g21", "g22"}`
/// object, returning the assembled square matrix.
pub fn square_matrix_from_json(v: &Value) -> Result<CMat> {
    let m = if v.get("g11").is_some() {
        let part = |k: &str| matrix_from_json(&v[k]);
        GMatrix {
            g11: part("g11")?,
            g12: part("g12")?,
            g21: part("g21")?,
            g22: part("g22")?,
            s0: Complex64::new(0.0, 0.0),
            channels: Vec::new(),
        }
        .assemble()
    } else {
        matrix_from_json(v)?
    };
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::determinant;
    use crate::network::{build_hamiltonian, coupling_structure, leakage_structure, total_hamiltonian, SpinNetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn direct_resolvent(h: &Hamiltonian, s0: Complex64) -> CMat {
        (CMat::identity(h.dim(), h.dim()) * s0 + &h.matrix * I).try_inverse().unwrap()
    }

    #[test]
    fn output_matrix_examples() {
        let p = TransferProblem::new(11, 1, 3).unwrap();
        let cm = output_matrix(&p);
        for i in 0..11 {
            for j in 0..11 {
                let want = if i == j && i != 2 { 1.0 } else { 0.0 };
                assert_eq!(cm.c[(i, j)], want);
            }
        }
        let p2 = TransferProblem::new(2, 1, 2).unwrap();
        assert_eq!(output_matrix(&p2).c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let psi = nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let c4 = output_matrix(&TransferProblem::new(4, 1, 3).unwrap());
        assert_eq!((&c4.c * psi).norm(), 0.0);
    }

    #[test]
    fn output_matrix_complements_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cm = output_matrix(&TransferProblem::new(6, 2, 4).unwrap()).complex();
        for _ in 0..20 {
            let v = crate::linalg::CVec::from_fn(6, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let v = &v / c(v.norm());
            let err = (&cm * &v).norm_squared();
            assert!((err + v[3].norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_examples() {
        let id = Hamiltonian { matrix: CMat::identity(3, 3) };
        let r = resolvent(&id, zero()).unwrap();
        assert!((r - CMat::identity(3, 3) * Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let h2 = build_hamiltonian(&SpinNetworkSpec::chain(2).unwrap()).unwrap();
        let r2 = resolvent(&h2, zero()).unwrap();
        assert!((r2 - &h2.matrix * Complex64::new(0.0, -1.0)).norm() < 1e-14);

        let ring = build_hamiltonian(&SpinNetworkSpec::ring(11).unwrap()).unwrap();
        assert!(resolvent(&ring, zero()).is_ok());

        let h3 = build_hamiltonian(&SpinNetworkSpec::chain(3).unwrap()).unwrap();
        match resolvent(&h3, zero()) {
            Err(Error::FrequencySingular { suggested, .. }) => assert_eq!(suggested, 1e-6),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(resolvent(&h3, c(1e-6)).is_ok());
    }

    #[test]
    fn plant_shapes_and_duplicate_columns() {
        let spec = SpinNetworkSpec::ring(5).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let cm = output_matrix(&TransferProblem::new(5, 1, 3).unwrap());
        let s = [coupling_structure(&spec, 2).unwrap(), coupling_structure(&spec, 4).unwrap()];
        let p = build_plant(&h, &cm, &s, zero()).unwrap();
        assert_eq!(p.block(0, 0).shape(), (10, 10));
        assert_eq!(p.block(1, 0).shape(), (5, 10));
        for r in 0..3 {
            assert_eq!(p.block(r, 1), p.block(r, 2));
        }
        assert!(build_plant(&h, &cm, &[], zero()).is_err());
    }

    #[test]
    fn absorb_with_zero_bias_is_restriction() {
        let spec = SpinNetworkSpec::ring(5).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let cm = output_matrix(&TransferProblem::new(5, 1, 3).unwrap());
        let p = build_plant(&h, &cm, &[coupling_structure(&spec, 1).unwrap()], zero()).unwrap();
        let g = absorb_controller(&p, &BiasField::zeros(5)).unwrap();
        assert_eq!(&g.g11, p.block(0, 0));
        assert_eq!(&g.g12, p.block(0, 1));
        assert_eq!(&g.g21, p.block(1, 0));
        assert_eq!(&g.g22, p.block(1, 1));
    }

    #[test]
    fn g22_is_closed_loop_resolvent() {
        let spec = SpinNetworkSpec::chain(2).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let prob = TransferProblem::new(2, 1, 2).unwrap();
        let cm = output_matrix(&prob);
        let s = coupling_structure(&spec, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let d = BiasField::new(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).unwrap();
            let p = build_plant(&h, &cm, std::slice::from_ref(&s), zero()).unwrap();
            let g = absorb_controller(&p, &d).unwrap();
            let hd = total_hamiltonian(&h, &d, &[]).unwrap();
            let want = cm.complex() * direct_resolvent(&hd, zero());
            assert!((&g.g22 - want).norm() < 1e-10);

            let delta = 0.01;
            let t = closed_loop_tzw(&g, &(CMat::identity(2, 2) * c(delta))).unwrap();
            let hp = total_hamiltonian(&h, &d, &[(&s, delta, 1.0)]).unwrap();
            let want = cm.complex() * direct_resolvent(&hp, zero());
            assert!((t - want).norm() < 1e-9);
            assert_eq!(closed_loop_tzw(&g, &CMat::zeros(2, 2)).unwrap(), g.g22);
        }
    }

    #[test]
    fn leakage_channel_scales_with_bias() {
        let spec = SpinNetworkSpec::ring(5).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let prob = TransferProblem::new(5, 1, 3).unwrap();
        let cm = output_matrix(&prob);
        let s = leakage_structure(&spec, 2).unwrap();
        let d = BiasField::new(vec![0.5, 2.5, -1.0, 0.3, 1.1]).unwrap();
        let p = build_plant(&h, &cm, std::slice::from_ref(&s), c(0.2)).unwrap();
        let g = absorb_controller(&p, &d).unwrap();
        let delta = 0.07;
        let t = closed_loop_tzw(&g, &(CMat::identity(5, 5) * c(delta))).unwrap();
        let hp = total_hamiltonian(&h, &d, &[(&s, delta, s.scale_for(&d))]).unwrap();
        let want = cm.complex() * direct_resolvent(&hp, c(0.2));
        assert!((t - want).norm() < 1e-10);
    }

    #[test]
    fn boundary_perturbation_is_rejected() {
        // G11 = diag(2, 0.5) with Δ = I/2 makes I - G11Δ singular
        let g = GMatrix {
            g11: CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(0.5)])),
            g12: CMat::identity(2, 2),
            g21: CMat::identity(2, 2),
            g22: CMat::identity(2, 2),
            s0: zero(),
            channels: Vec::new(),
        };
        assert!(matches!(
            closed_loop_tzw(&g, &(CMat::identity(2, 2) * c(0.5))),
            Err(Error::AtMuBoundary)
        ));
    }

    #[test]
    fn determinant_factorization() {
        let spec = SpinNetworkSpec::ring(5).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let cm = output_matrix(&TransferProblem::new(5, 1, 3).unwrap());
        let p = build_plant(&h, &cm, &[coupling_structure(&spec, 3).unwrap()], zero()).unwrap();
        let d = BiasField::new(vec![1.0, -0.5, 0.25, 2.0, 0.0]).unwrap();
        let g = absorb_controller(&p, &d).unwrap();
        let delta = CMat::identity(5, 5) * Complex64::new(0.1, -0.05);
        let dp = CMat::from_fn(5, 5, |i, j| Complex64::new(0.02 * (i as f64 - j as f64), 0.01 * (i + j) as f64));
        let t = closed_loop_tzw(&g, &delta).unwrap();
        let lhs = determinant(&(CMat::identity(5, 5) - &g.g11 * &delta)) * determinant(&(CMat::identity(5, 5) - t * &dp));
        let mut big = CMat::zeros(10, 10);
        big.view_mut((0, 0), (5, 5)).copy_from(&delta);
        big.view_mut((5, 5), (5, 5)).copy_from(&dp);
        let rhs = determinant(&(CMat::identity(10, 10) - g.assemble() * big));
        assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    }

    #[test]
    fn json_round_trip() {
        let m = CMat::from_row_slice(2, 2, &[Complex64::new(1.0, -2.0), c(0.5), c(0.0), Complex64::new(0.0, 3.0)]);
        let v = matrix_to_json(&m);
        assert_eq!(v[0][0], json!([1.0, -2.0]));
        assert_eq!(matrix_from_json(&v).unwrap(), m);
        assert_eq!(matrix_from_json(&json!([[1, 2], [3, 4]])).unwrap()[(1, 0)], c(3.0));
        assert!(matrix_from_json(&json!([[1, 2], [3]])).is_err());
        assert!(square_matrix_from_json(&json!([[1, 2]])).is_err());
    }
}
