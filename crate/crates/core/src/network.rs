//! Nominal Hamiltonians and structured perturbation directions for
//! homogeneous spin chains and rings in the single-excitation subspace.
//!
//! All user-facing spin indices are 1-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Ring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingModel {
    Xx,
    Xxx,
}

/// Size, topology and coupling model of a homogeneous network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinNetworkSpec {
    pub n: usize,
    pub topology: Topology,
    #[serde(rename = "coupling")]
    pub coupling_model: CouplingModel,
}

impl SpinNetworkSpec {
    pub fn new(n: usize, topology: Topology, coupling_model: CouplingModel) -> Result<Self> {
        let spec = SpinNetworkSpec {
            n,
            topology,
            coupling_model,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::new(n, Topology::Chain, CouplingModel::Xx)
    }

    pub fn ring(n: usize) -> Result<Self> {
        Self::new(n, Topology::Ring, CouplingModel::Xx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Spec(format!("need at least 2 spins, got {}", self.n)));
        }
        if self.topology == Topology::Ring && self.n < 3 {
            return Err(Error::Spec(format!("a ring needs at least 3 spins, got {}", self.n)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SpinNetworkSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Single-excitation Hamiltonian (Hermitian, unit nominal coupling).
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub matrix: CMat,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wraps a matrix after checking it is square and Hermitian to 1e-12.
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        crate::linalg::ensure_hermitian(&matrix, 1e-12)?;
        Ok(Hamiltonian { matrix })
    }
}

/// Static bias field, the diagonal `D = diag(D_1, ..., D_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasField {
    pub d: Vec<f64>,
}

impl BiasField {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("bias field entries must be finite".into()));
        }
        Ok(BiasField { d })
    }

    pub fn zeros(n: usize) -> Self {
        BiasField { d: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.d.len(),
            self.d.iter().map(|&v| c(v)),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Coupling,
    Leakage,
}

/// A named direction `S` for a structured Hamiltonian error `δ·S`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationStructure {
    pub label: String,
    pub s: DMatrix<f64>,
    pub kind: PerturbationKind,
    /// 1-based spin index: the first spin of a coupling pair, or the leaking spin.
    pub site: usize,
}

impl PerturbationStructure {
    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// Gain multiplying δ: 1 for couplings, the nominal bias `D_k` for leakage.
    pub fn scale_for(&self, d: &BiasField) -> f64 {
        match self.kind {
            PerturbationKind::Coupling => 1.0,
            PerturbationKind::Leakage => d.d[self.site - 1],
        }
    }

    pub fn complex(&self) -> CMat {
        crate::linalg::real_to_complex(&self.s)
    }
}

pub fn build_hamiltonian(spec: &SpinNetworkSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    let n = spec.n;
    let mut h = CMat::zeros(n, n);
    for k in 0..n - 1 {
        h[(k, k + 1)] = c(1.0);
        h[(k + 1, k)] = c(1.0);
    }
    if spec.topology == Topology::Ring {
        h[(0, n - 1)] = c(1.0);
        h[(n - 1, 0)] = c(1.0);
    }
    if spec.coupling_model == CouplingModel::Xxx {
        for k in 0..n {
            h[(k, k)] += c(1.0);
        }
    }
    Ok(Hamiltonian { matrix: h })
}

/// Direction of an error on coupling `(k, k+1)`; `k = n` selects the ring
/// closure pair `(1, n)`.
pub fn coupling_structure(spec: &SpinNetworkSpec, k: usize) -> Result<PerturbationStructure> {
    spec.validate()?;
    let n = spec.n;
    let (a, b) = if k >= 1 && k < n {
        (k - 1, k)
    } else if k == n {
        if spec.topology != Topology::Ring {
            return Err(Error::StructureNotPresent(format!(
                "coupling (1,{n}) does not exist on a chain"
            )));
        }
        (0, n - 1)
    } else {
        return Err(Error::StructureNotPresent(format!(
            "coupling index {k} outside 1..={n}"
        )));
    };
    let mut s = DMatrix::zeros(n, n);
    s[(a, b)] = 1.0;
    s[(b, a)] = 1.0;
    let label = if k == n {
        format!("coupling(1,{n})")
    } else {
        format!("coupling({},{})", k, k + 1)
    };
    Ok(PerturbationStructure {
        label,
        s,
        kind: PerturbationKind::Coupling,
        site: k,
    })
}

/// Direction of a leak of bias `k` onto its nearest neighbours:
/// `-1` on spin `k`, `+1/2` on each neighbour. Chain ends drop the missing
/// neighbour's share.
pub fn leakage_structure(spec: &SpinNetworkSpec, k: usize) -> Result<PerturbationStructure> {
    spec.validate()?;
    let n = spec.n;
    if k < 1 || k > n {
        return Err(Error::StructureNotPresent(format!(
            "leakage index {k} outside 1..={n}"
        )));
    }
    let i = k - 1;
    let mut s = DMatrix::zeros(n, n);
    s[(i, i)] = -1.0;
    let (left, right) = match spec.topology {
        Topology::Ring => (Some((i + n - 1) % n), Some((i + 1) % n)),
        Topology::Chain => (i.checked_sub(1), (i + 1 < n).then_some(i + 1)),
    };
    for j in [left, right].into_iter().flatten() {
        s[(j, j)] += 0.5;
    }
    Ok(PerturbationStructure {
        label: format!("leakage({k})"),
        s,
        kind: PerturbationKind::Leakage,
        site: k,
    })
}

/// Parses selectors such as `coupling(5,6)`, `coupling(1,11)` or `leakage(3)`.
pub fn parse_selector(spec: &SpinNetworkSpec, selector: &str) -> Result<PerturbationStructure> {
    let sel: String = selector.chars().filter(|ch| !ch.is_whitespace()).collect();
    let bad = || Error::Invalid(format!("unrecognised perturbation selector '{selector}'"));
    let (name, rest) = sel.split_once('(').ok_or_else(bad)?;
    let args = rest.strip_suffix(')').ok_or_else(bad)?;
    let nums: Vec<usize> = args
        .split(',')
        .map(|a| a.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match (name, nums.as_slice()) {
        ("leakage", [k]) => leakage_structure(spec, *k),
        ("coupling", [k]) => coupling_structure(spec, *k),
        ("coupling", [a, b]) => {
            let (lo, hi) = (*a.min(b), *a.max(b));
            if hi == lo + 1 {
                coupling_structure(spec, lo)
            } else if lo == 1 && hi == spec.n {
                coupling_structure(spec, spec.n)
            } else {
                Err(Error::StructureNotPresent(format!(
                    "spins {lo} and {hi} are not nearest neighbours"
                )))
            }
        }
        _ => Err(bad()),
    }
}

/// `H + diag(d) + Σ δ·scale·S`.
pub fn total_hamiltonian(
    h: &Hamiltonian,
    d: &BiasField,
    perturbations: &[(&PerturbationStructure, f64, f64)],
) -> Result<Hamiltonian> {
    let n = h.dim();
    if d.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d.dim(),
        });
    }
    let mut m = h.matrix.clone();
    for (i, &v) in d.d.iter().enumerate() {
        m[(i, i)] += c(v);
    }
    for (s, delta, scale) in perturbations {
        if s.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.dim(),
            });
        }
        let g = delta * scale;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += c(g * s.s[(i, j)]);
            }
        }
    }
    Ok(Hamiltonian { matrix: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(h: &Hamiltonian) -> DMatrix<f64> {
        h.matrix.map(|z| {
            assert_eq!(z.im, 0.0);
            z.re
        })
    }

    #[test]
    fn small_hamiltonians() {
        let h2 = build_hamiltonian(&SpinNetworkSpec::chain(2).unwrap()).unwrap();
        assert_eq!(real(&h2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let r3 = build_hamiltonian(&SpinNetworkSpec::ring(3).unwrap()).unwrap();
        assert_eq!(
            real(&r3),
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0])
        );
        let x3 = SpinNetworkSpec::new(3, Topology::Chain, CouplingModel::Xxx).unwrap();
        assert_eq!(
            real(&build_hamiltonian(&x3).unwrap()),
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0])
        );
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(SpinNetworkSpec::chain(1), Err(Error::Spec(_))));
        assert!(matches!(SpinNetworkSpec::ring(2), Err(Error::Spec(_))));
        let bad = SpinNetworkSpec {
            n: 1,
            topology: Topology::Chain,
            coupling_model: CouplingModel::Xx,
        };
        assert!(build_hamiltonian(&bad).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SpinNetworkSpec::from_json(r#"{"n": 11, "topology": "ring", "coupling": "xx"}"#).unwrap();
        assert_eq!(spec, SpinNetworkSpec::ring(11).unwrap());
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"n":11,"topology":"ring","coupling":"xx"}"#);
        assert!(SpinNetworkSpec::from_json(r#"{"n": 2, "topology": "ring", "coupling": "xx"}"#).is_err());
    }

    #[test]
    fn coupling_structures() {
        let ring = SpinNetworkSpec::ring(11).unwrap();
        let s = coupling_structure(&ring, 5).unwrap();
        assert_eq!(s.label, "coupling(5,6)");
        for i in 0..11 {
            for j in 0..11 {
                let want = if (i, j) == (4, 5) || (i, j) == (5, 4) { 1.0 } else { 0.0 };
                assert_eq!(s.s[(i, j)], want);
            }
        }
        let closure = coupling_structure(&ring, 11).unwrap();
        assert_eq!(closure.s[(0, 10)], 1.0);
        assert_eq!(closure.label, "coupling(1,11)");

        let c2 = coupling_structure(&SpinNetworkSpec::chain(2).unwrap(), 1).unwrap();
        assert_eq!(c2.s, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(matches!(
            coupling_structure(&SpinNetworkSpec::chain(4).unwrap(), 4),
            Err(Error::StructureNotPresent(_))
        ));
        assert!(coupling_structure(&ring, 0).is_err());
    }

    #[test]
    fn leakage_structures() {
        let diag = |s: &PerturbationStructure| (0..s.dim()).map(|i| s.s[(i, i)]).collect::<Vec<_>>();
        let ring = SpinNetworkSpec::ring(5).unwrap();
        assert_eq!(diag(&leakage_structure(&ring, 3).unwrap()), vec![0.0, 0.5, -1.0, 0.5, 0.0]);
        assert_eq!(diag(&leakage_structure(&ring, 1).unwrap()), vec![-1.0, 0.5, 0.0, 0.0, 0.5]);
        let chain = SpinNetworkSpec::chain(5).unwrap();
        let end = leakage_structure(&chain, 1).unwrap();
        assert_eq!(diag(&end), vec![-1.0, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(end.s.sum(), -0.5);
        assert!(leakage_structure(&chain, 6).is_err());
    }

    #[test]
    fn selectors() {
        let ring = SpinNetworkSpec::ring(11).unwrap();
        assert_eq!(parse_selector(&ring, "coupling(5,6)").unwrap().site, 5);
        assert_eq!(parse_selector(&ring, "coupling(11, 1)").unwrap().site, 11);
        assert_eq!(parse_selector(&ring, "leakage(3)").unwrap().kind, PerturbationKind::Leakage);
        assert!(parse_selector(&ring, "coupling(2,4)").is_err());
        assert!(parse_selector(&ring, "bogus").is_err());
    }

    #[test]
    fn total_hamiltonian_examples() {
        let spec = SpinNetworkSpec::chain(2).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let same = total_hamiltonian(&h, &BiasField::zeros(2), &[]).unwrap();
        assert_eq!(same, h);

        let s12 = coupling_structure(&spec, 1).unwrap();
        let p = total_hamiltonian(&h, &BiasField::zeros(2), &[(&s12, 0.1, 1.0)]).unwrap();
        assert!((p.matrix[(0, 1)].re - 1.1).abs() < 1e-15);
        assert!((p.matrix[(1, 0)].re - 1.1).abs() < 1e-15);

        // H + diag(1,0) + 0.2 * S11 * D_1 with S11 = diag(-1, 1/2)
        let d = BiasField::new(vec![1.0, 0.0]).unwrap();
        let s11 = leakage_structure(&spec, 1).unwrap();
        let scale = s11.scale_for(&d);
        assert_eq!(scale, 1.0);
        let l = total_hamiltonian(&h, &d, &[(&s11, 0.2, scale)]).unwrap();
        let want = [[0.8, 1.0], [1.0, 0.1]];
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((l.matrix[(i, j)].re - w).abs() < 1e-15);
            }
        }
        assert!(total_hamiltonian(&h, &BiasField::zeros(3), &[]).is_err());
    }

    #[test]
    fn ring_leakage_rows_sum_to_zero() {
        for n in 3..9 {
            let spec = SpinNetworkSpec::ring(n).unwrap();
            for k in 1..=n {
                assert_eq!(leakage_structure(&spec, k).unwrap().s.sum(), 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn coupling_perturbation_replaces_one_pair(n in 3usize..12, ring in any::<bool>(), k_raw in 0usize..12, delta in -2.0f64..2.0) {
            let spec = if ring { SpinNetworkSpec::ring(n).unwrap() } else { SpinNetworkSpec::chain(n).unwrap() };
            let kmax = if ring { n } else { n - 1 };
            let k = 1 + k_raw % kmax;
            let h = build_hamiltonian(&spec).unwrap();
            let s = coupling_structure(&spec, k).unwrap();
            let p = total_hamiltonian(&h, &BiasField::zeros(n), &[(&s, delta, 1.0)]).unwrap();
            prop_assert_eq!(crate::linalg::hermitian_asymmetry(&p.matrix), 0.0);
            for i in 0..n {
                for j in 0..n {
                    let expect = if s.s[(i, j)] != 0.0 { 1.0 + delta } else { h.matrix[(i, j)].re };
                    prop_assert!((p.matrix[(i, j)].re - expect).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn total_hamiltonian_is_linear_in_delta(n in 3usize..9, k_raw in 0usize..9, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let spec = SpinNetworkSpec::ring(n).unwrap();
            let k = 1 + k_raw % n;
            let h = build_hamiltonian(&spec).unwrap();
            let d = BiasField::new((0..n).map(|i| i as f64 - 1.5).collect()).unwrap();
            let s = leakage_structure(&spec, k).unwrap();
            let sc = s.scale_for(&d);
            let at = |x: f64| total_hamiltonian(&h, &d, &[(&s, x, sc)]).unwrap().matrix;
            let mid = at(0.5 * (a + b));
            let avg = (at(a) + at(b)) * c(0.5);
            prop_assert!((mid - avg).norm() < 1e-12);
        }
    }
}
