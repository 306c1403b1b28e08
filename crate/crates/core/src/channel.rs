//! Quantum dynamical maps in signed-Kraus (operator sum-difference), Choi
//! and transfer-matrix form, with composition, inversion and CP/TP
//! diagnostics.
//!
//! Conventions, fixed project-wide:
//! - vectorization is column-stacking: vec(rho)[r + c*d] = rho[r, c], so the
//!   transfer matrix of rho -> K rho K^dag is conj(K) (x) K;
//! - the Choi matrix is built from the unnormalized Bell state,
//!   chi = sum_{kl} E(|k><l|) (x) |k><l|, with trace = dim for TP maps.

use num_complex::Complex64;

use crate::error::{QecError, Result};
use crate::operator_algebra::{
    all_finite, dagger, hermitian_eig, identity, kron, max_diff, max_norm, zeros, CMat, ONE, ZERO,
};

/// Tolerance for the trace-preservation invariant checked at construction.
pub const TP_TOL: f64 = 1e-8;

/// A Hermiticity-preserving trace-preserving map as a list of signed Kraus
/// operators: rho -> sum_i sign(i) K_i rho K_i^dag. CPTP maps have all signs
/// +1; NCP-HPTP maps carry at least one -1.
#[derive(Debug, Clone)]
pub struct SignedKrausMap {
    dim_in: usize,
    dim_out: usize,
    ops: Vec<(f64, CMat)>,
}

impl SignedKrausMap {
    /// Build a map and check the trace-preservation invariant
    /// ||sum_i sign(i) K_i^dag K_i - I|| <= 1e-8.
    pub fn new(ops: Vec<(f64, CMat)>) -> Result<Self> {
        assert!(!ops.is_empty(), "a map needs at least one Kraus operator");
        let dim_out = ops[0].1.nrows();
        let dim_in = ops[0].1.ncols();
        for (sign, k) in &ops {
            assert!(
                sign.abs() == 1.0,
                "Kraus signs must be +1 or -1, got {sign}"
            );
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(QecError::DimensionMismatch {
                    expected: dim_in,
                    got: k.ncols(),
                });
            }
            assert!(all_finite(k), "Kraus operator has non-finite entries");
        }
        let map = Self {
            dim_in,
            dim_out,
            ops,
        };
        let residual = map.tp_residual();
        if residual > TP_TOL {
            return Err(QecError::NotTracePreserving { residual });
        }
        Ok(map)
    }

    /// Build without the TP check (internal constructions that are TP by
    /// design, or diagnostics on deliberately truncated maps).
    pub fn new_unchecked(ops: Vec<(f64, CMat)>) -> Self {
        let dim_out = ops[0].1.nrows();
        let dim_in = ops[0].1.ncols();
        Self {
            dim_in,
            dim_out,
            ops,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new_unchecked(vec![(1.0, identity(dim))])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn ops(&self) -> &[(f64, CMat)] {
        &self.ops
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// All signs +1?
    pub fn is_all_positive(&self) -> bool {
        self.ops.iter().all(|(s, _)| *s > 0.0)
    }

    /// ||sum_i sign(i) K_i^dag K_i - I||_max
    pub fn tp_residual(&self) -> f64 {
        let mut acc = zeros(self.dim_in, self.dim_in);
        for (sign, k) in &self.ops {
            acc += (dagger(k) * k).scale(*sign);
        }
        max_diff(&acc, &identity(self.dim_in))
    }

    /// Apply the map: sum_i sign(i) K_i rho K_i^dag.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.dim_in || rho.ncols() != self.dim_in {
            return Err(QecError::DimensionMismatch {
                expected: self.dim_in,
                got: rho.nrows(),
            });
        }
        let mut out = zeros(self.dim_out, self.dim_out);
        for (sign, k) in &self.ops {
            out += (k * rho * dagger(k)).scale(*sign);
        }
        Ok(out)
    }

    /// Choi matrix chi = sum_{kl} E(|k><l|) (x) |k><l| (unnormalized Bell
    /// convention; trace = dim for TP maps). Requires dim_in == dim_out.
    pub fn to_choi(&self) -> CMat {
        assert_eq!(self.dim_in, self.dim_out, "Choi needs an endomorphism");
        let d = self.dim_in;
        let mut chi = zeros(d * d, d * d);
        for (sign, k) in &self.ops {
            // rank-1 contribution sign * w w^dag with w[(i, a)] = K[i, a]
            let mut w = nalgebra::DVector::<Complex64>::zeros(d * d);
            for i in 0..d {
                for a in 0..d {
                    w[i * d + a] = k[(i, a)];
                }
            }
            for r in 0..d * d {
                for c in 0..d * d {
                    chi[(r, c)] += Complex64::new(*sign, 0.0) * w[r] * w[c].conj();
                }
            }
        }
        chi
    }

    /// Transfer matrix in the column-stacking convention:
    /// T = sum_i sign(i) conj(K_i) (x) K_i.
    pub fn to_transfer(&self) -> TransferMatrix {
        assert_eq!(self.dim_in, self.dim_out, "transfer needs an endomorphism");
        let d = self.dim_in;
        let mut m = zeros(d * d, d * d);
        for (sign, k) in &self.ops {
            let kc = k.map(|z| z.conj());
            m += kron(&kc, k).scale(*sign);
        }
        TransferMatrix { dim: d, m }
    }

    /// Sequential composition: self applied after `inner`.
    pub fn compose(&self, inner: &SignedKrausMap) -> Result<SignedKrausMap> {
        if inner.dim_out != self.dim_in {
            return Err(QecError::DimensionMismatch {
                expected: self.dim_in,
                got: inner.dim_out,
            });
        }
        let mut ops = Vec::with_capacity(self.ops.len() * inner.ops.len());
        for (so, ko) in &self.ops {
            for (si, ki) in &inner.ops {
                ops.push((so * si, ko * ki));
            }
        }
        Ok(SignedKrausMap {
            dim_in: inner.dim_in,
            dim_out: self.dim_out,
            ops,
        })
    }

    /// n-fold tensor power with all Kraus products and multiplied signs.
    pub fn tensor_power(&self, n: usize, cap: usize) -> Result<SignedKrausMap> {
        assert!(n >= 1, "tensor power needs n >= 1");
        let count = self.ops.len().checked_pow(n as u32).unwrap_or(usize::MAX);
        if count > cap {
            return Err(QecError::SizeCapExceeded { count, cap });
        }
        let mut ops: Vec<(f64, CMat)> = vec![(1.0, identity(1))];
        for _ in 0..n {
            let mut next = Vec::with_capacity(ops.len() * self.ops.len());
            for (sa, ka) in &ops {
                for (sb, kb) in &self.ops {
                    next.push((sa * sb, kron(ka, kb)));
                }
            }
            ops = next;
        }
        Ok(SignedKrausMap {
            dim_in: self.dim_in.pow(n as u32),
            dim_out: self.dim_out.pow(n as u32),
            ops,
        })
    }
}

/// Default cap for tensor_power Kraus counts.
pub const TENSOR_POWER_CAP: usize = 4096;

/// Relative eigenvalue cutoff for Kraus extraction from a Choi matrix.
pub const KRAUS_PRUNE_TOL: f64 = 1e-12;

/// Eigendecompose a Hermitian Choi matrix into a signed Kraus map.
///
/// Eigenvalues with |lambda| <= tol * |lambda|_max are pruned; each kept
/// eigenpair contributes sign(lambda) and K = unvec(sqrt|lambda| v) with the
/// row-major unvectorization matching `to_choi`.
pub fn choi_to_signed_kraus(choi: &CMat, tol: f64) -> Result<SignedKrausMap> {
    let n = choi.nrows();
    let d = (n as f64).sqrt().round() as usize;
    assert_eq!(d * d, n, "Choi matrix side must be a perfect square");
    let (values, vectors) = hermitian_eig(choi, 1e-8)?;
    let lam_max = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut ops = Vec::new();
    for (i, &lambda) in values.iter().enumerate() {
        if lambda.abs() <= tol * lam_max {
            continue;
        }
        let scale = lambda.abs().sqrt();
        let v = vectors.column(i);
        let mut k = zeros(d, d);
        for row in 0..d {
            for col in 0..d {
                k[(row, col)] = v[row * d + col] * Complex64::new(scale, 0.0);
            }
        }
        ops.push((lambda.signum(), k));
    }
    SignedKrausMap::new(ops)
}

/// A map stored as its transfer matrix (column-stacking convention).
/// The natural output form for intermediate-map extraction.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    dim: usize,
    m: CMat,
}

impl TransferMatrix {
    pub fn new(dim: usize, m: CMat) -> Self {
        assert_eq!(m.nrows(), dim * dim);
        assert_eq!(m.ncols(), dim * dim);
        Self { dim, m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            m: identity(dim * dim),
        }
    }

    /// Apply on a density matrix via vec/unvec.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        let d = self.dim;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(QecError::DimensionMismatch {
                expected: d,
                got: rho.nrows(),
            });
        }
        let mut v = nalgebra::DVector::<Complex64>::zeros(d * d);
        for c in 0..d {
            for r in 0..d {
                v[r + c * d] = rho[(r, c)];
            }
        }
        let w = &self.m * v;
        let mut out = zeros(d, d);
        for c in 0..d {
            for r in 0..d {
                out[(r, c)] = w[r + c * d];
            }
        }
        Ok(out)
    }

    /// Choi matrix via the reshuffle chi[i*d+k, j*d+l] = T[i+j*d, k+l*d].
    pub fn to_choi(&self) -> CMat {
        let d = self.dim;
        let mut chi = zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        chi[(i * d + k, j * d + l)] = self.m[(i + j * d, k + l * d)];
                    }
                }
            }
        }
        chi
    }

    /// ||T acting on I keeping trace|| deviation: trace preservation means
    /// vec(I)^dag T = vec(I)^dag; returns the max-norm of the defect.
    pub fn tp_residual(&self) -> f64 {
        let d = self.dim;
        let mut tr_row = nalgebra::DVector::<Complex64>::zeros(d * d);
        for r in 0..d {
            tr_row[r + r * d] = ONE;
        }
        let lhs = self.m.ad_mul(&CMat::from_column_slice(d * d, 1, tr_row.as_slice()));
        let mut worst = 0.0f64;
        for idx in 0..d * d {
            let want = if idx % d == idx / d { ONE } else { ZERO };
            worst = worst.max((lhs[(idx, 0)].conj() - want).norm());
        }
        worst
    }

    /// Deviation from Hermiticity preservation (equals the Hermiticity
    /// residual of the Choi matrix).
    pub fn hermiticity_residual(&self) -> f64 {
        let chi = self.to_choi();
        max_diff(&chi, &chi.adjoint())
    }
}

/// Intermediate map E(t2, t1) = T(t2) T(t1)^{-1} between two full maps from
/// a common origin. Errors with `SingularMap` when T(t1) is not invertible
/// (smallest singular value <= tol), e.g. at gamma(t1) = 1 exactly.
pub fn intermediate_map(
    full_t2: &SignedKrausMap,
    full_t1: &SignedKrausMap,
    tol: f64,
) -> Result<TransferMatrix> {
    if full_t1.dim_in() != full_t2.dim_in() {
        return Err(QecError::DimensionMismatch {
            expected: full_t2.dim_in(),
            got: full_t1.dim_in(),
        });
    }
    let t2 = full_t2.to_transfer();
    let t1 = full_t1.to_transfer();
    let svd = t1.m.clone().svd(true, true);
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if sigma_min <= tol {
        return Err(QecError::SingularMap { sigma_min, tol });
    }
    let inv = svd
        .pseudo_inverse(0.0)
        .expect("pseudo-inverse of a nonsingular matrix");
    Ok(TransferMatrix {
        dim: full_t1.dim_in(),
        m: &t2.m * inv,
    })
}

/// CP test on a Hermitian Choi matrix: flag = (min eigenvalue >= -tol).
/// Returns the minimum eigenvalue for reporting.
pub fn is_cp_from_choi(choi: &CMat, tol: f64) -> Result<(bool, f64)> {
    let (values, _) = hermitian_eig(choi, 1e-8)?;
    let min_eig = values.last().copied().unwrap_or(0.0);
    Ok((min_eig >= -tol, min_eig))
}

/// CP test on a signed Kraus map via its Choi matrix.
pub fn is_cp(map: &SignedKrausMap, tol: f64) -> Result<(bool, f64)> {
    is_cp_from_choi(&map.to_choi(), tol)
}

/// Export a Choi matrix as CSV: header "# choi dim=<d>", then row-major rows
/// of interleaved real,imag entries.
pub fn choi_to_csv(choi: &CMat) -> String {
    let n = choi.nrows();
    let d = (n as f64).sqrt().round() as usize;
    let mut out = format!("# choi dim={d}\n");
    for r in 0..n {
        let row: Vec<String> = (0..n)
            .flat_map(|c| {
                let z = choi[(r, c)];
                [format!("{:.12e}", z.re), format!("{:.12e}", z.im)]
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse a Choi matrix from the CSV format written by `choi_to_csv`.
pub fn choi_from_csv(text: &str) -> Result<CMat> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| QecError::Config("empty choi CSV".into()))?;
    let d: usize = header
        .trim()
        .strip_prefix("# choi dim=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| QecError::Config(format!("bad choi CSV header: {header:?}")))?;
    let n = d * d;
    let mut chi = zeros(n, n);
    for (r, line) in lines.enumerate() {
        if r >= n {
            return Err(QecError::Config("too many rows in choi CSV".into()));
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| QecError::Config(format!("bad choi CSV number: {e}")))?;
        if vals.len() != 2 * n {
            return Err(QecError::Config(format!(
                "choi CSV row {r} has {} values, expected {}",
                vals.len(),
                2 * n
            )));
        }
        for c in 0..n {
            chi[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    Ok(chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_models::ad_kraus;
    use crate::operator_algebra::{basis_state, outer, max_norm};

    fn ad(gamma: f64) -> SignedKrausMap {
        ad_kraus(gamma).unwrap()
    }

    #[test]
    fn apply_identity_and_full_damping() {
        let rho = outer(&basis_state(2, 1), &basis_state(2, 1));
        let id = SignedKrausMap::identity(2);
        assert!(max_diff(&id.apply(&rho).unwrap(), &rho) < 1e-15);
        let out = ad(1.0).apply(&rho).unwrap();
        let want = outer(&basis_state(2, 0), &basis_state(2, 0));
        assert!(max_diff(&out, &want) < 1e-15);
    }

    #[test]
    fn apply_on_plus_state_offdiagonal() {
        // AD(0.4) on |+><+|: off-diagonal becomes sqrt(0.6)/2
        let mut plus = nalgebra::DVector::zeros(2);
        plus[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        plus[1] = plus[0];
        let rho = outer(&plus, &plus);
        let out = ad(0.4).apply(&rho).unwrap();
        assert!((out[(0, 1)].re - 0.6f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let rho = identity(4);
        assert!(matches!(
            ad(0.2).apply(&rho),
            Err(QecError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn choi_of_identity_is_bell() {
        let chi = SignedKrausMap::identity(2).to_choi();
        let (vals, _) = hermitian_eig(&chi, 1e-12).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12);
        for v in &vals[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn choi_of_ad_is_psd_with_trace_dim() {
        for gamma in [0.0, 0.36, 0.7, 1.0] {
            let chi = ad(gamma).to_choi();
            let (flag, min_eig) = is_cp_from_choi(&chi, 1e-12).unwrap();
            assert!(flag, "gamma={gamma} min_eig={min_eig}");
            let tr: Complex64 = (0..4).map(|i| chi[(i, i)]).sum();
            assert!((tr.re - 2.0).abs() < 1e-12);
        }
        // frozen spectrum at gamma = 0.36: {1.64, 0.36, 0, 0}
        let (vals, _) = hermitian_eig(&ad(0.36).to_choi(), 1e-12).unwrap();
        assert!((vals[0] - 1.64).abs() < 1e-12);
        assert!((vals[1] - 0.36).abs() < 1e-12);
        assert!(vals[2].abs() < 1e-12 && vals[3].abs() < 1e-12);
    }

    #[test]
    fn choi_round_trip_preserves_action() {
        let m = ad(0.3);
        let back = choi_to_signed_kraus(&m.to_choi(), KRAUS_PRUNE_TOL).unwrap();
        assert_eq!(back.num_ops(), 2);
        assert!(back.is_all_positive());
        assert!(max_diff(back.to_transfer().matrix(), m.to_transfer().matrix()) < 1e-10);
    }

    #[test]
    fn inverse_phase_flip_is_signed() {
        // phase flip p = 0.2: rho -> (1-p) rho + p Z rho Z; its inverse has
        // coefficients a = (1-p)/(1-2p), b = -p/(1-2p).
        let p: f64 = 0.2;
        let a = (1.0 - p) / (1.0 - 2.0 * p);
        let b = -p / (1.0 - 2.0 * p);
        let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let inv = SignedKrausMap::new(vec![
            (1.0, identity(2).scale(a.sqrt())),
            (-1.0, z.scale((-b).sqrt())),
        ])
        .unwrap();
        // verified against the forward map: composing gives the identity
        let pf = SignedKrausMap::new(vec![
            (1.0, identity(2).scale((1.0 - p).sqrt())),
            (1.0, z.scale(p.sqrt())),
        ])
        .unwrap();
        let comp = inv.compose(&pf).unwrap();
        assert!(max_diff(
            comp.to_transfer().matrix(),
            TransferMatrix::identity(2).matrix()
        ) < 1e-12);
        // its Choi is indefinite and the extracted signs are {+1, -1}
        let (flag, min_eig) = is_cp(&inv, 1e-12).unwrap();
        assert!(!flag && min_eig < -1e-6);
        let extracted = choi_to_signed_kraus(&inv.to_choi(), KRAUS_PRUNE_TOL).unwrap();
        let mut signs: Vec<f64> = extracted.ops().iter().map(|(s, _)| *s).collect();
        signs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(signs, vec![-1.0, 1.0]);
        // round trip of a signed map
        assert!(max_diff(
            extracted.to_transfer().matrix(),
            inv.to_transfer().matrix()
        ) < 1e-8);
    }

    #[test]
    fn compose_semigroup_law() {
        // 1 - gamma = (1 - g1)(1 - g2')
        let g1 = 0.3;
        let g2p = 0.25;
        let gamma = 1.0 - (1.0 - g1) * (1.0 - g2p);
        let comp = ad(g2p).compose(&ad(g1)).unwrap();
        assert!(max_diff(comp.to_transfer().matrix(), ad(gamma).to_transfer().matrix()) < 1e-12);
        assert!(comp.tp_residual() < 1e-12);
    }

    #[test]
    fn compose_identity_acts_trivially() {
        let m = ad(0.4);
        let c = SignedKrausMap::identity(2).compose(&m).unwrap();
        assert!(max_diff(c.to_transfer().matrix(), m.to_transfer().matrix()) < 1e-14);
    }

    #[test]
    fn tensor_power_counts_and_populations() {
        let m2 = ad(0.5).tensor_power(2, TENSOR_POWER_CAP).unwrap();
        assert_eq!(m2.num_ops(), 4);
        // population of |00> from |11> is gamma^2
        let rho = outer(&basis_state(4, 3), &basis_state(4, 3));
        let out = m2.apply(&rho).unwrap();
        assert!((out[(0, 0)].re - 0.25).abs() < 1e-14);

        let m5 = ad(0.37).tensor_power(5, TENSOR_POWER_CAP).unwrap();
        assert_eq!(m5.num_ops(), 32);
        assert!(m5.tp_residual() < 1e-8);
    }

    #[test]
    fn tensor_power_cap_enforced() {
        assert!(matches!(
            ad(0.5).tensor_power(5, 16),
            Err(QecError::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn transfer_matches_apply() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let m = ad(0.61);
        let t = m.to_transfer();
        for _ in 0..5 {
            let mut a = zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    a[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let rho = (&a + a.adjoint()).scale(0.5);
            assert!(max_diff(&t.apply(&rho).unwrap(), &m.apply(&rho).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn intermediate_map_same_time_is_identity() {
        let m = ad(0.4);
        let t = intermediate_map(&m, &m, 1e-12).unwrap();
        assert!(max_diff(t.matrix(), TransferMatrix::identity(2).matrix()) < 1e-10);
        assert!(t.tp_residual() < 1e-10);
    }

    #[test]
    fn intermediate_map_singular_at_full_damping() {
        assert!(matches!(
            intermediate_map(&ad(0.9), &ad(1.0), 1e-12),
            Err(QecError::SingularMap { .. })
        ));
    }

    #[test]
    fn choi_csv_round_trip() {
        let chi = ad(0.3).to_choi();
        let text = choi_to_csv(&chi);
        assert!(text.starts_with("# choi dim=2\n"));
        let back = choi_from_csv(&text).unwrap();
        assert!(max_diff(&back, &chi) < 1e-10 * max_norm(&chi));
    }
}
