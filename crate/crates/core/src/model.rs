//! Hamiltonians of the sender–bus–receiver chain.
//!
//! Basis conventions: the zero/one-excitation sector is ordered
//! `[|0⟩, |1⟩, …, |N⟩]` (vacuum, then one up-spin at site `n`). The Zeno
//! subspace is ordered `{|0⟩, |1⟩, |φ₃⟩, |N⟩}` with `|φ₃⟩` the uniform bulk
//! state. In the full `2^N` space site `n` is bit `N − n` of the basis index
//! (site 1 is the most significant bit), a set bit is `|↑⟩` and
//! `σ_z|↑⟩ = +|↑⟩`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::{Error, Result, C64};

/// Largest chain handled by the dense `2^N` oracle.
pub const MAX_FULL_SPIN_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainModel {
    n: usize,
    j_b: f64,
}

impl ChainModel {
    pub fn new(n: usize, j_b: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!("chain length must be >= 3, got {n}")));
        }
        if !(j_b > 0.0) || !j_b.is_finite() {
            return Err(Error::domain(format!("bus coupling must be positive, got {j_b}")));
        }
        Ok(Self { n, j_b })
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn bus_coupling(&self) -> f64 {
        self.j_b
    }

    /// Dimension of the zero/one-excitation sector.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// `(N − 3) J_B`, the bus eigenvalue of the Zeno subspace.
    pub fn zeno_energy(&self) -> f64 {
        (self.n as f64 - 3.0) * self.j_b
    }
}

/// `H_N = H_0(J_S, J_R) + H_B` restricted to the zero/one-excitation sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceHamiltonian {
    pub h0: DMatrix<f64>,
    pub hb: DMatrix<f64>,
}

impl SubspaceHamiltonian {
    pub fn total(&self) -> DMatrix<f64> {
        &self.h0 + &self.hb
    }
}

/// Boundary part `H_0` and bus part `H_B` in the sector basis.
///
/// For `N = 3` there is no interior bus; the three-site matrix is returned as
/// `h0` and `hb` is zero.
pub fn single_excitation_hamiltonian(model: &ChainModel, j_s: f64, j_r: f64) -> Result<SubspaceHamiltonian> {
    let n = model.n;
    let d = n + 1;
    let mut h0 = DMatrix::zeros(d, d);
    let mut hb = DMatrix::zeros(d, d);
    let sum = j_r + j_s;

    if n == 3 {
        h0[(0, 0)] = sum;
        h0[(1, 1)] = j_r - j_s;
        h0[(2, 2)] = -sum;
        h0[(3, 3)] = j_s - j_r;
        h0[(1, 2)] = 2.0 * j_s;
        h0[(2, 1)] = 2.0 * j_s;
        h0[(2, 3)] = 2.0 * j_r;
        h0[(3, 2)] = 2.0 * j_r;
        return Ok(SubspaceHamiltonian { h0, hb });
    }

    h0[(0, 0)] = sum;
    for k in 3..=n - 2 {
        h0[(k, k)] = sum;
    }
    h0[(1, 1)] = j_r - j_s;
    h0[(2, 2)] = j_r - j_s;
    h0[(1, 2)] = 2.0 * j_s;
    h0[(2, 1)] = 2.0 * j_s;
    h0[(n - 1, n - 1)] = j_s - j_r;
    h0[(n, n)] = j_s - j_r;
    h0[(n - 1, n)] = 2.0 * j_r;
    h0[(n, n - 1)] = 2.0 * j_r;

    let nf = n as f64;
    let jb = model.j_b;
    for k in [0, 1, n] {
        hb[(k, k)] = (nf - 3.0) * jb;
    }
    for k in 3..=n - 2 {
        hb[(k, k)] = (nf - 7.0) * jb;
    }
    hb[(2, 2)] = (nf - 5.0) * jb;
    hb[(n - 1, n - 1)] = (nf - 5.0) * jb;
    for k in 2..n - 1 {
        hb[(k, k + 1)] = 2.0 * jb;
        hb[(k + 1, k)] = 2.0 * jb;
    }
    Ok(SubspaceHamiltonian { h0, hb })
}

/// The mirror-symmetric tridiagonal matrix whose spectrum fixes the bus
/// eigenvalues: ones on the off-diagonals and at both diagonal corners.
pub fn mirror_matrix(size: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(size, size);
    for k in 0..size.saturating_sub(1) {
        m[(k, k + 1)] = 1.0;
        m[(k + 1, k)] = 1.0;
    }
    if size > 0 {
        m[(0, 0)] += 1.0;
        m[(size - 1, size - 1)] += 1.0;
    }
    m
}

/// Uniform superposition of the bulk single-excitation states `|2⟩ … |N−1⟩`.
pub fn bulk_state(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n + 1);
    let amp = 1.0 / ((n - 2) as f64).sqrt();
    for k in 2..n {
        v[k] = amp;
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSpectrum {
    /// `ε_p^B = 4 J_B cos[(p−1)π/(N−2)] + (N−7) J_B`, `p = 1 … N−2`.
    pub eigenvalues: Vec<f64>,
    pub phi3: DVector<f64>,
}

pub fn bus_spectrum(model: &ChainModel) -> Result<BusSpectrum> {
    let n = model.n;
    if n < 4 {
        return Err(Error::domain(format!("bus spectrum needs N >= 4, got {n}")));
    }
    let nf = n as f64;
    let jb = model.j_b;
    let eigenvalues = (1..=n - 2)
        .map(|p| {
            if p == 1 {
                // cos(0) = 1 exactly; keep ε₁ = (N−3)J_B free of rounding.
                (nf - 3.0) * jb
            } else {
                4.0 * jb * ((p - 1) as f64 * PI / (nf - 2.0)).cos() + (nf - 7.0) * jb
            }
        })
        .collect();
    Ok(BusSpectrum {
        eigenvalues,
        phi3: bulk_state(n),
    })
}

/// `(N+1) × 4` isometry whose columns are `|0⟩, |1⟩, |φ₃⟩, |N⟩`.
pub fn zeno_basis(n: usize) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(n + 1, 4);
    v[(0, 0)] = 1.0;
    v[(1, 1)] = 1.0;
    v.set_column(2, &bulk_state(n));
    v[(n, 3)] = 1.0;
    v
}

/// Projector onto the Zeno subspace.
pub fn zeno_projector(n: usize) -> DMatrix<f64> {
    let v = zeno_basis(n);
    &v * v.transpose()
}

/// Effective Zeno-subspace Hamiltonian in the basis `{|0⟩, |1⟩, |φ₃⟩, |N⟩}`,
/// without the constant `(N−3) J_B` term.
pub fn zeno_effective_hamiltonian(model: &ChainModel, j_s: f64, j_r: f64) -> Matrix4<f64> {
    let nf = model.n as f64;
    let sum = j_r + j_s;
    let root = (nf - 2.0).sqrt();
    let a = 2.0 * j_s / root;
    let b = 2.0 * j_r / root;
    Matrix4::new(
        sum, 0.0, 0.0, 0.0, //
        0.0, j_r - j_s, a, 0.0, //
        0.0, a, (nf - 4.0) * sum / (nf - 2.0), b, //
        0.0, 0.0, b, j_s - j_r,
    )
}

/// Effective Hamiltonian lifted back into the `(N+1)`-dimensional sector.
pub fn embedded_effective_hamiltonian(model: &ChainModel, j_s: f64, j_r: f64) -> DMatrix<f64> {
    let v = zeno_basis(model.n);
    let h = zeno_effective_hamiltonian(model, j_s, j_r);
    let h = DMatrix::from_fn(4, 4, |i, j| h[(i, j)]);
    &v * h * v.transpose()
}

/// The real orthogonal transform `S_N` that block-diagonalizes `H_eff`.
pub fn sn_transform(n: usize) -> Matrix4<f64> {
    let nf = n as f64;
    let rn = nf.sqrt();
    let r2 = 2f64.sqrt();
    let r2n = (2.0 * nf).sqrt();
    let rm = (nf - 2.0).sqrt();
    Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0 / rn, rm / rn, 1.0 / rn, //
        0.0, 1.0 / r2, 0.0, -1.0 / r2, //
        0.0, rm / r2n, -2.0 / r2n, rm / r2n,
    )
}

/// `S_N H_eff S_N†`.
pub fn rotated_hamiltonian(model: &ChainModel, j_s: f64, j_r: f64) -> Matrix4<f64> {
    let s = sn_transform(model.n);
    s * zeno_effective_hamiltonian(model, j_s, j_r) * s.transpose()
}

/// Two-level drive `(g_x, g_z)` carried by the lower block of the rotated Hamiltonian.
pub fn rotated_drive(n: usize, j_s: f64, j_r: f64) -> (f64, f64) {
    let nf = n as f64;
    ((nf / (nf - 2.0)).sqrt() * (j_r - j_s), (j_r + j_s) / (nf - 2.0))
}

/// Rotated Hamiltonian rebuilt from the Pauli-like operators:
/// `(N−1)(J_R+J_S)/(N−2) · P_upper + g_x σ′_x + g_z σ′_z − (J_R+J_S)/(N−2) · I`.
pub fn rotated_hamiltonian_from_operators(n: usize, j_s: f64, j_r: f64) -> Matrix4<C64> {
    let nf = n as f64;
    let sum = j_r + j_s;
    let (gx, gz) = rotated_drive(n, j_s, j_r);
    let mut upper = Matrix4::<C64>::zeros();
    upper[(0, 0)] = C64::new(1.0, 0.0);
    upper[(1, 1)] = C64::new(1.0, 0.0);
    upper * C64::from((nf - 1.0) * sum / (nf - 2.0))
        + sigma_prime(Pauli::X) * C64::from(gx)
        + sigma_prime(Pauli::Z) * C64::from(gz)
        - Matrix4::<C64>::identity() * C64::from(sum / (nf - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// `σ′_q = blockdiag(0, σ_q)`.
pub fn sigma_prime(q: Pauli) -> Matrix4<C64> {
    let mut m = Matrix4::<C64>::zeros();
    let (one, i) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match q {
        Pauli::X => {
            m[(2, 3)] = one;
            m[(3, 2)] = one;
        }
        Pauli::Y => {
            m[(2, 3)] = -i;
            m[(3, 2)] = i;
        }
        Pauli::Z => {
            m[(2, 2)] = one;
            m[(3, 3)] = -one;
        }
    }
    m
}

/// All Zeno-subspace objects at one coupling pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoFrame {
    pub phi3: DVector<f64>,
    pub p1: DMatrix<f64>,
    pub heff: Matrix4<f64>,
    pub sn: Matrix4<f64>,
    pub he: Matrix4<f64>,
}

impl ZenoFrame {
    pub fn new(model: &ChainModel, j_s: f64, j_r: f64) -> Self {
        let n = model.n;
        let sn = sn_transform(n);
        let heff = zeno_effective_hamiltonian(model, j_s, j_r);
        Self {
            phi3: bulk_state(n),
            p1: zeno_projector(n),
            heff,
            sn,
            he: sn * heff * sn.transpose(),
        }
    }
}

fn bond_terms(n: usize, j_s: f64, j_r: f64, j_b: f64) -> Vec<(usize, usize, f64)> {
    // Bond (a, b) between sites a < b, 1-based.
    let mut bonds = Vec::with_capacity(n - 1);
    bonds.push((1, 2, j_s));
    for j in 2..=n.saturating_sub(2) {
        bonds.push((j, j + 1, j_b));
    }
    bonds.push((n - 1, n, j_r));
    bonds
}

/// Dense `2^N × 2^N` Heisenberg Hamiltonian `Σ J σ⃗_j · σ⃗_{j+1}`.
///
/// `σ⃗_a · σ⃗_b` is `+1` on aligned pairs and maps an anti-aligned pair to
/// `−1` times itself plus `2` times its swap.
pub fn full_spin_hamiltonian(model: &ChainModel, j_s: f64, j_r: f64) -> Result<DMatrix<f64>> {
    let n = model.n;
    if n > MAX_FULL_SPIN_SITES {
        return Err(Error::Size(format!(
            "full spin Hamiltonian limited to N <= {MAX_FULL_SPIN_SITES}, got {n}"
        )));
    }
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    let bonds = bond_terms(n, j_s, j_r, model.j_b);
    for state in 0..dim {
        for &(a, b, j) in &bonds {
            let ma = site_mask(n, a);
            let mb = site_mask(n, b);
            let up_a = state & ma != 0;
            let up_b = state & mb != 0;
            if up_a == up_b {
                h[(state, state)] += j;
            } else {
                h[(state, state)] -= j;
                h[(state ^ ma ^ mb, state)] += 2.0 * j;
            }
        }
    }
    Ok(h)
}

/// Bit mask of site `site` (1-based) in the `2^N` basis index.
#[inline]
pub fn site_mask(n: usize, site: usize) -> usize {
    1usize << (n - site)
}

/// Basis indices of `[|0⟩, |1⟩, …, |N⟩]` inside the `2^N` space.
pub fn sector_indices(n: usize) -> Vec<usize> {
    core::iter::once(0).chain((1..=n).map(|s| site_mask(n, s))).collect()
}

/// Restriction of a `2^N` operator to the zero/one-excitation sector.
pub fn restrict_to_sector(full: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let idx = sector_indices(n);
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])])
}

/// Diagonal of `Σ_n σ_n^z` in the `2^N` basis.
pub fn total_sz(n: usize) -> Vec<f64> {
    (0..1usize << n)
        .map(|s| {
            let up = s.count_ones() as f64;
            up - (n as f64 - up)
        })
        .collect()
}

/// Best constant `c` with `a ≈ b + c·I`, and the remaining max-abs mismatch.
pub fn diagonal_shift(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let d = a.nrows();
    let c = (0..d).map(|k| a[(k, k)] - b[(k, k)]).sum::<f64>() / d as f64;
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let shift = if i == j { c } else { 0.0 };
            worst = worst.max((a[(i, j)] - b[(i, j)] - shift).abs());
        }
    }
    (c, worst)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> ChainModel {
        ChainModel::new(n, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ChainModel::new(2, 1.0).is_err());
        assert!(ChainModel::new(5, 0.0).is_err());
        assert!(ChainModel::new(5, -3.0).is_err());
    }

    #[test]
    fn three_sites_use_the_dedicated_matrix() {
        let h = single_excitation_hamiltonian(&chain(3), 0.3, 0.7).unwrap();
        assert_eq!(h.hb, DMatrix::zeros(4, 4));
        assert_eq!(h.h0[(2, 2)], -1.0);
        assert_eq!(h.h0[(1, 2)], 0.6);
        assert_eq!(h.h0[(2, 3)], 1.4);
    }

    #[test]
    fn zero_couplings_give_zero_boundary_part() {
        for n in 3..9 {
            let h = single_excitation_hamiltonian(&chain(n), 0.0, 0.0).unwrap();
            assert_eq!(h.h0, DMatrix::zeros(n + 1, n + 1));
        }
    }

    #[test]
    fn bus_spectrum_needs_an_interior() {
        assert!(bus_spectrum(&chain(3)).is_err());
        let s = bus_spectrum(&ChainModel::new(7, 2.5).unwrap()).unwrap();
        assert_eq!(s.eigenvalues[0], 4.0 * 2.5);
        assert_eq!(s.eigenvalues.len(), 5);
    }

    #[test]
    fn mirror_matrix_shape() {
        let m = mirror_matrix(4);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(3, 3)], 1.0);
        assert_eq!(m[(1, 1)], 0.0);
        assert_eq!(m[(2, 3)], 1.0);
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn full_spin_size_limit() {
        assert!(matches!(
            full_spin_hamiltonian(&chain(13), 1.0, 1.0),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn sector_indices_follow_site_bits() {
        assert_eq!(sector_indices(4), [0, 8, 4, 2, 1]);
    }

    #[test]
    fn sigma_prime_algebra() {
        let (x, y, z) = (sigma_prime(Pauli::X), sigma_prime(Pauli::Y), sigma_prime(Pauli::Z));
        let comm = x * y - y * x;
        let expected = z * C64::new(0.0, 2.0);
        assert!((comm - expected).norm() < 1e-15);
    }
}
