//! Dirichlet sine eigenbasis on the box `(0, π)^d`.
//!
//! Eigenfunctions are tensor products `φ_k(x) = Π_i √(2/π) sin(k_i x_i)` with
//! eigenvalues `λ_k = Σ_i k_i²`. Modal vectors are stored lexicographically in
//! `(k_1, …, k_d)` with `k_1` slowest. Nonlinear terms are evaluated by
//! collocation on a DST-I grid with `M = oversample · N` interior nodes per
//! axis, `x_j = jπ/(M+1)`, and uniform weights `π/(M+1)`. The rule integrates
//! `cos(m x)` exactly for `|m| < 2(M+1)`, so with `oversample ≥ 3` every
//! product of six `N`-mode sine functions is integrated without aliasing.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_OVERSAMPLE: usize = 3;
pub const MAX_DIM: usize = 3;

/// Serializable identity of a basis; enough to rebuild it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDescriptor {
    pub dim: usize,
    pub modes_per_axis: usize,
    #[serde(default = "default_oversample")]
    pub quad_oversample: usize,
}

fn default_oversample() -> usize {
    MIN_OVERSAMPLE
}

impl BasisDescriptor {
    pub fn build(&self) -> Result<SpectralBasis> {
        SpectralBasis::new(self.dim, self.modes_per_axis, self.quad_oversample)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    dim: usize,
    modes: usize,
    oversample: usize,
    grid: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weight: f64,
    /// `grid × modes`, row-major: `synth[j * modes + k] = φ_{k+1}(x_j)` in 1D.
    synth: Vec<f64>,
    /// `modes × grid`: quadrature-weighted transpose of `synth`.
    analysis: Vec<f64>,
    /// `modes² × grid`: `w φ_j(x_q) φ_k(x_q)` rows indexed by `j * modes + k`.
    pair_table: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(dim: usize, modes_per_axis: usize, quad_oversample: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidBasis(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if modes_per_axis == 0 {
            return Err(Error::InvalidBasis("modes_per_axis must be >= 1".into()));
        }
        if quad_oversample < MIN_OVERSAMPLE {
            return Err(Error::InvalidBasis(format!(
                "quad_oversample must be >= {MIN_OVERSAMPLE} for alias-free quintic products (got {quad_oversample})"
            )));
        }
        let n = modes_per_axis;
        let m = quad_oversample * n;
        let h = PI / (m as f64 + 1.0);
        let nodes: Vec<f64> = (1..=m).map(|j| j as f64 * h).collect();
        let norm = (2.0 / PI).sqrt();
        let mut synth = vec![0.0; m * n];
        for (j, &x) in nodes.iter().enumerate() {
            for k in 0..n {
                synth[j * n + k] = norm * ((k + 1) as f64 * x).sin();
            }
        }
        let mut analysis = vec![0.0; n * m];
        for j in 0..m {
            for k in 0..n {
                analysis[k * m + j] = h * synth[j * n + k];
            }
        }
        let mut pair_table = vec![0.0; n * n * m];
        for a in 0..n {
            for b in 0..n {
                let row = (a * n + b) * m;
                for q in 0..m {
                    pair_table[row + q] = h * synth[q * n + a] * synth[q * n + b];
                }
            }
        }

        let len = n.pow(dim as u32);
        let eigenvalues = (0..len)
            .map(|i| {
                multi_index(i, dim, n)
                    .iter()
                    .take(dim)
                    .map(|&k| (k * k) as f64)
                    .sum()
            })
            .collect();

        Ok(Self {
            dim,
            modes: n,
            oversample: quad_oversample,
            grid: m,
            eigenvalues,
            nodes,
            weight: h,
            synth,
            analysis,
            pair_table,
        })
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            dim: self.dim,
            modes_per_axis: self.modes,
            quad_oversample: self.oversample,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes
    }

    pub fn quad_oversample(&self) -> usize {
        self.oversample
    }

    /// Number of modal coefficients, `N^d`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Quadrature nodes per axis, `M`.
    pub fn grid_per_axis(&self) -> usize {
        self.grid
    }

    /// Total number of quadrature nodes, `M^d`.
    pub fn grid_len(&self) -> usize {
        self.grid.pow(self.dim as u32)
    }

    /// Eigenvalues in modal storage order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The spectrum sorted nondecreasing.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut ev = self.eigenvalues.clone();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue; equals `d` on the unit-frequency box.
    pub fn lambda1(&self) -> f64 {
        self.dim as f64
    }

    /// `|Ω| = π^d`.
    pub fn domain_volume(&self) -> f64 {
        PI.powi(self.dim as i32)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// One-dimensional quadrature weight `π/(M+1)`.
    pub fn weight_1d(&self) -> f64 {
        self.weight
    }

    /// Weight of a single tensor-grid cell, `(π/(M+1))^d`.
    pub fn cell_weight(&self) -> f64 {
        self.weight.powi(self.dim as i32)
    }

    /// Multi-index `(k_1, …, k_d)` of modal slot `i`; unused axes are zero.
    pub fn multi_index(&self, i: usize) -> [usize; MAX_DIM] {
        multi_index(i, self.dim, self.modes)
    }

    /// Storage slot of a multi-index (entries 1-based).
    pub fn index_of(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.dim || k.iter().any(|&ki| ki == 0 || ki > self.modes) {
            return None;
        }
        Some(k.iter().fold(0, |acc, &ki| acc * self.modes + (ki - 1)))
    }

    /// Slot of the principal mode `(1, …, 1)`.
    pub fn principal_index(&self) -> usize {
        0
    }

    /// Unit modal vector at slot `i`.
    pub fn unit(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.len()];
        e[i] = 1.0;
        e
    }

    /// Physical coordinates of grid point `q` (unused axes are zero).
    pub fn grid_point(&self, q: usize) -> [f64; MAX_DIM] {
        let idx = multi_index(q, self.dim, self.grid);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.nodes[idx[a] - 1];
        }
        x
    }

    /// Samples a function of position on the quadrature grid.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.grid_len())
            .map(|q| {
                let x = self.grid_point(q);
                f(&x[..self.dim])
            })
            .collect()
    }

    fn check_modal(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found: c.len(),
            });
        }
        Ok(())
    }

    fn check_grid(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.grid_len() {
            return Err(Error::SizeMismatch {
                expected: self.grid_len(),
                found: g.len(),
            });
        }
        Ok(())
    }

    /// Evaluates a modal vector at the quadrature nodes.
    pub fn to_physical(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_modal(coeffs)?;
        Ok(self.to_physical_unchecked(coeffs))
    }

    pub(crate) fn to_physical_unchecked(&self, coeffs: &[f64]) -> Vec<f64> {
        apply_axes(coeffs, self.dim, self.modes, self.grid, &self.synth)
    }

    /// Quadrature projection onto the first `N` modes per axis.
    pub fn to_modal(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_grid(values)?;
        Ok(self.to_modal_unchecked(values))
    }

    pub(crate) fn to_modal_unchecked(&self, values: &[f64]) -> Vec<f64> {
        apply_axes(values, self.dim, self.grid, self.modes, &self.analysis)
    }

    /// `∫_Ω w` by the tensor quadrature rule.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_grid(values)?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        self.cell_weight() * values.iter().sum::<f64>()
    }

    /// `∫_Ω |w|^p`, i.e. `‖w‖_p^p`.
    pub fn lp_norm_pow(&self, values: &[f64], p: f64) -> Result<f64> {
        self.check_grid(values)?;
        let s: f64 = if p == 2.0 {
            values.iter().map(|x| x * x).sum()
        } else if p == 6.0 {
            values.iter().map(|x| (x * x).powi(3)).sum()
        } else {
            values.iter().map(|x| x.abs().powf(p)).sum()
        };
        Ok(self.cell_weight() * s)
    }

    /// `‖w‖_{L^p(Ω)}`.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> Result<f64> {
        Ok(self.lp_norm_pow(values, p)?.powf(1.0 / p))
    }

    /// Galerkin matrix `G_{jk} = ∫ c φ_j φ_k` for a coefficient field `c` on the grid.
    ///
    /// Uses the separable pair table, so the cost is `O(M^d N^2 + N^{2d} M)`
    /// instead of one projection per column.
    pub fn galerkin_matrix(&self, coeff_grid: &[f64]) -> Result<DMatrix<f64>> {
        self.check_grid(coeff_grid)?;
        Ok(self.galerkin_matrix_unchecked(coeff_grid))
    }

    pub(crate) fn galerkin_matrix_unchecked(&self, coeff_grid: &[f64]) -> DMatrix<f64> {
        let n = self.modes;
        let nn = n * n;
        let d = self.dim;
        let tensor = apply_axes(coeff_grid, d, self.grid, nn, &self.pair_table);
        let len = self.len();
        let mut out = DMatrix::zeros(len, len);
        for (t, &val) in tensor.iter().enumerate() {
            // t = Σ_a r_a (N²)^{d-1-a}, r_a = j_a N + k_a
            let mut rem = t;
            let mut j = 0;
            let mut k = 0;
            let mut scale = 1;
            for _ in 0..d {
                let r = rem % nn;
                rem /= nn;
                j += (r / n) * scale;
                k += (r % n) * scale;
                scale *= n;
            }
            out[(j, k)] = val;
        }
        out
    }

    /// `(‖∇u‖², ‖v‖², ‖U‖²_H, ‖Δu‖²)` from the orthonormal modal identities.
    pub fn h_norms(&self, state: &SpectralState) -> Result<HNorms> {
        state.check(self)?;
        let mut grad = 0.0;
        let mut lap = 0.0;
        for (&l, &u) in self.eigenvalues.iter().zip(&state.u) {
            grad += l * u * u;
            lap += l * l * u * u;
        }
        let vel: f64 = state.v.iter().map(|x| x * x).sum();
        Ok(HNorms {
            grad_sq: grad,
            vel_sq: vel,
            energy_sq: grad + vel,
            lap_sq: lap,
        })
    }

    /// Squared `H`-norm distance between two states.
    pub fn h_distance_sq(&self, a: &SpectralState, b: &SpectralState) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len() {
            let du = a.u[i] - b.u[i];
            let dv = a.v[i] - b.v[i];
            s += self.eigenvalues[i] * du * du + dv * dv;
        }
        s
    }

    /// Coordinates `(√λ u, v)` in which the Euclidean norm is the `H` norm.
    pub fn h_embedding(&self, state: &SpectralState) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        out.extend(
            self.eigenvalues
                .iter()
                .zip(&state.u)
                .map(|(l, u)| l.sqrt() * u),
        );
        out.extend_from_slice(&state.v);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HNorms {
    pub grad_sq: f64,
    pub vel_sq: f64,
    pub energy_sq: f64,
    pub lap_sq: f64,
}

/// Modal pair `U = (u, u_t)` at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
}

impl SpectralState {
    pub fn zeros(basis: &SpectralBasis) -> Self {
        Self {
            u: vec![0.0; basis.len()],
            v: vec![0.0; basis.len()],
            time: 0.0,
        }
    }

    pub fn new(basis: &SpectralBasis, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let s = Self { u, v, time: 0.0 };
        s.check(basis)?;
        Ok(s)
    }

    /// Validates index sets against `basis` and rejects non-finite entries.
    pub fn check(&self, basis: &SpectralBasis) -> Result<()> {
        for c in [&self.u, &self.v] {
            if c.len() != basis.len() {
                return Err(Error::SizeMismatch {
                    expected: basis.len(),
                    found: c.len(),
                });
            }
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(Error::NonFinite("state time".into()));
        }
        if self.u.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("state at t = {}", self.time)));
        }
        Ok(())
    }
}

fn multi_index(i: usize, dim: usize, n: usize) -> [usize; MAX_DIM] {
    let mut idx = [0usize; MAX_DIM];
    let mut rem = i;
    for a in (0..dim).rev() {
        idx[a] = rem % n + 1;
        rem /= n;
    }
    idx
}

/// Applies a 1D `out_n × in_n` row-major table along every axis of a
/// `d`-dimensional tensor with `in_n` entries per axis (axis 0 slowest).
fn apply_axes(input: &[f64], dim: usize, in_n: usize, out_n: usize, table: &[f64]) -> Vec<f64> {
    let mut cur = input.to_vec();
    let mut shape = vec![in_n; dim];
    for axis in 0..dim {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * out_n * inner];
        for o in 0..outer {
            let src = &cur[o * in_n * inner..(o + 1) * in_n * inner];
            let dst = &mut next[o * out_n * inner..(o + 1) * out_n * inner];
            for j in 0..out_n {
                let row = &table[j * in_n..(j + 1) * in_n];
                let out = &mut dst[j * inner..(j + 1) * inner];
                for (k, &t) in row.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    let s = &src[k * inner..(k + 1) * inner];
                    for (o_i, s_i) in out.iter_mut().zip(s) {
                        *o_i += t * s_i;
                    }
                }
            }
        }
        shape[axis] = out_n;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eigenvalues_1d() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        assert_eq!(b.eigenvalues(), &[1.0, 4.0, 9.0, 16.0]);
        assert_eq!(b.lambda1(), 1.0);
    }

    #[test]
    fn eigenvalues_2d_and_3d() {
        let b = SpectralBasis::new(2, 2, 3).unwrap();
        assert_eq!(b.sorted_eigenvalues(), vec![2.0, 5.0, 5.0, 8.0]);
        assert!(close(b.domain_volume(), PI * PI, 1e-15));
        let b3 = SpectralBasis::new(3, 2, 3).unwrap();
        assert_eq!(b3.eigenvalues()[b3.index_of(&[1, 1, 1]).unwrap()], 3.0);
        assert_eq!(b3.sorted_eigenvalues()[0], 3.0);
        assert_eq!(b3.lambda1(), b3.sorted_eigenvalues()[0]);
    }

    #[test]
    fn lexicographic_order() {
        let b = SpectralBasis::new(2, 3, 3).unwrap();
        assert_eq!(b.multi_index(0), [1, 1, 0]);
        assert_eq!(b.multi_index(1), [1, 2, 0]);
        assert_eq!(b.multi_index(3), [2, 1, 0]);
        assert_eq!(b.index_of(&[3, 2]), Some(7));
        assert_eq!(b.index_of(&[0, 1]), None);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            SpectralBasis::new(4, 4, 3),
            Err(Error::InvalidBasis(_))
        ));
        assert!(matches!(
            SpectralBasis::new(0, 4, 3),
            Err(Error::InvalidBasis(_))
        ));
        assert!(matches!(
            SpectralBasis::new(1, 4, 2),
            Err(Error::InvalidBasis(_))
        ));
        assert!(SpectralBasis::new(1, 0, 3).is_err());
    }

    #[test]
    fn unit_mode_samples_sine() {
        let b = SpectralBasis::new(1, 5, 3).unwrap();
        let g = b.to_physical(&b.unit(0)).unwrap();
        for (x, val) in b.nodes().iter().zip(&g) {
            assert!(close(*val, (2.0 / PI).sqrt() * x.sin(), 1e-14));
        }
    }

    #[test]
    fn orthonormal_under_quadrature() {
        for dim in 1..=3 {
            let b = SpectralBasis::new(dim, 3, 3).unwrap();
            let gm = b.galerkin_matrix(&vec![1.0; b.grid_len()]).unwrap();
            for i in 0..b.len() {
                for j in 0..b.len() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((gm[(i, j)] - expect).abs() < 1e-12, "dim {dim} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        assert!(matches!(
            b.to_physical(&[1.0; 3]),
            Err(Error::SizeMismatch { expected: 4, found: 3 })
        ));
        assert!(b.to_modal(&[1.0; 5]).is_err());
    }

    #[test]
    fn lp_norms_of_sine() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        let g = b.sample(|x| x[0].sin());
        assert!(close(b.lp_norm_pow(&g, 2.0).unwrap(), PI / 2.0, 1e-13));
        assert!(close(b.lp_norm_pow(&g, 6.0).unwrap(), 5.0 * PI / 16.0, 1e-13));
        assert!(close(b.lp_norm(&g, 2.0).unwrap(), (PI / 2.0).sqrt(), 1e-13));
        let z = vec![0.0; b.grid_len()];
        for p in [2.0, 3.0, 6.0] {
            assert_eq!(b.lp_norm(&z, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn h_norm_identities() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        let s = SpectralState::new(&b, b.unit(0), vec![0.0; 4]).unwrap();
        let n = b.h_norms(&s).unwrap();
        assert_eq!((n.energy_sq, n.lap_sq), (1.0, 1.0));
        let s = SpectralState::new(&b, vec![0.0; 4], b.unit(0)).unwrap();
        assert_eq!(b.h_norms(&s).unwrap().energy_sq, 1.0);
        let s = SpectralState::new(&b, b.unit(1), vec![0.0; 4]).unwrap();
        let n = b.h_norms(&s).unwrap();
        assert_eq!((n.grad_sq, n.lap_sq), (4.0, 16.0));
    }

    #[test]
    fn non_finite_state_rejected() {
        let b = SpectralBasis::new(1, 2, 3).unwrap();
        let s = SpectralState::new(&b, vec![f64::NAN, 0.0], vec![0.0; 2]);
        assert!(matches!(s, Err(Error::NonFinite(_))));
    }
}
