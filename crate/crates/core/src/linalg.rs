//! Small dense 2×2 complex algebra for the qubit.
//!
//! Basis ordering is `(|e⟩, |g⟩)`: index 0 is the excited state.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

/// σ_z = |e⟩⟨e| − |g⟩⟨g|
pub const SIGMA_Z: Mat2 = Mat2([[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]]);
/// σ₊ = |e⟩⟨g|
pub const SIGMA_PLUS: Mat2 = Mat2([[ZERO, ONE], [ZERO, ZERO]]);
/// σ₋ = |g⟩⟨e|
pub const SIGMA_MINUS: Mat2 = Mat2([[ZERO, ZERO], [ONE, ZERO]]);
pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

/// Eigen-decomposition of a Hermitian 2×2 matrix, eigenvalues ascending.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen {
    pub values: [f64; 2],
    /// `vectors[k]` is the normalized eigenvector for `values[k]`.
    pub vectors: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub fn zeros() -> Self {
        Mat2([[ZERO; 2]; 2])
    }

    pub fn from_real_diag(a: f64, d: f64) -> Self {
        Mat2([
            [Complex64::new(a, 0.0), ZERO],
            [ZERO, Complex64::new(d, 0.0)],
        ])
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0[r][c]
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Largest absolute deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.0;
        let off = (m[0][1] - m[1][0].conj()).norm();
        off.max(m[0][0].im.abs()).max(m[1][1].im.abs())
    }

    /// `(X + X†)/2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.dagger()).scale_re(0.5)
    }

    /// Real trace of `self · other`; both assumed Hermitian.
    pub fn trace_product(&self, other: &Mat2) -> f64 {
        let a = &self.0;
        let b = &other.0;
        (a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigen-decomposition of the Hermitian part of `self`.
    ///
    /// When the two eigenvalues coincide the eigenbasis is `(|e⟩, |g⟩)` in
    /// order of descending ⟨σ_z⟩, i.e. `vectors[0] = |e⟩`.
    pub fn hermitian_eigen(&self) -> HermitianEigen {
        let h = self.hermitian_part();
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let b = h.0[0][1];
        let mean = 0.5 * (a + d);
        let half_diff = 0.5 * (a - d);
        let radius = half_diff.hypot(b.norm());
        let values = [mean - radius, mean + radius];

        if radius == 0.0 {
            return HermitianEigen {
                values,
                vectors: [[ONE, ZERO], [ZERO, ONE]],
            };
        }
        let vector = |lambda: f64| {
            // Either row of (H − λ) yields a null vector; take the longer one.
            let first = [b, Complex64::new(lambda - a, 0.0)];
            let second = [Complex64::new(lambda - d, 0.0), b.conj()];
            let norm1 = first[0].norm_sqr() + first[1].norm_sqr();
            let norm2 = second[0].norm_sqr() + second[1].norm_sqr();
            let (v, n) = if norm1 >= norm2 {
                (first, norm1)
            } else {
                (second, norm2)
            };
            let n = n.sqrt();
            [v[0] / n, v[1] / n]
        };
        HermitianEigen {
            values,
            vectors: [vector(values[0]), vector(values[1])],
        }
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[Complex64; 2], v: &[Complex64; 2]) -> Self {
        Mat2([
            [u[0] * v[0].conj(), u[0] * v[1].conj()],
            [u[1] * v[0].conj(), u[1] * v[1].conj()],
        ])
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let h = self.hermitian_part();
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let mean = 0.5 * (a + d);
        let radius = (0.5 * (a - d)).hypot(h.0[0][1].norm());
        [mean - radius, mean + radius]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Trace distance ½‖a − b‖₁ between Hermitian 2×2 matrices.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    let [l0, l1] = (*a - *b).hermitian_eigenvalues();
    0.5 * (l0.abs() + l1.abs())
}
