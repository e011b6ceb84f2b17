use nalgebra::{Matrix3, SymmetricEigen};

use super::{Ppf, PpfError, PSD_TOLERANCE};
use crate::geometry::{OrientedPoint, Point, Vector};

/// Rotation taking the unit vector `n` onto `+z`.
///
/// For `n_z ≥ 0` this is the two-vector alignment `I + [v]ₓ + [v]ₓ²/(1 + n_z)`
/// with `v = n × z`. Lower hemisphere inputs are first turned by 180° about
/// `x`, which keeps the denominator away from zero; `n = −z` maps to
/// `diag(1, −1, −1)`.
pub fn canonical_rotation(n: &Vector) -> Matrix3<f64> {
    if n.z >= 0.0 {
        align_upper(n)
    } else {
        let flip = Matrix3::from_diagonal(&Vector::new(1.0, -1.0, -1.0));
        align_upper(&(flip * n)) * flip
    }
}

fn align_upper(n: &Vector) -> Matrix3<f64> {
    let v = n.cross(&Vector::z());
    let vx = v.cross_matrix();
    Matrix3::identity() + vx + vx * vx / (1.0 + n.z)
}

/// An oriented pair recovered from its feature alone, in the canonical frame:
/// reference at the origin with normal `+z`.
///
/// The pair is determined up to a rotation about `z` and a reflection through
/// a plane containing `z`; those two parameters are left free. Use
/// [`Reconstruction::rotated_about_z`] to move within the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub reference_normal: Vector,
    pub second_point: Point,
    pub second_normal: Vector,
    /// `Aᵀ A` residual against the Gram matrix of the feature.
    pub gram_residual: f64,
}

impl Reconstruction {
    pub fn reference(&self) -> OrientedPoint {
        OrientedPoint::new(Point::origin(), self.reference_normal)
    }

    pub fn second(&self) -> OrientedPoint {
        OrientedPoint::new(self.second_point, self.second_normal)
    }

    /// Applies `R_z(θ)` and optionally the reflection `y ↦ −y` afterwards.
    pub fn rotated_about_z(&self, theta: f64, reflect: bool) -> Self {
        let (s, c) = theta.sin_cos();
        let mut rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        if reflect {
            rot = Matrix3::from_diagonal(&Vector::new(1.0, -1.0, 1.0)) * rot;
        }
        Self {
            reference_normal: rot * self.reference_normal,
            second_point: Point::from(rot * self.second_point.coords),
            second_normal: rot * self.second_normal,
            gram_residual: self.gram_residual,
        }
    }

    /// The family member with `d = p_r − p_i` in the x–z plane at `x ≥ 0` and
    /// the second normal at `y ≥ 0`.
    pub fn in_xz_plane(&self) -> Self {
        let d = -self.second_point.coords;
        let theta = if d.x == 0.0 && d.y == 0.0 { 0.0 } else { -d.y.atan2(d.x) };
        let mut out = self.rotated_about_z(theta, false);
        out.second_point.y = 0.0;
        if out.second_normal.y < 0.0 {
            out = out.rotated_about_z(0.0, true);
        }
        out
    }
}

/// Gram matrix of the columns `(n_r, n_i, d_n)` implied by a feature.
pub fn gram_matrix(f: &Ppf) -> Matrix3<f64> {
    let (rd, id, ri) = (f.f1().cos(), f.f2().cos(), f.f3().cos());
    Matrix3::new(1.0, ri, rd, ri, 1.0, id, rd, id, 1.0)
}

/// Recovers an oriented pair explaining `f` (paper formulation).
///
/// Factors the Gram matrix `K = AᵀA` as `A = U S^½ Uᵀ` (the SVD of a symmetric
/// PSD matrix has `V = U`), reads `(n_r, n_i, d_n)` off the columns of `A` and
/// rotates `n_r` onto `+z`. The second point sits at `−‖d‖·d_n`.
pub fn reconstruct_pair(f: &Ppf) -> Result<Reconstruction, PpfError> {
    reconstruct(f, false)
}

/// Like [`reconstruct_pair`] but projects an inconsistent Gram matrix onto
/// the PSD cone instead of failing. Used to display decoder outputs.
pub(crate) fn reconstruct_projected(f: &Ppf) -> Reconstruction {
    reconstruct(f, true).expect("projection cannot fail")
}

fn reconstruct(f: &Ppf, project: bool) -> Result<Reconstruction, PpfError> {
    let k = gram_matrix(f);
    let eig = SymmetricEigen::new(k);
    let min = eig.eigenvalues.min();
    if !project && min < -PSD_TOLERANCE {
        return Err(PpfError::NotPositiveSemidefinite(min));
    }
    let sqrt_s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = eig.eigenvectors;
    let a = u * Matrix3::from_diagonal(&sqrt_s) * u.transpose();
    let gram_residual = (a.transpose() * a - k).amax();

    let unit = |c: usize| {
        let col: Vector = a.column(c).into();
        let n = col.norm();
        if n > 0.0 {
            col / n
        } else {
            Vector::z()
        }
    };
    let (n_r, n_i, d_n) = (unit(0), unit(1), unit(2));
    let rot = canonical_rotation(&n_r);
    Ok(Reconstruction {
        reference_normal: Vector::z(),
        second_point: Point::from(-(rot * d_n) * f.f4()),
        second_normal: rot * n_i,
        gram_residual,
    })
}
