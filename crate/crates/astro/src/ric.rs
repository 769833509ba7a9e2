//! Radial / in-track / cross-track frame centred on a reference state.

use nalgebra::{Matrix3, Vector3};

use crate::error::{AstroError, Result};
use crate::state::CartesianState;

/// Rows are the radial, in-track and cross-track unit vectors.
pub fn ric_frame(reference: &CartesianState) -> Result<Matrix3<f64>> {
    let (r, v) = (reference.r(), reference.v());
    let h = r.cross(&v);
    let (rn, hn) = (r.norm(), h.norm());
    if !(rn > 0.0) || !(hn > 1e-14 * rn * v.norm()) {
        return Err(AstroError::DegenerateFrame);
    }
    let radial = r / rn;
    let cross = h / hn;
    let intrack = cross.cross(&radial);
    Ok(Matrix3::from_rows(&[radial.transpose(), intrack.transpose(), cross.transpose()]))
}

/// `target − reference` position expressed as `[radial, in-track, cross-track]`.
pub fn ric_transform(reference: &CartesianState, target: &CartesianState) -> Result<[f64; 3]> {
    let frame = ric_frame(reference)?;
    let d: Vector3<f64> = frame * (target.r() - reference.r());
    Ok(d.into())
}
