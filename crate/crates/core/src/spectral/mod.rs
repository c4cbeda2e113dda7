//! Real Fourier basis on the truncation `|k| ≤ R` and the operators of the
//! vorticity equation expressed in it.

mod basis;
mod field;
mod table;

pub use basis::Basis;
pub use field::{biot_savart, ModeCoeff, SpectralField, VelocityField, BASIS_NORM_SQ};
pub(crate) use field::{dot, same_basis};
pub use table::{
    adjoint_c, adjoint_c_direct, advect_modes, interaction_coeff, nonlinearity_b, InteractionTable, Triad,
};
pub(crate) use table::csv_err;
