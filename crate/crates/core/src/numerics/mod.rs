//! Special functions, quadrature, dense solves and root finding.

pub mod linalg;
pub mod quadrature;
pub mod roots;
pub mod special;

pub use linalg::{arrow_head, solve_spd, spd_inverse, ArrowFactor, Cholesky, SpdFactor};
pub use quadrature::{integrate_real_line, integrate_real_line_many, QuadratureSettings};
pub use roots::{expand_bracket, find_root, try_expand_bracket, try_find_root, DEFAULT_ROOT_TOL};
pub use special::{
    digamma, inv_mills, ln_gamma, log_norm_cdf, norm_cdf, norm_pdf, norm_quantile, polygamma,
    std_normal, tetragamma, trigamma,
};
