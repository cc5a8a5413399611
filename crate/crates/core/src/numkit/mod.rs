//! Dense `f64` tensors, a reverse-mode tape, a platform-stable PRNG and
//! population moment statistics.

mod rng;
mod stats;
pub mod tape;
mod tensor;

pub use rng::Rng;
pub use stats::{moments, MomentStats};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{softmax_rows, Tensor2};

/// Largest absolute elementwise difference; `f64::INFINITY` on shape mismatch.
pub fn max_abs_diff(a: &Tensor2, b: &Tensor2) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| if x == y { 0.0 } else { libm::fabs(x - y) })
        .fold(0.0, f64::max)
}
