use nalgebra::DVector;

use crate::config::InputSignal;

/// Evaluates the input catalogue at k = 0..count, one m-dimensional vector
/// per step with every component set to the same scalar.
pub fn generate(signal: InputSignal, m: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let value = match signal {
                InputSignal::Zero => 0.0,
                InputSignal::SinPlusCos => {
                    let t = k as f64;
                    t.sin() + t.cos()
                }
                InputSignal::Constant(c) => c,
            };
            DVector::from_element(m, value)
        })
        .collect()
}
