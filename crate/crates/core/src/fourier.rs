//! Cached FFT plans for the periodic grid direction.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct Plan {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();

pub fn with_plan<R>(n: usize, f: impl FnOnce(&Plan) -> R) -> R {
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let plan = {
        let mut map = plans.lock().unwrap();
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Plan {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    };
    f(&plan)
}

/// Forward DFT of a real sequence.
pub fn dft(values: &[f64]) -> Vec<Complex<f64>> {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    with_plan(n, |p| p.forward.process(&mut buf));
    buf
}

/// Inverse DFT, returning the real part (input assumed conjugate-symmetric).
pub fn idft_real(modes: &[Complex<f64>]) -> Vec<f64> {
    let n = modes.len();
    let mut buf = modes.to_vec();
    with_plan(n, |p| p.inverse.process(&mut buf));
    buf.iter().map(|v| v.re / n as f64).collect()
}
