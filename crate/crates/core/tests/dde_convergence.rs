use dpl_core::dde::{integrate, DelaySystem, InitialHistory, IntegratorConfig};

/// z' = −z(t − 1).
struct NegativeFeedback([f64; 1]);

impl DelaySystem for NegativeFeedback {
    fn dim(&self) -> usize {
        1
    }
    fn lags(&self) -> &[f64] {
        &self.0
    }
    fn eval(&self, _x: &[f64], delayed: &[f64], out: &mut [f64], _work: &mut [f64]) {
        out[0] = -delayed[0];
    }
}

/// Exact solution from unit constant history: a polynomial of degree `k` on
/// `[k − 1, k]`, built piece by piece.
fn exact(t: f64) -> f64 {
    // coefficients in the local variable s = t − left
    let mut piece = vec![1.0];
    let mut left = -1.0;
    loop {
        let start: f64 = piece.iter().sum();
        let mut next = vec![start];
        next.extend(piece.iter().enumerate().map(|(i, c)| -c / (i as f64 + 1.0)));
        left += 1.0;
        if t <= left + 1.0 {
            let s = t - left;
            return next.iter().rev().fold(0.0, |acc, c| acc * s + c);
        }
        piece = next;
    }
}

fn run(dt: f64, t_end: f64) -> f64 {
    let tr = integrate(
        &NegativeFeedback([1.0]),
        &InitialHistory::Constant(vec![1.0]),
        &IntegratorConfig::new(dt, t_end),
    )
    .unwrap();
    tr.final_state()[0]
}

#[test]
fn reference_solution_values() {
    assert_eq!(exact(1.0), 0.0);
    assert!((exact(2.0) + 0.5).abs() < 1e-15);
    assert!((exact(3.0) + 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn value_at_two() {
    assert!((run(0.01, 2.0) + 0.5).abs() <= 1e-8);
}

#[test]
fn fourth_order_convergence() {
    // on [0, 3] the solution is at most cubic and the scheme is exact, so the
    // ratio is measured further out
    for t_end in [5.0, 10.0] {
        let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| (run(dt, t_end) - exact(t_end)).abs()).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((12.8..=19.2).contains(&ratio), "t_end {t_end}: {errs:?}");
        }
    }
}
