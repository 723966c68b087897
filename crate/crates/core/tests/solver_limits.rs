use dsym_core::detsolve::{symmetries, AnsatzBasis, DetError};
use dsym_core::expr::SampleConfig;
use dsym_core::system::DiffSystem;

// Positive coefficients near 1 give solutions growing about threefold per step.
const FAST_GROWTH: &str = "system linear0
  x[n+2] = (9/8 + 3*n/192)*x[n] + (7/8 - 3*n/192)*y[n] + (12/8)*x[n+1] + (12/8 + n/192)*y[n+1]
  y[n+2] = (6/8 + n/192)*x[n] + (9/8 + 3*n/192)*y[n] + (5/8 + n/192)*x[n+1] + (1 + 2*n/192)*y[n+1]
end
";

#[test]
fn fast_growth_fails_verification_over_the_full_window() {
    let sys = DiffSystem::from_text(FAST_GROWTH).unwrap();
    let r = symmetries(&sys, &AnsatzBasis::affine(), &SampleConfig::default());
    assert!(matches!(r, Err(DetError::Verification { .. })), "{r:?}");
}

#[test]
fn fast_growth_is_resolved_on_a_shorter_window() {
    let sys = DiffSystem::from_text(FAST_GROWTH).unwrap();
    let cfg = SampleConfig {
        window: (0, 16),
        ..SampleConfig::default()
    };
    let space = symmetries(&sys, &AnsatzBasis::affine(), &cfg).unwrap();
    assert_eq!(space.dimension(), 5);
    assert!(space.elements.iter().all(|e| e.report.passed));
}
