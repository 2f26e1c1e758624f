use mlbpf::{loglik_diag, loglik_full};
use mlbpf_bench::observation_fixture;

#[test]
fn fixture_dimensions_agree() {
    for p in [1, 25, 100] {
        let (cov, y) = observation_fixture(p);
        assert_eq!(cov.dim(), p);
        assert_eq!(y.len(), p);
        assert!(loglik_full(0.1, &y, &cov).is_finite());
        assert!(loglik_diag(0.1, &y, &cov).is_finite());
    }
}
