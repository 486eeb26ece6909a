mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    let c = common::check_gradients();
    assert!(c.pass, "{}", c.detail);
}
