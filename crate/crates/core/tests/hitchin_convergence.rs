use cll_core::grid::{ComplexField, GridDomain};
use cll_core::hitchin::{solve_hitchin, HitchinProblem};

fn liouville_error(n: usize) -> (f64, f64) {
    let d = GridDomain::new(n, n, 1.0, 0.5, 1.5).unwrap();
    let p = HitchinProblem::with_boundary_fn(ComplexField::constant(d, 1.0.into()), |_, y| (2.0 * y).ln()).unwrap();
    let sol = solve_hitchin(&p, 1e-10, 40).unwrap();
    let exact = ComplexField::from_fn(d, |z| (2.0 * z.im).ln().into());
    (sol.u.max_diff(&exact), d.h())
}

#[test]
fn liouville_error_is_second_order() {
    let errs: Vec<(f64, f64)> = [32, 64, 128].into_iter().map(liouville_error).collect();
    for &(e, h) in &errs {
        assert!(e <= 5.0 * h * h, "error {e:e} above 5h² at h = {h}");
    }
    for w in errs.windows(2) {
        let ratio = w[0].0 / w[1].0;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn solution_is_independent_of_x_for_x_constant_data() {
    let d = GridDomain::new(16, 24, 2.0, 0.5, 1.5).unwrap();
    let p = HitchinProblem::with_boundary_fn(ComplexField::constant(d, 0.7.into()), |_, y| y).unwrap();
    let u = solve_hitchin(&p, 1e-10, 40).unwrap().u;
    for j in 0..d.ny() {
        let row0 = u.get(0, j);
        for i in 1..d.nx() {
            assert!((u.get(i, j) - row0).norm() < 1e-10);
        }
    }
}
