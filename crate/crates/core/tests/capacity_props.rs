use proptest::prelude::*;
use pwiener::capacity::{self, CapacityConfig, CondenserProblem, SolverConfig};
use pwiener::geometry::{Cube, DomainKind, DomainSpec, IndicatorField, Lattice, Point};
use pwiener::StructureParams;

fn masked(bits: &[bool]) -> IndicatorField {
    // 9 x 9 nodes on K_{1/2}, inside K_{3/4} at h = 1/8
    let lattice = Lattice::over(&Cube::new(Point::origin(2), 0.5).unwrap(), 0.125).unwrap();
    IndicatorField { values: bits.to_vec(), lattice }
}

fn problem(field: IndicatorField, p: f64) -> CondenserProblem {
    CondenserProblem {
        obstacle: field,
        outer: Cube::new(Point::origin(2), 0.75).unwrap(),
        p,
        solver: SolverConfig::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enlarging_the_obstacle_never_lowers_capacity(
        a in prop::collection::vec(prop::bool::weighted(0.2), 81),
        b in prop::collection::vec(prop::bool::weighted(0.2), 81),
        p in 2.2..4.5f64,
    ) {
        prop_assume!(a.iter().any(|&v| v));
        let sup: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x || *y).collect();
        let small = capacity::solve_condenser(&problem(masked(&a), p)).unwrap().value;
        let large = capacity::solve_condenser(&problem(masked(&sup), p)).unwrap().value;
        prop_assert!(large >= small * (1.0 - 1e-6), "{} < {}", large, small);
    }

    #[test]
    fn minimizer_stays_in_unit_range(
        a in prop::collection::vec(prop::bool::weighted(0.3), 81),
        p in 2.2..4.5f64,
    ) {
        prop_assume!(a.iter().any(|&v| v));
        let sol = capacity::solve_condenser_full(&problem(masked(&a), p)).unwrap();
        let top = sol.potential.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(top <= 1.0 + 1e-10);
        let hist = &sol.capacity.energy_history;
        prop_assert!(hist.windows(2).all(|w| w[1] <= w[0]), "energy history increases: {:?}", hist);
    }

    #[test]
    fn delta_lies_in_unit_interval(
        lo in prop::collection::vec(-1.0..1.0f64, 2),
        size in prop::collection::vec(0.05..1.0f64, 2),
        p in 2.2..4.5f64,
    ) {
        let hi: Vec<f64> = lo.iter().zip(&size).map(|(l, s)| l + s).collect();
        let anchor = Point::new(&lo);
        let d = DomainSpec::new(DomainKind::CustomMask { boxes: vec![(lo.clone(), hi)] }, anchor.clone()).unwrap();
        let params = StructureParams::new(p, 2).unwrap();
        let cfg = CapacityConfig { cells_per_rho: 8, ..Default::default() };
        let delta = capacity::delta(&d, &anchor, 0.5, &params, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&delta), "delta = {}", delta);
    }
}

#[test]
fn half_space_delta_is_scale_invariant() {
    let params = StructureParams::new(3.0, 2).unwrap();
    let d = DomainSpec::new(DomainKind::HalfSpace, Point::origin(2)).unwrap();
    let cfg = CapacityConfig::default();
    let a = capacity::delta(&d, &Point::origin(2), 0.25, &params, &cfg).unwrap();
    let b = capacity::delta(&d, &Point::origin(2), 0.5, &params, &cfg).unwrap();
    assert!(a > 0.0 && a < 1.0);
    assert!((a - b).abs() <= 0.02 * b, "delta(rho) = {a}, delta(2 rho) = {b}");
}

#[test]
fn capacity_scaling_in_two_dimensions_for_several_p() {
    for p in [2.5, 3.0, 4.0] {
        let caps: Vec<f64> = [1.0, 0.5, 0.25]
            .iter()
            .map(|&rho| {
                let lattice = Lattice::over(&Cube::new(Point::origin(2), rho).unwrap(), rho / 16.0).unwrap();
                let obstacle = IndicatorField { values: vec![true; lattice.len()], lattice };
                let pb = CondenserProblem {
                    obstacle,
                    outer: Cube::new(Point::origin(2), 2.0 * rho).unwrap(),
                    p,
                    solver: SolverConfig::default(),
                };
                capacity::solve_condenser(&pb).unwrap().value
            })
            .collect();
        // log2 ratios between dyadic radii
        for w in caps.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - (2.0 - p)).abs() <= 0.05 * (p - 2.0), "p = {p}: slope {slope}");
        }
    }
}
