//! Properties of the projection onto the stage boxes.

use lanechange::dynamics::AgentState;
use lanechange::ocp::{AgentProblem, CostWeights, StageBounds, StageReference, STAGE_DIM};
use lanechange::road::RoadProfile;
use lanechange::dynamics::VehicleGeometry;
use proptest::prelude::*;

const N: usize = 4;

fn bounds() -> StageBounds {
    StageBounds {
        dy_lo: -2.75,
        dy_hi: -1.25,
        v_hi: 17.0,
        ax_lo: -4.0,
        ax_hi: 4.0,
        delta_lo: -5f64.to_radians(),
        delta_hi: 5f64.to_radians(),
        ay_hi: 3.5,
        atot_hi: 4.0,
    }
}

fn problem(road: &RoadProfile) -> AgentProblem<'_> {
    AgentProblem {
        x0: AgentState::new(0.0, -2.0, 0.0, 14.0),
        road,
        geom: VehicleGeometry::default(),
        ts: 0.1,
        weights: CostWeights::default(),
        bounds: vec![bounds(); N],
        refs: vec![StageReference::default(); N + 1],
        admm: None,
    }
}

fn projected(p: &AgentProblem<'_>, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    p.project_box(&mut y);
    y
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, N * STAGE_DIM)
}

proptest! {
    #[test]
    fn lands_in_the_box(x in point()) {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let p = problem(&road);
        let b = bounds();
        for stage in projected(&p, &x).chunks_exact(STAGE_DIM) {
            prop_assert!(b.dy_lo <= stage[1] && stage[1] <= b.dy_hi);
            prop_assert!(0.0 <= stage[3] && stage[3] <= b.v_hi);
            prop_assert!(b.ax_lo <= stage[4] && stage[4] <= b.ax_hi);
            prop_assert!(b.delta_lo <= stage[5] && stage[5] <= b.delta_hi);
        }
    }

    #[test]
    fn is_idempotent_and_leaves_free_coordinates(x in point()) {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let p = problem(&road);
        let y = projected(&p, &x);
        prop_assert_eq!(projected(&p, &y), y.clone());
        for (a, b) in x.chunks_exact(STAGE_DIM).zip(y.chunks_exact(STAGE_DIM)) {
            prop_assert_eq!(a[0], b[0]);
            prop_assert_eq!(a[2], b[2]);
        }
    }

    #[test]
    fn is_the_nearest_box_point(x in point(), w in point()) {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let p = problem(&road);
        let y = projected(&p, &x);
        // any other box point is at least as far away
        let other = projected(&p, &w);
        let dist = |a: &[f64]| a.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        prop_assert!(dist(&y) <= dist(&other) + 1e-12);
    }

    #[test]
    fn is_nonexpansive(x in point(), w in point()) {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let p = problem(&road);
        let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(norm(&projected(&p, &x), &projected(&p, &w)) <= norm(&x, &w) + 1e-12);
    }
}
