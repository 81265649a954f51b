use std::path::Path;

use gyrobundle::integrators::{IntegratorConfig, Scheme};
use gyrobundle::liegroup::exp_so3;
use gyrobundle::model::{InertiaParams, ShapeState, SpatialMomentum, SystemState};
use gyrobundle::scenario::{parse_scenario, parse_scenario_str, serialize_scenario, Mode, Scenario, ScheduleTable, Thresholds};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "scn") {
            let s = parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_scenario_str(&serialize_scenario(&s)).unwrap(), s, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

prop_compose! {
    fn scenario()(
        scalars in proptest::array::uniform5(finite(0.1, 2.0)),
        diag in proptest::array::uniform3(finite(5.0, 20.0)),
        off in finite(-0.5, 0.5),
        rot in proptest::array::uniform3(finite(-3.0, 3.0)),
        shape in proptest::array::uniform4(finite(-10.0, 10.0)),
        omega in proptest::array::uniform3(finite(-5.0, 5.0)),
        mu in proptest::option::of(proptest::array::uniform3(finite(-5.0, 5.0))),
        dt in finite(1e-5, 1e-2),
        steps in 1usize..50,
        euler in any::<bool>(),
        reproject_every in 1usize..500,
        seed in any::<u64>(),
        trials in 1usize..100_000,
        limit in proptest::option::of(finite(0.0, 1.0)),
        torques in proptest::collection::vec(proptest::array::uniform2(finite(-1.0, 1.0)), 2..6),
        kinematic in any::<bool>(),
    ) -> Scenario {
        let sc = Matrix3::new(diag[0], off, 0.0, off, diag[1], 0.0, 0.0, 0.0, diag[2]);
        let params = InertiaParams::new(scalars[0], scalars[1], scalars[2], scalars[3], scalars[4], sc).unwrap();
        let initial = SystemState {
            attitude: exp_so3(&Vector3::from(rot)),
            shape: ShapeState { beta: shape[0], gamma: shape[1], beta_dot: shape[2], gamma_dot: shape[3] },
            omega: Vector3::from(omega),
        };
        let end = dt * steps as f64;
        let n = torques.len();
        let rows = torques
            .iter()
            .enumerate()
            .map(|(k, v)| vec![end * k as f64 / (n - 1) as f64, v[0], v[1]])
            .collect();
        let (mode, columns) = if kinematic {
            (Mode::Kinematic, vec!["t", "u_beta", "u_gamma"])
        } else {
            (Mode::Dynamic, vec!["t", "tau_g", "tau_w"])
        };
        Scenario {
            mode,
            params,
            initial,
            mu: if kinematic { mu.map(|m| SpatialMomentum(Vector3::from(m))) } else { None },
            integrator: IntegratorConfig {
                dt,
                steps,
                scheme: if euler { Scheme::LieEuler } else { Scheme::LieRk4 },
                reproject_every,
            },
            schedule: Some(ScheduleTable { columns: columns.into_iter().map(String::from).collect(), rows }),
            seed,
            trials,
            thresholds: Thresholds { mu_drift_rel: limit, ortho_err_max: limit.map(|x| x / 2.0), ..Default::default() },
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_then_parse_is_identity(s in scenario()) {
        let text = serialize_scenario(&s);
        let back = parse_scenario_str(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
    }
}
