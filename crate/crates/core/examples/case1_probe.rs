use ascent_core::earth::{Environment, GeodeticPoint};
use ascent_core::mission::{MissionSpec, TargetOrbit};
use ascent_core::optimizer::{solve_simultaneous, SolverOptions};
use ascent_core::phases::PhaseConfig;
use ascent_core::vehicle::VehicleSpec;

fn main() {
    let template = VehicleSpec::reference_kslv2();
    let env = Environment::default();
    let mission = MissionSpec {
        site: GeodeticPoint::from_degrees(34.4, 127.5, 140.0).unwrap(),
        target: TargetOrbit {
            altitude: 300_000.0,
            inclination: 80.0_f64.to_radians(),
        },
        q_max: None,
        iip_bounds: vec![],
        launch_azimuth: None,
    };
    let options = SolverOptions::default();
    match solve_simultaneous(&template, &mission, &PhaseConfig::default(), &env, None, &options) {
        Ok(r) => {
            println!("status      {:?} after {} iterations ({:.1} s)", r.status, r.iterations, r.wall_time_s);
            println!("liftoff     {:.0} kg (target band 146476..161894)", r.m_liftoff);
            println!("dv stages   {:?}", r.dv_stages.iter().map(|d| d.round()).collect::<Vec<_>>());
            println!("losses      p {:.0} a {:.0} g {:.0} tvc {:.0}  total {:.0}", r.losses.pressure, r.losses.drag, r.losses.gravity, r.losses.steering, r.losses.total());
            println!("kkt {:.2e}  eq {:.2e}  ineq viol {:.2e}", r.kkt_residual, r.eq_residuals.amax(), r.ineq_violation);
            println!("m_s         {:?}", r.decision.m_s);
        }
        Err(e) => println!("ERROR: {e}"),
    }
}
