//! Out-and-back aileron and winglet strokes with the airframe held on its trim path.

use morphwing::actuation::{power_study, StudySettings, SURFACE_NAMES};
use morphwing::flightdyn::Simulator;
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?;
    let study = power_study(&sim, &trim.point(), &StudySettings::default())?;
    for case in &study.cases {
        println!("{}: total {:.4} J, quadratic {:.4}", case.name, case.total_work, case.quadratic);
        for (i, name) in SURFACE_NAMES.iter().enumerate() {
            if case.out_work[i] != 0.0 || case.return_work[i] != 0.0 {
                println!("  {name:<14} out {:>10.5} J  return {:>10.5} J", case.out_work[i], case.return_work[i]);
            }
        }
    }
    let alone = study.case("aileron").map(|c| c.out_work[1] + c.return_work[1]).unwrap_or(0.0);
    let paired = study.case("coupled").map(|c| c.out_work[1] + c.return_work[1]).unwrap_or(0.0);
    println!("aileron work alone {alone:.5} J, with opposing winglet {paired:.5} J");
    Ok(())
}
