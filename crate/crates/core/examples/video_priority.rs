//! The dumbbell experiment: video frame rate with no competing traffic,
//! with a 2 Mbps UDP flood, and with the adjuster raising the video's
//! priority once it is classified.

use netadapt::scenario::{run_scenario, Arm, RunOptions, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::dumbbell();
    for arm in Arm::ALL {
        let run = run_scenario(&scenario, arm, &RunOptions::default())?;
        println!(
            "{:<10} video {:>5.2} fps  telemetry={} adjustments={}",
            arm.to_string(),
            run.fps("video").unwrap_or(0.0),
            run.dataset.len(),
            run.log.entries().len()
        );
        for a in run.log.entries() {
            println!("           t={}us flow {} {} -> {}", a.time.as_micros(), a.flow_id, a.old_priority, a.new_priority);
        }
    }
    Ok(())
}
