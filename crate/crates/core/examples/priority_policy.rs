//! Policy file parsing and the decision it makes for a few predictions.

use netadapt::adjuster::{decide, Policy};
use netadapt::ml::Prediction;
use netadapt::model::{ClassLabel, FlowKey};

const POLICY: &str = "\
# raise cameras and health monitors, leave the rest at default
epoch_us = 500000
min_confidence = 0.6
Cameras: 6
Health-Monitors = 5
10.0.0.9,10.0.1.9,7000,7000,17 -> 7
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let policy: Policy = POLICY.parse()?;
    policy.validate(8)?;
    print!("{}", policy.to_text());

    let plain = FlowKey::new(0x0a000001, 0x0a000103, 5004, 5004, 17);
    let pinned: FlowKey = "10.0.0.9,10.0.1.9,7000,7000,17".parse()?;
    for (key, class, confidence) in [
        (plain, ClassLabel::Cameras, 0.9),
        (plain, ClassLabel::Cameras, 0.4),
        (plain, ClassLabel::Hubs, 1.0),
        (pinned, ClassLabel::Energy, 0.1),
    ] {
        let mut scores = [0.0; 6];
        scores[class.index()] = confidence;
        let p = Prediction { label: class, scores };
        println!("{key} {:<16} conf={confidence:.1} -> {:?}", class.name(), decide(&p, &key, &policy));
    }
    Ok(())
}
