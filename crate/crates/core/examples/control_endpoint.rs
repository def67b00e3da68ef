//! Text control verbs parsed and applied to a switch, including the
//! errors an out-of-range request produces.

use netadapt::model::{FlowKey, Packet, SimTime};
use netadapt::switch::{ControlCommand, ControlReply, Switch, SwitchControl, SwitchSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sw = Switch::new("s1", SwitchSettings::default());
    sw.add_port(1, 100_000_000, 0)?;
    sw.add_port(2, 100_000_000, 0)?;
    sw.set_default_port(2)?;
    for (i, port) in [5004u16, 5001].into_iter().enumerate() {
        let key = FlowKey::new(0x0a000001 + i as u32, 0x0a000103, port, port, 17);
        sw.receive(Packet::new(key, 500, SimTime::ZERO)?, 1, SimTime::ZERO)?;
    }

    let script = [
        "set-mirror-flag on",
        "set-mirror-interval 5000",
        "set-priority 0 6",
        "set-priority 1 9",
        "set-priority 7 1",
        "reboot",
        "dump-registers",
    ];
    for line in script {
        let outcome = line
            .parse::<ControlCommand>()
            .and_then(|cmd| sw.execute(&cmd));
        match outcome {
            Ok(ControlReply::Ok) => println!("{line:<26} ok"),
            Ok(ControlReply::Registers(dump)) => print!("{line:<26} ok\n{dump}"),
            Err(e) => println!("{line:<26} error: {e}"),
        }
    }
    Ok(())
}
