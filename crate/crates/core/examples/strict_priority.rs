//! Two flows share one slow egress port. Raising one flow's priority
//! register lets it jump the queue while the other waits.

use netadapt::model::{FlowKey, Packet, PriorityLevel, SimTime};
use netadapt::switch::{ControlCommand, Switch, SwitchControl, SwitchSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sw = Switch::new("s1", SwitchSettings::default());
    sw.add_port(1, 100_000_000, 0)?;
    sw.add_port(2, 1_000_000, 0)?;
    sw.set_default_port(2)?;

    let bulk = FlowKey::new(0x0a000001, 0x0a000101, 5001, 5001, 17);
    let urgent = FlowKey::new(0x0a000002, 0x0a000102, 5004, 5004, 17);

    // bulk arrives first and fills the queue; urgent follows
    let t0 = SimTime::ZERO;
    for _ in 0..5 {
        sw.receive(Packet::new(bulk, 1000, t0)?, 1, t0)?;
    }
    sw.receive(Packet::new(urgent, 1000, t0)?, 1, t0)?;
    let id = sw.flow_id_of(&urgent).expect("assigned on first packet");
    sw.execute(&ControlCommand::SetPriority(id, PriorityLevel(6)))?;
    for _ in 0..3 {
        sw.receive(Packet::new(urgent, 1000, t0)?, 1, t0)?;
    }

    let mut now = t0;
    while let Some(tx) = sw.transmit(2, now, None)? {
        let item = &tx.out.item;
        println!(
            "t={:>6}us  prio={}  {}",
            now.as_micros(),
            item.priority,
            if item.packet.key == urgent { "urgent" } else { "bulk" }
        );
        now = sw.port(2).expect("port 2").port.busy_until;
    }
    Ok(())
}
