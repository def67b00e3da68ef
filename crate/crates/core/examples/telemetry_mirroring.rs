//! Per-flow mirroring with a minimum spacing between telemetry records.

use netadapt::adjuster::set_mirroring;
use netadapt::model::{FlowKey, Packet, SimTime};
use netadapt::switch::{Switch, SwitchSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let key = FlowKey::new(0xc0a80001, 0xc0a800fe, 40000, 1883, 6);
    for interval in [0, 25_000] {
        let mut sw = Switch::new("s1", SwitchSettings::default());
        sw.add_port(1, 100_000_000, 0)?;
        sw.add_port(2, 100_000_000, 0)?;
        sw.set_default_port(2)?;
        set_mirroring(&mut sw, true, interval)?;

        let mut records = Vec::new();
        for i in 0..10u64 {
            let t = SimTime::from_micros(i * 10_000);
            sw.receive(Packet::new(key, 200, t)?, 1, t)?;
            sw.transmit(2, t, Some(&mut records))?;
        }
        println!("mirror interval {interval} us: {} of 10 packets mirrored", records.len());
        for r in &records {
            println!(
                "  ts={:>6} size={} enq_qdepth={} deq_timedelta={}",
                r.timestamp_us, r.size_bytes, r.enq_qdepth, r.deq_timedelta
            );
        }
    }
    Ok(())
}
