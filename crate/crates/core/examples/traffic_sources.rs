//! The three traffic sources: CBR, frame-grouped video and trace replay.

use netadapt::model::{FlowKey, SimTime};
use netadapt::traffic::{gen_synthetic_iot_trace, IotProfiles};
use netadapt::traffic::tracefile::{read_trace, write_trace};
use netadapt::traffic::{gen_cbr, gen_video, replay_trace, CbrSpec, VideoSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cbr = gen_cbr(&CbrSpec {
        key: FlowKey::new(1, 2, 5001, 5001, 17),
        rate_bps: 2_000_000,
        packet_size_bytes: 1250,
        start: SimTime::from_secs(10),
        duration_us: 1_000_000,
    })?;
    println!(
        "cbr: {} packets, first at {} us, gap {} us",
        cbr.len(),
        cbr[0].created_at.as_micros(),
        cbr[1].created_at.as_micros() - cbr[0].created_at.as_micros()
    );

    let video = gen_video(&VideoSpec {
        key: FlowKey::new(1, 3, 5004, 5004, 17),
        fps: 30,
        packets_per_frame: 4,
        packet_size_bytes: 1000,
        start: SimTime::ZERO,
        duration_us: 1_000_000,
    })?;
    let frames = video.iter().filter_map(|p| p.frame_seq).max().map_or(0, |f| f + 1);
    println!("video: {} packets in {frames} frames", video.len());

    let trace = gen_synthetic_iot_trace(&IotProfiles::shipped(), 3, 7)?;
    let mut text = Vec::new();
    write_trace(&mut text, &["synthetic iot, seed 7".to_string()], &trace.rows, true)?;
    print!("trace file:\n{}", String::from_utf8_lossy(&text));
    let back = read_trace(text.as_slice())?;
    let packets = replay_trace(&back.rows, 100_000_000)?;
    println!("replayed {} packets, last at {} us", packets.len(), packets.last().map_or(0, |p| p.created_at.as_micros()));
    Ok(())
}
