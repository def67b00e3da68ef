//! Library-level flows that cross module boundaries.

use netadapt::adjuster::{Adjuster, Policy};
use netadapt::collector::{self, Dataset, PortLabelMap};
use netadapt::ml::{Classifier, Hyperparams, ModelKind, Samples};
use netadapt::model::{ClassLabel, FlowKey, Packet, PriorityLevel, SimTime};
use netadapt::scenario::{run_scenario, Arm, RunOptions, Scenario};
use netadapt::switch::{Switch, SwitchControl, SwitchSettings};

#[test]
fn iot_dataset_survives_disk_and_trains_the_same_model() {
    let run = run_scenario(&Scenario::iot(), Arm::Baseline, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iot.csv");
    collector::export(&run.dataset, &path).unwrap();
    let back = collector::import(&path).unwrap();
    assert_eq!(back, run.dataset);

    let hp = Hyperparams::default();
    let a = Classifier::train(ModelKind::Dt, &Samples::from_dataset(&run.dataset), &hp, 1).unwrap();
    let b = Classifier::train(ModelKind::Dt, &Samples::from_dataset(&back), &hp, 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let again = Classifier::from_json(&a.to_json()).unwrap();
    let probe = Samples::from_dataset(&back);
    assert_eq!(a.predict_all(&probe.features), again.predict_all(&probe.features));
}

#[test]
fn adjuster_closes_the_loop_on_a_bare_switch() {
    let video = FlowKey::new(0x0a000001, 0x0a000103, 5004, 5004, 17);
    let bulk = FlowKey::new(0x0a000002, 0x0a000104, 5001, 5001, 17);
    let labels = PortLabelMap::new([(ClassLabel::Cameras, [5004u16]), (ClassLabel::Energy, [5001])]).unwrap();

    let mut sw = Switch::new("s1", SwitchSettings::default());
    sw.add_port(1, 100_000_000, 0).unwrap();
    sw.add_port(2, 100_000_000, 0).unwrap();
    sw.set_default_port(2).unwrap();
    netadapt::adjuster::set_mirroring(&mut sw, true, 0).unwrap();

    let mut ds = Dataset::new("loop");
    let mut records = Vec::new();
    for i in 0..200u64 {
        let t = SimTime::from_micros(i * 1000);
        let key = if i % 2 == 0 { video } else { bulk };
        let size = if i % 2 == 0 { 1000 } else { 1250 };
        sw.receive(Packet::new(key, size, t).unwrap(), 1, t).unwrap();
        sw.transmit(2, t, Some(&mut records)).unwrap();
    }
    for r in records {
        let label = labels.label_for(&r);
        ds.append(r.with_label(label)).unwrap();
    }
    let model = Classifier::train(ModelKind::Dt, &Samples::from_dataset(&ds), &Hyperparams::default(), 0).unwrap();

    let policy: Policy = "Cameras: 6\n".parse().unwrap();
    let mut adj = Adjuster::new(policy);
    let now = SimTime::from_secs(1);
    let outcome = adj.run_epoch(ds.records(), &model, &mut sw, now);
    assert!(outcome.errors.is_empty());
    assert_eq!(outcome.classified, 2);
    assert_eq!(outcome.writes, 1);
    let id = sw.flow_id_of(&video).unwrap();
    assert_eq!(sw.priority_of(id).unwrap(), PriorityLevel(6));
    assert_eq!(sw.priority_of(sw.flow_id_of(&bulk).unwrap()).unwrap(), PriorityLevel(0));

    // nothing new since the cursor: no further writes
    let outcome = adj.run_epoch(ds.records(), &model, &mut sw, SimTime::from_secs(2));
    assert_eq!((outcome.classified, outcome.writes), (0, 0));
    assert_eq!(adj.log().entries().len(), 1);
}

#[test]
fn seeds_change_runs_and_configs_change_ids() {
    let s = Scenario::dumbbell();
    let a = run_scenario(&s.clone().with_seed(1), Arm::Congested, &RunOptions::default()).unwrap();
    let b = run_scenario(&s.clone().with_seed(2), Arm::Congested, &RunOptions::default()).unwrap();
    assert_ne!(a.run_id, b.run_id);
    assert!(a.run_id.starts_with("dumbbell-congested-"));
    assert!(a.run_id.contains("-s1-"));
}
