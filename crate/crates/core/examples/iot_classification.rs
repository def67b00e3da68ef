//! Collects a labelled telemetry dataset from the IoT scenario and scores
//! the three classifiers on a held-out split.

use netadapt::ml::{self, evaluate, roc, Classifier, Hyperparams, ModelKind, Samples};
use netadapt::model::ClassLabel;
use netadapt::scenario::{run_scenario, Arm, RunOptions, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::iot();
    let run = run_scenario(&scenario, Arm::Baseline, &RunOptions::default())?;
    println!("dataset {}: {} records", run.dataset.run_id(), run.dataset.len());

    let samples = Samples::from_dataset(&run.dataset);
    let (train, test) = ml::split(&samples.labels, 0.8, 42)?;
    let (train, test) = (samples.subset(&train), samples.subset(&test));

    println!("model,accuracy,precision,f1_score,mse");
    for kind in [ModelKind::Dt, ModelKind::Knn, ModelKind::Rf] {
        let model = Classifier::train(kind, &train, &Hyperparams::default(), 42)?;
        let preds = model.predict_all(&test.features);
        let labels: Vec<ClassLabel> = preds.iter().map(|p| p.label).collect();
        let r = evaluate(&labels, &test.labels)?;
        println!(
            "{},{:.4},{:.4},{:.4},{:.4}",
            kind.as_str(),
            r.accuracy,
            r.macro_precision,
            r.macro_f1,
            r.mse
        );
        if kind == ModelKind::Rf {
            let scores: Vec<_> = preds.iter().map(|p| p.scores).collect();
            for class in ClassLabel::ALL {
                let curve = roc(&scores, &test.labels, class)?;
                println!("  rf {:<16} auc={:.4}", class.name(), curve.auc);
            }
        }
    }
    Ok(())
}
