use tlsan::ingest::prepare;
use tlsan::synth::{generate_synthetic, SynthSpec};
use tlsan::train::{train, TrainConfig, TrainOutputs};

fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    xs.windows(w).map(|v| v.iter().sum::<f64>() / w as f64).collect()
}

#[test]
fn overfit_loss_trend() {
    let spec = SynthSpec { n_users: 50, n_items: 60, n_categories: 12, ..SynthSpec::default() };
    let data = generate_synthetic(&spec).unwrap();
    let ds = prepare(&data.reviews[..], &data.metadata[..], 10, 1).unwrap();
    let config = TrainConfig { dim: 8, epochs: 500, ..TrainConfig::default() };
    let (_, report) = train(&ds, &config, &TrainOutputs::default()).unwrap();
    let losses: Vec<f64> = report.steps.iter().map(|s| s.loss.mean()).collect();
    let ma = moving_average(&losses, 20);
    let start = losses.len() / 10;
    // per-step noise from resampled negatives makes the smoothed curve
    // wiggle, so only the overall trend is asserted
    let at_start = ma[start];
    let end = *ma.last().unwrap();
    assert!(end < 0.25 * at_start, "start {at_start} end {end}");
    let drop = (0.8 * losses.len() as f64) as usize;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    assert!(mean(&losses[drop..]) < mean(&losses[start..drop]));
}

#[test]
fn divergence_keeps_last_good_checkpoint() {
    let data = generate_synthetic(&SynthSpec::default()).unwrap();
    let ds = prepare(&data.reviews[..], &data.metadata[..], 10, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    let config = TrainConfig {
        dim: 8,
        epochs: 20,
        lr_initial: 50.0,
        clip_norm: None,
        ..TrainConfig::default()
    };
    let outputs = TrainOutputs { checkpoint: Some(path.clone()), metrics: None };
    match train(&ds, &config, &outputs) {
        Err(tlsan::Error::Diverged { step }) => {
            let params = tlsan::model::checkpoint::load(&path).unwrap();
            assert!(params.is_finite(), "diverged at {step}");
        }
        other => panic!("expected divergence, got {:?}", other.map(|r| r.1.final_epoch_loss())),
    }
}
