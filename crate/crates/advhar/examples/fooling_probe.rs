//! Desk-scale probe for the adversarial fooling dynamics: prints the
//! per-epoch trace so the discriminator/classifier trajectories are visible.

use advhar::losses::LossWeights;
use advhar::model::{
    classifier_spec, discriminator_spec, feature_extractor_spec, reconstructor_spec, BundleSpec,
    ModelBundle,
};
use advhar::pairset::{enumerate_pair_groups, sample_pairs};
use advhar::synth::{centroid_subject_accuracy, generate_synthetic, SyntheticSpec};
use advhar::trainer::{
    run_training, DiscriminationTask, FoldInputs, StepHyper, TrainingConfig,
};

fn main() {
    let arg = |i: usize, default: f64| -> f64 {
        std::env::args()
            .nth(i)
            .and_then(|s| s.parse().ok())
            .unwrap_or(default)
    };
    let wpc = arg(1, 25.0) as usize;
    let e3 = arg(2, 30.0) as usize;
    let lr = arg(3, 1e-3) as f32;
    let n_subjects = arg(4, 5.0) as usize;
    let channels = arg(5, 6.0) as usize;
    let n_pairs = arg(6, 600.0) as usize;
    let jitter = arg(7, 0.0);
    let bs_aprime = arg(8, 64.0) as usize;

    let data = generate_synthetic(&SyntheticSpec {
        n_subjects,
        n_activities: 4,
        windows_per_cell: wpc,
        window_size: 128,
        channels,
        subject_variability: 1.0,
        noise_sigma: 0.05,
        window_jitter: jitter,
        seed: 42,
    });
    for a in 0..4 {
        println!("centroid separability activity {a}: {:.3}", centroid_subject_accuracy(&data, a));
    }
    let train_subjects = data.subjects[..n_subjects - 2].to_vec();
    let val_subjects = data.subjects[n_subjects - 2..].to_vec();
    let train = data.filter_subjects(&train_subjects);
    let val = data.filter_subjects(&val_subjects);
    let pairs_train = sample_pairs(&enumerate_pair_groups(&train), n_pairs, 9).unwrap();
    let pairs_val = sample_pairs(&enumerate_pair_groups(&val), 200, 10).unwrap();
    let inputs = FoldInputs {
        fold_id: 0,
        train,
        val,
        pairs_train,
        pairs_val,
        training_subjects: train_subjects,
        num_activities: 4,
    };
    let config = TrainingConfig {
        step1: StepHyper::uniform(lr, 5),
        step2: StepHyper {
            lr_d: 1e-3,
            ..StepHyper::uniform(lr, 3)
        },
        step3: StepHyper::uniform(lr, e3),
        batch_size_a: 32,
        batch_size_aprime: bs_aprime,
        weights: LossWeights::default(),
        seed: 1,
        grad_clip: None,
    };
    let spec = BundleSpec {
        f: feature_extractor_spec(channels),
        r: reconstructor_spec(128, channels).unwrap(),
        c: classifier_spec(4),
        d: discriminator_spec(),
    };
    let bundle = ModelBundle::new(spec, 7);
    let start = std::time::Instant::now();
    let trained = run_training(&inputs, &config, DiscriminationTask::ActivityPairs, bundle).unwrap();
    for e in &trained.traces {
        println!(
            "{} {:3}  L_R {:.4}  L_C {}  L_D {}  L_A {}  val_acc {}  val_f1w {}  disc {}",
            e.step,
            e.epoch,
            e.l_r.unwrap_or(f64::NAN),
            e.l_c.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            e.l_d.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            e.l_a.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            e.val_accuracy.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            e.val_f1w.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            e.disc_val_acc.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
        );
    }
    println!("elapsed: {:.1}s", start.elapsed().as_secs_f64());
    println!(
        "selected epoch {:?} f1w {:.3} disc {:.3}",
        trained.selection.epoch, trained.selection.val_f1w, trained.selection.disc_val_acc
    );
}
