use neuroalign::align::{fit, resume, ModelCheckpoint, ProjectorMode, TrainConfig};
use neuroalign::data::{synth_generate, NeuralDataset, PairedData, Split, SynthData, SynthSpec};
use neuroalign::encoders::Arch;
use neuroalign::gradcheck::SMALL_TSCONV;
use neuroalign::Error;

fn small_data() -> (SynthData, NeuralDataset, NeuralDataset) {
    let spec = SynthSpec {
        num_concepts: 12,
        test_concepts: 3,
        images_per_concept: 4,
        embed_dim: 8,
        channels: 3,
        time_points: 8,
        repetitions: 2,
        ..SynthSpec::default()
    };
    let data = synth_generate(&spec).unwrap();
    let train = data.manifest.split_dataset(&data.dataset, Split::Train).unwrap();
    let test = data.manifest.split_dataset(&data.dataset, Split::Test).unwrap();
    (data, train, test)
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 10,
        epochs,
        embed_dim: 16,
        shared_dim: 8,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn run(cfg: &TrainConfig) -> ModelCheckpoint {
    let (data, train, test) = small_data();
    let bank = &data.banks[2];
    let tr = PairedData::new(&train, bank).unwrap();
    let te = PairedData::new(&test, bank).unwrap();
    fit(&tr, Some(&te), cfg, |_| {}).unwrap()
}

#[test]
fn checkpoint_roundtrips_bit_exactly() {
    for arch in [Arch::EegProject, Arch::TsConv] {
        let cfg = TrainConfig {
            arch,
            tsconv: SMALL_TSCONV,
            ..config(2)
        };
        let ckpt = run(&cfg);
        let bytes = ckpt.to_bytes().unwrap();
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.optimizer.step, 2 * 4);
    }
}

#[test]
fn checkpoint_file_roundtrip() {
    let ckpt = run(&config(1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/run.nck");
    ckpt.save(&path).unwrap();
    assert_eq!(ModelCheckpoint::load(&path).unwrap(), ckpt);
}

#[test]
fn resuming_reproduces_the_uninterrupted_run() {
    let straight = run(&config(4));
    let halfway = run(&config(2));
    let mut loaded = ModelCheckpoint::from_bytes(&halfway.to_bytes().unwrap()).unwrap();
    loaded.config.epochs = 4;
    let (data, train, test) = small_data();
    let bank = &data.banks[2];
    let tr = PairedData::new(&train, bank).unwrap();
    let te = PairedData::new(&test, bank).unwrap();
    let resumed = resume(loaded, &tr, Some(&te), |_| {}).unwrap();
    assert_eq!(resumed.to_bytes().unwrap(), straight.to_bytes().unwrap());
}

#[test]
fn same_seed_gives_identical_checkpoints_and_other_seeds_differ() {
    let a = run(&config(2)).to_bytes().unwrap();
    assert_eq!(a, run(&config(2)).to_bytes().unwrap());
    let other = TrainConfig { seed: 6, ..config(2) };
    assert_ne!(a, run(&other).to_bytes().unwrap());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..config(3)
    };
    let trained = run(&cfg);
    let start = ModelCheckpoint::initial(&cfg, 3, 8, 8).unwrap();
    assert_eq!(trained.model, start.model);
    assert_eq!(trained.optimizer.step, 3 * 4);
}

#[test]
fn losses_are_logged_and_decrease() {
    let ckpt = run(&TrainConfig {
        learning_rate: 3e-3,
        dropout_p: 0.0,
        ..config(30)
    });
    assert_eq!(ckpt.log.len(), 30);
    assert!(ckpt.log.iter().all(|e| e.test_loss.is_some() && e.tau > 0.0));
    assert!(ckpt.log.last().unwrap().train_loss < ckpt.log[0].train_loss);
}

#[test]
fn identity_projector_trains() {
    let cfg = TrainConfig {
        projector: ProjectorMode::Identity,
        embed_dim: 8,
        shared_dim: 8,
        ..config(2)
    };
    let ckpt = run(&cfg);
    assert!(ckpt.model.params().iter().all(|p| !p.name.starts_with("projector.")));
    assert_eq!(ModelCheckpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap(), ckpt);
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let bytes = run(&config(1)).to_bytes().unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(ModelCheckpoint::from_bytes(&bad), Err(Error::BadMagic { .. })));
    assert!(matches!(
        ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 4]),
        Err(Error::Truncated { .. })
    ));
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 4]);
    assert!(matches!(ModelCheckpoint::from_bytes(&long), Err(Error::SizeMismatch { .. })));
    let mut version = bytes;
    version[4] = 9;
    assert!(matches!(ModelCheckpoint::from_bytes(&version), Err(Error::VersionMismatch { .. })));
}

#[test]
fn mismatched_data_is_rejected_on_resume() {
    let ckpt = run(&config(1));
    let (data, train, _) = small_data();
    let narrow = train.select_channels(&train.channel_names[..2]).unwrap();
    let tr = PairedData::new(&narrow, &data.banks[2]).unwrap();
    let mut more = ckpt;
    more.config.epochs = 2;
    assert!(matches!(resume(more, &tr, None, |_| {}), Err(Error::ShapeMismatch { .. })));
}
