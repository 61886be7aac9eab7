use neuroalign::encoders::Arch;
use neuroalign::gradcheck::{self, GradCheck, GradCheckDims};

const TOL: f64 = 1e-5;

fn assert_all_pass(checks: &[GradCheck]) {
    assert!(!checks.is_empty());
    let bad: Vec<_> = checks.iter().filter(|c| !(c.rel_error < TOL)).collect();
    assert!(bad.is_empty(), "gradient mismatches: {bad:#?}");
}

#[test]
fn tensor_ops() {
    assert_all_pass(&gradcheck::check_ops(&GradCheckDims::default(), 11).unwrap());
}

#[test]
fn contrastive_loss_including_temperature() {
    let checks = gradcheck::check_loss(&GradCheckDims::default(), 12).unwrap();
    assert!(checks.iter().any(|c| c.name.ends_with("log_scale")));
    assert_all_pass(&checks);
}

#[test]
fn eegproject() {
    assert_all_pass(&gradcheck::check_encoder(Arch::EegProject, &GradCheckDims::default(), 13).unwrap());
}

#[test]
fn tsconv() {
    assert_all_pass(&gradcheck::check_encoder(Arch::TsConv, &GradCheckDims::default(), 14).unwrap());
}

#[test]
fn projectors() {
    assert_all_pass(&gradcheck::check_projector(&GradCheckDims::default(), 15).unwrap());
}

#[test]
fn end_to_end_every_trainable() {
    for arch in [Arch::EegProject, Arch::TsConv] {
        let checks = gradcheck::check_end_to_end(arch, &GradCheckDims::default(), 16).unwrap();
        assert!(checks.iter().any(|c| c.name.ends_with("/log_scale")));
        assert!(checks.iter().any(|c| c.name.contains("projector.")));
        assert_all_pass(&checks);
    }
}

#[test]
fn a_wrong_gradient_is_caught() {
    use neuroalign::Tensor;
    let x = Tensor::<f64>::from_rows(&[&[1.0, 2.0]]);
    let wrong = Tensor::from_rows(&[&[2.0, 4.1]]);
    let checks = gradcheck::check_tensors("square", &["x"], &[x], &[wrong], |p| Ok(p[0].sum_sq())).unwrap();
    assert!(checks[0].rel_error > 1e-3);
}
