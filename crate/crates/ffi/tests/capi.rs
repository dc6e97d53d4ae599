use std::ffi::{CStr, CString};
use std::ptr;

use engae::io::{Label, NormStats, Sample};
use engae::models::{save_checkpoint, Arch, Model, ModelConfig};
use engae::seqnn::{Mat, SeqTensor};
use engae_ffi::*;

fn small_model(arch: Arch) -> Model {
    let cfg = ModelConfig {
        levels: 2,
        hidden: 4,
        kernel: 3,
        ..ModelConfig::full(arch, 3, 12)
    };
    Model::build(cfg, 11).unwrap()
}

fn input() -> Mat {
    Mat::from_shape_fn((12, 3), |(t, c)| (t as f64 * 0.3 + c as f64).sin())
}

fn last_error() -> String {
    let p = engae_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bytes_round_trip_scores_match() {
    for arch in [Arch::TcnAe, Arch::TcnBc] {
        let model = small_model(arch);
        let bytes = save_checkpoint(&model);
        let mut h: *mut EngaeModel = ptr::null_mut();
        let st = unsafe { engae_model_load_bytes(bytes.as_ptr(), bytes.len(), &mut h) };
        assert_eq!(st, EngaeStatus::Ok);

        let (mut t, mut n) = (0usize, 0usize);
        assert_eq!(unsafe { engae_model_input_shape(h, &mut t, &mut n) }, EngaeStatus::Ok);
        assert_eq!((t, n), (12, 3));
        let mut ae = -1;
        assert_eq!(unsafe { engae_model_is_autoencoder(h, &mut ae) }, EngaeStatus::Ok);
        assert_eq!(ae == 1, arch.is_autoencoder());

        let x = input();
        let mut got = f64::NAN;
        let flat: Vec<f64> = x.iter().copied().collect();
        let st = unsafe { engae_model_score(h, flat.as_ptr(), 12, 3, &mut got) };
        assert_eq!(st, EngaeStatus::Ok);
        let s = SeqTensor::new(x).unwrap();
        let want = if arch.is_autoencoder() {
            let y = model.forward_ae(&s).unwrap();
            engae::models::reconstruction_error(s.as_mat(), y.as_mat()).unwrap()
        } else {
            model.forward_bc(&s).unwrap()
        };
        assert_eq!(got.to_bits(), want.to_bits());

        let st = unsafe { engae_model_score(h, flat.as_ptr(), 4, 9, &mut got) };
        assert_eq!(st, EngaeStatus::Input);
        assert!(last_error().contains("expected a 12x3"), "{}", last_error());
        unsafe { engae_model_free(h) };
    }
}

#[test]
fn load_from_dir_normalizes() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(Arch::TcnAe);
    std::fs::write(dir.path().join("model.ckpt"), save_checkpoint(&model)).unwrap();
    let engaged = Sample::new("e", SeqTensor::new(input() * 3.0 + 1.0).unwrap(), Label::Engaged);
    let stats = NormStats::fit(&[engaged], vec!["a".into(), "b".into(), "c".into()]).unwrap();
    stats.write(&dir.path().join("stats.json")).unwrap();

    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut h: *mut EngaeModel = ptr::null_mut();
    assert_eq!(unsafe { engae_model_load_dir(path.as_ptr(), &mut h) }, EngaeStatus::Ok);
    let raw = input() * 3.0 + 1.0;
    let flat: Vec<f64> = raw.iter().copied().collect();
    let mut got = 0.0;
    assert_eq!(
        unsafe { engae_model_score(h, flat.as_ptr(), 12, 3, &mut got) },
        EngaeStatus::Ok
    );
    let mut s = Sample::new("x", SeqTensor::new(raw).unwrap(), Label::Engaged);
    stats.apply(&mut s).unwrap();
    let y = model.forward_ae(&s.data).unwrap();
    let want = engae::models::reconstruction_error(s.data.as_mat(), y.as_mat()).unwrap();
    assert_eq!(got.to_bits(), want.to_bits());
    unsafe { engae_model_free(h) };

    let ckpt = CString::new(dir.path().join("model.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { engae_model_load(ckpt.as_ptr(), &mut h) }, EngaeStatus::Ok);
    unsafe { engae_model_free(h) };
}

#[test]
fn errors_are_reported() {
    let mut h: *mut EngaeModel = ptr::null_mut();
    let junk = b"not a checkpoint";
    let st = unsafe { engae_model_load_bytes(junk.as_ptr(), junk.len(), &mut h) };
    assert_eq!(st, EngaeStatus::Format);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(unsafe { engae_model_load(missing.as_ptr(), &mut h) }, EngaeStatus::Io);
    assert!(last_error().contains("/nonexistent/model.ckpt"));

    assert_eq!(
        unsafe { engae_model_load(ptr::null(), &mut h) },
        EngaeStatus::NullPointer
    );
    unsafe { engae_model_free(ptr::null_mut()) };

    let mut v = 0.0;
    assert_eq!(
        unsafe { engae_model_score(ptr::null(), [0.0].as_ptr(), 1, 1, &mut v) },
        EngaeStatus::NullPointer
    );
}

#[test]
fn metric_helpers() {
    let scores = [0.9, 0.2, 0.8, 0.3];
    let labels = [1u8, 1, 0, 0];
    let mut auc = 0.0;
    assert_eq!(
        unsafe { engae_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) },
        EngaeStatus::Ok
    );
    assert_eq!(auc, 0.5);
    assert!(engae_last_error().is_null());

    let mut ap = 0.0;
    let last = [0.9, 0.8, 0.7, 0.1];
    let l = [0u8, 0, 0, 1];
    assert_eq!(
        unsafe { engae_pr_auc(last.as_ptr(), l.as_ptr(), 4, &mut ap) },
        EngaeStatus::Ok
    );
    assert_eq!(ap, 0.25);

    let one_class = [0u8; 4];
    assert_eq!(
        unsafe { engae_roc_auc(scores.as_ptr(), one_class.as_ptr(), 4, &mut auc) },
        EngaeStatus::Input
    );
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/engae.h")).unwrap();
    for name in [
        "engae_model_load",
        "engae_model_load_bytes",
        "engae_model_load_dir",
        "engae_model_free",
        "engae_model_input_shape",
        "engae_model_score",
        "engae_roc_auc",
        "engae_pr_auc",
        "engae_last_error",
        "typedef struct EngaeModel EngaeModel",
        "ENGAE_STATUS_OK",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let v = unsafe { CStr::from_ptr(engae_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
