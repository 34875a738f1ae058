use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use spams_core::data::{generate_synthetic, save_dataset, MultiVarSequence};
use spams_core::experiment::SynthParams;
use spams_core::training;
use spams_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = spams_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn write_synth(dir: &Path, seed: u64) {
    let params = SynthParams {
        per_class: 12,
        steps: 20,
        dims: 2,
        pattern_len: 4,
        offset_lo: 3,
        offset_hi: 10,
        seed,
        ..SynthParams::default()
    };
    let set = generate_synthetic(&params.to_spec().unwrap()).unwrap();
    save_dataset(&set.dataset, dir).unwrap();
}

fn load(dir: &Path) -> *mut SpamsDataset {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { spams_dataset_load(cstr(dir).as_ptr(), &mut ds) }, SpamsStatus::Ok);
    ds
}

#[test]
fn null_arguments_are_reported() {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { spams_dataset_load(ptr::null(), &mut ds) }, SpamsStatus::NullPointer);
    assert!(ds.is_null());
    assert!(last_error().contains("dir"));
    assert_eq!(unsafe { spams_model_save(ptr::null(), c"x".as_ptr()) }, SpamsStatus::NullPointer);
    assert_eq!(unsafe { spams_dataset_len(ptr::null()) }, 0);
    assert_eq!(unsafe { spams_model_num_classes(ptr::null()) }, 0);
    unsafe {
        spams_dataset_free(ptr::null_mut());
        spams_model_free(ptr::null_mut());
    }
}

#[test]
fn missing_files_map_to_io_and_bad_models_to_model() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ds = ptr::null_mut();
    let status = unsafe { spams_dataset_load(cstr(&tmp.path().join("absent")).as_ptr(), &mut ds) };
    assert_eq!(status, SpamsStatus::Io);
    assert!(!last_error().is_empty());

    let bad = tmp.path().join("bad.model");
    std::fs::write(&bad, "not a model\n").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { spams_model_load(cstr(&bad).as_ptr(), &mut m) }, SpamsStatus::Model);
    assert!(m.is_null());
}

#[test]
fn train_predict_profile_and_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let (tr, va) = (tmp.path().join("train"), tmp.path().join("val"));
    write_synth(&tr, 1);
    write_synth(&va, 2);
    let (train_ds, val_ds) = (load(&tr), load(&va));
    assert_eq!(unsafe { spams_dataset_len(train_ds) }, 24);
    assert_eq!(unsafe { spams_dataset_num_classes(train_ds) }, 2);

    let mut model = ptr::null_mut();
    let bad_cfg = c"no_such_key=1";
    assert_eq!(
        unsafe { spams_model_train(train_ds, val_ds, bad_cfg.as_ptr(), &mut model) },
        SpamsStatus::Config
    );
    let cfg = c"hidden=4\nmax_epochs=3\nwindow=4\nseed=5";
    assert_eq!(unsafe { spams_model_train(train_ds, val_ds, cfg.as_ptr(), &mut model) }, SpamsStatus::Ok);
    assert_eq!(unsafe { spams_model_num_classes(model) }, 2);
    assert_eq!(unsafe { spams_model_input_dims(model) }, 2);

    let path = tmp.path().join("m.model");
    assert_eq!(unsafe { spams_model_save(model, cstr(&path).as_ptr()) }, SpamsStatus::Ok);
    let core_model = spams_core::model_io::load_model(&path).unwrap();

    let values: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
    let seq = MultiVarSequence::new(20, 2, values.clone()).unwrap();
    let want = training::predict(&core_model, &seq).unwrap();

    let mut post = [0.0; 2];
    let mut t_star = [0usize; 2];
    let s = unsafe { spams_predict(model, values.as_ptr(), 20, 2, post.as_mut_ptr(), t_star.as_mut_ptr(), 2) };
    assert_eq!(s, SpamsStatus::Ok);
    assert_eq!(post.map(f64::to_bits).to_vec(), want.posterior.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(t_star.to_vec(), want.t_star);

    let s = unsafe { spams_predict(model, values.as_ptr(), 20, 2, post.as_mut_ptr(), ptr::null_mut(), 1) };
    assert_eq!(s, SpamsStatus::BufferTooSmall);
    let s = unsafe { spams_predict(model, values.as_ptr(), 20, 3, post.as_mut_ptr(), ptr::null_mut(), 2) };
    assert_eq!(s, SpamsStatus::Data);

    let mut n_w = 0usize;
    let s = unsafe { spams_profile(model, values.as_ptr(), 20, 2, ptr::null_mut(), 0, &mut n_w) };
    assert_eq!(s, SpamsStatus::BufferTooSmall);
    assert_eq!(n_w, 17);
    let mut prof = vec![0.0; n_w * 2];
    let s = unsafe { spams_profile(model, values.as_ptr(), 20, 2, prof.as_mut_ptr(), prof.len(), &mut n_w) };
    assert_eq!(s, SpamsStatus::Ok);
    assert_eq!(prof, core_model.profile(&seq).unwrap().values());

    let mut again = ptr::null_mut();
    assert_eq!(unsafe { spams_model_load(cstr(&path).as_ptr(), &mut again) }, SpamsStatus::Ok);
    let mut post2 = [0.0; 2];
    let s = unsafe { spams_predict(again, values.as_ptr(), 20, 2, post2.as_mut_ptr(), ptr::null_mut(), 2) };
    assert_eq!(s, SpamsStatus::Ok);
    assert_eq!(post.map(f64::to_bits), post2.map(f64::to_bits));

    unsafe {
        spams_model_free(model);
        spams_model_free(again);
        spams_dataset_free(train_ds);
        spams_dataset_free(val_ds);
    }
}

#[test]
fn header_declares_every_export_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/spams.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "spams_last_error",
        "spams_dataset_load",
        "spams_dataset_free",
        "spams_dataset_len",
        "spams_dataset_num_classes",
        "spams_model_train",
        "spams_model_load",
        "spams_model_save",
        "spams_model_free",
        "spams_model_num_classes",
        "spams_model_input_dims",
        "spams_predict",
        "spams_profile",
        "SPAMS_STATUS_BUFFER_TOO_SMALL = 8",
        "typedef struct SpamsModel SpamsModel;",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"spams.h\"\nint main(void) { SpamsModel *m = NULL; return (int)spams_model_load(\"x\", &m); }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping C compile check, {cc} unavailable: {e}"),
    }
}
