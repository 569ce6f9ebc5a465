use std::ffi::{CStr, CString};
use std::ptr;

use kspace_qa::artifacts::{corrupt_aliasing, AliasingParams, Axis};
use kspace_qa::models::{FrequencyModelConfig, HeadConfig, Model, ModelConfig};
use kspace_qa::numerics::{dft2, RealGrid2D};
use kspace_qa_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(kqa_last_error()) }.to_string_lossy().into_owned()
}

fn ramp(h: usize, w: usize) -> (Vec<f64>, RealGrid2D) {
    let g = RealGrid2D::from_fn(h, w, |y, x| ((3 * y + x * x) % 11) as f64 / 10.0);
    (g.data().to_vec(), g)
}

unsafe fn new_grid(h: usize, w: usize, data: &[f64]) -> *mut KqaGrid {
    let mut g = ptr::null_mut();
    assert_eq!(kqa_grid_new(h, w, data.as_ptr(), &mut g), KQA_OK);
    g
}

#[test]
fn grid_round_trip_and_dft() {
    let (data, lib) = ramp(6, 5);
    unsafe {
        let g = new_grid(6, 5, &data);
        let (mut h, mut w) = (0, 0);
        assert_eq!(kqa_grid_dims(g, &mut h, &mut w), KQA_OK);
        assert_eq!((h, w), (6, 5));
        let mut back = vec![0.0; 30];
        assert_eq!(kqa_grid_read(g, back.as_mut_ptr(), 30), KQA_OK);
        assert_eq!(back, data);
        assert_eq!(kqa_grid_read(g, back.as_mut_ptr(), 29), KQA_ERR_BUFFER);
        assert!(last_error().contains("29"));
        let (mut re, mut im) = (vec![0.0; 30], vec![0.0; 30]);
        assert_eq!(kqa_dft2(g, re.as_mut_ptr(), im.as_mut_ptr(), 30), KQA_OK);
        let k = dft2(&lib).unwrap();
        for (i, z) in k.data().iter().enumerate() {
            assert_eq!((re[i], im[i]), (z.re, z.im));
        }
        kqa_grid_free(g);
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(kqa_grid_new(2, 2, ptr::null(), &mut g), KQA_ERR_NULL);
        assert!(last_error().contains("data"));
        let nan = [f64::NAN; 4];
        assert_eq!(kqa_grid_new(2, 2, nan.as_ptr(), &mut g), KQA_ERR_INVALID);
        let (data, _) = ramp(4, 4);
        let g = new_grid(4, 4, &data);
        let mut out = ptr::null_mut();
        assert_eq!(kqa_corrupt(g, 9, 0, &mut out), KQA_ERR_INVALID);
        assert_eq!(kqa_corrupt(g, 2, 0, &mut out), KQA_ERR_INVALID);
        assert!(last_error().contains("cardiac"));
        kqa_grid_free(g);
        kqa_grid_free(ptr::null_mut());
        kqa_model_free(ptr::null_mut());
    }
}

#[test]
fn corrupt_matches_library() {
    let (data, lib) = ramp(8, 6);
    let expected = corrupt_aliasing(&lib, &AliasingParams { factor: 2, axis: Axis::Rows }).unwrap();
    unsafe {
        let g = new_grid(8, 6, &data);
        let params = CString::new(r#"{"kind":"aliasing","factor":2,"axis":"rows"}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(kqa_corrupt_with_params(g, params.as_ptr(), &mut out), KQA_OK);
        let mut buf = vec![0.0; 48];
        assert_eq!(kqa_grid_read(out, buf.as_mut_ptr(), 48), KQA_OK);
        assert_eq!(buf, expected.data());
        kqa_grid_free(out);
        // seeded draws are repeatable
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(kqa_corrupt(g, 3, 11, &mut a), KQA_OK);
        assert_eq!(kqa_corrupt(g, 3, 11, &mut b), KQA_OK);
        let (mut x, mut y) = (vec![0.0; 48], vec![0.0; 48]);
        kqa_grid_read(a, x.as_mut_ptr(), 48);
        kqa_grid_read(b, y.as_mut_ptr(), 48);
        assert_eq!(x, y);
        kqa_grid_free(a);
        kqa_grid_free(b);
        kqa_grid_free(g);
    }
}

#[test]
fn model_load_and_predict_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let cfg = FrequencyModelConfig {
        input: (12, 12),
        pool: (8, 8),
        head: HeadConfig { hidden: 8, domain_hidden: vec![8], ..Default::default() },
        ..Default::default()
    };
    let mut model = Model::new(ModelConfig::Frequency(cfg), false, 2).unwrap();
    model.save(&path).unwrap();
    // min 0 and max 1 so preprocessing leaves it unchanged
    let img = kspace_qa::data_io::normalize_minmax(&ramp(12, 12).1);
    let expected = model.predict_proba(&model.ingest_images(std::slice::from_ref(&img)).unwrap()).unwrap()[0];
    let k = dft2(&img).unwrap();
    let re: Vec<f64> = k.data().iter().map(|z| z.re).collect();
    let im: Vec<f64> = k.data().iter().map(|z| z.im).collect();
    unsafe {
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(kqa_model_load(cpath.as_ptr(), &mut m), KQA_OK);
        let g = new_grid(12, 12, img.data());
        let mut p = [0.0; KQA_NUM_CLASSES];
        assert_eq!(kqa_model_predict(m, g, p.as_mut_ptr()), KQA_OK);
        assert_eq!(p, expected);
        let mut q = [0.0; KQA_NUM_CLASSES];
        assert_eq!(kqa_model_predict_kspace(m, 12, 12, re.as_ptr(), im.as_ptr(), q.as_mut_ptr()), KQA_OK);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(kqa_model_predict_kspace(m, 10, 10, re.as_ptr(), im.as_ptr(), q.as_mut_ptr()), KQA_ERR_INVALID);
        kqa_model_free(m);
        kqa_grid_free(g);
        let missing = CString::new(dir.path().join("none.ckpt").to_str().unwrap()).unwrap();
        let mut m2 = ptr::null_mut();
        assert_eq!(kqa_model_load(missing.as_ptr(), &mut m2), KQA_ERR_IO);
        assert!(m2.is_null());
    }
}

#[test]
fn class_names_and_header() {
    let name = unsafe { CStr::from_ptr(kqa_class_name(3)) };
    assert_eq!(name.to_str().unwrap(), "gibbs");
    assert!(kqa_class_name(5).is_null());
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/kspace_qa.h")).unwrap();
    for sym in ["kqa_grid_new", "kqa_dft2", "kqa_corrupt", "kqa_model_load", "kqa_model_predict", "KQA_ERR_PANIC", "KqaModel"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "kspace_qa.h"
int run(const double *pixels) {
    struct KqaGrid *img = NULL, *out = NULL;
    struct KqaModel *m = NULL;
    double probs[KQA_NUM_CLASSES];
    if (kqa_grid_new(90, 90, pixels, &img) != KQA_OK) return 1;
    if (kqa_corrupt(img, 3, 7, &out) != KQA_OK) fprintf(stderr, "%s\n", kqa_last_error());
    if (kqa_model_load("model.ckpt", &m) == KQA_OK) {
        kqa_model_predict(m, out, probs);
        kqa_model_free(m);
    }
    kqa_grid_free(out);
    kqa_grid_free(img);
    return 0;
}
"#,
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let status = std::process::Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I", include])
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available, skipping"),
        }
    }
}
