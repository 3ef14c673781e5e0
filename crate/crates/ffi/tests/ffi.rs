use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use geosplit_ffi::*;

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = gs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn write_fixture(dir: &Path) -> (CString, CString) {
    let samples = dir.join("samples.csv");
    std::fs::write(
        &samples,
        "id,sequence_id,map_id,x,y,t,keyframe\n\
         a,q1,m,0,0,0,true\n\
         b,q2,m,3,0,0,true\n\
         c,q3,m,100,0,0,true\n\
         d,q4,m,1,1,0,true\n",
    )
    .unwrap();
    let split = dir.join("split.csv");
    std::fs::write(&split, "sample_id,set\na,train\nb,val\nc,val\nd,test\n").unwrap();
    (cpath(&samples), cpath(&split))
}

#[test]
fn audit_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, split) = write_fixture(dir.path());
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(gs_dataset_load(samples.as_ptr(), GS_FORMAT_AUTO, &mut ds), GsStatus::Ok);
        assert_eq!(gs_dataset_len(ds), 4);
        let mut sp = ptr::null_mut();
        assert_eq!(gs_split_load(split.as_ptr(), &mut sp), GsStatus::Ok);
        let (mut v, mut t) = (0.0, 0.0);
        assert_eq!(gs_audit(ds, sp, 5.0, &mut v, &mut t), GsStatus::Ok);
        assert_eq!((v, t), (0.5, 1.0));
        assert_eq!(gs_audit(ds, sp, -1.0, &mut v, &mut t), GsStatus::InvalidArgument);
        assert!(last_error().contains("positive"));
        gs_split_free(sp);
        gs_dataset_free(ds);
    }
}

#[test]
fn load_errors_set_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cpath(&dir.path().join("nope.jsonl"));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,sequence_id,map_id,x,y,t,keyframe\na,q,m,zero,0,0,true\n").unwrap();
    let bad = cpath(&bad);
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(gs_dataset_load(missing.as_ptr(), GS_FORMAT_AUTO, &mut ds), GsStatus::Io);
        assert!(ds.is_null());
        assert_eq!(gs_dataset_load(bad.as_ptr(), GS_FORMAT_CSV, &mut ds), GsStatus::Parse);
        assert!(last_error().contains("line 2"));
        assert_eq!(gs_dataset_load(ptr::null(), 0, &mut ds), GsStatus::NullPointer);
        assert_eq!(gs_dataset_load(bad.as_ptr(), 9, &mut ds), GsStatus::InvalidArgument);
        assert_eq!(gs_dataset_len(ptr::null()), 0);
        gs_dataset_free(ptr::null_mut());
    }
}

#[test]
fn chamfer_and_iou() {
    let a = [0.0, 0.0, 10.0, 0.0];
    let b = [0.0, 2.0, 10.0, 2.0];
    let mut d = 0.0;
    unsafe {
        assert_eq!(gs_chamfer(a.as_ptr(), 2, b.as_ptr(), 2, 0.5, &mut d), GsStatus::Ok);
        assert_eq!(d, 2.0);
        assert_eq!(gs_chamfer(a.as_ptr(), 1, b.as_ptr(), 2, 0.5, &mut d), GsStatus::Domain);
        let p = [1u8, 1, 0, 0];
        let g = [0u8, 1, 1, 0];
        let mut iou = 0.0;
        assert_eq!(gs_iou(p.as_ptr(), g.as_ptr(), 4, &mut iou), GsStatus::Ok);
        assert_eq!(iou, 1.0 / 3.0);
        let empty = [0u8; 4];
        assert_eq!(gs_iou(empty.as_ptr(), empty.as_ptr(), 4, &mut iou), GsStatus::Ok);
        assert_eq!(iou, 1.0);
    }
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.jsonl");
    let pred = dir.path().join("pred.jsonl");
    std::fs::write(
        &gt,
        "{\"frame_id\":\"f\",\"class\":\"divider\",\"points\":[[0,0],[5,0]]}\n\
         {\"frame_id\":\"f\",\"class\":\"boundary\",\"points\":[[0,3],[5,4]]}\n",
    )
    .unwrap();
    std::fs::write(
        &pred,
        "{\"frame_id\":\"f\",\"class\":\"divider\",\"points\":[[0,0],[5,0]],\"confidence\":0.8}\n\
         {\"frame_id\":\"f\",\"class\":\"boundary\",\"points\":[[0,3],[5,4]],\"confidence\":0.7}\n",
    )
    .unwrap();
    let (gt, pred) = (cpath(&gt), cpath(&pred));
    unsafe {
        let (mut g, mut p) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(gs_frames_load(gt.as_ptr(), false, &mut g), GsStatus::Ok);
        assert_eq!(gs_frames_load(pred.as_ptr(), true, &mut p), GsStatus::Ok);
        let ts = [0.5, 1.0, 1.5];
        let mut overall = 0.0;
        let mut per_class = [0.0; 3];
        assert_eq!(
            gs_evaluate(p, g, ts.as_ptr(), 3, 0.5, &mut overall, per_class.as_mut_ptr()),
            GsStatus::Ok
        );
        assert_eq!(overall, 1.0);
        assert_eq!(&per_class[..2], &[1.0, 1.0]);
        assert!(per_class[2].is_nan());
        gs_frames_free(p);
        gs_frames_free(g);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(gs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/geosplit.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "gs_dataset_load",
        "gs_split_load",
        "gs_audit",
        "gs_chamfer",
        "gs_iou",
        "gs_evaluate",
        "gs_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"geosplit.h\"\n\
         int main(void) {\n\
           GsDataset *ds = 0;\n\
           GsStatus s = gs_dataset_load(\"x.csv\", GS_FORMAT_AUTO, &ds);\n\
           gs_dataset_free(ds);\n\
           return s == GS_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
