use std::ffi::{CStr, CString};
use std::ptr;

use varexp_ffi::*;

fn last_error() -> String {
    let p = vx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn square(n: u32) -> *mut VxGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { vx_grid_rectangle(1.0, 1.0, n, &mut g) }, VxStatus::Ok);
    g
}

#[test]
fn grid_lifecycle_and_nodes() {
    let g = square(8);
    let n = unsafe { vx_grid_node_count(g) };
    assert_eq!(n, 81);
    let mut xy = vec![0.0; 2 * n];
    assert_eq!(unsafe { vx_grid_nodes(g, xy.as_mut_ptr(), xy.len()) }, VxStatus::Ok);
    assert_eq!(&xy[2 * 80..], &[1.0, 1.0]);
    assert_eq!(unsafe { vx_grid_nodes(g, xy.as_mut_ptr(), 3) }, VxStatus::InvalidArgument);
    unsafe { vx_grid_free(g) };
    unsafe { vx_grid_free(ptr::null_mut()) };
    assert_eq!(unsafe { vx_grid_node_count(ptr::null()) }, 0);
}

#[test]
fn json_constructor_and_errors() {
    let mut g = ptr::null_mut();
    let ok = CString::new(r#"{"shape": "disk", "r": 1, "n": 16}"#).unwrap();
    assert_eq!(unsafe { vx_grid_from_json(ok.as_ptr(), &mut g) }, VxStatus::Ok);
    unsafe { vx_grid_free(g) };

    let bad = CString::new(r#"{"shape": "disk", "radius": 1}"#).unwrap();
    assert_eq!(unsafe { vx_grid_from_json(bad.as_ptr(), &mut g) }, VxStatus::Parse);
    assert!(last_error().contains("radius"));
    assert_eq!(unsafe { vx_grid_from_json(ptr::null(), &mut g) }, VxStatus::NullPointer);
    assert_eq!(unsafe { vx_grid_disk(-1.0, 16, &mut g) }, VxStatus::InvalidArgument);
    assert_eq!(unsafe { vx_grid_disk(1.0, 16, ptr::null_mut()) }, VxStatus::NullPointer);
}

#[test]
fn norms_match_closed_forms() {
    let g = square(16);
    let n = unsafe { vx_grid_node_count(g) };
    let ones = vec![1.0; n];
    let p = CString::new("2").unwrap();
    let mut out = 0.0;
    let st = unsafe { vx_luxemburg_norm(g, ones.as_ptr(), n, p.as_ptr(), VxNormVariant::Weighted, &mut out) };
    assert_eq!(st, VxStatus::Ok);
    assert!((out - 0.5f64.sqrt()).abs() < 1e-12);
    let st = unsafe { vx_luxemburg_norm(g, ones.as_ptr(), n, p.as_ptr(), VxNormVariant::Classical, &mut out) };
    assert_eq!(st, VxStatus::Ok);
    assert!((out - 1.0).abs() < 1e-12);
    let st = unsafe { vx_gradient_norm(g, ones.as_ptr(), n, p.as_ptr(), VxNormVariant::Weighted, &mut out) };
    assert_eq!(st, VxStatus::Ok);
    assert_eq!(out, 0.0);

    let low = CString::new("1").unwrap();
    let st = unsafe { vx_luxemburg_norm(g, ones.as_ptr(), n, low.as_ptr(), VxNormVariant::Weighted, &mut out) };
    assert_eq!(st, VxStatus::NonAdmissible);
    let junk = CString::new("2 +").unwrap();
    let st = unsafe { vx_luxemburg_norm(g, ones.as_ptr(), n, junk.as_ptr(), VxNormVariant::Weighted, &mut out) };
    assert_eq!(st, VxStatus::Parse);
    let st = unsafe { vx_luxemburg_norm(g, ones.as_ptr(), n - 1, p.as_ptr(), VxNormVariant::Weighted, &mut out) };
    assert_eq!(st, VxStatus::InvalidArgument);
    unsafe { vx_grid_free(g) };
}

#[test]
fn distance_and_eigenvalue() {
    let g = square(16);
    let n = unsafe { vx_grid_node_count(g) };
    let mut d = vec![0.0; n];
    let mut lam_inf = 0.0;
    assert_eq!(unsafe { vx_distance(g, d.as_mut_ptr(), n, &mut lam_inf) }, VxStatus::Ok);
    assert_eq!(lam_inf, 2.0);

    let two = CString::new("2").unwrap();
    let mut lambda = 0.0;
    let mut u = vec![0.0; n];
    let st = unsafe { vx_minimize(g, two.as_ptr(), two.as_ptr(), &mut lambda, u.as_mut_ptr(), n) };
    assert_eq!(st, VxStatus::Ok);
    // P1 overestimates π√2 on a coarse grid
    let exact = std::f64::consts::PI * 2f64.sqrt();
    assert!(lambda > exact && lambda < 1.05 * exact, "{lambda}");
    assert!(u.iter().all(|&v| v >= 0.0));

    let mut mu = 0.0;
    let st = unsafe { vx_direct_mu(g, two.as_ptr(), 4, &mut mu, ptr::null_mut(), 0) };
    assert_eq!(st, VxStatus::Ok);
    assert!(mu > 0.0 && mu < lambda);
    unsafe { vx_grid_free(g) };
}
