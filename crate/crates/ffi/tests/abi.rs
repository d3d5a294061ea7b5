use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use vqe_ffi::*;

const TWO_SPIN: &str = r#"{"n_qubits":2,"terms":[
    {"coeff":-1.0,"paulis":"XX"},{"coeff":-1.0,"paulis":"YY"},
    {"coeff":1.0,"paulis":"ZZ"},{"coeff":1.0,"paulis":"ZI"},{"coeff":1.0,"paulis":"IZ"}]}"#;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        vqe_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn hamiltonian(json: &str) -> *mut VqeHamiltonian {
    let json = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { vqe_hamiltonian_from_json(json.as_ptr(), &mut h) }, VqeStatus::Ok);
    h
}

#[test]
fn two_spin_round_trip() {
    let h = hamiltonian(TWO_SPIN);
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(vqe_state_basis(2, 0b01, &mut s), VqeStatus::Ok);
        let (mut n, mut terms) = (0usize, 0usize);
        assert_eq!(vqe_hamiltonian_n_qubits(h, &mut n), VqeStatus::Ok);
        assert_eq!(vqe_hamiltonian_n_terms(h, &mut terms), VqeStatus::Ok);
        assert_eq!((n, terms), (2, 5));

        let (mut mean, mut var) = (0.0, 0.0);
        assert_eq!(vqe_expectation(h, s, &mut mean, &mut var), VqeStatus::Ok);
        assert!((mean + 1.0).abs() < 1e-12);
        assert!((var - 4.0).abs() < 1e-12);

        let mut ground = 0.0;
        assert_eq!(vqe_hamiltonian_ground_energy(h, &mut ground), VqeStatus::Ok);
        assert!((ground + 3.0).abs() < 1e-12);

        let mut est = VqeEstimate::default();
        assert_eq!(vqe_estimate(h, s, 0.1, VqeEstimatorMode::Frequentist, 5, 0, &mut est), VqeStatus::Ok);
        assert!((est.value + 1.0).abs() <= 0.2);
        assert!(est.preparations >= 1000);
        let mut again = VqeEstimate::default();
        assert_eq!(vqe_estimate(h, s, 0.1, VqeEstimatorMode::Frequentist, 5, 0, &mut again), VqeStatus::Ok);
        assert_eq!(est, again);

        assert_eq!(vqe_estimate(h, s, 0.1, VqeEstimatorMode::Bayesian, 5, 100, &mut est), VqeStatus::BudgetExhausted);
        vqe_state_free(s);
        vqe_hamiltonian_free(h);
    }
}

#[test]
fn integrals_give_h2_ground_energy() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/h2_sto3g.txt")).unwrap();
    let text = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(vqe_hamiltonian_from_integrals(text.as_ptr(), &mut h), VqeStatus::Ok);
        let mut e = 0.0;
        assert_eq!(vqe_hamiltonian_ground_energy(h, &mut e), VqeStatus::Ok);
        assert!((e + 1.137270167).abs() < 1e-8, "{e}");
        vqe_hamiltonian_free(h);
    }
}

#[test]
fn amplitudes_are_normalized() {
    let h = hamiltonian(TWO_SPIN);
    let amps = [0.0, 0.0, 3.0, 0.0, 0.0, 4.0, 0.0, 0.0];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(vqe_state_from_amplitudes(amps.as_ptr(), 4, &mut s), VqeStatus::Ok);
        let (mut mean, mut var) = (0.0, 0.0);
        assert_eq!(vqe_expectation(h, s, &mut mean, &mut var), VqeStatus::Ok);
        // (3|01> + 4i|10>)/5: <ZZ> = -1, <ZI + IZ> = 0, and the XX + YY cross term is imaginary, so it drops out.
        assert!((mean + 1.0).abs() < 1e-12, "{mean}");
        assert_eq!(vqe_state_from_amplitudes(amps.as_ptr(), 3, &mut s), VqeStatus::InvalidArgument);
        vqe_state_free(s);
        vqe_hamiltonian_free(h);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut h = ptr::null_mut();
    unsafe {
        let bad = CString::new(r#"{"n_qubits":1,"terms":[{"coeff":1.0,"paulis":"Q"}]}"#).unwrap();
        assert_ne!(vqe_hamiltonian_from_json(bad.as_ptr(), &mut h), VqeStatus::Ok);
        assert!(h.is_null());
        assert!(!last_error().is_empty());

        let unknown = CString::new(r#"{"n_qubits":1,"terms":[],"extra":1}"#).unwrap();
        assert_eq!(vqe_hamiltonian_from_json(unknown.as_ptr(), &mut h), VqeStatus::Parse);
        assert!(last_error().contains("extra"));

        assert_eq!(vqe_hamiltonian_from_json(ptr::null(), &mut h), VqeStatus::NullPointer);
        let mut n = 0usize;
        assert_eq!(vqe_hamiltonian_n_qubits(ptr::null(), &mut n), VqeStatus::NullPointer);

        let mut s = ptr::null_mut();
        assert_eq!(vqe_state_basis(2, 4, &mut s), VqeStatus::InvalidArgument);
        assert_eq!(vqe_state_basis(80, 0, &mut s), VqeStatus::Capacity);

        let ok = CString::new(TWO_SPIN).unwrap();
        assert_eq!(vqe_hamiltonian_from_json(ok.as_ptr(), &mut h), VqeStatus::Ok);
        assert!(last_error().is_empty());
        vqe_hamiltonian_free(h);
        vqe_hamiltonian_free(ptr::null_mut());
        vqe_state_free(ptr::null_mut());
    }
}

#[test]
fn message_is_truncated_to_buffer() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(vqe_hamiltonian_from_json(ptr::null(), &mut h), VqeStatus::NullPointer);
        let full = vqe_last_error_message(ptr::null_mut(), 0);
        let mut buf = [1 as std::ffi::c_char; 5];
        assert_eq!(vqe_last_error_message(buf.as_mut_ptr(), buf.len()), full);
        assert_eq!(buf[4], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 4);
    }
}

#[test]
fn certificate_example() {
    let mut c = VqeCertificate::default();
    unsafe {
        assert_eq!(vqe_certify(-1.0, 0.36, 2.0, &mut c), VqeStatus::Ok);
        assert_eq!(c.ground_overlap, 0.7);
        assert!((c.weinstein_low + 1.6).abs() < 1e-15 && (c.weinstein_high + 0.4).abs() < 1e-15);
        assert_eq!(vqe_certify(0.0, 9.0, 2.0, &mut c), VqeStatus::Ok);
        assert!(c.ground_overlap.is_nan());
        assert_eq!(vqe_certify(0.0, -1.0, 2.0, &mut c), VqeStatus::InvalidArgument);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(vqe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vqe.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "vqe_last_error_message",
        "vqe_hamiltonian_from_json",
        "vqe_hamiltonian_from_integrals",
        "vqe_hamiltonian_free",
        "vqe_hamiltonian_n_qubits",
        "vqe_hamiltonian_n_terms",
        "vqe_hamiltonian_ground_energy",
        "vqe_state_basis",
        "vqe_state_from_amplitudes",
        "vqe_state_free",
        "vqe_expectation",
        "vqe_estimate",
        "vqe_certify",
        "vqe_version",
        "typedef struct VqeHamiltonian VqeHamiltonian;",
        "VqeStatus_BudgetExhausted = 10",
    ] {
        assert!(text.contains(name), "{name}");
    }
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    // deps/<test binary> -> the profile directory holding libvqe_ffi.a
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libvqe_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("ffi_c");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "vqe.h"

int main(void) {
    const char *json = "{\"n_qubits\":1,\"terms\":[{\"coeff\":0.5,\"paulis\":\"Z\"},{\"coeff\":0.5,\"paulis\":\"X\"}]}";
    VqeHamiltonian *h = NULL;
    VqeState *s = NULL;
    double mean = 0.0, var = 0.0, ground = 0.0;
    char msg[128];
    if (vqe_hamiltonian_from_json(json, &h) != VqeStatus_Ok) return 1;
    if (vqe_state_basis(1, 0, &s) != VqeStatus_Ok) return 2;
    if (vqe_expectation(h, s, &mean, &var) != VqeStatus_Ok) return 3;
    if (vqe_hamiltonian_ground_energy(h, &ground) != VqeStatus_Ok) return 4;
    if (vqe_state_basis(1, 2, &s) != VqeStatus_InvalidArgument) return 5;
    if (vqe_last_error_message(msg, sizeof msg) == 0) return 6;
    printf("%.12f %.12f %.12f\n", mean, var, ground);
    vqe_state_free(s);
    vqe_hamiltonian_free(h);
    return fabs(ground + sqrt(0.5)) < 1e-12 ? 0 : 7;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.500000000000 0.250000000000 -0.707106781187");
}
