use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ssra_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ssra_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn write_corpus(path: &Path, per_label: [usize; 4]) {
    let mut lines = String::new();
    for (label, &n) in per_label.iter().enumerate() {
        for i in 0..n {
            lines.push_str(&format!(
                "{{\"query_id\":\"q{label}-{i}\",\"query\":\"query {label} {i}\",\"doc_id\":\"d{i}\",\"label\":{label}}}\n"
            ));
        }
    }
    std::fs::write(path, lines).unwrap();
}

#[test]
fn corpus_handle_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_corpus(&path, [5, 2, 3, 7]);
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(ssra_corpus_load(cstr(&path).as_ptr(), SsraSchema::Labeled, &mut c), SsraStatus::Ok);
        assert_eq!(ssra_corpus_len(c), 17);

        let mut stats = std::mem::zeroed::<SsraCorpusStats>();
        assert_eq!(ssra_corpus_stats(c, &mut stats), SsraStatus::Ok);
        assert_eq!(stats.label_counts, [5, 2, 3, 7]);
        assert!((stats.label_proportions[3] - 700.0 / 17.0).abs() < 1e-9);

        let mut bin = ptr::null_mut();
        assert_eq!(ssra_corpus_binary_subset(c, &mut bin), SsraStatus::Ok);
        assert_eq!(ssra_corpus_len(bin), 12);

        let mut bal = ptr::null_mut();
        assert_eq!(ssra_corpus_balanced_subset(c, 2, 1, &mut bal), SsraStatus::Ok);
        assert_eq!(ssra_corpus_len(bal), 8);

        let mut short = ptr::null_mut();
        assert_eq!(ssra_corpus_balanced_subset(c, 3, 1, &mut short), SsraStatus::Insufficient);
        assert!(short.is_null());
        assert!(last_error().contains('2'), "{}", last_error());

        let out = dir.path().join("bal.jsonl");
        assert_eq!(ssra_corpus_save(bal, cstr(&out).as_ptr()), SsraStatus::Ok);
        let mut reloaded = ptr::null_mut();
        assert_eq!(ssra_corpus_load(cstr(&out).as_ptr(), SsraSchema::Mixed, &mut reloaded), SsraStatus::Ok);
        assert_eq!(ssra_corpus_len(reloaded), 8);

        let mut dedup = ptr::null_mut();
        assert_eq!(ssra_corpus_dedup(c, &mut dedup), SsraStatus::Ok);
        assert_eq!(ssra_corpus_len(dedup), 17);

        for h in [c, bin, bal, reloaded, dedup] {
            ssra_corpus_free(h);
        }
        ssra_corpus_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(ssra_corpus_load(ptr::null(), SsraSchema::Labeled, &mut c), SsraStatus::NullPointer);
        assert!(last_error().contains("path"));

        let missing = CString::new("/nonexistent/ssra/c.jsonl").unwrap();
        assert_eq!(ssra_corpus_load(missing.as_ptr(), SsraSchema::Labeled, &mut c), SsraStatus::Io);

        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            ssra_corpus_load(bad.as_ptr().cast(), SsraSchema::Labeled, &mut c),
            SsraStatus::InvalidUtf8
        );

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"query_id\":\"a\",\"query\":\"x\",\"doc_id\":\"d\",\"label\":7}\n").unwrap();
        assert_eq!(
            ssra_corpus_load(cstr(&path).as_ptr(), SsraSchema::Labeled, &mut c),
            SsraStatus::InvalidData
        );
        assert!(c.is_null());

        assert_eq!(ssra_corpus_len(ptr::null()), 0);
        let mut stats = std::mem::zeroed::<SsraCorpusStats>();
        assert_eq!(ssra_corpus_stats(ptr::null(), &mut stats), SsraStatus::NullPointer);

        let scores = [0.5];
        let labels = [4u8];
        let mut ap = 0.0;
        assert_eq!(
            ssra_average_precision(scores.as_ptr(), labels.as_ptr(), 1, 1, &mut ap),
            SsraStatus::InvalidArgument
        );
        assert_eq!(
            ssra_average_precision(ptr::null(), labels.as_ptr(), 1, 1, &mut ap),
            SsraStatus::NullPointer
        );

        let mut loss = 0.0;
        assert_eq!(
            ssra_weighted_infonce(
                ptr::null(),
                ptr::null(),
                ptr::null(),
                0,
                2,
                0.05,
                &mut loss,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            SsraStatus::InvalidArgument
        );
    }
}

#[test]
fn metrics_match_hand_values() {
    unsafe {
        // Positives at ranks 1 and 3 of 3: AP = (1 + 2/3) / 2.
        let scores = [0.9, 0.5, 0.1];
        let labels = [3u8, 0, 2];
        let mut ap = 0.0;
        assert_eq!(ssra_average_precision(scores.as_ptr(), labels.as_ptr(), 3, 2, &mut ap), SsraStatus::Ok);
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);

        let texts: Vec<CString> = ["a b", "A  b", "c"].iter().map(|s| CString::new(*s).unwrap()).collect();
        let ptrs: Vec<_> = texts.iter().map(|c| c.as_ptr()).collect();
        let (mut rate, mut unique) = (0.0, 0usize);
        assert_eq!(ssra_duplicate_rate(ptrs.as_ptr(), 3, &mut rate, &mut unique), SsraStatus::Ok);
        assert_eq!(unique, 2);
        assert!((rate - 1.0 / 3.0).abs() < 1e-12);

        let t = [1u8, 2, 3, 3];
        let j = [1u8, 2, 2, 3];
        let mut cons = 0.0;
        assert_eq!(ssra_consistency_rate(t.as_ptr(), j.as_ptr(), 4, &mut cons), SsraStatus::Ok);
        assert!((cons - 0.75).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let qrels = dir.path().join("qrels.tsv");
        let run = dir.path().join("run.tsv");
        std::fs::write(&qrels, "q\ta\t3\nq\tb\t1\n").unwrap();
        std::fs::write(&run, "q\tb\t2.0\nq\ta\t1.0\n").unwrap();
        let mut ndcg = 0.0;
        assert_eq!(
            ssra_ndcg_files(cstr(&qrels).as_ptr(), cstr(&run).as_ptr(), 10, SsraGain::Linear, &mut ndcg),
            SsraStatus::Ok
        );
        let expected = (1.0 + 3.0 / 3f64.log2()) / (3.0 + 1.0 / 3f64.log2());
        assert!((ndcg - expected).abs() < 1e-12, "{ndcg} vs {expected}");
    }
}

#[test]
fn loss_gradients_agree_with_finite_differences() {
    let (n, dim) = (3usize, 4usize);
    let q: Vec<f64> = (0..n * dim).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let d: Vec<f64> = (0..n * dim).map(|i| ((i * 5 % 13) as f64 - 6.0) / 6.0).collect();
    let labels = [3u8, 1, 2];
    let tau = 0.1;
    let eval = |q: &[f64]| unsafe {
        let mut loss = 0.0;
        assert_eq!(
            ssra_weighted_infonce(
                q.as_ptr(),
                d.as_ptr(),
                labels.as_ptr(),
                n,
                dim,
                tau,
                &mut loss,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            SsraStatus::Ok
        );
        loss
    };
    let mut gq = vec![0.0; n * dim];
    let mut gd = vec![0.0; n * dim];
    let mut loss = 0.0;
    unsafe {
        assert_eq!(
            ssra_weighted_infonce(
                q.as_ptr(),
                d.as_ptr(),
                labels.as_ptr(),
                n,
                dim,
                tau,
                &mut loss,
                gq.as_mut_ptr(),
                gd.as_mut_ptr()
            ),
            SsraStatus::Ok
        );
    }
    assert!((loss - eval(&q)).abs() < 1e-15);
    let h = 1e-6;
    for i in 0..n * dim {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
        assert!((fd - gq[i]).abs() < 1e-5, "component {i}: {fd} vs {}", gq[i]);
    }
    assert!(gd.iter().any(|g| *g != 0.0));
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(ssra_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("ssra.h").is_file(), "build script did not write the header");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "ssra.h"
int main(void) {
    SsraCorpus *c = NULL;
    SsraCorpusStats st;
    double ap = 0.0;
    const double scores[2] = {0.2, 0.8};
    const uint8_t labels[2] = {0, 3};
    if (ssra_corpus_load("x.jsonl", SSRA_SCHEMA_LABELED, &c) != SSRA_STATUS_OK) {
        const char *msg = ssra_last_error();
        (void)msg;
    }
    (void)ssra_corpus_stats(c, &st);
    (void)ssra_average_precision(scores, labels, 2, 1, &ap);
    ssra_corpus_free(c);
    return 0;
}
"#,
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(&header_dir)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}
