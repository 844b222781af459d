mod common;

use common::*;
use recdata::pipeline::{self, execute, export_history, parse_config, ExecContext, Mode, PipelineOutput, StepStatus};
use recdata::{Dataset, Digest, StepChecksum};

const MOVIELENS_PIPELINE: &str = "pipeline:
- name: load
  operation: MovieLens
  params:
    version: 1m
  checksum: c4d9eecfca2ab87c1945afe126590906
- name: process
  operation: Binarize
  params:
    threshold: 4
  checksum: 0c5a5e05efb79e561a2d9c6b087980ff
- name: process
  operation: UserItemIterativeKCore
  params:
    cores: 2
  checksum: ef1a1bca94111c164d17b03a1a5c1314
- name: split
  operation: RandomHoldOut
  params:
    test_ratio: 0.2
    val_ratio: 0.1
    seed: 42
  checksum:
    test: 81e4150e5230a15d7c0d97b3371ffab1
    val: 65c04aa6c326c832891dfe4815465855
    train: 9a6760e3da74a1984d6d0057739b14ad
- name: export
  operation: Elliot
  params:
    output_path: ./elliot/
";

fn thousand() -> Dataset {
    let mut rng = seeded(1000);
    loop {
        let d = random_dataset(
            &mut rng,
            &Shape {
                users: 60,
                items: 40,
                max_rows: 1000,
                ..Shape::default()
            },
        );
        if d.len() >= 900 {
            return d;
        }
    }
}

fn ctx(dir: &std::path::Path, d: Dataset) -> ExecContext {
    ExecContext {
        base_dir: dir.to_path_buf(),
        offline: true,
        cache_dir: dir.join("cache"),
        load_override: Some(d),
        ..ExecContext::default()
    }
}

fn flip(d: &mut Digest) {
    d.0[0] ^= 0xff;
}

#[test]
fn movielens_pipeline_records_then_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(MOVIELENS_PIPELINE).unwrap();
    let ctx = ctx(dir.path(), thousand());
    let recorded = execute(&config, Mode::Record, &ctx).unwrap();
    let PipelineOutput::Split(s) = &recorded.output else {
        panic!("expected a split")
    };
    assert!(s.val.is_some());
    for f in ["train.tsv", "test.tsv", "val.tsv"] {
        assert!(dir.path().join("elliot").join(f).exists(), "{f}");
    }
    let doc = export_history(&recorded);
    assert!(
        doc.contains("operation: UserItemIterativeKCore\n  params:\n    cores: 2\n"),
        "{doc}"
    );

    let replay = parse_config(&doc).unwrap();
    let verified = execute(&replay, Mode::Verify, &ctx).unwrap();
    assert!(verified.report.passed(), "{:?}", verified.report);
    assert_eq!(export_history(&verified), doc);

    let again = execute(&config, Mode::Record, &ctx).unwrap();
    assert_eq!(export_history(&again), doc);
}

#[test]
fn each_perturbed_digest_is_the_only_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = ctx(dir.path(), thousand());
    let recorded = execute(&parse_config(MOVIELENS_PIPELINE).unwrap(), Mode::Record, &ctx).unwrap();
    let base = recorded.to_config();
    let mut variants = 0;
    for step in 0..base.steps.len() {
        let n_keys = match &base.steps[step].checksum {
            None => 0,
            Some(StepChecksum::Single(_)) => 1,
            Some(StepChecksum::Split(s)) => 2 + s.val.is_some() as usize,
            Some(StepChecksum::Folds(_)) => unreachable!(),
        };
        for key in 0..n_keys {
            let mut c = base.clone();
            match c.steps[step].checksum.as_mut().unwrap() {
                StepChecksum::Single(d) => flip(d),
                StepChecksum::Split(s) => match key {
                    0 => flip(&mut s.test),
                    1 => flip(&mut s.train),
                    _ => flip(s.val.as_mut().unwrap()),
                },
                StepChecksum::Folds(_) => unreachable!(),
            }
            let r = execute(&c, Mode::Verify, &ctx).unwrap();
            assert!(!r.report.passed());
            let bad: Vec<_> = r.report.mismatches().map(|m| m.step).collect();
            assert_eq!(bad, [step + 1]);
            let StepStatus::Mismatch(diffs) = &r.report.steps[step].status else {
                unreachable!()
            };
            assert_eq!(diffs.len(), 1);
            variants += 1;
        }
    }
    assert_eq!(variants, 6);
}

#[test]
fn verify_reports_every_divergent_step() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = ctx(dir.path(), thousand());
    let recorded = execute(&parse_config(MOVIELENS_PIPELINE).unwrap(), Mode::Record, &ctx).unwrap();
    let mut c = recorded.to_config();
    for s in &mut c.steps[1..3] {
        if let Some(StepChecksum::Single(d)) = s.checksum.as_mut() {
            flip(d);
        }
    }
    let r = execute(&c, Mode::Verify, &ctx).unwrap();
    assert_eq!(r.report.mismatches().map(|m| m.step).collect::<Vec<_>>(), [2, 3]);
}

#[test]
fn missing_checksums_fail_only_in_verify_mode() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = ctx(dir.path(), d0());
    let c = parse_config("pipeline:\n- name: load\n  operation: MovieLens\n  params:\n    version: 1m\n- name: process\n  operation: Binarize\n  params:\n    threshold: 4\n").unwrap();
    assert!(execute(&c, Mode::Record, &ctx).unwrap().report.passed());
    let v = execute(&c, Mode::Verify, &ctx).unwrap();
    assert!(!v.report.passed());
    assert!(v.report.steps.iter().all(|s| s.status == StepStatus::Missing));
}

#[test]
fn folds_and_file_loads_replay() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.tsv"),
        "u1\ti1\t5\t100\nu1\ti2\t3\t200\nu2\ti1\t4\t150\nu2\ti3\t2\t300\nu3\ti3\t5\t50\nu3\ti1\t1\t60\n",
    )
    .unwrap();
    let doc = "pipeline:
- name: load
  operation: Tabular
  params:
    path: d.tsv
- name: split
  operation: CrossValidation
  params:
    k: 3
    seed: 9
- name: export
  operation: Tabular
  params:
    output_path: folds
";
    let ctx = ExecContext {
        base_dir: dir.path().to_path_buf(),
        ..ExecContext::default()
    };
    let r = execute(&parse_config(doc).unwrap(), Mode::Record, &ctx).unwrap();
    let PipelineOutput::Folds(f) = &r.output else { panic!() };
    assert_eq!(f.folds.len(), 3);
    assert!(dir.path().join("folds/fold_3/test.tsv").exists());
    let recorded = pipeline::export_history(&r);
    let v = execute(&parse_config(&recorded).unwrap(), Mode::Verify, &ctx).unwrap();
    assert!(v.report.passed(), "{:?}", v.report);
}
