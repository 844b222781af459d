use std::collections::HashMap;
use std::path::Path;

use crate::dataset::{multiset, params, InteractionKey, ProvenanceStep, StepCategory};
use crate::error::Result;
use crate::io::{self, FormatKind, FormatSpec};

use super::{finish, SplitResult};

/// Reads published split files. Overlap between parts is reported as a
/// warning on the split step rather than rejected.
pub fn precomputed_split(
    train_src: impl AsRef<Path>,
    test_src: impl AsRef<Path>,
    val_src: Option<&Path>,
    spec: &FormatSpec,
) -> Result<SplitResult> {
    let (train_src, test_src) = (train_src.as_ref(), test_src.as_ref());
    let train = io::read(train_src, spec)?;
    let test = io::read(test_src, spec)?;
    let val = val_src.map(|p| io::read(p, spec)).transpose()?;

    let mut p = params([
        ("train_path", train_src.display().to_string().into()),
        ("test_path", test_src.display().to_string().into()),
    ]);
    if let Some(v) = val_src {
        p.insert("val_path".into(), v.display().to_string().into());
    }
    if spec.kind != FormatKind::Tabular {
        p.insert("format".into(), spec.kind.operation().into());
    }
    p.extend(spec.to_params());
    let mut step = ProvenanceStep::new(StepCategory::Split, "PrecomputedSplit", p);

    let mut named = vec![
        ("train", multiset(train.interactions())),
        ("test", multiset(test.interactions())),
    ];
    if let Some(v) = &val {
        named.push(("val", multiset(v.interactions())));
    }
    let mut n_warn = 0;
    for a in 0..named.len() {
        for b in a + 1..named.len() {
            let shared = overlap(&named[a].1, &named[b].1);
            if shared > 0 {
                let key = if n_warn == 0 {
                    "warning".to_string()
                } else {
                    format!("warning_{n_warn}")
                };
                step = step.with_outcome(
                    &key,
                    format!(
                        "overlapping_splits: {} and {} share {shared} interactions",
                        named[a].0, named[b].0
                    ),
                );
                n_warn += 1;
            }
        }
    }

    let train_rows = train.interactions().to_vec();
    let test_rows = test.interactions().to_vec();
    let val_part = val.as_ref().map(|v| (v, v.interactions().to_vec()));
    Ok(finish(step, (&train, train_rows), (&test, test_rows), val_part))
}

fn overlap(a: &HashMap<InteractionKey, usize>, b: &HashMap<InteractionKey, usize>) -> usize {
    a.iter().map(|(k, &n)| n.min(b.get(k).copied().unwrap_or(0))).sum()
}
