mod common;

use std::fs;

use proptest::prelude::*;
use tactile_rig::autopilot::{AlwaysFirst, CoinFlip};
use tactile_rig::config::DemoConfig;
use tactile_rig::persistence::{read_archive, read_tmp_csv, DATA_XML, MANIFEST, TMP_CSV};
use tactile_rig::session::{Gender, Participant};

use common::*;

/// Set `UPDATE_GOLDEN=1` to rewrite the fixture after an intended format
/// change, then review the diff by hand.
#[test]
fn golden_two_trial_session() {
    let root = tempfile::tempdir().unwrap();
    let runner = run_session(
        golden_config(),
        GOLDEN_SEED,
        root.path(),
        default_participant(),
        false,
        AlwaysFirst,
        None,
    );
    assert_eq!(runner.session().records().len(), 2);
    let dir = &runner.paths().unwrap().dir;
    let golden = fixtures().join("golden");
    let names = [DATA_XML, "data-dfs-foo.csv", "data-dfs-trial.csv", TMP_CSV, MANIFEST];
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for n in names {
            fs::copy(dir.join(n), golden.join(n)).unwrap();
        }
    }
    for n in names {
        let got = fs::read_to_string(dir.join(n)).unwrap();
        let want = fs::read_to_string(golden.join(n)).unwrap_or_else(|e| panic!("{n}: {e}"));
        assert_eq!(got, want, "{n} differs from the golden copy");
    }
}

#[test]
fn golden_trial_file_shape() {
    let text = fs::read_to_string(fixtures().join("golden/data-dfs-trial.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("2,dfs,1,"));
    assert!(lines[1].starts_with("dfs,2,"));
    for l in &lines {
        // Header count (first line only), id, number, presentation, two
        // recordings of "R" plus 10 samples of 7 fields, distance, response.
        let expected = 3 + 2 * (1 + 10 * 7) + 2;
        let n = l.split(',').count();
        assert_eq!(n, if l == &lines[0] { expected + 1 } else { expected });
        assert!(l.ends_with(",First"));
        assert!(l.contains(",0.001000,"));
    }
}

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z ,\"'\u{e9}]{0,10}[A-Za-z]"
}

fn participant() -> impl Strategy<Value = Participant> {
    (
        "[A-Za-z0-9_-]{1,8}",
        name(),
        name(),
        18u32..=120,
        any::<bool>(),
        proptest::option::of(name()),
    )
        .prop_filter("id must not be a dot path", |(id, ..)| id != "." && id != "..")
        .prop_map(|(id, name, surname, age, female, notes)| Participant {
            id,
            name,
            surname,
            age,
            gender: if female { Gender::Female } else { Gender::Male },
            notes,
        })
}

fn config() -> impl Strategy<Value = DemoConfig> {
    (1usize..=7, 1u32..=3, 0u32..=2, 1u32..=4).prop_map(|(n, presentations, training, recordings)| {
        let mut cfg = DemoConfig::young();
        cfg.smposes.truncate(n);
        cfg.experiment.number_presentations = presentations;
        cfg.experiment.number_training_trials = training;
        cfg.experiment.training_index = training.max(1);
        cfg.experiment.number_ftdata_recordings = recordings;
        cfg
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn written_archives_read_back_equal(
        seed in any::<u64>(),
        cfg in config(),
        p in participant(),
        debug in any::<bool>(),
        escape in proptest::option::of(1usize..6),
    ) {
        let root = tempfile::tempdir().unwrap();
        let runner = run_session(cfg, seed, root.path(), p.clone(), debug, CoinFlip::new(seed), escape);
        let archive = runner.archive().expect("archive written after intake").clone();
        let back = read_archive(&archive.dir).unwrap();
        prop_assert_eq!(&back, &archive);
        prop_assert_eq!(&back.participant, &p);
        prop_assert_eq!(&back.trials[..], runner.session().records());

        // tmp.csv holds the same rows as the final trial file.
        let tmp = archive.dir.join(TMP_CSV);
        if !archive.trials.is_empty() {
            let rows = read_tmp_csv(&tmp).unwrap();
            prop_assert_eq!(rows.len(), archive.trials.len());
            for (row, rec) in rows.iter().zip(&archive.trials) {
                prop_assert_eq!(row.trial_no, rec.trial_no);
                prop_assert_eq!(row.distance, rec.distance);
            }
        }
    }
}
