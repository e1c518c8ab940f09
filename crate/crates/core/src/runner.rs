//! Drives a [`Session`] and keeps its archive on disk up to date.
//!
//! The participant directory is allocated as soon as intake completes. After
//! every trial the manifest is rewritten and the trial line is appended to
//! `tmp.csv`; when the session ends (completed or cancelled) the full archive
//! is written. Every accepted operator event is logged in the manifest, so a
//! session can be replayed from its seed.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use tracing::{debug, info};

use crate::persistence::{
    allocate_session_dir, append_trial_tmp, merge_rows, read_manifest, read_tmp_csv, write_archive, write_manifest,
    ArchivePaths, ManifestTrial, PersistError, SessionArchive, SessionManifest, SessionStatus, MANIFEST, TMP_CSV,
};
use crate::scheduler::{DistanceQuota, TrialLabel};
use crate::session::{OperatorEvent, Session, SessionError, SessionEvent};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("cannot resume {dir}: {reason}")]
    Resume { dir: PathBuf, reason: String },
}

#[derive(Debug)]
pub struct SessionRunner {
    session: Session,
    data_root: PathBuf,
    manifest: SessionManifest,
    paths: Option<ArchivePaths>,
    archive: Option<SessionArchive>,
}

impl SessionRunner {
    pub fn new(session: Session, data_root: impl Into<PathBuf>) -> Self {
        let manifest = SessionManifest::new(session.config().clone(), *session.finger(), session.seed());
        Self {
            session,
            data_root: data_root.into(),
            manifest,
            paths: None,
            archive: None,
        }
    }

    /// Continues an interrupted session from its directory. Trials in
    /// `tmp.csv` are kept; the session restarts at the init-pose break-point.
    pub fn resume(dir: &Path) -> Result<Self, RunnerError> {
        let resume_err = |reason: String| RunnerError::Resume {
            dir: dir.to_path_buf(),
            reason,
        };
        let mut manifest = read_manifest(&dir.join(MANIFEST))?;
        if manifest.status != SessionStatus::InProgress {
            return Err(resume_err(format!("session is {:?}", manifest.status)));
        }
        let participant = manifest
            .participant
            .clone()
            .ok_or_else(|| resume_err("intake never completed".into()))?;
        let tmp = dir.join(TMP_CSV);
        let rows = if tmp.exists() { read_tmp_csv(&tmp)? } else { Vec::new() };
        // The manifest is written before tmp.csv, so it may list one trial
        // that never reached tmp.csv.
        if rows.len() > manifest.trials.len() {
            return Err(resume_err(format!(
                "tmp.csv has {} trials but the manifest lists {}",
                rows.len(),
                manifest.trials.len()
            )));
        }
        manifest.trials.truncate(rows.len());
        let records = merge_rows(rows, &manifest.trials, &dir.join(MANIFEST))?;
        let session = Session::resume(
            manifest.config.clone(),
            manifest.finger,
            manifest.seed,
            manifest.debug_mode,
            participant.clone(),
            records,
        )?;
        manifest.resumed = true;
        let exp = &manifest.config.experiment;
        let paths = ArchivePaths::new(dir, &participant, &exp.participant_ext_file, &exp.trial_ext_file);
        let data_root = dir.parent().map(Path::to_path_buf).unwrap_or_default();
        info!(dir = %dir.display(), trials = session.records().len(), "resuming session");
        Ok(Self {
            session,
            data_root,
            manifest,
            paths: Some(paths),
            archive: None,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }

    /// Files of this session, once intake has completed.
    pub fn paths(&self) -> Option<&ArchivePaths> {
        self.paths.as_ref()
    }

    /// The archive written when the session ended.
    pub fn archive(&self) -> Option<&SessionArchive> {
        self.archive.as_ref()
    }

    pub fn submit(&mut self, event: OperatorEvent) -> Result<Vec<SessionEvent>, RunnerError> {
        let events = self.session.submit(event.clone())?;
        debug!(?event, phase = ?self.session.phase(), "accepted");
        self.manifest.commands.push(event);
        self.manifest.debug_mode = self.session.debug_mode();

        let mut dirty = false;
        if self.paths.is_none() {
            if let Some(participant) = self.session.participant() {
                let dir = allocate_session_dir(&self.data_root, &participant.id);
                fs::create_dir_all(&dir).map_err(|source| PersistError::Io {
                    path: dir.clone(),
                    source,
                })?;
                let exp = &self.manifest.config.experiment;
                self.paths = Some(ArchivePaths::new(
                    &dir,
                    participant,
                    &exp.participant_ext_file,
                    &exp.trial_ext_file,
                ));
                self.manifest.participant = Some(participant.clone());
                info!(dir = %dir.display(), "session directory allocated");
                dirty = true;
            }
        }

        for e in &events {
            match e {
                SessionEvent::TrialCompleted { record } => {
                    let paths = self.paths.as_ref().expect("trials follow intake");
                    self.manifest.trials.push(ManifestTrial {
                        label: record.label,
                        touched_first: record.ft_first.touched,
                        touched_second: record.ft_second.touched,
                    });
                    self.manifest.quotas = consumed_quotas(&self.session);
                    write_manifest(&paths.manifest, &self.manifest)?;
                    append_trial_tmp(&paths.tmp_csv, record)?;
                }
                SessionEvent::Ended { completed, .. } => {
                    self.manifest.status = if *completed {
                        SessionStatus::Complete
                    } else {
                        SessionStatus::Cancelled
                    };
                    self.manifest.quotas = consumed_quotas(&self.session);
                    self.finish()?;
                    dirty = true;
                }
                _ => {}
            }
        }
        if dirty {
            if let Some(paths) = &self.paths {
                write_manifest(&paths.manifest, &self.manifest)?;
            }
        }
        Ok(events)
    }

    fn finish(&mut self) -> Result<(), RunnerError> {
        let (Some(paths), Some(participant)) = (&self.paths, self.session.participant()) else {
            return Ok(());
        };
        let cfg = self.session.config();
        let archive = SessionArchive {
            dir: paths.dir.clone(),
            data_name: cfg.data_name.clone(),
            participant_ext_file: cfg.experiment.participant_ext_file.clone(),
            trial_ext_file: cfg.experiment.trial_ext_file.clone(),
            participant: participant.clone(),
            trials: self.session.records().to_vec(),
        };
        let written = write_archive(&archive)?;
        info!(dir = %written.dir.display(), trials = archive.trials.len(), "archive written");
        self.archive = Some(SessionArchive {
            dir: written.dir,
            ..archive
        });
        Ok(())
    }
}

/// Quotas as implied by the completed trials, excluding any trial that has
/// been drawn but not yet answered.
fn consumed_quotas(session: &Session) -> Vec<DistanceQuota> {
    let per_distance = session.config().experiment.number_presentations;
    session
        .config()
        .distances()
        .into_iter()
        .map(|distance| {
            let presented = session
                .records()
                .iter()
                .filter(|r| r.label == TrialLabel::Trial && r.distance == distance)
                .count() as u32;
            DistanceQuota {
                distance,
                presented,
                remaining: per_distance.saturating_sub(presented),
            }
        })
        .collect()
}

/// Replays a manifest's command log against a fresh session writing under
/// `data_root`.
pub fn replay_manifest(manifest: &SessionManifest, data_root: &Path) -> Result<SessionRunner, RunnerError> {
    if manifest.resumed {
        return Err(RunnerError::Resume {
            dir: data_root.to_path_buf(),
            reason: "a resumed session cannot be replayed from its command log".into(),
        });
    }
    let session = Session::start(manifest.config.clone(), manifest.finger, manifest.seed)?;
    let mut runner = SessionRunner::new(session, data_root);
    for event in &manifest.commands {
        runner.submit(event.clone())?;
    }
    Ok(runner)
}

pub fn replay_manifest_file(path: &Path, data_root: &Path) -> Result<SessionRunner, RunnerError> {
    let manifest = read_manifest(path)?;
    replay_manifest(&manifest, data_root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autopilot::{demo_participant, drive, AlwaysFirst, Autopilot};
    use crate::config::DemoConfig;
    use crate::persistence::read_archive;
    use crate::rig::FingerModel;
    use crate::session::{Choice, SessionPhase};

    fn small_config() -> DemoConfig {
        let mut cfg = DemoConfig::young();
        cfg.smposes.truncate(2);
        cfg.experiment.number_presentations = 2;
        cfg.experiment.number_ftdata_recordings = 3;
        cfg
    }

    #[test]
    fn nothing_written_before_intake() {
        let root = tempfile::tempdir().unwrap();
        let session = Session::start(small_config(), FingerModel::default(), 1).unwrap();
        let mut runner = SessionRunner::new(session, root.path());
        runner.submit(OperatorEvent::Confirm(true)).unwrap();
        runner.submit(OperatorEvent::Escape).unwrap();
        assert!(runner.paths().is_none());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn cancelled_after_intake_writes_empty_archive() {
        let root = tempfile::tempdir().unwrap();
        let session = Session::start(small_config(), FingerModel::default(), 1).unwrap();
        let mut runner = SessionRunner::new(session, root.path());
        let mut pilot = Autopilot::new(demo_participant(), true, AlwaysFirst);
        while runner.session().phase() != &SessionPhase::AwaitInitConfirm {
            let ev = pilot.next_event(runner.session()).unwrap();
            runner.submit(ev).unwrap();
        }
        runner.submit(OperatorEvent::Confirm(false)).unwrap();
        let archive = runner.archive().unwrap();
        assert!(archive.trials.is_empty());
        let trial_csv = fs::read_to_string(&archive.paths().trial_csv).unwrap();
        assert_eq!(trial_csv, "0\n");
        assert_eq!(runner.manifest().status, SessionStatus::Cancelled);
    }

    #[test]
    fn full_run_writes_everything_and_replays() {
        let root = tempfile::tempdir().unwrap();
        let session = Session::start(small_config(), FingerModel::default(), 42).unwrap();
        let mut runner = SessionRunner::new(session, root.path());
        drive(&mut runner, &mut Autopilot::new(demo_participant(), false, AlwaysFirst)).unwrap();
        let archive = runner.archive().unwrap().clone();
        assert_eq!(archive.trials.len(), 5);
        assert_eq!(read_archive(&archive.dir).unwrap(), archive);
        let tmp = fs::read_to_string(archive.paths().tmp_csv).unwrap();
        assert_eq!(tmp.lines().count(), 5);

        let other = tempfile::tempdir().unwrap();
        let replayed = replay_manifest_file(&archive.paths().manifest, other.path()).unwrap();
        let again = replayed.archive().unwrap();
        for (a, b) in [
            (archive.paths().data_xml, again.paths().data_xml),
            (archive.paths().trial_csv, again.paths().trial_csv),
            (archive.paths().participant_csv, again.paths().participant_csv),
            (archive.paths().tmp_csv, again.paths().tmp_csv),
            (archive.paths().manifest, again.paths().manifest),
        ] {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }

    #[test]
    fn resume_continues_from_tmp() {
        let root = tempfile::tempdir().unwrap();
        let session = Session::start(small_config(), FingerModel::default(), 9).unwrap();
        let mut runner = SessionRunner::new(session, root.path());
        let mut pilot = Autopilot::new(demo_participant(), true, AlwaysFirst);
        while runner.session().records().len() < 3 {
            let ev = pilot.next_event(runner.session()).unwrap();
            runner.submit(ev).unwrap();
        }
        let dir = runner.paths().unwrap().dir.clone();
        drop(runner);

        let mut resumed = SessionRunner::resume(&dir).unwrap();
        assert_eq!(resumed.session().records().len(), 3);
        assert_eq!(resumed.session().phase(), &SessionPhase::AwaitInitConfirm);
        drive(&mut resumed, &mut pilot).unwrap();
        let archive = resumed.archive().unwrap();
        assert_eq!(archive.dir, dir);
        assert_eq!(archive.trials.len(), 5);
        let numbers: Vec<_> = archive.trials.iter().map(|t| t.trial_no).collect();
        assert_eq!(numbers, [1, 2, 3, 4, 5]);
        assert!(resumed.manifest().resumed);
        assert!(matches!(SessionRunner::resume(&dir), Err(RunnerError::Resume { .. })));
        assert!(replay_manifest(resumed.manifest(), root.path()).is_err());
    }

    #[test]
    fn rejected_events_not_logged() {
        let root = tempfile::tempdir().unwrap();
        let session = Session::start(small_config(), FingerModel::default(), 1).unwrap();
        let mut runner = SessionRunner::new(session, root.path());
        assert!(runner.submit(OperatorEvent::Select(Choice::First)).is_err());
        assert!(runner.manifest().commands.is_empty());
    }
}
