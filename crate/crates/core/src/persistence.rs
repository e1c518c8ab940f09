//! Session archives on disk.
//!
//! Layout under `<data_path>/<participant_id>/`:
//!
//! ```text
//! tmp.csv                    one trial line appended after every trial
//! data.xml                   index naming the two CSV files
//! data-<id>-<surname>.csv    participant line
//! data-<id>-trial.csv        trial count, then one line per trial
//! manifest.json              seed, labels, touched flags, quotas, command log
//! ```
//!
//! A trial line is `ID,No,PRESENTATION,R1,<R1 readings>,R2,<R2 readings>,DISTANCE,RESPONSE`
//! where each reading is `TIME,FX,FY,FZ,TX,TY,TZ`. The trial file prefixes the
//! first trial line with the total count, so its first line reads `N,ID,...`.
//! Meters, forces and torques are written with 6 decimals, times with 3.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{escape, DemoConfig};
use crate::rig::{FingerModel, FtRecording, FtSample};
use crate::scheduler::{DistanceQuota, Presentation, TrialLabel};
use crate::session::{evaluate_response, Gender, OperatorEvent, Participant, Response, TrialRecord};

pub const DATA_XML: &str = "data.xml";
pub const TMP_CSV: &str = "tmp.csv";
pub const MANIFEST: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;
const FIELDS_PER_READING: usize = 7;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, line: u64, message: impl Into<String>) -> PersistError {
    PersistError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn participant_file_name(participant: &Participant, ext: &str) -> String {
    format!("data-{}-{}{ext}", participant.id, participant.surname)
}

pub fn trial_file_name(participant_id: &str, ext: &str) -> String {
    format!("data-{participant_id}-trial{ext}")
}

/// Picks `<root>/<id>`, or `<root>/<id>-2`, `-3`, ... when an earlier session
/// already used the name. Existing data is never reused.
pub fn allocate_session_dir(data_root: &Path, participant_id: &str) -> PathBuf {
    let first = data_root.join(participant_id);
    if !is_used(&first) {
        return first;
    }
    (2..)
        .map(|v| data_root.join(format!("{participant_id}-{v}")))
        .find(|p| !is_used(p))
        .expect("unbounded version search")
}

fn is_used(dir: &Path) -> bool {
    [DATA_XML, TMP_CSV, MANIFEST].iter().any(|f| dir.join(f).exists())
}

/// One trial as stored in the CSV files. The touched flags and the
/// Training/Trial label live in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub participant_id: String,
    pub trial_no: u32,
    pub presentation: Presentation,
    pub ft_first: Vec<FtSample>,
    pub ft_second: Vec<FtSample>,
    pub distance: f64,
    pub response: Response,
}

impl TrialRow {
    pub fn from_record(record: &TrialRecord) -> Self {
        let strip = |rec: &FtRecording| rec.samples.iter().map(|s| FtSample { touched: false, ..*s }).collect();
        Self {
            participant_id: record.participant_id.clone(),
            trial_no: record.trial_no,
            presentation: record.presentation,
            ft_first: strip(&record.ft_first),
            ft_second: strip(&record.ft_second),
            distance: record.distance,
            response: record.response,
        }
    }

    pub fn into_record(self, label: TrialLabel, touched_first: bool, touched_second: bool) -> TrialRecord {
        let stamp = |samples: Vec<FtSample>, touched: bool| FtRecording {
            samples: samples.into_iter().map(|s| FtSample { touched, ..s }).collect(),
            touched,
        };
        TrialRecord {
            correct: evaluate_response(self.presentation, self.response),
            participant_id: self.participant_id,
            trial_no: self.trial_no,
            label,
            presentation: self.presentation,
            ft_first: stamp(self.ft_first, touched_first),
            ft_second: stamp(self.ft_second, touched_second),
            distance: self.distance,
            response: self.response,
        }
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![
            self.participant_id.clone(),
            self.trial_no.to_string(),
            self.presentation.as_str().to_string(),
        ];
        for block in [&self.ft_first, &self.ft_second] {
            out.push(block.len().to_string());
            for s in block {
                out.push(format!("{:.3}", s.timestamp));
                out.extend(s.channels().iter().map(|c| format!("{c:.6}")));
            }
        }
        out.push(format!("{:.6}", self.distance));
        out.push(self.response.as_str().to_string());
        out
    }

    fn parse(fields: &[&str], path: &Path, line: u64) -> Result<Self, PersistError> {
        let err = |msg: String| format_err(path, line, msg);
        let label = fields
            .get(1)
            .map(|n| format!("trial {n}"))
            .unwrap_or_else(|| "trial".into());
        if fields.len() < 5 {
            return Err(err(format!("{label}: too few fields")));
        }
        let trial_no = fields[1]
            .parse()
            .map_err(|_| err(format!("bad trial number `{}`", fields[1])))?;
        let presentation =
            Presentation::parse(fields[2]).ok_or_else(|| err(format!("{label}: bad presentation `{}`", fields[2])))?;

        let mut cursor = 3;
        let mut blocks = Vec::with_capacity(2);
        for which in ["first", "second"] {
            let count: usize = fields
                .get(cursor)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| err(format!("{label}: bad {which} FT reading count")))?;
            cursor += 1;
            let end = cursor + count * FIELDS_PER_READING;
            // Two trailing fields (distance, response) must remain after the
            // second block.
            if end + if which == "first" { 3 } else { 2 } > fields.len() {
                return Err(err(format!(
                    "{label}: {which} FT block declares {count} readings but is truncated"
                )));
            }
            let mut samples = Vec::with_capacity(count);
            for chunk in fields[cursor..end].chunks(FIELDS_PER_READING) {
                let mut v = [0.0; FIELDS_PER_READING];
                for (slot, raw) in v.iter_mut().zip(chunk) {
                    *slot = raw
                        .parse()
                        .map_err(|_| err(format!("{label}: bad number `{raw}` in {which} FT block")))?;
                }
                samples.push(FtSample {
                    touched: false,
                    timestamp: v[0],
                    fx: v[1],
                    fy: v[2],
                    fz: v[3],
                    tx: v[4],
                    ty: v[5],
                    tz: v[6],
                });
            }
            blocks.push(samples);
            cursor = end;
        }
        if fields.len() != cursor + 2 {
            return Err(err(format!(
                "{label}: expected {} fields, found {}",
                cursor + 2,
                fields.len()
            )));
        }
        let distance = fields[cursor]
            .parse()
            .map_err(|_| err(format!("{label}: bad distance `{}`", fields[cursor])))?;
        let response = Response::parse(fields[cursor + 1])
            .ok_or_else(|| err(format!("{label}: bad response `{}`", fields[cursor + 1])))?;
        let ft_second = blocks.pop().expect("two blocks");
        let ft_first = blocks.pop().expect("two blocks");
        Ok(Self {
            participant_id: fields[0].to_string(),
            trial_no,
            presentation,
            ft_first,
            ft_second,
            distance,
            response,
        })
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(fields).expect("in-memory write");
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn csv_records(path: &Path) -> Result<Vec<(u64, Vec<String>)>, PersistError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            format_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

pub fn trial_line(record: &TrialRecord) -> String {
    csv_line(&TrialRow::from_record(record).fields())
}

/// Trial file contents: the total count written once, ahead of the first
/// trial's fields.
pub fn trial_csv_string(trials: &[TrialRecord]) -> String {
    if trials.is_empty() {
        return "0\n".to_string();
    }
    let mut out = String::new();
    for (i, record) in trials.iter().enumerate() {
        let mut fields = TrialRow::from_record(record).fields();
        if i == 0 {
            fields.insert(0, trials.len().to_string());
        }
        out.push_str(&csv_line(&fields));
    }
    out
}

pub fn participant_csv_string(p: &Participant) -> String {
    csv_line(&[
        p.id.clone(),
        p.name.clone(),
        p.surname.clone(),
        p.age.to_string(),
        p.gender.as_str().to_string(),
        p.notes.clone().unwrap_or_default(),
    ])
}

pub fn data_xml_string(
    data_name: &str,
    participant_file: &str,
    participant_ext: &str,
    trial_file: &str,
    trial_ext: &str,
) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\n<golem>\n  <data data_name=\"{}\">\n    <participant ext_file=\"{}\" filename=\"{}\"></participant>\n    <trials ext_file=\"{}\" filename=\"{}\"></trials>\n  </data>\n</golem>\n",
        escape(data_name),
        escape(participant_ext),
        escape(participant_file),
        escape(trial_ext),
        escape(trial_file),
    )
}

/// Appends one trial line to `tmp.csv` and syncs it to disk.
pub fn append_trial_tmp(path: &Path, record: &TrialRecord) -> Result<(), PersistError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    file.write_all(trial_line(record).as_bytes())
        .and_then(|_| file.sync_data())
        .map_err(io_err(path))
}

pub fn read_tmp_csv(path: &Path) -> Result<Vec<TrialRow>, PersistError> {
    csv_records(path)?
        .iter()
        .map(|(line, fields)| {
            let fields: Vec<&str> = fields.iter().map(String::as_str).collect();
            TrialRow::parse(&fields, path, *line)
        })
        .collect()
}

pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRow>, PersistError> {
    let records = csv_records(path)?;
    let Some((first_line, first)) = records.first() else {
        return Err(format_err(path, 1, "missing trial count"));
    };
    let declared: usize = first[0]
        .parse()
        .map_err(|_| format_err(path, *first_line, format!("bad trial count `{}`", first[0])))?;
    if declared == 0 {
        if first.len() > 1 || records.len() > 1 {
            return Err(format_err(path, *first_line, "trial count 0 followed by trial data"));
        }
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(declared);
    for (i, (line, fields)) in records.iter().enumerate() {
        let fields: Vec<&str> = fields.iter().map(String::as_str).collect();
        let fields = if i == 0 { &fields[1..] } else { &fields[..] };
        rows.push(TrialRow::parse(fields, path, *line)?);
    }
    if rows.len() != declared {
        let line = records.last().map(|(l, _)| *l).unwrap_or(1);
        return Err(format_err(
            path,
            line,
            format!("declared {declared} trials, found {}", rows.len()),
        ));
    }
    Ok(rows)
}

pub fn read_participant_csv(path: &Path) -> Result<Participant, PersistError> {
    let records = csv_records(path)?;
    let [(line, fields)] = records.as_slice() else {
        return Err(format_err(path, 1, format!("expected 1 line, found {}", records.len())));
    };
    if fields.len() != 6 {
        return Err(format_err(
            path,
            *line,
            format!("expected 6 fields, found {}", fields.len()),
        ));
    }
    let age = fields[3]
        .parse()
        .map_err(|_| format_err(path, *line, format!("bad age `{}`", fields[3])))?;
    let gender =
        Gender::parse(&fields[4]).ok_or_else(|| format_err(path, *line, format!("bad gender `{}`", fields[4])))?;
    Ok(Participant {
        id: fields[0].clone(),
        name: fields[1].clone(),
        surname: fields[2].clone(),
        age,
        gender,
        notes: (!fields[5].is_empty()).then(|| fields[5].clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Complete,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub label: TrialLabel,
    pub touched_first: bool,
    pub touched_second: bool,
}

/// Sidecar holding what the CSV and XML files do not: enough to reproduce
/// the session exactly from its seed and command log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub version: u32,
    pub seed: u64,
    pub debug_mode: bool,
    pub status: SessionStatus,
    /// Set when the session was continued after an interruption; such a
    /// session cannot be replayed from its command log alone.
    pub resumed: bool,
    pub config: DemoConfig,
    pub finger: FingerModel,
    pub participant: Option<Participant>,
    pub trials: Vec<ManifestTrial>,
    pub quotas: Vec<DistanceQuota>,
    pub commands: Vec<OperatorEvent>,
}

impl SessionManifest {
    pub fn new(config: DemoConfig, finger: FingerModel, seed: u64) -> Self {
        Self {
            version: MANIFEST_VERSION,
            seed,
            debug_mode: false,
            status: SessionStatus::InProgress,
            resumed: false,
            config,
            finger,
            participant: None,
            trials: Vec::new(),
            quotas: Vec::new(),
            commands: Vec::new(),
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &SessionManifest) -> Result<(), PersistError> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| PersistError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let staging = path.with_extension("json.partial");
    fs::write(&staging, text).map_err(io_err(&staging))?;
    fs::rename(&staging, path).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<SessionManifest, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: SessionManifest = serde_json::from_str(&text).map_err(|e| PersistError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(PersistError::Manifest {
            path: path.to_path_buf(),
            message: format!("unsupported manifest version {}", manifest.version),
        });
    }
    Ok(manifest)
}

/// Where the files of one session live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchivePaths {
    pub dir: PathBuf,
    pub data_xml: PathBuf,
    pub participant_csv: PathBuf,
    pub trial_csv: PathBuf,
    pub tmp_csv: PathBuf,
    pub manifest: PathBuf,
}

impl ArchivePaths {
    pub fn new(dir: &Path, participant: &Participant, participant_ext: &str, trial_ext: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            data_xml: dir.join(DATA_XML),
            participant_csv: dir.join(participant_file_name(participant, participant_ext)),
            trial_csv: dir.join(trial_file_name(&participant.id, trial_ext)),
            tmp_csv: dir.join(TMP_CSV),
            manifest: dir.join(MANIFEST),
        }
    }
}

/// A finished (or cancelled) session as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionArchive {
    pub dir: PathBuf,
    pub data_name: String,
    pub participant_ext_file: String,
    pub trial_ext_file: String,
    pub participant: Participant,
    pub trials: Vec<TrialRecord>,
}

impl SessionArchive {
    pub fn paths(&self) -> ArchivePaths {
        ArchivePaths::new(
            &self.dir,
            &self.participant,
            &self.participant_ext_file,
            &self.trial_ext_file,
        )
    }
}

/// Writes `data.xml` and both CSV files. If `archive.dir` already holds a
/// `data.xml`, the archive goes to the next free versioned directory instead.
/// Returns where the files were written.
pub fn write_archive(archive: &SessionArchive) -> Result<ArchivePaths, PersistError> {
    let mut dir = archive.dir.clone();
    if dir.join(DATA_XML).exists() {
        let parent = dir.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| archive.participant.id.clone());
        dir = (2..)
            .map(|v| parent.join(format!("{base}-{v}")))
            .find(|p| !p.join(DATA_XML).exists())
            .expect("unbounded version search");
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let paths = ArchivePaths::new(
        &dir,
        &archive.participant,
        &archive.participant_ext_file,
        &archive.trial_ext_file,
    );
    let file_name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    fs::write(&paths.participant_csv, participant_csv_string(&archive.participant))
        .map_err(io_err(&paths.participant_csv))?;
    fs::write(&paths.trial_csv, trial_csv_string(&archive.trials)).map_err(io_err(&paths.trial_csv))?;
    // The index goes last so its presence marks a complete archive.
    let xml = data_xml_string(
        &archive.data_name,
        &file_name(&paths.participant_csv),
        &archive.participant_ext_file,
        &file_name(&paths.trial_csv),
        &archive.trial_ext_file,
    );
    fs::write(&paths.data_xml, xml).map_err(io_err(&paths.data_xml))?;
    Ok(paths)
}

struct DataIndex {
    data_name: String,
    participant_ext: String,
    participant_file: String,
    trial_ext: String,
    trial_file: String,
}

fn read_data_xml(path: &Path) -> Result<DataIndex, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc = roxmltree::Document::parse(&text).map_err(|e| format_err(path, e.pos().row as u64, e.to_string()))?;
    let find = |tag: &str| {
        doc.descendants()
            .find(|n| n.has_tag_name(tag))
            .ok_or_else(|| format_err(path, 1, format!("missing <{tag}>")))
    };
    let attr = |node: roxmltree::Node, name: &str| {
        node.attribute(name).map(str::to_string).ok_or_else(|| {
            format_err(
                path,
                doc.text_pos_at(node.range().start).row as u64,
                format!("<{}> missing `{name}`", node.tag_name().name()),
            )
        })
    };
    let data = find("data")?;
    let participant = find("participant")?;
    let trials = find("trials")?;
    Ok(DataIndex {
        data_name: attr(data, "data_name")?,
        participant_ext: attr(participant, "ext_file")?,
        participant_file: attr(participant, "filename")?,
        trial_ext: attr(trials, "ext_file")?,
        trial_file: attr(trials, "filename")?,
    })
}

/// Reads an archive back, restoring labels and touched flags from the
/// manifest.
pub fn read_archive(dir: &Path) -> Result<SessionArchive, PersistError> {
    let index = read_data_xml(&dir.join(DATA_XML))?;
    let participant = read_participant_csv(&dir.join(&index.participant_file))?;
    let trial_path = dir.join(&index.trial_file);
    let rows = read_trial_csv(&trial_path)?;
    let manifest_path = dir.join(MANIFEST);
    let manifest = read_manifest(&manifest_path)?;
    let trials = merge_rows(rows, &manifest.trials, &manifest_path)?;
    Ok(SessionArchive {
        dir: dir.to_path_buf(),
        data_name: index.data_name,
        participant_ext_file: index.participant_ext,
        trial_ext_file: index.trial_ext,
        participant,
        trials,
    })
}

pub fn merge_rows(
    rows: Vec<TrialRow>,
    meta: &[ManifestTrial],
    manifest_path: &Path,
) -> Result<Vec<TrialRecord>, PersistError> {
    if rows.len() != meta.len() {
        return Err(PersistError::Manifest {
            path: manifest_path.to_path_buf(),
            message: format!("manifest lists {} trials, data has {}", meta.len(), rows.len()),
        });
    }
    Ok(rows
        .into_iter()
        .zip(meta)
        .map(|(row, m)| row.into_record(m.label, m.touched_first, m.touched_second))
        .collect())
}
