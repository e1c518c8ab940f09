//! Demo configuration: the `<demo>` element of the rig XML file.
//!
//! The parser walks the document for the first `<demo>` element, so both a
//! bare `<demo>` fragment and a full rig file with `<demo>` nested somewhere
//! inside it are accepted. XML comments are plain comments, which is how the
//! young/elderly distance sets are switched in the shipped files.

use std::fmt;
use std::path::Path;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-axis bound of the rig workspace, in meters.
pub const WORKSPACE_BOUND: f64 = 0.5;

/// Upper bound on a stepper pin separation, in meters.
pub const MAX_PIN_SEPARATION: f64 = 0.01;

/// Message raised when a config carries no stepper distances.
pub const NO_STEPPER_POSES: &str = "No poses for the stepper motor";

/// Young-participant rig file, as shipped.
pub const YOUNG_CONFIG_XML: &str = include_str!("../configs/GolemAppSymons_RobotDelta3SM.xml");

/// Elderly-participant rig file: identical except for the active distance set.
pub const ELDERLY_CONFIG_XML: &str = include_str!("../configs/GolemAppSymons_RobotDelta3Sm_elderly.xml");

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("no <demo> element found")]
    MissingDemo,
    #[error("line {line}: <{element}> is missing mandatory element <{child}>")]
    MissingElement { element: String, child: String, line: u32 },
    #[error("line {line}: <{element}> is missing mandatory attribute `{attribute}`")]
    MissingAttribute {
        element: String,
        attribute: String,
        line: u32,
    },
    #[error("line {line}: <{element} {attribute}=\"{value}\"> is not a valid {expected}")]
    InvalidValue {
        element: String,
        attribute: String,
        value: String,
        expected: &'static str,
        line: u32,
    },
    #[error("refusing to serialize invalid config: {0}")]
    Invalid(Finding),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A point or displacement in the rig frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose3 {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl Pose3 {
    pub const ZERO: Pose3 = Pose3::new(0.0, 0.0, 0.0);

    pub const fn new(v1: f64, v2: f64, v3: f64) -> Self {
        Self { v1, v2, v3 }
    }

    pub fn scale(self, k: f64) -> Pose3 {
        Pose3::new(self.v1 * k, self.v2 * k, self.v3 * k)
    }

    pub fn components(self) -> [f64; 3] {
        [self.v1, self.v2, self.v3]
    }

    pub fn norm(self) -> f64 {
        self.components().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// True when every component is finite and within [`WORKSPACE_BOUND`].
    pub fn in_workspace(self) -> bool {
        self.components()
            .iter()
            .all(|c| c.is_finite() && c.abs() <= WORKSPACE_BOUND)
    }
}

impl std::ops::Add for Pose3 {
    type Output = Pose3;

    fn add(self, other: Pose3) -> Pose3 {
        Pose3::new(self.v1 + other.v1, self.v2 + other.v2, self.v3 + other.v3)
    }
}

impl std::ops::Sub for Pose3 {
    type Output = Pose3;

    fn sub(self, other: Pose3) -> Pose3 {
        Pose3::new(self.v1 - other.v1, self.v2 - other.v2, self.v3 - other.v3)
    }
}

impl fmt::Display for Pose3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.v1, self.v2, self.v3)
    }
}

/// A labelled workspace pose. Labels need not be unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPose {
    pub name: String,
    pub pose: Pose3,
}

/// One stepper-motor command. `c1` is the pin separation in meters; `c2` is
/// reserved and carried through untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperCommand {
    pub c1: f64,
    pub c2: f64,
}

/// Contact thresholds: forces in N, torques in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactThreshold {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl ContactThreshold {
    /// Channels in sensor order: fx, fy, fz, tx, ty, tz.
    pub fn channels(&self) -> [f64; 6] {
        [self.v1, self.v2, self.v3, self.w1, self.w2, self.w3]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchParams {
    pub sensor_id: String,
    /// Seconds between FT readings.
    pub event_time_wait: f64,
    /// Minimum time of a free-space move, seconds.
    pub movement_duration: f64,
    /// Minimum time of the downward poke, seconds.
    pub poking_duration: f64,
    pub threshold: ContactThreshold,
    pub motion_single_pin: Pose3,
    pub motion_two_pins: Pose3,
    pub poking: Pose3,
    /// Global home pose.
    pub init: Pose3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub participant_ext_file: String,
    pub trial_ext_file: String,
    pub number_training_trials: u32,
    /// 1-based position of the training trial that shows the widest separation.
    pub training_index: u32,
    pub number_presentations: u32,
    pub number_ftdata_recordings: u32,
    pub data_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub data_name: String,
    pub wposes: Vec<NamedPose>,
    pub smposes: Vec<StepperCommand>,
    pub touch: TouchParams,
    pub experiment: ExperimentParams,
}

impl DemoConfig {
    /// Configured pin separations in file order.
    pub fn distances(&self) -> Vec<f64> {
        self.smposes.iter().map(|s| s.c1).collect()
    }

    pub fn wposes_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a NamedPose> + 'a {
        self.wposes.iter().filter(move |p| p.name == name)
    }

    /// The young-participant config shipped with the crate.
    pub fn young() -> Self {
        parse_demo_config(YOUNG_CONFIG_XML).expect("bundled young config parses")
    }

    /// The elderly-participant config shipped with the crate.
    pub fn elderly() -> Self {
        parse_demo_config(ELDERLY_CONFIG_XML).expect("bundled elderly config parses")
    }
}

/// A non-fatal observation made while parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigWarning {
    pub line: u32,
    pub message: String,
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// A violated invariant, located by a path such as `touch.event_time_wait`.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_runnable(&self) -> bool {
        self.findings.is_empty()
    }

    /// True when the only problem is the missing distance set, which is
    /// reported at session time instead.
    pub fn is_startable(&self) -> bool {
        self.findings.iter().all(|f| f.path == "smposes")
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            path: path.into(),
            message: message.into(),
        });
    }
}

pub fn load_demo_config(path: impl AsRef<Path>) -> Result<DemoConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_demo_config(&text)
}

pub fn parse_demo_config(xml: &str) -> Result<DemoConfig, ConfigError> {
    parse_demo_config_with_warnings(xml).map(|(cfg, _)| cfg)
}

/// Parses a config and also returns warnings for unknown elements and
/// attributes, which are otherwise ignored.
pub fn parse_demo_config_with_warnings(xml: &str) -> Result<(DemoConfig, Vec<ConfigWarning>), ConfigError> {
    let doc = Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        ConfigError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let demo = doc
        .descendants()
        .find(|n| n.has_tag_name("demo"))
        .ok_or(ConfigError::MissingDemo)?;

    let mut p = Parser {
        doc: &doc,
        warnings: Vec::new(),
    };
    p.check_attrs(demo, &["data_name"]);
    let data_name = p.string(demo, "data_name")?;

    let mut wposes = Vec::new();
    let mut smposes = Vec::new();
    let mut touch = None;
    let mut experiment = None;
    for child in demo.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "wpose" => {
                p.check_attrs(child, &["name", "v1", "v2", "v3"]);
                wposes.push(NamedPose {
                    name: p.string(child, "name")?,
                    pose: p.pose(child)?,
                });
            }
            "smpose" => {
                p.check_attrs(child, &["name", "dim", "c1", "c2"]);
                let c2 = match child.attribute("c2") {
                    Some(_) => p.float(child, "c2")?,
                    None => 0.0,
                };
                smposes.push(StepperCommand {
                    c1: p.float(child, "c1")?,
                    c2,
                });
            }
            "touch" => touch = Some(p.touch(child)?),
            "experiment_data" => experiment = Some(p.experiment(child)?),
            other => p.warn(child, format!("unknown element <{other}> ignored")),
        }
    }

    let touch = touch.ok_or_else(|| p.missing_element(demo, "touch"))?;
    let experiment = experiment.ok_or_else(|| p.missing_element(demo, "experiment_data"))?;
    let cfg = DemoConfig {
        data_name,
        wposes,
        smposes,
        touch,
        experiment,
    };
    Ok((cfg, p.warnings))
}

struct Parser<'a, 'input> {
    doc: &'a Document<'input>,
    warnings: Vec<ConfigWarning>,
}

// `num_*` spellings are accepted as aliases of the canonical `number_*` names.
const EXPERIMENT_ALIASES: [(&str, &str); 3] = [
    ("number_training_trials", "num_training_trials"),
    ("number_presentations", "num_presentations"),
    ("number_ftdata_recordings", "num_ftdata_recordings"),
];

impl<'a, 'input> Parser<'a, 'input> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn warn(&mut self, node: Node, message: String) {
        let line = self.line(node);
        self.warnings.push(ConfigWarning { line, message });
    }

    fn check_attrs(&mut self, node: Node, known: &[&str]) {
        for attr in node.attributes() {
            if !known.contains(&attr.name()) {
                self.warn(
                    node,
                    format!(
                        "unknown attribute `{}` on <{}> ignored",
                        attr.name(),
                        node.tag_name().name()
                    ),
                );
            }
        }
    }

    fn missing_element(&self, node: Node, child: &str) -> ConfigError {
        ConfigError::MissingElement {
            element: node.tag_name().name().to_string(),
            child: child.to_string(),
            line: self.line(node),
        }
    }

    fn raw<'n>(&self, node: Node<'n, 'input>, attr: &str) -> Result<&'n str, ConfigError> {
        node.attribute(attr).ok_or_else(|| ConfigError::MissingAttribute {
            element: node.tag_name().name().to_string(),
            attribute: attr.to_string(),
            line: self.line(node),
        })
    }

    fn string(&self, node: Node, attr: &str) -> Result<String, ConfigError> {
        self.raw(node, attr).map(str::to_string)
    }

    fn invalid(&self, node: Node, attr: &str, value: &str, expected: &'static str) -> ConfigError {
        ConfigError::InvalidValue {
            element: node.tag_name().name().to_string(),
            attribute: attr.to_string(),
            value: value.to_string(),
            expected,
            line: self.line(node),
        }
    }

    fn float(&self, node: Node, attr: &str) -> Result<f64, ConfigError> {
        let raw = self.raw(node, attr)?;
        raw.trim()
            .parse::<f64>()
            .map_err(|_| self.invalid(node, attr, raw, "number"))
    }

    fn count_value(&self, node: Node, attr: &str, raw: &str) -> Result<u32, ConfigError> {
        raw.trim()
            .parse::<u32>()
            .map_err(|_| self.invalid(node, attr, raw, "non-negative integer"))
    }

    fn pose(&self, node: Node) -> Result<Pose3, ConfigError> {
        Ok(Pose3::new(
            self.float(node, "v1")?,
            self.float(node, "v2")?,
            self.float(node, "v3")?,
        ))
    }

    fn child<'n>(&self, node: Node<'n, 'input>, name: &str) -> Result<Node<'n, 'input>, ConfigError> {
        node.children()
            .find(|c| c.has_tag_name(name))
            .ok_or_else(|| self.missing_element(node, name))
    }

    fn touch(&mut self, node: Node) -> Result<TouchParams, ConfigError> {
        self.check_attrs(
            node,
            &["sensor", "event_time_wait", "movement_duration", "poking_duration"],
        );
        let known = ["threshold", "motion_single_pin", "motion_two_pins", "poking", "init"];
        for child in node.children().filter(Node::is_element) {
            let name = child.tag_name().name();
            if !known.contains(&name) {
                self.warn(child, format!("unknown element <{name}> in <touch> ignored"));
            } else if name == "threshold" {
                self.check_attrs(child, &["v1", "v2", "v3", "w1", "w2", "w3"]);
            } else {
                self.check_attrs(child, &["v1", "v2", "v3"]);
            }
        }
        let th = self.child(node, "threshold")?;
        Ok(TouchParams {
            sensor_id: self.string(node, "sensor")?,
            event_time_wait: self.float(node, "event_time_wait")?,
            movement_duration: self.float(node, "movement_duration")?,
            poking_duration: self.float(node, "poking_duration")?,
            threshold: ContactThreshold {
                v1: self.float(th, "v1")?,
                v2: self.float(th, "v2")?,
                v3: self.float(th, "v3")?,
                w1: self.float(th, "w1")?,
                w2: self.float(th, "w2")?,
                w3: self.float(th, "w3")?,
            },
            motion_single_pin: self.pose(self.child(node, "motion_single_pin")?)?,
            motion_two_pins: self.pose(self.child(node, "motion_two_pins")?)?,
            poking: self.pose(self.child(node, "poking")?)?,
            init: self.pose(self.child(node, "init")?)?,
        })
    }

    fn aliased_count(&self, node: Node, canonical: &str) -> Result<u32, ConfigError> {
        let alias = EXPERIMENT_ALIASES
            .iter()
            .find(|(c, _)| *c == canonical)
            .map(|(_, a)| *a);
        match (node.attribute(canonical), alias.and_then(|a| node.attribute(a))) {
            (Some(raw), _) => self.count_value(node, canonical, raw),
            (None, Some(raw)) => self.count_value(node, alias.unwrap_or(canonical), raw),
            (None, None) => Err(ConfigError::MissingAttribute {
                element: node.tag_name().name().to_string(),
                attribute: canonical.to_string(),
                line: self.line(node),
            }),
        }
    }

    fn experiment(&mut self, node: Node) -> Result<ExperimentParams, ConfigError> {
        let mut known = vec!["participant_ext_file", "trial_ext_file", "training_index", "path"];
        for (canonical, alias) in EXPERIMENT_ALIASES {
            known.push(canonical);
            known.push(alias);
        }
        self.check_attrs(node, &known);
        let training_raw = self.raw(node, "training_index")?;
        Ok(ExperimentParams {
            participant_ext_file: self.string(node, "participant_ext_file")?,
            trial_ext_file: self.string(node, "trial_ext_file")?,
            number_training_trials: self.aliased_count(node, "number_training_trials")?,
            training_index: self.count_value(node, "training_index", training_raw)?,
            number_presentations: self.aliased_count(node, "number_presentations")?,
            number_ftdata_recordings: self.aliased_count(node, "number_ftdata_recordings")?,
            data_path: self.string(node, "path")?,
        })
    }
}

pub fn validate_config(cfg: &DemoConfig) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (i, wp) in cfg.wposes.iter().enumerate() {
        if wp.name.is_empty() {
            report.push(format!("wposes[{i}].name"), "pose name must not be empty");
        }
        check_pose(&mut report, &format!("wposes[{i}]"), wp.pose);
    }

    if cfg.smposes.is_empty() {
        report.push("smposes", NO_STEPPER_POSES);
    }
    for (i, sm) in cfg.smposes.iter().enumerate() {
        if !sm.c1.is_finite() || sm.c1 < 0.0 || sm.c1 > MAX_PIN_SEPARATION {
            report.push(
                format!("smposes[{i}].c1"),
                format!("pin separation {} m outside [0, {MAX_PIN_SEPARATION}]", sm.c1),
            );
        }
        if !sm.c2.is_finite() {
            report.push(format!("smposes[{i}].c2"), "value must be finite");
        }
        if cfg.smposes[..i].iter().any(|prev| prev.c1 == sm.c1) {
            report.push(
                format!("smposes[{i}].c1"),
                format!("duplicate pin separation {} m", sm.c1),
            );
        }
    }

    let t = &cfg.touch;
    for (name, value) in [
        ("event_time_wait", t.event_time_wait),
        ("movement_duration", t.movement_duration),
        ("poking_duration", t.poking_duration),
    ] {
        if !(value.is_finite() && value > 0.0) {
            report.push(format!("touch.{name}"), format!("duration {value} s must be positive"));
        }
    }
    for (name, value) in ["v1", "v2", "v3", "w1", "w2", "w3"].iter().zip(t.threshold.channels()) {
        if !(value.is_finite() && value > 0.0) {
            report.push(
                format!("touch.threshold.{name}"),
                format!("threshold {value} must be positive"),
            );
        }
    }
    for (name, pose) in [
        ("motion_single_pin", t.motion_single_pin),
        ("motion_two_pins", t.motion_two_pins),
        ("poking", t.poking),
        ("init", t.init),
    ] {
        check_pose(&mut report, &format!("touch.{name}"), pose);
    }

    let e = &cfg.experiment;
    if e.number_training_trials > 0 && !(1..=e.number_training_trials).contains(&e.training_index) {
        report.push(
            "experiment_data.training_index",
            format!(
                "training_index {} outside 1..={}",
                e.training_index, e.number_training_trials
            ),
        );
    }
    if e.number_presentations < 1 {
        report.push("experiment_data.number_presentations", "must be at least 1");
    }
    if e.number_ftdata_recordings < 1 {
        report.push("experiment_data.number_ftdata_recordings", "must be at least 1");
    }
    if e.data_path.is_empty() {
        report.push("experiment_data.path", "data path must not be empty");
    }
    report
}

fn check_pose(report: &mut ValidationReport, path: &str, pose: Pose3) {
    for (axis, c) in ["v1", "v2", "v3"].iter().zip(pose.components()) {
        if !c.is_finite() {
            report.push(format!("{path}.{axis}"), "value must be finite");
        } else if c.abs() > WORKSPACE_BOUND {
            report.push(
                format!("{path}.{axis}"),
                format!("{c} m outside workspace bound ±{WORKSPACE_BOUND} m"),
            );
        }
    }
}

/// Writes a `<demo>` document that parses back to an equal [`DemoConfig`].
pub fn serialize_demo_config(cfg: &DemoConfig) -> Result<String, ConfigError> {
    let report = validate_config(cfg);
    if let Some(first) = report.findings.into_iter().next() {
        return Err(ConfigError::Invalid(first));
    }

    let mut out = String::new();
    out.push_str(&format!("<demo data_name=\"{}\">\n", escape(&cfg.data_name)));
    for wp in &cfg.wposes {
        out.push_str(&format!(
            "  <wpose name=\"{}\" {}/>\n",
            escape(&wp.name),
            pose_attrs(wp.pose)
        ));
    }
    for sm in &cfg.smposes {
        out.push_str(&format!(
            "  <smpose name=\"sm_commands\" dim=\"2\" c1=\"{}\" c2=\"{}\"/>\n",
            sm.c1, sm.c2
        ));
    }
    let t = &cfg.touch;
    out.push_str(&format!(
        "  <touch sensor=\"{}\" event_time_wait=\"{}\" movement_duration=\"{}\" poking_duration=\"{}\">\n",
        escape(&t.sensor_id),
        t.event_time_wait,
        t.movement_duration,
        t.poking_duration
    ));
    let th = &t.threshold;
    out.push_str(&format!(
        "    <threshold v1=\"{}\" v2=\"{}\" v3=\"{}\" w1=\"{}\" w2=\"{}\" w3=\"{}\"/>\n",
        th.v1, th.v2, th.v3, th.w1, th.w2, th.w3
    ));
    for (name, pose) in [
        ("motion_single_pin", t.motion_single_pin),
        ("motion_two_pins", t.motion_two_pins),
        ("poking", t.poking),
        ("init", t.init),
    ] {
        out.push_str(&format!("    <{name} {}/>\n", pose_attrs(pose)));
    }
    out.push_str("  </touch>\n");
    let e = &cfg.experiment;
    out.push_str(&format!(
        "  <experiment_data participant_ext_file=\"{}\" trial_ext_file=\"{}\" number_training_trials=\"{}\" training_index=\"{}\" number_presentations=\"{}\" number_ftdata_recordings=\"{}\" path=\"{}\"></experiment_data>\n",
        escape(&e.participant_ext_file),
        escape(&e.trial_ext_file),
        e.number_training_trials,
        e.training_index,
        e.number_presentations,
        e.number_ftdata_recordings,
        escape(&e.data_path)
    ));
    out.push_str("</demo>\n");
    Ok(out)
}

fn pose_attrs(p: Pose3) -> String {
    format!("v1=\"{}\" v2=\"{}\" v3=\"{}\"", p.v1, p.v2, p.v3)
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_config_values() {
        let cfg = parse_demo_config(YOUNG_CONFIG_XML).unwrap();
        assert_eq!(cfg.data_name, "data.demo");
        assert_eq!(cfg.wposes.len(), 5);
        assert_eq!(
            cfg.distances(),
            vec![0.0001, 0.0003, 0.0006, 0.001, 0.0013, 0.0016, 0.002]
        );
        assert!(cfg.smposes.iter().all(|s| s.c2 == 0.0));
        let t = &cfg.touch;
        assert_eq!(t.sensor_id, "FTDAQ+FTDAQ_Delta3");
        assert_eq!(t.threshold.channels(), [0.5, 0.5, 0.25, 0.1, 0.1, 0.1]);
        assert_eq!(
            (t.event_time_wait, t.movement_duration, t.poking_duration),
            (0.10, 2.0, 5.0)
        );
        assert_eq!(t.motion_single_pin, Pose3::new(0.0, 0.024, 0.0));
        assert_eq!(t.motion_two_pins, Pose3::new(0.0, -0.018, 0.0));
        assert_eq!(t.poking, Pose3::new(0.0, 0.0, -0.02));
        assert_eq!(t.init, Pose3::new(-0.1, 0.0, -0.075));
        let e = &cfg.experiment;
        assert_eq!(e.participant_ext_file, ".csv");
        assert_eq!(e.trial_ext_file, ".csv");
        assert_eq!(e.number_training_trials, 1);
        assert_eq!(e.training_index, 1);
        assert_eq!(e.number_presentations, 10);
        assert_eq!(e.number_ftdata_recordings, 10);
        assert_eq!(e.data_path, "./data/");
        assert!(validate_config(&cfg).is_runnable());
    }

    #[test]
    fn elderly_config_has_ten_distances_in_order() {
        let cfg = DemoConfig::elderly();
        assert_eq!(
            cfg.distances(),
            vec![0.001, 0.0013, 0.0016, 0.002, 0.0024, 0.003, 0.0036, 0.0043, 0.005, 0.006]
        );
    }

    #[test]
    fn duplicate_wpose_names_allowed() {
        let cfg = DemoConfig::young();
        assert_eq!(cfg.wposes_named("gbl_zero").count(), 1);
        let mut cfg = cfg;
        cfg.wposes.push(cfg.wposes[0].clone());
        assert!(validate_config(&cfg).is_runnable());
        assert_eq!(cfg.wposes_named("rel_poking_single_pin").count(), 2);
    }

    #[test]
    fn demo_found_nested_in_larger_document() {
        let xml = format!("<golem><foo/><bar>{YOUNG_CONFIG_XML}</bar></golem>");
        assert_eq!(parse_demo_config(&xml).unwrap(), DemoConfig::young());
    }

    #[test]
    fn empty_smposes_parse_but_fail_validation() {
        let xml = YOUNG_CONFIG_XML
            .lines()
            .filter(|l| !l.trim_start().starts_with("<smpose") || l.contains("-->"))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = parse_demo_config(&xml).unwrap();
        assert!(cfg.smposes.is_empty());
        let report = validate_config(&cfg);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].message, NO_STEPPER_POSES);
        assert!(report.is_startable());
    }

    #[test]
    fn zero_event_time_wait_is_reported() {
        let mut cfg = DemoConfig::young();
        cfg.touch.event_time_wait = 0.0;
        let report = validate_config(&cfg);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].path, "touch.event_time_wait");
        assert!(!report.is_startable());
    }

    #[test]
    fn other_violations_are_located() {
        let mut cfg = DemoConfig::young();
        cfg.smposes.push(StepperCommand { c1: 0.002, c2: 0.0 });
        cfg.smposes.push(StepperCommand { c1: 0.02, c2: 0.0 });
        cfg.touch.threshold.w2 = 0.0;
        cfg.touch.init.v1 = 0.7;
        cfg.experiment.training_index = 2;
        cfg.experiment.number_presentations = 0;
        let paths: Vec<_> = validate_config(&cfg).findings.into_iter().map(|f| f.path).collect();
        assert_eq!(
            paths,
            [
                "smposes[7].c1",
                "smposes[8].c1",
                "touch.threshold.w2",
                "touch.init.v1",
                "experiment_data.training_index",
                "experiment_data.number_presentations",
            ]
        );
    }

    #[test]
    fn training_index_unconstrained_without_training() {
        let mut cfg = DemoConfig::young();
        cfg.experiment.number_training_trials = 0;
        cfg.experiment.training_index = 0;
        assert!(validate_config(&cfg).is_runnable());
    }

    #[test]
    fn malformed_xml_reports_line() {
        let err = parse_demo_config("<demo data_name=\"x\">\n  <wpose name=\"a\"\n</demo>").unwrap_err();
        match err {
            ConfigError::Xml { line, .. } => assert!(line >= 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_attribute_is_named() {
        let xml = YOUNG_CONFIG_XML.replace(" poking_duration=\"5.0\"", "");
        let err = parse_demo_config(&xml).unwrap_err();
        assert!(matches!(
            err,
            ConfigError::MissingAttribute { ref attribute, .. } if attribute == "poking_duration"
        ));
        assert!(err.to_string().contains("poking_duration"));
    }

    #[test]
    fn missing_element_is_named() {
        let xml = YOUNG_CONFIG_XML.replace("<poking v1=\"0.0\" v2=\"0.0\" v3=\"-0.02\"/>", "");
        let err = parse_demo_config(&xml).unwrap_err();
        assert!(matches!(err, ConfigError::MissingElement { ref child, .. } if child == "poking"));
    }

    #[test]
    fn non_numeric_values_are_type_errors() {
        let xml = YOUNG_CONFIG_XML.replace("c1=\"0.0003\"", "c1=\"wide\"");
        let err = parse_demo_config(&xml).unwrap_err();
        assert!(matches!(
            err,
            ConfigError::InvalidValue { ref attribute, ref value, line, .. }
                if attribute == "c1" && value == "wide" && line == 11
        ));
        let xml = YOUNG_CONFIG_XML.replace("number_presentations=\"10\"", "number_presentations=\"-1\"");
        assert!(matches!(
            parse_demo_config(&xml).unwrap_err(),
            ConfigError::InvalidValue { .. }
        ));
    }

    #[test]
    fn num_aliases_accepted() {
        let xml = YOUNG_CONFIG_XML
            .replace("number_training_trials=", "num_training_trials=")
            .replace("number_presentations=", "num_presentations=")
            .replace("number_ftdata_recordings=", "num_ftdata_recordings=");
        assert_eq!(parse_demo_config(&xml).unwrap(), DemoConfig::young());
    }

    #[test]
    fn unknown_attributes_warn() {
        let xml = YOUNG_CONFIG_XML.replace("<touch sensor=", "<touch colour=\"red\" sensor=");
        let (cfg, warnings) = parse_demo_config_with_warnings(&xml).unwrap();
        assert_eq!(cfg, DemoConfig::young());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("colour"));
        let (_, none) = parse_demo_config_with_warnings(YOUNG_CONFIG_XML).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn serialize_round_trips_bundled_configs() {
        for cfg in [DemoConfig::young(), DemoConfig::elderly()] {
            let xml = serialize_demo_config(&cfg).unwrap();
            assert_eq!(parse_demo_config(&xml).unwrap(), cfg);
        }
    }

    #[test]
    fn minimal_config_round_trips() {
        let mut cfg = DemoConfig::young();
        cfg.wposes.clear();
        cfg.smposes = vec![StepperCommand { c1: 0.001, c2: 0.0 }];
        cfg.data_name = "a<b & \"c\"".into();
        let xml = serialize_demo_config(&cfg).unwrap();
        assert_eq!(parse_demo_config(&xml).unwrap(), cfg);
    }

    #[test]
    fn serialize_refuses_invalid() {
        let mut cfg = DemoConfig::young();
        cfg.touch.poking_duration = -1.0;
        let err = serialize_demo_config(&cfg).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(ref f) if f.path == "touch.poking_duration"));
    }
}
