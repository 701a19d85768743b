//! Scenario files: versioned JSON with line-precise diagnostics.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use loopforge_core::harness::{
    ControllerSection, NetworkSection, PlantSection, ScenarioConfig, ScenarioSection,
    TrainingSection,
};
use loopforge_core::plant::FaultEvent;
use serde::{Deserialize, Serialize};

use crate::formats::fmt_num;

pub const SCHEMA_VERSION: u32 = 1;

/// Grid for `sweep`. Empty axes keep the scenario's own value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub k_p: Vec<f64>,
    pub k_d: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty() && self.alpha.is_empty() && self.k_p.is_empty() && self.k_d.is_empty()
    }

    /// Cartesian product in gamma, alpha, k_p, k_d order. Each point is
    /// labelled by the swept values only, e.g. `gamma=0.9_k_p=40`.
    pub fn points(&self, base: &ScenarioConfig) -> Vec<SweepPoint> {
        let axis = |v: &[f64]| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let mut out = Vec::new();
        for g in axis(&self.gamma) {
            for a in axis(&self.alpha) {
                for kp in axis(&self.k_p) {
                    for kd in axis(&self.k_d) {
                        let mut config = base.clone();
                        let mut label = Vec::new();
                        if let Some(g) = g {
                            config.training.gamma = g;
                            label.push(format!("gamma={}", fmt_num(g)));
                        }
                        if let Some(a) = a {
                            config.training.alpha = a;
                            label.push(format!("alpha={}", fmt_num(a)));
                        }
                        if let Some(kp) = kp {
                            config.controller.gains.k_p = kp;
                            label.push(format!("k_p={}", fmt_num(kp)));
                        }
                        if let Some(kd) = kd {
                            config.controller.gains.k_d = kd;
                            label.push(format!("k_d={}", fmt_num(kd)));
                        }
                        out.push(SweepPoint {
                            label: label.join("_"),
                            config,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub config: ScenarioConfig,
}

/// The file layout: every section of [`ScenarioConfig`] plus a schema
/// version and an optional sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub faults: Vec<FaultEvent>,
    #[serde(default, skip_serializing_if = "SweepGrid::is_empty")]
    pub sweep: SweepGrid,
}

impl ScenarioFile {
    pub fn new(config: &ScenarioConfig, sweep: SweepGrid) -> Self {
        let c = config.clone();
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: c.scenario,
            plant: c.plant,
            network: c.network,
            training: c.training,
            controller: c.controller,
            faults: c.faults,
            sweep,
        }
    }

    pub fn into_parts(self) -> (ScenarioConfig, SweepGrid) {
        (
            ScenarioConfig {
                scenario: self.scenario,
                plant: self.plant,
                network: self.network,
                training: self.training,
                controller: self.controller,
                faults: self.faults,
            },
            self.sweep,
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file not found: {}", .path.display())]
    NotFound { path: PathBuf },
    #[error("cannot read {}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}:{column}: {message}", .path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}:{line}: {message}", .path.display())]
    Invalid {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub sweep: SweepGrid,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ConfigError::NotFound { path: path.into() },
        _ => ConfigError::Io {
            path: path.into(),
            source: e,
        },
    })?;
    let (config, sweep) = parse_config(&text, path)?;
    Ok(LoadedConfig {
        path: path.into(),
        config,
        sweep,
    })
}

/// Parses and validates scenario JSON. `origin` only labels diagnostics.
pub fn parse_config(text: &str, origin: &Path) -> Result<(ScenarioConfig, SweepGrid), ConfigError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        path: origin.into(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let lines = key_lines(text);
    let invalid = |field: &str, message: String| ConfigError::Invalid {
        path: origin.into(),
        line: locate(&lines, field),
        message,
    };
    if file.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!(
                "schema_version: {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            ),
        ));
    }
    let sweep_bad = |v: &[f64]| v.iter().any(|x| !x.is_finite());
    if sweep_bad(&file.sweep.gamma)
        || sweep_bad(&file.sweep.alpha)
        || sweep_bad(&file.sweep.k_p)
        || sweep_bad(&file.sweep.k_d)
    {
        return Err(invalid("sweep", "sweep: grid values must be finite".into()));
    }
    let (config, sweep) = file.into_parts();
    config.validate().map_err(|e| {
        let message = e.to_string();
        let field = message
            .strip_prefix("invalid configuration: ")
            .unwrap_or(&message)
            .split(": ")
            .next()
            .unwrap_or("")
            .to_string();
        invalid(&field, message)
    })?;
    for point in sweep.points(&config) {
        point
            .config
            .validate()
            .map_err(|e| invalid("sweep", format!("sweep point {}: {e}", point.label)))?;
    }
    Ok((config, sweep))
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Line of the most specific known prefix of `field` (`a.b[2].c`), or 1.
fn locate(lines: &HashMap<String, usize>, field: &str) -> usize {
    let mut f = field.to_string();
    loop {
        if let Some(&l) = lines.get(&f) {
            return l;
        }
        match f.rfind(['.', '[']) {
            Some(i) => f.truncate(i),
            None => return 1,
        }
    }
}

/// Maps every key path in a JSON document (`scenario.cycles`, `faults[1]`,
/// `faults[1].onset`) to the 1-based line where it starts. Assumes the text
/// already parsed as JSON.
pub fn key_lines(text: &str) -> HashMap<String, usize> {
    let mut s = Scanner {
        b: text.as_bytes(),
        i: 0,
        line: 1,
        out: HashMap::new(),
    };
    s.value("");
    s.out
}

struct Scanner<'a> {
    b: &'a [u8],
    i: usize,
    line: usize,
    out: HashMap<String, usize>,
}

impl Scanner<'_> {
    fn ws(&mut self) {
        while let Some(&c) = self.b.get(self.i) {
            match c {
                b'\n' => self.line += 1,
                b' ' | b'\t' | b'\r' => {}
                _ => break,
            }
            self.i += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.i + 1;
        self.i += 1;
        while let Some(&c) = self.b.get(self.i) {
            match c {
                b'\\' => self.i += 1,
                b'"' => break,
                b'\n' => self.line += 1,
                _ => {}
            }
            self.i += 1;
        }
        let end = self.i.min(self.b.len());
        self.i += 1;
        String::from_utf8_lossy(&self.b[start.min(end)..end]).into_owned()
    }

    fn value(&mut self, path: &str) {
        self.ws();
        match self.b.get(self.i) {
            Some(b'{') => {
                self.i += 1;
                loop {
                    self.ws();
                    match self.b.get(self.i) {
                        Some(b'"') => {
                            let line = self.line;
                            let key = self.string();
                            let child = if path.is_empty() {
                                key
                            } else {
                                format!("{path}.{key}")
                            };
                            self.out.entry(child.clone()).or_insert(line);
                            self.ws();
                            if self.b.get(self.i) == Some(&b':') {
                                self.i += 1;
                            }
                            self.value(&child);
                        }
                        Some(b',') => self.i += 1,
                        Some(b'}') => {
                            self.i += 1;
                            return;
                        }
                        _ => return,
                    }
                }
            }
            Some(b'[') => {
                self.i += 1;
                let mut idx = 0;
                loop {
                    self.ws();
                    match self.b.get(self.i) {
                        Some(b']') => {
                            self.i += 1;
                            return;
                        }
                        Some(b',') => self.i += 1,
                        Some(_) => {
                            let child = format!("{path}[{idx}]");
                            self.out.entry(child.clone()).or_insert(self.line);
                            self.value(&child);
                            idx += 1;
                        }
                        None => return,
                    }
                }
            }
            Some(b'"') => {
                self.string();
            }
            Some(_) => {
                while let Some(&c) = self.b.get(self.i) {
                    if matches!(c, b',' | b'}' | b']' | b' ' | b'\n' | b'\t' | b'\r') {
                        break;
                    }
                    self.i += 1;
                }
            }
            None => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopforge_core::harness::presets;

    fn p() -> &'static Path {
        Path::new("test.json")
    }

    const MINIMAL: &str = r#"{
  "schema_version": 1,
  "scenario": {
    "kind": "tracking",
    "duration": 6.0,
    "cycles": 2,
    "setpoint": { "type": "steps", "levels": [0.1, -0.1] },
    "variant": "fixed-baseline",
    "seed": 5
  }
}
"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let (c, sweep) = parse_config(MINIMAL, p()).unwrap();
        assert_eq!(c.scenario.cycles, 2);
        assert_eq!(c.scenario.seed, 5);
        assert_eq!(c.controller.decision_steps, 10);
        assert_eq!(c.layer_sizes(), vec![8, 16, 4]);
        assert!(sweep.is_empty());
    }

    #[test]
    fn presets_round_trip_through_json() {
        for (name, c) in presets::all() {
            let text = serde_json::to_string_pretty(&ScenarioFile::new(&c, SweepGrid::default())).unwrap();
            let (back, _) = parse_config(&text, p()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, c, "{name}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let bad = MINIMAL.replace("\"cycles\": 2,", "\"cycles\": 2,,");
        match parse_config(&bad, p()).unwrap_err() {
            ConfigError::Syntax { line, column, .. } => {
                assert_eq!(line, 6);
                assert!(column > 0);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_line() {
        let bad = MINIMAL.replace("\"seed\": 5", "\"seed\": 5,\n    \"sede\": 6");
        let err = parse_config(&bad, p()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("test.json:10:"), "{msg}");
        assert!(msg.contains("sede"), "{msg}");
    }

    #[test]
    fn semantic_errors_point_at_the_field() {
        let bad = MINIMAL.replace("\"cycles\": 2", "\"cycles\": 7");
        let err = parse_config(&bad, p()).unwrap_err();
        match &err {
            ConfigError::Invalid { line, message, .. } => {
                assert_eq!(*line, 6, "{message}");
                assert!(message.contains("scenario.cycles"));
            }
            e => panic!("{e}"),
        }

        let bad = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 3");
        assert!(parse_config(&bad, p()).unwrap_err().to_string().starts_with("test.json:2:"));
    }

    #[test]
    fn defaulted_field_errors_fall_back_to_the_section() {
        let bad = MINIMAL.replace(
            "\"seed\": 5\n  }",
            "\"seed\": 5\n  },\n  \"controller\": {\n    \"tau_max\": -1\n  }",
        );
        let err = parse_config(&bad, p()).unwrap_err();
        assert!(err.to_string().starts_with("test.json:12:"), "{err}");
    }

    #[test]
    fn key_lines_tracks_arrays() {
        let text = "{\n \"a\": [\n  {\"b\": 1},\n  {\n   \"b\": 2}\n ],\n \"c\": \"x,y\"\n}";
        let lines = key_lines(text);
        assert_eq!(lines["a"], 2);
        assert_eq!(lines["a[0].b"], 3);
        assert_eq!(lines["a[1]"], 4);
        assert_eq!(lines["a[1].b"], 5);
        assert_eq!(lines["c"], 7);
        assert_eq!(locate(&lines, "a[1].b.z"), 5);
        assert_eq!(locate(&lines, "nope"), 1);
    }

    #[test]
    fn sweep_grid_points_and_labels() {
        let base = presets::tracking();
        let grid = SweepGrid {
            gamma: vec![0.9, 0.99],
            k_p: vec![20.0, 40.0, 80.0],
            ..SweepGrid::default()
        };
        let pts = grid.points(&base);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].label, "gamma=0.9_k_p=20");
        assert_eq!(pts[5].label, "gamma=0.99_k_p=80");
        assert_eq!(pts[5].config.controller.gains.k_p, 80.0);
        assert_eq!(pts[5].config.training.alpha, base.training.alpha);
        assert_eq!(SweepGrid::default().points(&base).len(), 1);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_config(Path::new("/nonexistent/dir/scenario.json")).unwrap_err();
        assert!(matches!(err, ConfigError::NotFound { .. }));
        assert!(err.to_string().contains("/nonexistent/dir/scenario.json"));
    }
}
