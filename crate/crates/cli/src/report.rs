//! Run reports and the files written to the output directory.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::experiments::Outcome;
use crate::scenario::Scenario;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub experiments: Vec<Outcome>,
    pub failed: Vec<String>,
    pub pass: bool,
    /// sha256 of the report with this field and the timings removed.
    pub content_hash: String,
    pub timings: Value,
}

impl RunReport {
    pub fn new(scenario: Scenario, experiments: Vec<Outcome>) -> Self {
        let failed: Vec<String> = experiments.iter().flat_map(Outcome::failures).collect();
        let timings = json!({
            "experiments": experiments.iter().map(|o| json!({"index": o.index, "seconds": o.seconds})).collect::<Vec<_>>(),
            "total_seconds": experiments.iter().map(|o| o.seconds).sum::<f64>(),
        });
        let mut report = Self { scenario, experiments, pass: failed.is_empty(), failed, content_hash: String::new(), timings };
        report.content_hash = report.hash();
        report
    }

    fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let map = v.as_object_mut().expect("report is an object");
        map.remove("content_hash");
        map.remove("timings");
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("value serializes")))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.write_residuals(dir)?;
        let broken: Vec<&Outcome> = self.experiments.iter().filter(|o| !o.queries.is_empty()).collect();
        if !broken.is_empty() {
            let tagged = |o: &Outcome, mut v: Value| {
                v["experiment"] = json!(o.index);
                v
            };
            let queries = broken
                .iter()
                .flat_map(|o| o.queries.iter().map(|q| tagged(o, serde_json::to_value(q).expect("query serializes"))));
            write_lines(&dir.join("queries.jsonl"), queries)?;
            let results = broken.iter().flat_map(|o| o.results.iter().map(|r| tagged(o, r.clone())));
            write_lines(&dir.join("results.jsonl"), results)?;
        }
        Ok(())
    }

    fn write_residuals(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("residuals.csv");
        let err = |e: csv::Error| CliError::io(format!("writing {}", path.display()), e.into());
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        w.write_record(["name", "value", "threshold", "pass", "relation", "experiment"]).map_err(err)?;
        for o in &self.experiments {
            for c in &o.checks {
                let relation = serde_json::to_value(c.relation).expect("relation serializes");
                w.write_record([
                    c.name.clone(),
                    format!("{:e}", c.value),
                    format!("{:e}", c.threshold),
                    c.pass.to_string(),
                    relation.as_str().unwrap_or_default().to_owned(),
                    o.index.to_string(),
                ])
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }
}

fn write_lines(path: &Path, items: impl Iterator<Item = Value>) -> Result<(), CliError> {
    let err = |e| CliError::io(format!("writing {}", path.display()), e);
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(err)?);
    for item in items {
        serde_json::to_writer(&mut f, &item).map_err(|e| err(e.into()))?;
        f.write_all(b"\n").map_err(err)?;
    }
    f.flush().map_err(err)
}
