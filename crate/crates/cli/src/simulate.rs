//! `simulate`: synthetic panels with known ground truth.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use tvpsv::model::StatePaths;
use tvpsv::synth::SyntheticScenario;

use crate::error::CliError;
use crate::manifest::{write_manifest, Manifest};

pub fn load_scenario(path: &Path) -> Result<SyntheticScenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read scenario {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes `panel.csv`, the true parameter paths (`truth.csv`, columns
/// `date,block,element,value`) and the scenario itself.
pub fn simulate(scenario: &SyntheticScenario, out: &Path) -> Result<Manifest, CliError> {
    let fail = |e: tvpsv::Error| match e {
        tvpsv::Error::InvalidParameter(_) | tvpsv::Error::Dimension(_) => CliError::Input(format!("scenario: {e}")),
        other => CliError::stage("simulate", other),
    };
    scenario.validate().map_err(fail)?;
    let (panel, truth) = scenario.simulate().map_err(fail)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", out.display())))?;
    let io = |e: std::io::Error| CliError::stage("simulate", e);
    let file = |name: &str| File::create(out.join(name)).map(BufWriter::new).map_err(io);
    panel.write_csv(file("panel.csv")?).map_err(fail)?;
    write_truth(&truth, &panel.calendar(), file("truth.csv")?).map_err(|e| CliError::stage("simulate", e))?;
    let scenario_text = serde_json::to_string_pretty(scenario).expect("scenario serializes") + "\n";
    std::fs::write(out.join("scenario.json"), scenario_text).map_err(io)?;
    let files = ["panel.csv", "truth.csv", "scenario.json"].map(String::from);
    write_manifest(out, vec!["simulate".into()], scenario.seed, &files)
}

fn write_truth(
    truth: &StatePaths,
    dates: &[tvpsv::QuarterDate],
    w: impl std::io::Write,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["date", "block", "element", "value"])?;
    for (t, date) in dates.iter().enumerate() {
        for (block, v) in [("beta", &truth.beta[t]), ("a", &truth.a[t]), ("h", &truth.h[t])] {
            for (e, x) in v.iter().enumerate() {
                out.write_record([date.to_string(), block.to_string(), e.to_string(), x.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
