use std::collections::BTreeMap;
use std::path::Path;

use battcap::crowd::{
    assess_device, build_reference as build_model_reference, fleet_report, preprocess,
    DeviceAssessment, DeviceStatus, ModelSummary,
};
use battcap::io::{read_reference_json, read_samples_jsonl, write_reference_json};
use battcap::{CRate, ChargingEvent, Preprocessed, ReferenceModel};

use crate::config::RunConfig;
use crate::CliError;

fn load_and_preprocess(config: &RunConfig, file: &Path) -> Result<Preprocessed, CliError> {
    let read = read_samples_jsonl(file)?;
    if read.malformed > 0 {
        eprintln!("note: skipped {} malformed line(s)", read.malformed);
    }
    let cfg = config.preprocess_config().map_err(CliError::Config)?;
    let pre = preprocess(&read.samples, &cfg);
    if pre.filtered > 0 {
        eprintln!(
            "note: filtered {} sample(s) (charger/health/temperature)",
            pre.filtered
        );
    }
    Ok(pre)
}

/// File-system-safe reference document name for a model id.
fn reference_file_name(model_id: &str) -> String {
    let safe: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.reference.json")
}

pub fn build_reference(config: &RunConfig, file: &Path, out_dir: &Path) -> Result<(), CliError> {
    let pre = load_and_preprocess(config, file)?;
    let ref_cfg = config.reference_config().map_err(CliError::Config)?;
    std::fs::create_dir_all(out_dir)?;

    let mut built = 0usize;
    let mut rejects: Vec<(String, &'static str, String)> = Vec::new();
    for (model_id, events) in pre.events_by_model() {
        match build_model_reference(model_id, &events, &ref_cfg) {
            Ok(reference) => {
                let path = out_dir.join(reference_file_name(model_id));
                write_reference_json(&path, &reference)?;
                println!(
                    "{model_id}: mcc {} m_rate {:.4} from {} samples -> {}",
                    reference.mcc,
                    reference.m_rate.value(),
                    reference.sample_count,
                    path.display()
                );
                built += 1;
            }
            Err(e) => rejects.push((model_id.to_string(), e.reason_code(), e.to_string())),
        }
    }

    let rejects_path = out_dir.join("rejects.csv");
    let mut w = csv::Writer::from_path(&rejects_path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(["model_id", "reason", "detail"]).map_err(|e| CliError::Io(e.to_string()))?;
    for (model, reason, detail) in &rejects {
        w.write_record([model.as_str(), reason, detail.as_str()])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    println!(
        "built {built} reference(s), rejected {} model(s); rejects: {}",
        rejects.len(),
        rejects_path.display()
    );
    Ok(())
}

fn load_references(refs_dir: &Path) -> Result<BTreeMap<String, ReferenceModel>, CliError> {
    if !refs_dir.is_dir() {
        return Err(CliError::Config(format!(
            "reference directory {} does not exist; run `crowd build-reference` first",
            refs_dir.display()
        )));
    }
    let mut references = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(refs_dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".reference.json")))
        .collect();
    entries.sort();
    for path in entries {
        match read_reference_json(&path)? {
            Ok(reference) => {
                references.insert(reference.model_id.clone(), reference);
            }
            Err(e) => {
                return Err(CliError::Config(format!("{}: {e}", path.display())));
            }
        }
    }
    if references.is_empty() {
        return Err(CliError::Config(format!(
            "no reference documents in {}; run `crowd build-reference` first",
            refs_dir.display()
        )));
    }
    Ok(references)
}

pub fn assess(config: &RunConfig, file: &Path, refs_dir: &Path, out: &Path) -> Result<(), CliError> {
    let references = load_references(refs_dir)?;
    let pre = load_and_preprocess(config, file)?;
    let assess_cfg = config.assess_config().map_err(CliError::Config)?;

    let mut assessments: Vec<DeviceAssessment> = Vec::new();
    let mut unreferenced = 0usize;
    for (device_id, events) in &pre.events_by_device {
        // Devices report one model; group defensively anyway.
        let mut by_model: BTreeMap<&str, Vec<&ChargingEvent>> = BTreeMap::new();
        for e in events {
            by_model.entry(e.model_id.as_str()).or_default().push(e);
        }
        for (model_id, model_events) in by_model {
            match references.get(model_id) {
                Some(reference) => assessments.push(assess_device(
                    device_id,
                    &model_events,
                    reference,
                    &assess_cfg,
                )),
                None => unreferenced += 1,
            }
        }
    }
    if unreferenced > 0 {
        eprintln!("note: {unreferenced} device(s) had no reference for their model");
    }

    write_assessments_csv(out, &assessments)?;
    let degraded = assessments.iter().filter(|a| a.status == DeviceStatus::Degraded).count();
    println!(
        "assessed {} device(s): {degraded} degraded -> {}",
        assessments.len(),
        out.display()
    );
    Ok(())
}

fn write_assessments_csv(path: &Path, assessments: &[DeviceAssessment]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record([
        "device_id",
        "model_id",
        "status",
        "ucc",
        "u_rate",
        "capacity_fraction",
        "loss_fraction",
    ])
    .map_err(|e| CliError::Io(e.to_string()))?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for a in assessments {
        w.write_record([
            a.device_id.as_str(),
            a.model_id.as_str(),
            &a.status.to_string(),
            &opt(a.ucc.map(|u| u.to_string())),
            &opt(a.u_rate.map(|r| format!("{:.6}", r.value()))),
            &opt(a.capacity_fraction.map(|c| format!("{c:.6}"))),
            &opt(a.loss_fraction.map(|l| format!("{l:.6}"))),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn read_assessments_csv(path: &Path) -> Result<Vec<DeviceAssessment>, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "assessment file {} does not exist; run `crowd assess` first",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let mut assessments = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Io(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let parse_opt = |i: usize| -> Result<Option<f64>, CliError> {
            let raw = field(i);
            if raw.is_empty() {
                Ok(None)
            } else {
                raw.parse()
                    .map(Some)
                    .map_err(|e| CliError::Config(format!("{}: bad number {raw:?}: {e}", path.display())))
            }
        };
        let status: DeviceStatus = field(2)
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let ucc = {
            let raw = field(3);
            if raw.is_empty() {
                None
            } else {
                Some(raw.parse::<u8>().map_err(|e| {
                    CliError::Config(format!("{}: bad ucc {raw:?}: {e}", path.display()))
                })?)
            }
        };
        let u_rate = match parse_opt(4)? {
            None => None,
            Some(v) => Some(CRate::new(v).map_err(|e| {
                CliError::Config(format!("{}: {e}", path.display()))
            })?),
        };
        assessments.push(DeviceAssessment {
            device_id: field(0),
            model_id: field(1),
            status,
            ucc,
            u_rate,
            capacity_fraction: parse_opt(5)?,
            loss_fraction: parse_opt(6)?,
        });
    }
    Ok(assessments)
}

pub fn report(assessments_path: &Path, out: &Path, plot_data: Option<&Path>) -> Result<(), CliError> {
    let assessments = read_assessments_csv(assessments_path)?;
    let report = fleet_report(&assessments);
    write_report_csv(out, &report)?;
    if let Some(plot_path) = plot_data {
        write_plot_data_csv(plot_path, &report)?;
    }

    println!(
        "{:<14} {:>7} {:>9} {:>9} {:>7} {:>13} {:>12}",
        "model", "devices", "degraded", "fraction", "severe", "insufficient", "median loss"
    );
    for m in &report {
        println!(
            "{:<14} {:>7} {:>9} {:>8.1}% {:>7} {:>13} {:>11.1}%",
            m.model_id,
            m.devices,
            m.degraded,
            m.degraded_fraction * 100.0,
            m.severe,
            m.insufficient,
            m.loss_median * 100.0
        );
    }
    println!("report: {}", out.display());
    Ok(())
}

fn write_report_csv(path: &Path, report: &[ModelSummary]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record([
        "model_id",
        "devices",
        "degraded",
        "degraded_fraction",
        "severe",
        "insufficient",
        "loss_min",
        "loss_q1",
        "loss_median",
        "loss_q3",
        "loss_max",
    ])
    .map_err(|e| CliError::Io(e.to_string()))?;
    for m in report {
        w.write_record([
            m.model_id.as_str(),
            &m.devices.to_string(),
            &m.degraded.to_string(),
            &format!("{:.6}", m.degraded_fraction),
            &m.severe.to_string(),
            &m.insufficient.to_string(),
            &format!("{:.6}", m.loss_min),
            &format!("{:.6}", m.loss_q1),
            &format!("{:.6}", m.loss_median),
            &format!("{:.6}", m.loss_q3),
            &format!("{:.6}", m.loss_max),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Long-form per-model loss quartiles for external plotting tools.
fn write_plot_data_csv(path: &Path, report: &[ModelSummary]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(["model_id", "statistic", "loss_fraction"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for m in report {
        for (stat, v) in [
            ("min", m.loss_min),
            ("q1", m.loss_q1),
            ("median", m.loss_median),
            ("q3", m.loss_q3),
            ("max", m.loss_max),
        ] {
            w.write_record([m.model_id.as_str(), stat, &format!("{v:.6}")])
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
