use std::collections::BTreeMap;
use std::path::Path;

use battcap::io::read_samples_jsonl;
use battcap::{estimate_from_samples, CRate, ChargingSample, EstimatorError, RateStrategy};

use crate::config::RunConfig;
use crate::CliError;

#[allow(clippy::too_many_arguments)]
pub fn run(
    config: &RunConfig,
    file: &Path,
    fcc_new: f64,
    c_new: f64,
    vmax: Option<f64>,
    tol_mv: Option<f64>,
    strategy: Option<&str>,
    json: bool,
) -> Result<(), CliError> {
    let vmax = match vmax {
        Some(v) => v,
        None => config.vmax_mv().map_err(CliError::Config)?,
    };
    let tol_mv = match tol_mv {
        Some(t) => t,
        None => config.tol_mv().map_err(CliError::Config)?,
    };
    let strategy: RateStrategy = match strategy {
        Some(raw) => raw.parse().map_err(CliError::Config)?,
        None => config.strategy().map_err(CliError::Config)?,
    };
    let c_new = CRate::new(c_new).map_err(|e| CliError::Config(e.to_string()))?;
    if !(fcc_new.is_finite() && fcc_new > 0.0) {
        return Err(CliError::Config(format!("--fcc-new {fcc_new} must be > 0")));
    }

    let read = read_samples_jsonl(file)?;
    if read.malformed > 0 {
        eprintln!("note: skipped {} malformed line(s)", read.malformed);
    }
    if read.samples.is_empty() {
        return Err(CliError::InsufficientData(format!(
            "{} holds no well-formed samples",
            file.display()
        )));
    }

    let (device_id, mut samples) = pick_device(read.samples);
    samples.sort_by_key(|s| (s.t, s.soc));
    let events = split_events(&samples);
    let event = events
        .iter()
        .max_by_key(|e| (e.len(), std::cmp::Reverse(e[0].t)))
        .expect("nonempty samples yield at least one event");
    if events.len() > 1 {
        eprintln!(
            "note: {} charging events found; estimating from the longest ({} samples)",
            events.len(),
            event.len()
        );
    }

    let estimate = estimate_from_samples(event, fcc_new, c_new, vmax, tol_mv, strategy).map_err(
        |e| match e {
            EstimatorError::NoCcPhase => CliError::NoCcPhase(
                "the samples never show a constant-current phase (voltage at maximum throughout)"
                    .into(),
            ),
            EstimatorError::InsufficientData(m) => CliError::InsufficientData(m),
            other => CliError::InsufficientData(other.to_string()),
        },
    )?;

    if json {
        println!("{}", serde_json::to_string_pretty(&estimate).expect("serializable"));
    } else {
        let model_id = event[0].model_id.as_str();
        println!("device       {device_id}");
        println!("model        {model_id}");
        println!("samples      {} (of {} read)", event.len(), samples.len());
        println!("cc_end_soc   {}", estimate.cc_end_soc);
        println!("strategy     {}", estimate.strategy);
        println!("c_new        {:.4}", estimate.c_new.value());
        println!("c_now        {:.4}", estimate.c_now.value());
        println!("fcc_now      {} mAh", estimate.fcc_now_rounded_mah());
        println!("loss         {:.1} %", estimate.loss_fraction * 100.0);
    }
    Ok(())
}

/// The file should hold one device; with several, take the one with the most
/// samples (ties: lexicographically first id).
fn pick_device(samples: Vec<ChargingSample>) -> (String, Vec<ChargingSample>) {
    let mut by_device: BTreeMap<String, Vec<ChargingSample>> = BTreeMap::new();
    for s in samples {
        by_device.entry(s.device_id.clone()).or_default().push(s);
    }
    if by_device.len() > 1 {
        eprintln!("note: {} devices in file; using the best-covered one", by_device.len());
    }
    by_device
        .into_iter()
        .max_by(|(ida, a), (idb, b)| a.len().cmp(&b.len()).then(idb.cmp(ida)))
        .expect("nonempty")
}

/// Split time-sorted samples into charging events on long gaps or SOC drops.
fn split_events(samples: &[ChargingSample]) -> Vec<Vec<ChargingSample>> {
    let mut events: Vec<Vec<ChargingSample>> = Vec::new();
    for s in samples {
        let boundary = match events.last().and_then(|e| e.last()) {
            None => true,
            Some(p) => s.t - p.t > battcap::EVENT_GAP_LIMIT_S || s.soc < p.soc,
        };
        if boundary {
            events.push(vec![s.clone()]);
        } else {
            events.last_mut().expect("nonempty").push(s.clone());
        }
    }
    events
}
