use std::path::{Path, PathBuf};

use battcap::io::write_samples_jsonl;
use battcap::sim::{generate_fleet, simulate_charge_detailed, DeviceTruth};

use crate::config::{RunConfig, SimJob};
use crate::CliError;

/// Sidecar path for the ground-truth table: `samples.jsonl` ->
/// `samples.truth.csv`.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.csv")
}

pub fn run(config: &RunConfig, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let job = config.sim_job(seed).map_err(CliError::Config)?;
    let (samples, truths) = match job {
        SimJob::Cell(job) => {
            let (samples, _) = simulate_charge_detailed(
                &job.cell,
                &job.charger,
                &job.controller,
                &job.load,
                &job.params,
                &job.opts,
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            let truth = DeviceTruth {
                device_id: job.opts.device_id.clone(),
                model_id: job.model_id.clone(),
                fcc_new_mah: job.cell.fcc_new_mah,
                fcc_now_mah: job.cell.fcc_now_mah,
                loss_fraction: 1.0 - job.cell.fcc_now_mah / job.cell.fcc_new_mah,
                c_new_ac: battcap::effective_charger_current_ma(&job.charger, &job.controller)
                    / job.cell.fcc_new_mah,
            };
            (samples, vec![truth])
        }
        SimJob::Fleet(fleet) => {
            generate_fleet(&fleet).map_err(|e| CliError::Config(e.to_string()))?
        }
    };

    write_samples_jsonl(out, &samples)?;
    let truth_file = truth_path(out);
    write_truth_csv(&truth_file, &truths)?;

    println!(
        "wrote {} samples for {} device(s) to {}",
        samples.len(),
        truths.len(),
        out.display()
    );
    println!("ground truth: {}", truth_file.display());
    Ok(())
}

fn write_truth_csv(path: &Path, truths: &[DeviceTruth]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(["device_id", "model_id", "fcc_new_mah", "fcc_now_mah", "loss_fraction", "c_new_ac"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for t in truths {
        w.write_record([
            t.device_id.as_str(),
            t.model_id.as_str(),
            &format!("{:.3}", t.fcc_new_mah),
            &format!("{:.3}", t.fcc_now_mah),
            &format!("{:.6}", t.loss_fraction),
            &format!("{:.6}", t.c_new_ac),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
