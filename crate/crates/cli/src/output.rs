//! Builds every output file in memory, then writes them together.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use qdtele::protocol::{
    classical_ratio_to_fidelity, entanglement_correlation_run, run_g2, run_hom, run_qubit, run_teleportation_input,
    threshold_significance, Mode,
};
use qdtele::tagstream::{write_tags, CoincidenceHistogram, HistogramSidecar};

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    mode: Mode,
    seed: u64,
    config_hash: String,
    results: Value,
    config: &'a Config,
}

pub struct OutputSet {
    seed: u64,
    hash: String,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(cfg: &Config) -> Self {
        Self { seed: cfg.protocol.seed, hash: cfg.hash(), files: Vec::new() }
    }

    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    fn histogram(&mut self, name: &str, h: &CoincidenceHistogram) -> Result<()> {
        let sidecar = HistogramSidecar::new(name, h, self.seed, &self.hash);
        self.text(&format!("{name}.csv"), h.to_csv());
        self.text(&format!("{name}.json"), serde_json::to_string_pretty(&sidecar)? + "\n");
        Ok(())
    }

    fn summary(&mut self, cfg: &Config, experiment: &str, mode: Mode, results: Value) -> Result<()> {
        let s = Summary { experiment, mode, seed: self.seed, config_hash: self.hash.clone(), results, config: cfg };
        let body = serde_json::to_string_pretty(&s)? + "\n";
        self.text("summary.json", body);
        self.text("config.toml", cfg.to_toml());
        Ok(())
    }

    /// Writes all files into `dir`; on failure removes whatever was already written.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, body) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            written.push(path);
        }
        Ok(())
    }
}

/// JSON numbers cannot hold infinities or NaN.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn teleport(cfg: &Config, mode: Mode) -> Result<OutputSet> {
    let mut out = OutputSet::new(cfg);
    let noise = cfg.noise();
    let record = mode == Mode::MonteCarlo && cfg.tagstream.record_tags;
    let mut inputs = Vec::new();
    let (mut f_sum, mut var_sum) = (0.0, 0.0);
    let selected = cfg.protocol.input.inputs();
    for &input in &selected {
        let r = run_teleportation_input(&cfg.experiment(input), &noise, mode, record)?;
        let label = input.label();
        out.histogram(&format!("threefold_{label}_up"), &r.histogram_up)?;
        out.histogram(&format!("threefold_{label}_down"), &r.histogram_down)?;
        if record {
            out.text(&format!("tags_{label}.txt"), write_tags(&r.tags));
        }
        let ratio = r.classical_ratio();
        inputs.push(json!({
            "input": label,
            "fidelity": num(r.fidelity),
            "stderr": num(r.stderr),
            "heralds": num(r.heralds),
            "classical_ratio": num(ratio),
            "ratio_fidelity": classical_ratio_to_fidelity(ratio).map(num).unwrap_or(Value::Null),
            "threefold_up": r.counts.up.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "threefold_down": r.counts.down.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        }));
        f_sum += r.fidelity;
        var_sum += r.stderr * r.stderr;
    }
    let n = selected.len() as f64;
    let (f_t, se) = (f_sum / n, var_sum.sqrt() / n);
    let significance = threshold_significance(f_t, se).map(num).unwrap_or(Value::Null);
    let results = json!({ "f_t": num(f_t), "f_t_stderr": num(se), "significance": significance, "inputs": inputs });
    out.summary(cfg, "teleport", mode, results)?;
    Ok(out)
}

pub fn hom(cfg: &Config, mode: Mode) -> Result<OutputSet> {
    let mut out = OutputSet::new(cfg);
    let r = run_hom(&cfg.hom(), &cfg.noise(), mode)?;
    out.histogram("hom_parallel", &r.parallel.histogram)?;
    out.histogram("hom_orthogonal", &r.orthogonal.histogram)?;
    let arm = |a: &qdtele::protocol::HomArm| json!({ "center": num(a.center), "side": num(a.side), "ratio": num(a.ratio) });
    let results = json!({
        "visibility": num(r.visibility.value),
        "visibility_stderr": num(r.visibility.stderr),
        "parallel": arm(&r.parallel),
        "orthogonal": arm(&r.orthogonal),
    });
    out.summary(cfg, "hom", mode, results)?;
    Ok(out)
}

pub fn entangle(cfg: &Config, mode: Mode) -> Result<OutputSet> {
    let mut out = OutputSet::new(cfg);
    let r = entanglement_correlation_run(&cfg.entangle(), &cfg.noise(), mode)?;
    out.histogram("entangle_plus", &r.histogram_plus)?;
    out.histogram("entangle_minus", &r.histogram_minus)?;
    let results = json!({
        "contrast": num(r.contrast),
        "contrast_stderr": num(r.contrast_stderr),
        "jitter_factor": num(r.jitter_factor),
        "z_correlation": num(r.z_correlation),
        "fidelity_bound": num(r.fidelity_bound),
    });
    out.summary(cfg, "entangle", mode, results)?;
    Ok(out)
}

pub fn qubit(cfg: &Config, mode: Mode) -> Result<OutputSet> {
    let mut out = OutputSet::new(cfg);
    let r = run_qubit(&cfg.qubit(), &cfg.noise(), mode)?;
    out.histogram("qubit", &r.histogram)?;
    out.histogram("qubit_envelope", &r.envelope)?;
    let results = json!({
        "period_ps": num(r.fit.period),
        "frequency_ghz": num(r.frequency_ghz),
        "contrast": num(r.fit.contrast),
    });
    out.summary(cfg, "qubit", mode, results)?;
    Ok(out)
}

pub fn g2(cfg: &Config, mode: Mode) -> Result<OutputSet> {
    let mut out = OutputSet::new(cfg);
    let r = run_g2(&cfg.g2(), &cfg.noise(), mode)?;
    if let Some(h) = &r.histogram {
        out.histogram("g2", h)?;
    }
    let results = json!({ "center": num(r.center), "side": num(r.side), "ratio": num(r.ratio) });
    out.summary(cfg, "g2", mode, results)?;
    Ok(out)
}
