//! Feasibility report for a configuration: resolution, RIC bound terms and sample counts.

use std::fmt::{self, Write as _};

use crate::analysis::{
    required_freq_samples, resolution_bound, ric_bound, sample_complexity_check, BoundInputs,
    RicBound, SampleComplexityReport, RIC_THRESHOLD,
};
use crate::error::Result;

use super::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub inputs: BoundInputs,
    pub ric: RicBound,
    /// Smallest spacing keeping the first RIC term below the threshold, meters.
    pub min_spacing: f64,
    pub required_freq_samples: usize,
    pub complexity: SampleComplexityReport,
}

impl FeasibilityReport {
    pub fn new(config: &ExperimentConfig, order_constant: f64) -> Result<Self> {
        config.validate()?;
        let spectral = config.spectral()?;
        let grid = config.grid()?;
        let inputs = BoundInputs::new(&spectral, &grid, &config.geometry()?)?;
        let ratio = inputs.side_length / inputs.range_resolution;
        Ok(Self {
            ric: ric_bound(&inputs, order_constant),
            min_spacing: resolution_bound(&inputs),
            required_freq_samples: required_freq_samples(inputs.side_length, inputs.range_resolution),
            complexity: sample_complexity_check(inputs.pixels, config.freq_samples, inputs.receivers, ratio),
            inputs,
        })
    }

    /// Warnings for requirements the configuration misses; none are fatal.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.inputs.spacing < self.min_spacing {
            out.push(format!(
                "spacing {:.4} m is below the bound {:.4} m",
                self.inputs.spacing, self.min_spacing
            ));
        }
        if self.ric.first >= RIC_THRESHOLD {
            out.push(format!("first RIC term {:.4} reaches {RIC_THRESHOLD}", self.ric.first));
        }
        for c in self.complexity.checks.iter().filter(|c| !c.passed()) {
            out.push(format!("{}: have {:.4}, need {:.4}", c.name, c.have, c.need));
        }
        out
    }

    /// Two-column `quantity,value` table.
    pub fn to_csv(&self) -> String {
        let i = &self.inputs;
        let mut s = String::from("quantity,value\n");
        let rows: [(&str, f64); 12] = [
            ("wavelength_m", i.wavelength),
            ("range_resolution_m", i.range_resolution),
            ("side_length_m", i.side_length),
            ("spacing_m", i.spacing),
            ("min_spacing_m", self.min_spacing),
            ("ric_first_term", self.ric.first),
            ("ric_second_term", self.ric.second),
            ("ric_total", self.ric.total),
            ("ric_threshold", RIC_THRESHOLD),
            ("pixels", i.pixels as f64),
            ("receivers", i.receivers as f64),
            ("required_freq_samples", self.required_freq_samples as f64),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k},{v:e}");
        }
        for c in &self.complexity.checks {
            let key = c.name.replace(' ', "_");
            let _ = writeln!(s, "{key}_have,{:e}", c.have);
            let _ = writeln!(s, "{key}_need,{:e}", c.need);
        }
        s
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.inputs;
        writeln!(f, "wavelength          {:.6} m", i.wavelength)?;
        writeln!(f, "range resolution    {:.6} m", i.range_resolution)?;
        writeln!(f, "scene side          {:.3} m ({} pixels, spacing {:.4} m)", i.side_length, i.pixels, i.spacing)?;
        writeln!(f, "min spacing         {:.4} m", self.min_spacing)?;
        writeln!(
            f,
            "RIC bound           {:.4} + {:.4e} = {:.4} (threshold {RIC_THRESHOLD})",
            self.ric.first, self.ric.second, self.ric.total
        )?;
        writeln!(f, "required M          {}", self.required_freq_samples)?;
        write!(f, "{}", self.complexity)?;
        for w in self.warnings() {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
