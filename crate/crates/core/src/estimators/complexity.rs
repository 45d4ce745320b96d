use std::fmt;

use serde::Serialize;

use super::{EstimatorModel, Variant};

/// Per block type: how many parameter instances exist and how often the
/// block runs per sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockComplexity {
    pub kind: &'static str,
    pub instances: usize,
    pub applications: usize,
    pub params_per_instance: usize,
    pub params: usize,
    pub flops: usize,
}

/// Parameter and flop totals. Flops count 2 per multiply-accumulate of every
/// dense layer application (shared blocks once per application), excluding
/// bias adds and activations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub variant: Variant,
    pub params: usize,
    pub flops: usize,
    pub blocks: Vec<BlockComplexity>,
    /// Published totals for the reference configuration, for comparison.
    pub reference_params: &'static str,
    pub reference_flops: &'static str,
}

pub fn complexity_report(model: &EstimatorModel) -> ComplexityReport {
    let c = &model.config;
    let mut blocks = vec![BlockComplexity {
        kind: "frequency block",
        instances: model.freq_blocks.len(),
        applications: c.n_p_t,
        params_per_instance: model.freq_blocks[0].param_count(),
        params: model.freq_blocks.iter().map(|b| b.param_count()).sum(),
        flops: c.n_p_t * model.freq_blocks[0].flops(),
    }];
    if let Some(first) = model.attention.first() {
        blocks.push(BlockComplexity {
            kind: "attention block",
            instances: model.attention.len(),
            applications: c.n_p_t,
            params_per_instance: first.param_count(),
            params: model.attention.iter().map(|a| a.param_count()).sum(),
            flops: c.n_p_t * first.flops(),
        });
    }
    blocks.push(BlockComplexity {
        kind: "time block",
        instances: model.time_blocks.len(),
        applications: c.n_groups(),
        params_per_instance: model.time_blocks[0].param_count(),
        params: model.time_blocks.iter().map(|b| b.param_count()).sum(),
        flops: c.n_groups() * model.time_blocks[0].flops(),
    });
    let (reference_params, reference_flops) = match model.variant {
        Variant::FreqTime => ("102K", "286k"),
        Variant::AttenFreqTime => ("147K", "416k"),
    };
    ComplexityReport {
        variant: model.variant,
        params: blocks.iter().map(|b| b.params).sum(),
        flops: blocks.iter().map(|b| b.flops).sum(),
        blocks,
        reference_params,
        reference_flops,
    }
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.variant.name())?;
        writeln!(
            f,
            "  {:<16} {:>9} {:>12} {:>12} {:>12}",
            "block", "instances", "applications", "params", "flops"
        )?;
        for b in &self.blocks {
            writeln!(
                f,
                "  {:<16} {:>9} {:>12} {:>12} {:>12}",
                b.kind, b.instances, b.applications, b.params, b.flops
            )?;
        }
        writeln!(f, "  total params: {}", self.params)?;
        writeln!(f, "  total flops:  {} (2 per MAC, per application)", self.flops)?;
        write!(
            f,
            "  published reference: {} params, {} flops (counting convention unknown)",
            self.reference_params, self.reference_flops
        )
    }
}
