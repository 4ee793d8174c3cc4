use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use symrb::model::{
    grid_symmetry_generators, ground_template, make_grid_model, parse_model, random_evidence,
    EvidenceSpec, GridMode, Template,
};
use symrb::sampler::chain_rng;
use symrb::{FactorGraph, GeneratingSet};

/// Default edge weight of the grid 2-coloring model.
pub const GRID_WEIGHT: f64 = 0.2;

/// Where the model and its symmetry group come from.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file in the text format (`var`, `feature`, `table`, `evidence`).
    #[arg(long, conflicts_with = "template")]
    pub model: Option<PathBuf>,
    /// Generator file, one permutation per line in cycle notation.
    #[arg(long)]
    pub group: Option<PathBuf>,
    /// Built-in template: smokers, smokers-transitivity, asthma-lite,
    /// smokes-cancer, grid or grid-hard.
    #[arg(long)]
    pub template: Option<String>,
    /// Domain size (number of people, or grid side length).
    #[arg(long, default_value_t = 2)]
    pub domain: usize,
    /// Fraction of people with observed smoking and friendship atoms.
    #[arg(long, default_value_t = 0.0)]
    pub evidence_frac: f64,
    /// Comma-separated formula weights (the edge weight for grids).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

pub struct Loaded {
    pub model: FactorGraph,
    pub group: GeneratingSet,
    pub description: String,
}

pub enum Source {
    Template(Template),
    Grid { hard: bool },
}

pub fn parse_source(name: &str) -> Result<Source> {
    match name {
        "grid" => Ok(Source::Grid { hard: false }),
        "grid-hard" => Ok(Source::Grid { hard: true }),
        _ => Ok(Source::Template(name.parse()?)),
    }
}

impl ModelArgs {
    /// Loads the model and group. Evidence sampling uses `seed`.
    pub fn load(&self, seed: u64) -> Result<Loaded> {
        let mut loaded = match (&self.model, &self.template) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read model file {}", path.display()))?;
                let model = parse_model(&text).with_context(|| format!("in {}", path.display()))?;
                let group = GeneratingSet::trivial(model.num_variables());
                Loaded {
                    model,
                    group,
                    description: path.display().to_string(),
                }
            }
            (None, Some(name)) => self.ground(name, self.domain, seed)?,
            (None, None) => bail!("give either --model or --template"),
        };
        if let Some(path) = &self.group {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read group file {}", path.display()))?;
            loaded.group = GeneratingSet::parse(&text, &loaded.model)
                .with_context(|| format!("in {}", path.display()))?;
        }
        Ok(loaded)
    }

    fn ground(&self, name: &str, d: usize, seed: u64) -> Result<Loaded> {
        match parse_source(name)? {
            Source::Grid { hard } => {
                let w = match self.weights.as_deref() {
                    None => GRID_WEIGHT,
                    Some([w]) => *w,
                    Some(ws) => bail!("grid takes one weight, got {}", ws.len()),
                };
                let mode = if hard {
                    GridMode::Hard
                } else {
                    GridMode::Soft(w)
                };
                let model = make_grid_model(d, d, mode)?;
                Ok(Loaded {
                    model,
                    group: grid_symmetry_generators(d, d),
                    description: format!("{name} {d}x{d}"),
                })
            }
            Source::Template(template) => {
                if !(0.0..=1.0).contains(&self.evidence_frac) {
                    bail!("--evidence-frac must lie in [0, 1]");
                }
                let evidence = if self.evidence_frac > 0.0 {
                    random_evidence(d, self.evidence_frac, &mut chain_rng(seed, u64::MAX))
                } else {
                    EvidenceSpec::none()
                };
                let grounded = ground_template(template, d, self.weights.as_deref(), &evidence)?;
                let group = grounded.renaming_group()?;
                Ok(Loaded {
                    model: grounded.model,
                    group,
                    description: format!("{template} d={d}"),
                })
            }
        }
    }
}
