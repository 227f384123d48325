use crate::acquisition::AcquisitionSpec;
use crate::engine::RunConfig;
use crate::error::{Error, Result};

/// Refit cadence used by every preset with active learning enabled: about
/// 125 refits over a 1000-result run.
pub const PRESET_RETRAIN_BATCH: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum PresetKind {
    /// Offline reordering of a labelled pool.
    Reorder(AcquisitionSpec),
    /// Full generate/rank/simulate workflow.
    Workflow {
        acquisition: AcquisitionSpec,
        ft_fraction: f64,
        active_learning: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
}

const THIRD: f64 = 1.0 / 3.0;

fn wf(
    name: &'static str,
    description: &'static str,
    acquisition: AcquisitionSpec,
    ft_fraction: f64,
    al: bool,
) -> Preset {
    Preset {
        name,
        description,
        kind: PresetKind::Workflow {
            acquisition,
            ft_fraction,
            active_learning: al,
        },
    }
}

fn reorder(name: &'static str, description: &'static str, acquisition: AcquisitionSpec) -> Preset {
    Preset {
        name,
        description,
        kind: PresetKind::Reorder(acquisition),
    }
}

pub fn all_presets() -> Vec<Preset> {
    vec![
        reorder(
            "random-selection",
            "random acquisition order",
            AcquisitionSpec::random(),
        ),
        reorder(
            "exploit-only",
            "lowest predicted strain first",
            AcquisitionSpec::exploit(),
        ),
        reorder(
            "ucb-small",
            "confidence bound, lambda 0.1",
            AcquisitionSpec::lcb(0.1),
        ),
        reorder(
            "ucb-large",
            "confidence bound, lambda 2",
            AcquisitionSpec::lcb(2.0),
        ),
        reorder(
            "explore-only",
            "highest ensemble spread first",
            AcquisitionSpec::explore(),
        ),
        wf(
            "basic-control",
            "generation order, no surrogate",
            AcquisitionSpec::fifo(),
            0.5,
            false,
        ),
        wf(
            "basic-al",
            "exploit ranking with refits",
            AcquisitionSpec::exploit(),
            0.5,
            true,
        ),
        wf(
            "control-small-frac",
            "no surrogate, fine-tune on top 10%",
            AcquisitionSpec::fifo(),
            0.1,
            false,
        ),
        wf(
            "control-large-frac",
            "no surrogate, fine-tune on top 90%",
            AcquisitionSpec::fifo(),
            0.9,
            false,
        ),
        wf(
            "al-small-frac",
            "exploit with refits, fine-tune on top 10%",
            AcquisitionSpec::exploit(),
            0.1,
            true,
        ),
        wf(
            "al-large-frac",
            "exploit with refits, fine-tune on top 90%",
            AcquisitionSpec::exploit(),
            0.9,
            true,
        ),
        wf(
            "acq-sa-only",
            "rank by synthesizability only",
            AcquisitionSpec::multi(0.0, 1.0, 0.0),
            0.5,
            false,
        ),
        wf(
            "acq-t-only",
            "rank by novelty only",
            AcquisitionSpec::multi(0.0, 0.0, 1.0),
            0.5,
            false,
        ),
        wf(
            "acq-is-sa",
            "half strain, half synthesizability",
            AcquisitionSpec::multi(0.5, 0.5, 0.0),
            0.5,
            true,
        ),
        wf(
            "acq-is-t",
            "half strain, half novelty",
            AcquisitionSpec::multi(0.5, 0.0, 0.5),
            0.5,
            true,
        ),
        wf(
            "acq-is-sa-t",
            "equal thirds of strain, synthesizability, novelty",
            AcquisitionSpec::multi(THIRD, THIRD, THIRD),
            0.5,
            true,
        ),
        wf(
            "wf-ucb-small",
            "confidence bound, lambda 0.1, with refits",
            AcquisitionSpec::lcb(0.1),
            0.5,
            true,
        ),
        wf(
            "wf-ucb-large",
            "confidence bound, lambda 2, with refits",
            AcquisitionSpec::lcb(2.0),
            0.5,
            true,
        ),
        wf(
            "wf-explore-only",
            "highest spread first, with refits",
            AcquisitionSpec::explore(),
            0.5,
            true,
        ),
    ]
}

pub fn preset(name: &str) -> Result<Preset> {
    all_presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Workflow presets with active learning enabled.
pub fn al_workflow_presets() -> Vec<&'static str> {
    all_presets()
        .into_iter()
        .filter(|p| {
            matches!(
                p.kind,
                PresetKind::Workflow {
                    active_learning: true,
                    ..
                }
            )
        })
        .map(|p| p.name)
        .collect()
}

impl Preset {
    /// Effective run configuration for a workflow preset.
    pub fn run_config(&self, seed: u64) -> Result<RunConfig> {
        match &self.kind {
            PresetKind::Workflow {
                acquisition,
                ft_fraction,
                active_learning,
            } => Ok(RunConfig {
                seed,
                acquisition: acquisition.clone(),
                ft_fraction: *ft_fraction,
                retrain_batch: active_learning.then_some(PRESET_RETRAIN_BATCH),
                ..RunConfig::default()
            }),
            PresetKind::Reorder(_) => Err(Error::Config(format!(
                "`{}` is a reordering preset; use `alqueue reorder`",
                self.name
            ))),
        }
    }

    pub fn acquisition(&self) -> AcquisitionSpec {
        match &self.kind {
            PresetKind::Reorder(a) => a.clone(),
            PresetKind::Workflow { acquisition, .. } => acquisition.clone(),
        }
    }
}

/// A reorder strategy by preset name or acquisition mode name.
pub fn strategy(name: &str) -> Result<AcquisitionSpec> {
    if let Ok(p) = preset(name) {
        return Ok(p.acquisition());
    }
    match name {
        "random" => Ok(AcquisitionSpec::random()),
        "exploit" => Ok(AcquisitionSpec::exploit()),
        "explore" => Ok(AcquisitionSpec::explore()),
        "fifo" => Ok(AcquisitionSpec::fifo()),
        _ => {
            if let Some(l) = name.strip_prefix("lcb:") {
                let lambda = l
                    .parse()
                    .map_err(|_| Error::Config(format!("bad lambda in `{name}`")))?;
                return Ok(AcquisitionSpec::lcb(lambda));
            }
            Err(Error::UnknownPreset(name.to_string()))
        }
    }
}
