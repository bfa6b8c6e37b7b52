use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    fetch_metrics, FailedInsight, InsightEntry, InsightReport, PipelineError, PipelineTrace, RemoteCache, Stage,
    StageStatus, StageTrace, Visibility,
};
use crate::gateway::{
    extract_materials, generate_image, Backends, ExtractionFilter, GatewayConfig, GatewayError, GatewayMode,
    GeneratedImage, ImageOptions, PromptTemplates,
};
use crate::materials::{load_dataset_file, MaterialDataset};
use crate::matcher::{match_all, MatchError, MatchOptions, VlmMatcher, DEFAULT_SHORTLIST};

/// Which interface variant a run serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineCondition {
    /// Image only. Extraction, matching and metrics are not run at all.
    T2iOnly,
    T2iInsights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    #[default]
    Vlm,
    Lexical,
}

/// Everything about a run except the dataset and the backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub condition: PipelineCondition,
    pub filter: ExtractionFilter,
    pub shortlist_k: usize,
    /// Compute per-kg values where the unit allows.
    pub normalize: bool,
    pub matcher: MatcherKind,
    pub image: ImageOptions,
    pub prompts: PromptTemplates,
    pub workers: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            condition: PipelineCondition::T2iInsights,
            filter: ExtractionFilter::default(),
            shortlist_k: DEFAULT_SHORTLIST,
            normalize: true,
            matcher: MatcherKind::Vlm,
            image: ImageOptions::default(),
            prompts: PromptTemplates::default(),
            workers: 4,
        }
    }
}

/// On-disk pipeline configuration (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    #[serde(flatten)]
    pub gateway: GatewayConfig,
    #[serde(default = "default_condition")]
    pub condition: PipelineCondition,
    /// Replaces the default furniture/decor blocklist when set.
    #[serde(default)]
    pub blocklist: Option<Vec<String>>,
    #[serde(default = "default_shortlist")]
    pub shortlist_k: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub matcher: MatcherKind,
    #[serde(default)]
    pub image: ImageOptions,
}

fn default_condition() -> PipelineCondition {
    PipelineCondition::T2iInsights
}

fn default_shortlist() -> usize {
    DEFAULT_SHORTLIST
}

fn default_true() -> bool {
    true
}

impl PipelineConfig {
    pub fn new(dataset: impl Into<PathBuf>, gateway: GatewayConfig) -> Self {
        PipelineConfig {
            dataset: dataset.into(),
            gateway,
            condition: default_condition(),
            blocklist: None,
            shortlist_k: DEFAULT_SHORTLIST,
            normalize: true,
            matcher: MatcherKind::Vlm,
            image: ImageOptions::default(),
        }
    }

    /// Read a JSON config. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.dataset = base.join(&config.dataset);
        config.gateway.fixtures = config.gateway.fixtures.map(|f| base.join(f));
        Ok(config)
    }

    pub fn settings(&self) -> PipelineSettings {
        PipelineSettings {
            condition: self.condition,
            filter: match &self.blocklist {
                Some(list) => ExtractionFilter::with_blocklist(list.clone()),
                None => ExtractionFilter::default(),
            },
            shortlist_k: self.shortlist_k,
            normalize: self.normalize,
            matcher: self.matcher,
            image: self.image.clone(),
            prompts: self.gateway.prompts.clone(),
            workers: self.gateway.inflight.max(1),
        }
    }
}

/// The report plus the image bytes it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub report: InsightReport,
    pub image: GeneratedImage,
}

/// A configured pipeline. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct Pipeline {
    dataset: Arc<MaterialDataset>,
    backends: Backends,
    settings: PipelineSettings,
    remote: Option<Arc<RemoteCache>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("dataset", &self.dataset.source_label())
            .field("backends", &self.backends)
            .field("settings", &self.settings)
            .finish()
    }
}

impl Pipeline {
    pub fn new(dataset: Arc<MaterialDataset>, backends: Backends, settings: PipelineSettings) -> Self {
        Pipeline { dataset, backends, settings, remote: None }
    }

    pub fn from_config(config: &PipelineConfig) -> Result<Pipeline, PipelineError> {
        let load = load_dataset_file(&config.dataset).map_err(|e| PipelineError::Config(e.to_string()))?;
        for rejected in &load.rejected {
            tracing::warn!(%rejected, "dataset record rejected");
        }
        let backends = Backends::from_config(&config.gateway)
            .map_err(|source| PipelineError::Gateway { stage: Stage::Config, source })?;
        Ok(Pipeline::new(Arc::new(load.dataset), backends, config.settings()))
    }

    pub fn with_remote(mut self, remote: Arc<RemoteCache>) -> Self {
        self.remote = Some(remote);
        self
    }

    pub fn dataset(&self) -> &Arc<MaterialDataset> {
        &self.dataset
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    pub fn mode(&self) -> GatewayMode {
        self.backends.t2i.mode()
    }

    pub fn run(&self, prompt: &str) -> Result<PipelineRun, PipelineError> {
        self.run_with(prompt, self.settings.condition)
    }

    pub fn run_with(&self, prompt: &str, condition: PipelineCondition) -> Result<PipelineRun, PipelineError> {
        let mode = self.mode();
        let timed = mode == GatewayMode::Live;
        let elapsed = |start: Instant| timed.then(|| start.elapsed().as_millis() as u64);
        let gateway_err = |stage| move |source: GatewayError| PipelineError::Gateway { stage, source };
        let mut stages = Vec::new();

        let start = Instant::now();
        let image = generate_image(prompt, self.backends.t2i.as_ref(), &self.settings.image)
            .map_err(gateway_err(Stage::T2i))?;
        stages.push(StageTrace {
            stage: Stage::T2i.to_string(),
            status: StageStatus::Ran,
            calls: 1,
            detail: format!("image {}", image.image_id),
            elapsed_ms: elapsed(start),
        });

        if condition == PipelineCondition::T2iOnly {
            for stage in [Stage::Extract, Stage::Match, Stage::Metrics] {
                stages.push(StageTrace {
                    stage: stage.to_string(),
                    status: StageStatus::Skipped,
                    calls: 0,
                    detail: "not run for the image-only condition".into(),
                    elapsed_ms: None,
                });
            }
            let report = InsightReport {
                image: image.reference(),
                insights: Vec::new(),
                condition_visibility: Visibility::MetricsHidden,
                shortfall: false,
                pipeline_trace: PipelineTrace { mode, stages, t2i_calls: 1, vlm_calls: 0 },
            };
            return Ok(PipelineRun { report, image });
        }

        let start = Instant::now();
        let extraction = extract_materials(&image, self.backends.vlm.as_ref(), &self.settings.prompts, &self.settings.filter)
            .map_err(gateway_err(Stage::Extract))?;
        stages.push(StageTrace {
            stage: Stage::Extract.to_string(),
            status: StageStatus::Ran,
            calls: extraction.attempts,
            detail: format!(
                "{} materials, {} filtered",
                extraction.descriptions.len(),
                extraction.filtered_out.len()
            ),
            elapsed_ms: elapsed(start),
        });

        let start = Instant::now();
        let matcher = match self.settings.matcher {
            MatcherKind::Vlm => Some(VlmMatcher {
                backend: self.backends.vlm.clone(),
                prompts: self.settings.prompts.clone(),
                shortlist: self.settings.shortlist_k,
            }),
            MatcherKind::Lexical => None,
        };
        let options = MatchOptions { k: self.settings.shortlist_k, workers: self.settings.workers };
        let matches = match_all(&extraction.descriptions, &self.dataset, matcher.as_ref(), &options)
            .map_err(|source| PipelineError::Match { stage: Stage::Match, source })?;
        let match_calls: u32 = matches
            .iter()
            .map(|m| match m {
                Ok(result) => result.vlm_calls,
                Err(MatchError::BackendUnavailable(_)) => 2,
                Err(_) => 0,
            })
            .sum();
        let unmatched = matches.iter().filter(|m| m.is_err()).count();
        stages.push(StageTrace {
            stage: Stage::Match.to_string(),
            status: StageStatus::Ran,
            calls: match_calls,
            detail: format!("{} matched, {unmatched} unmatched", matches.len() - unmatched),
            elapsed_ms: elapsed(start),
        });

        let start = Instant::now();
        let insights: Vec<InsightEntry> = extraction
            .descriptions
            .iter()
            .zip(matches)
            .map(|(description, matched)| {
                let failed = |error_kind: &str, message: String| {
                    InsightEntry::Failed(FailedInsight {
                        description: description.clone(),
                        error_kind: error_kind.to_string(),
                        message,
                    })
                };
                let matched = match matched {
                    Ok(m) => m,
                    Err(e) => return failed(e.kind(), e.to_string()),
                };
                match fetch_metrics(&matched, &self.dataset, self.remote.as_deref()) {
                    Ok(mut insight) => {
                        if !self.settings.normalize {
                            insight.per_kg_carbon = None;
                            insight.normalization_note = "per-kg normalization disabled".into();
                        }
                        InsightEntry::Resolved(insight)
                    }
                    Err(e) => failed("UnknownMaterial", e.to_string()),
                }
            })
            .collect();
        let resolved = insights.iter().filter(|i| i.insight().is_some()).count();
        stages.push(StageTrace {
            stage: Stage::Metrics.to_string(),
            status: StageStatus::Ran,
            calls: 0,
            detail: format!("{resolved} records resolved"),
            elapsed_ms: elapsed(start),
        });

        let report = InsightReport {
            image: image.reference(),
            insights,
            condition_visibility: Visibility::MetricsShown,
            shortfall: extraction.shortfall,
            pipeline_trace: PipelineTrace { mode, stages, t2i_calls: 1, vlm_calls: extraction.attempts + match_calls },
        };
        Ok(PipelineRun { report, image })
    }
}

/// Build a pipeline from `config` and run it once.
pub fn run_pipeline(prompt: &str, config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    Pipeline::from_config(config)?.run(prompt)
}
