use serde::Serialize;
use uxprop_core::campaign::CampaignError;
use uxprop_core::channel::ChannelError;
use uxprop_core::export::ExportError;
use uxprop_core::route::RouteError;
use uxprop_core::scene::SceneError;
use uxprop_core::visibility::VisibilityError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {detail}")]
    Config { field: String, detail: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("unknown artifact `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Machine-readable error document.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config { .. } | CliError::Missing(_) => "invalid_config",
            CliError::NotFound(_) => "not_found",
            CliError::Scene(SceneError::FileNotFound { .. }) => "scene_not_found",
            CliError::Scene(_) => "invalid_scene",
            CliError::Visibility(VisibilityError::GridTooLarge { .. }) => "grid_too_large",
            CliError::Visibility(_) => "invalid_visibility_request",
            CliError::Channel(_) => "invalid_channel_params",
            CliError::Route(RouteError::MissingChannelLayer) => "missing_channel_layer",
            CliError::Route(_) => "invalid_route",
            CliError::Campaign(_) => "invalid_campaign",
            CliError::Export(_) | CliError::Io { .. } => "io_error",
        }
    }

    /// Name of the offending input field, when one can be named.
    pub fn field(&self) -> Option<String> {
        match self {
            CliError::Config { field, .. } => Some(field.clone()),
            CliError::Missing(f) => Some((*f).to_string()),
            CliError::Visibility(VisibilityError::InvalidTx { field, .. }) => Some((*field).to_string()),
            CliError::Visibility(VisibilityError::InvalidResolution(_)) => Some("resolution_m".into()),
            CliError::Visibility(VisibilityError::GridTooLarge { .. }) => Some("resolution_m".into()),
            CliError::Channel(ChannelError::InvalidParams { field, .. }) => Some(format!("params.{field}")),
            CliError::Scene(SceneError::InvalidCrop(_)) => Some("tx".into()),
            CliError::Scene(_) => Some("scene".into()),
            CliError::Route(RouteError::MissingChannelLayer) => Some("artifact_id".into()),
            CliError::Route(RouteError::InvalidStep(_)) => Some("step_m".into()),
            CliError::Route(_) => Some("waypoints".into()),
            CliError::Campaign(CampaignError::InvalidConfig { field, .. }) => Some(format!("campaign.{field}")),
            CliError::Campaign(CampaignError::NoHeights) => Some("campaign.heights_m".into()),
            CliError::Campaign(CampaignError::NoTransmitters) => Some("campaign.n_tx".into()),
            _ => None,
        }
    }

    /// HTTP status for the service.
    pub fn status(&self) -> u16 {
        match self {
            CliError::NotFound(_) => 404,
            CliError::Visibility(VisibilityError::GridTooLarge { .. }) => 413,
            CliError::Export(_) | CliError::Io { .. } => 500,
            _ => 400,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code(),
            field: self.field(),
            message: self.to_string(),
        }
    }
}

pub fn io_error(path: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.to_string();
    move |source| CliError::Io { path, source }
}
