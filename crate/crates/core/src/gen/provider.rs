use alloc::string::String;

use super::{ExhibitDescription, GenerationParams};

/// What the caller is asking for, in structured form. Remote providers only
/// see the prompt text; offline providers may use this instead.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestHint {
    Narrative {
        exhibit: ExhibitDescription,
        params: GenerationParams,
    },
    Tagging {
        narrative: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub hint: RequestHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinishStatus {
    Complete,
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderResponse {
    pub text: String,
    pub finish: FinishStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
}

/// A text completion service.
pub trait Provider {
    fn complete(&mut self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &mut P {
    fn complete(&mut self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(request)
    }
}
