//! Async client for the rasterkit HTTP/JSON service.

use rasterkit_api::{
    AlignDemoRequest, AlignDemoResponse, AugmentRequest, AugmentResponse, CurateRequest, CurateResponse, ErrorBody,
    ErrorResponse, Health, RenderRequest, ValidateRequest, ValidateResponse,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body.
    #[error("{status}: {body}")]
    Api { status: u16, body: ErrorBody },
}

impl ClientError {
    /// The service's error body, or a synthesized one for transport failures.
    pub fn body(&self) -> ErrorBody {
        match self {
            ClientError::Api { body, .. } => body.clone(),
            ClientError::Transport(e) => ErrorBody::new("transport", e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Client {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    async fn checked(resp: reqwest::Response) -> Result<reqwest::Response> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str::<ErrorResponse>(&text)
            .map(|r| r.error)
            .unwrap_or_else(|_| ErrorBody::new("http", format!("{status}: {text}")));
        Err(ClientError::Api {
            status: status.as_u16(),
            body,
        })
    }

    async fn post<Q: Serialize, R: DeserializeOwned>(&self, route: &str, req: &Q) -> Result<R> {
        let resp = self.http.post(format!("{}{route}", self.base)).json(req).send().await?;
        Ok(Self::checked(resp).await?.json().await?)
    }

    pub async fn health(&self) -> Result<Health> {
        let resp = self.http.get(format!("{}{}", self.base, rasterkit_api::HEALTH)).send().await?;
        Ok(Self::checked(resp).await?.json().await?)
    }

    pub async fn validate(&self, req: &ValidateRequest) -> Result<ValidateResponse> {
        self.post(rasterkit_api::VALIDATE, req).await
    }

    /// Encoded image bytes.
    pub async fn render(&self, req: &RenderRequest) -> Result<Vec<u8>> {
        let resp = self
            .http
            .post(format!("{}{}", self.base, rasterkit_api::RENDER))
            .json(req)
            .send()
            .await?;
        Ok(Self::checked(resp).await?.bytes().await?.to_vec())
    }

    pub async fn augment(&self, req: &AugmentRequest) -> Result<AugmentResponse> {
        self.post(rasterkit_api::AUGMENT, req).await
    }

    pub async fn curate(&self, req: &CurateRequest) -> Result<CurateResponse> {
        self.post(rasterkit_api::CURATE, req).await
    }

    pub async fn align_demo(&self, req: &AlignDemoRequest) -> Result<AlignDemoResponse> {
        self.post(rasterkit_api::ALIGN_DEMO, req).await
    }
}
