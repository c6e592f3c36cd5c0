//! Thin HTTP client for the audit service.

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use adaudit_core::audit::{
    AuditDiff, AuditRequest, BlacklistView, SnapshotPreference, UserAuditRecord,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("api error {status}: {code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
}

#[derive(Debug, Deserialize)]
struct ApiErrorBody {
    code: String,
    message: String,
}

/// Client bound to one service base URL.
#[derive(Debug, Clone)]
pub struct AuditClient {
    base_url: String,
    http: reqwest::Client,
}

impl AuditClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        AuditClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    async fn decode<T: serde::de::DeserializeOwned>(
        response: reqwest::Response,
    ) -> Result<T, ClientError> {
        let status = response.status();
        if status.is_success() {
            Ok(response.json().await?)
        } else {
            let body: ApiErrorBody = response.json().await.unwrap_or(ApiErrorBody {
                code: "unknown".into(),
                message: format!("http status {status}"),
            });
            Err(ClientError::Api {
                status: status.as_u16(),
                code: body.code,
                message: body.message,
            })
        }
    }

    /// Ingests a preference snapshot; returns the added/deleted diff.
    pub async fn ingest(
        &self,
        user_id: &str,
        timestamp: DateTime<Utc>,
        preferences: Vec<SnapshotPreference>,
    ) -> Result<AuditDiff, ClientError> {
        let request = AuditRequest {
            user_id: user_id.to_string(),
            timestamp,
            preferences,
        };
        let response = self
            .http
            .post(format!("{}/v1/audit", self.base_url))
            .json(&request)
            .send()
            .await?;
        Self::decode(response).await
    }

    /// Fetches a user's audit record.
    pub async fn user_report(&self, user_id: &str) -> Result<UserAuditRecord, ClientError> {
        let response = self
            .http
            .get(format!("{}/v1/users/{user_id}/report", self.base_url))
            .send()
            .await?;
        Self::decode(response).await
    }

    /// Fetches the blacklist with scores.
    pub async fn blacklist(&self) -> Result<BlacklistView, ClientError> {
        let response = self
            .http
            .get(format!("{}/v1/blacklist", self.base_url))
            .send()
            .await?;
        Self::decode(response).await
    }
}
