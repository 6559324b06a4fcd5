use rasterkit_api::{LogSource, RenderRequest, ValidateRequest};
use rasterkit_client::{Client, ClientError};
use rasterkit_core::io::{sample_log, to_canonical_json};

async fn client() -> Client {
    let addr = rasterkit_service::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    Client::new(format!("http://{addr}"))
}

#[tokio::test]
async fn health_and_validate() {
    let c = client().await;
    assert_eq!(c.health().await.unwrap().status, "ok");
    let logs = vec![LogSource {
        name: "s".into(),
        text: to_canonical_json(&sample_log()),
    }];
    let r = c.validate(&ValidateRequest { logs }).await.unwrap();
    assert_eq!(r.logs[0].log_id, "sample-001");
}

#[tokio::test]
async fn errors_come_back_typed() {
    let c = client().await;
    let req = RenderRequest {
        log: LogSource {
            name: "broken.json".into(),
            text: "{ not json".into(),
        },
        t: 0.0,
        agent: None,
        camera: None,
        render: Default::default(),
        format: Default::default(),
    };
    match c.render(&req).await {
        Err(ClientError::Api { status, body }) => {
            assert_eq!(status, 422);
            assert_eq!(body.kind, "malformed_json");
            assert_eq!(body.source.as_deref(), Some("broken.json"));
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let c = Client::new("http://127.0.0.1:9");
    assert!(matches!(c.health().await, Err(ClientError::Transport(_))));
}
