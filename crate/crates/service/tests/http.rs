use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use tutorkit_core::corpus::parse_transcript;
use tutorkit_core::engine::{ChatMessage, ChatProvider, ExampleIndex, FnProvider, ProviderError, ScriptedProvider};
use tutorkit_core::instruct::ACT_PREDICTION_INSTRUCTION;
use tutorkit_core::{Role, Taxonomy};
use tutorkit_service::store::EventStore;
use tutorkit_service::{AppState, LiveSession};

struct Server {
    base: String,
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

async fn start(provider: Arc<dyn ChatProvider>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = EventStore::open(dir.path()).unwrap();
    let state = Arc::new(
        AppState::open(
            store,
            provider,
            Arc::new(Taxonomy::bundled().clone()),
            Arc::new(ExampleIndex::default()),
        )
        .unwrap(),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = tutorkit_service::router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { base, state, _dir: dir }
}

fn pack() -> Value {
    json!([{ "activity_id": "Activity2-1", "content_text": "Key Sentence: She shared her innermost thoughts." }])
}

fn is_selection(messages: &[ChatMessage]) -> bool {
    messages.iter().any(|m| m.content.contains(ACT_PREDICTION_INSTRUCTION))
}

#[tokio::test]
async fn scripted_three_turn_session() {
    let script = [
        ("t.operational.instruction", "Activity2-1 문장을 읽어 볼까요?"),
        ("t.assess.display_question", "\"innermost\"는 무슨 뜻일까요?"),
        ("t.teach.hint", "inner가 들어 있죠. [안쪽]을 생각해 보세요."),
        ("t.engage.encourage", "잘했어요!"),
    ];
    let replies: Vec<String> = script
        .iter()
        .flat_map(|(a, u)| [format!("Act: {a}"), u.to_string()])
        .collect();
    let provider = Arc::new(ScriptedProvider::new(replies));
    let srv = start(provider.clone()).await;
    let http = reqwest::Client::new();

    let created: Value = http
        .post(format!("{}/sessions", srv.base))
        .json(&json!({ "content": pack(), "mode": "one_shot" }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["opening"]["act"], script[0].0);

    let students = [
        ("I read it.", None),
        ("가장 깊은?", Some("s.answer.answer")),
        ("안쪽!", Some("s.answer.rationale")),
    ];
    for (k, (text, act)) in students.iter().enumerate() {
        let resp = http
            .post(format!("{}/sessions/{id}/messages", srv.base))
            .json(&json!({ "text": text, "act": act }))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), 200);
        let step: Value = resp.json().await.unwrap();
        assert_eq!(step["act"], script[k + 1].0);
    }
    assert_eq!(provider.calls(), 8);
    assert!(is_selection(&provider.exchanges()[0].messages));

    let text = http
        .get(format!("{}/sessions/{id}/transcript", srv.base))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    let parsed = parse_transcript(&text, Taxonomy::bundled()).unwrap();
    assert_eq!(parsed.turns.len(), 7);
    assert_eq!(parsed.turns[0].content_tags.len(), 1);
    for (k, turn) in parsed.turns.iter().enumerate() {
        let u = &turn.utterances[0];
        if k % 2 == 0 {
            assert_eq!(turn.speaker, Role::Tutor);
            assert_eq!(u.act.as_str(), script[k / 2].0);
        } else {
            assert_eq!(u.text, students[k / 2].0);
        }
    }
    // brackets from the provider are normalised so the export re-parses
    assert_eq!(
        parsed.turns[4].utterances[0].text,
        "inner가 들어 있죠. (안쪽)을 생각해 보세요."
    );

    let live = srv.state.snapshot(&id).await.unwrap();
    assert_eq!(live.transcript, parsed);
    let events = srv.state.store().load(&id).unwrap();
    assert_eq!(events.len(), 8);
    assert!(events.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    assert_eq!(LiveSession::replay(&events).unwrap(), live);

    // a fresh server over the same directory sees the same state
    let reopened = AppState::open(
        EventStore::open(srv.state.store().dir()).unwrap(),
        Arc::new(ScriptedProvider::default()),
        Arc::new(Taxonomy::bundled().clone()),
        Arc::new(ExampleIndex::default()),
    )
    .unwrap();
    assert_eq!(reopened.snapshot(&id).await.unwrap(), live);
}

#[tokio::test]
async fn request_validation() {
    let srv = start(Arc::new(ScriptedProvider::default())).await;
    let http = reqwest::Client::new();
    let post = |body: Value| http.post(format!("{}/sessions", srv.base)).json(&body).send();

    assert_eq!(
        post(json!({ "content": [], "mode": "one_shot" }))
            .await
            .unwrap()
            .status(),
        422
    );
    assert_eq!(
        post(json!({ "content": pack(), "mode": "baseline" }))
            .await
            .unwrap()
            .status(),
        422
    );
    assert_eq!(
        post(json!({ "content": pack(), "mode": "two_shot" }))
            .await
            .unwrap()
            .status(),
        422
    );
    let bad_tag = json!([{ "activity_id": "t.general" }]);
    assert_eq!(post(json!({ "content": bad_tag })).await.unwrap().status(), 422);

    let a: Value = post(json!({ "content": pack(), "opening": false }))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let b: Value = post(json!({ "content": pack(), "opening": false }))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_ne!(a["session_id"], b["session_id"]);
    assert_eq!(a["mode"], "one_shot");
    assert!(a["opening"].is_null());
    let id = a["session_id"].as_str().unwrap();

    let transcript = http
        .get(format!("{}/sessions/{id}/transcript", srv.base))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(
        transcript,
        format!("=== session {id} tutor=one_shot student=student ===\n")
    );

    let msg = |sid: &str, body: Value| {
        http.post(format!("{}/sessions/{sid}/messages", srv.base))
            .json(&body)
            .send()
    };
    assert_eq!(msg(id, json!({ "text": "  \n " })).await.unwrap().status(), 422);
    assert_eq!(
        msg(id, json!({ "text": "hi", "act": "t.teach.hint" }))
            .await
            .unwrap()
            .status(),
        422
    );
    assert_eq!(msg("nope", json!({ "text": "hi" })).await.unwrap().status(), 404);
    assert_eq!(
        http.get(format!("{}/sessions/nope/transcript", srv.base))
            .send()
            .await
            .unwrap()
            .status(),
        404
    );

    let acts: Vec<Value> = http
        .get(format!("{}/acts", srv.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(acts.len(), 43);
    assert_eq!(acts.iter().filter(|a| a["teaching"] == true).count(), 22);
    let health: Value = http
        .get(format!("{}/healthz", srv.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");
}

#[tokio::test]
async fn engine_failure_is_logged_and_surfaced() {
    let provider = Arc::new(ScriptedProvider::new(["no idea", "still no idea", "sorry"]));
    let srv = start(provider).await;
    let http = reqwest::Client::new();
    let created: Value = http
        .post(format!("{}/sessions", srv.base))
        .json(&json!({ "content": pack(), "opening": false }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["session_id"].as_str().unwrap();
    let resp = http
        .post(format!("{}/sessions/{id}/messages", srv.base))
        .json(&json!({ "text": "hello" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 502);
    let kinds: Vec<&str> = srv
        .state
        .store()
        .load(id)
        .unwrap()
        .iter()
        .map(|e| e.body.kind())
        .collect();
    assert_eq!(kinds, ["created", "student_message", "error"]);
    let live = srv.state.snapshot(id).await.unwrap();
    assert!(live.last_error.is_some());
    assert_eq!(live.transcript.turns.len(), 1);
}

fn slow_provider() -> Arc<dyn ChatProvider> {
    Arc::new(FnProvider(|m: &[ChatMessage]| -> Result<String, ProviderError> {
        std::thread::sleep(Duration::from_millis(150));
        Ok(if is_selection(m) {
            "t.teach.hint".into()
        } else {
            "생각해 보세요.".into()
        })
    }))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn one_turn_in_flight_per_session() {
    let srv = start(slow_provider()).await;
    let http = reqwest::Client::new();
    let mut ids = Vec::new();
    for _ in 0..3 {
        let v: Value = http
            .post(format!("{}/sessions", srv.base))
            .json(&json!({ "content": pack(), "mode": "zero_shot", "opening": false }))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        ids.push(v["session_id"].as_str().unwrap().to_string());
    }
    let send = |id: String, text: &'static str| {
        let (http, base) = (http.clone(), srv.base.clone());
        tokio::spawn(async move {
            http.post(format!("{base}/sessions/{id}/messages"))
                .json(&json!({ "text": text }))
                .send()
                .await
                .unwrap()
        })
    };
    let first = send(ids[0].clone(), "one");
    tokio::time::sleep(Duration::from_millis(50)).await;
    let busy = send(ids[0].clone(), "two").await.unwrap();
    assert_eq!(busy.status(), 409);
    assert_eq!(busy.headers()["retry-after"], "1");
    let others: Vec<_> = ids[1..].iter().map(|id| send(id.clone(), "other")).collect();
    assert_eq!(first.await.unwrap().status(), 200);
    for o in others {
        assert_eq!(o.await.unwrap().status(), 200);
    }
    for id in &ids {
        let events = srv.state.store().load(id).unwrap();
        let kinds: Vec<&str> = events.iter().map(|e| e.body.kind()).collect();
        assert_eq!(kinds, ["created", "student_message", "tutor_step"]);
        assert!(events.iter().all(|e| &e.session_id == id));
    }
}
