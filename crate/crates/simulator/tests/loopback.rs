//! Discovery clients against simulated devices on loopback.

use std::time::{Duration, Instant};

use netinv_protocol::capability::{BASE_1_0, BASE_1_1};
use netinv_protocol::netconf::framing::FramedStream;
use netinv_protocol::netconf::message::{self, Hello};
use netinv_protocol::netconf::{self, Session};
use netinv_protocol::{discover, ConnectionSpec, DiscoveryError, Transport, YangLibrary};
use netinv_sim::catalog::{load_records, CatalogState, MockCatalog};
use netinv_sim::fixture::bundled_path;
use netinv_sim::{Fixture, Simulator, TransportDef};

fn fixture(file: &str) -> Fixture {
    Fixture::load(bundled_path(file)).unwrap()
}

async fn start(file: &str) -> Simulator {
    Simulator::start_local(fixture(file)).await.unwrap()
}

fn spec(sim: &Simulator) -> ConnectionSpec {
    sim.connection_specs().remove(0)
}

#[tokio::test(flavor = "multi_thread")]
async fn nmda_document_echoes_fixture() {
    let sim = start("simx-nmda.yaml").await;
    let d = discover(&spec(&sim)).await.unwrap();
    let Some(YangLibrary::Nmda(doc)) = &d.yang_library else { panic!("expected NMDA, got {:?}", d.yang_library) };
    assert_eq!(Some(doc), sim.fixture.yang_library.as_ref());
    assert_eq!(doc.module_sets.len(), 1);
    assert_eq!(doc.datastores.len(), 2);
    assert_eq!(d.protocol.capabilities, sim.fixture.hello_capabilities);
    assert_eq!(d.protocol.version.as_deref(), Some("1.1"));
    assert_eq!(d.protocol.encodings, ["XML"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn legacy_document_over_base_1_0() {
    let sim = start("simx-legacy.yaml").await;
    let d = discover(&spec(&sim)).await.unwrap();
    let Some(YangLibrary::Legacy(doc)) = &d.yang_library else { panic!("expected modules-state") };
    assert_eq!(Some(doc), sim.fixture.modules_state.as_ref());
    assert_eq!(d.protocol.version.as_deref(), Some("1.0"));
    assert!(d.protocol.capabilities.iter().any(|c| c == netinv_protocol::capability::XPATH));
    assert_eq!(d.hello_modules.len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn bare_device_has_hello_modules_only() {
    let sim = start("simx-bare.yaml").await;
    let s = spec(&sim);
    let d = discover(&s).await.unwrap();
    assert!(d.yang_library.is_none());
    let names: Vec<_> = d.hello_modules.iter().map(|m| m.identifier.to_string()).collect();
    assert_eq!(names, ["ietf-interfaces@2014-05-08", "vendory-port@2019-06-01"]);

    let mut session = Session::connect(&s).await.unwrap();
    assert_eq!(session.base, BASE_1_1);
    let data = session.get(netconf::yang_library_filter()).await.unwrap();
    assert!(data.children.is_empty());
    session.close().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn framing_follows_common_base() {
    // every pairing of client and server base sets ends on the same framing
    for (server_caps, expected) in [
        (vec![BASE_1_0], Some(BASE_1_0)),
        (vec![BASE_1_1], Some(BASE_1_1)),
        (vec![BASE_1_0, BASE_1_1], Some(BASE_1_1)),
        (vec!["urn:example:not-a-base"], None),
    ] {
        let mut f = fixture("simx-bare.yaml");
        f.hello_capabilities = server_caps.iter().map(|s| s.to_string()).collect();
        let sim = Simulator::start_local(f).await.unwrap();
        match (Session::connect(&spec(&sim)).await, expected) {
            (Ok(mut s), Some(base)) => {
                assert_eq!(s.base, base);
                s.get(netconf::modules_state_filter()).await.unwrap();
                s.close().await;
            }
            (Err(DiscoveryError::Protocol(_)), None) => {}
            (other, _) => panic!("{server_caps:?}: unexpected {:?}", other.map(|s| s.base)),
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_rpc_answered_with_rpc_error() {
    let sim = start("simx-legacy.yaml").await;
    let stream = tokio::net::TcpStream::connect(sim.endpoints[0].addr).await.unwrap();
    let mut framed = FramedStream::new(stream);
    let hello = Hello { capabilities: vec![BASE_1_0.into()], session_id: None };
    framed.write_message(hello.to_xml().as_bytes()).await.unwrap();
    let server = Hello::parse(&String::from_utf8(framed.read_message().await.unwrap()).unwrap()).unwrap();
    assert!(server.session_id.is_some());
    let rpc = r#"<rpc xmlns="urn:ietf:params:xml:ns:netconf:base:1.0" message-id="9"><kill-session><session-id>1</session-id></kill-session></rpc>"#;
    framed.write_message(rpc.as_bytes()).await.unwrap();
    let reply = String::from_utf8(framed.read_message().await.unwrap()).unwrap();
    match message::parse_data_reply(&reply, 9) {
        Err(message::MessageError::RpcError(m)) => assert!(m.contains("kill-session")),
        other => panic!("{other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn gnmi_capabilities_verbatim() {
    let sim = start("simx-gnmi.yaml").await;
    let d = discover(&spec(&sim)).await.unwrap();
    assert_eq!(d.protocol.encodings, ["JSON_IETF", "PROTO"]);
    assert!(d.yang_library.is_none());
    assert_eq!(d.hello_modules.len(), 1);
    let m = &d.hello_modules[0];
    assert_eq!(m.identifier.name, "openconfig-interfaces");
    assert_eq!(m.identifier.revision.as_deref(), Some("2.5.0"));
    assert_eq!(m.organization.as_deref(), Some("OpenConfig working group"));
}

fn gnmi_tls_fixture(creds: bool) -> Fixture {
    let mut f = fixture("simx-gnmi.yaml");
    f.transports = vec![TransportDef {
        kind: Transport::Gnmi,
        port: 0,
        username: creds.then(|| "admin".into()),
        password: creds.then(|| "secret".into()),
        tls: true,
    }];
    f
}

#[tokio::test(flavor = "multi_thread")]
async fn gnmi_over_tls_with_credentials() {
    let sim = Simulator::start_local(gnmi_tls_fixture(true)).await.unwrap();
    let good = spec(&sim);
    assert!(good.ca_cert.is_some());
    let d = discover(&good).await.unwrap();
    assert_eq!(d.hello_modules.len(), 1);

    let mut wrong = good.clone();
    wrong.password = Some("nope".into());
    assert!(matches!(discover(&wrong).await, Err(DiscoveryError::Connection(_))));

    let mut plaintext = good.clone();
    plaintext.tls = false;
    plaintext.ca_cert = None;
    plaintext.timeout_ms = 2000;
    let err = discover(&plaintext).await.unwrap_err();
    assert!(matches!(err, DiscoveryError::Connection(_) | DiscoveryError::Timeout(_)), "{err:?}");
}

fn ssh_fixture() -> Fixture {
    let mut f = fixture("simx-nmda.yaml");
    f.transports = vec![TransportDef {
        kind: Transport::NetconfSsh,
        port: 0,
        username: Some("netops".into()),
        password: Some("hunter2".into()),
        tls: false,
    }];
    f
}

#[tokio::test(flavor = "multi_thread")]
async fn netconf_over_ssh() {
    let sim = Simulator::start_local(ssh_fixture()).await.unwrap();
    let good = spec(&sim);
    let d = discover(&good).await.unwrap();
    assert!(matches!(d.yang_library, Some(YangLibrary::Nmda(_))));

    let mut wrong = good.clone();
    wrong.password = Some("wrong".into());
    match discover(&wrong).await {
        Err(DiscoveryError::Connection(m)) => assert!(m.contains("authentication"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn silent_device_times_out_after_one_retry() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let accepts = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let counter = accepts.clone();
    tokio::spawn(async move {
        let mut held = Vec::new();
        while let Ok((sock, _)) = listener.accept().await {
            counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            held.push(sock);
        }
    });
    let mut s = ConnectionSpec::new(Transport::NetconfTcp, "127.0.0.1", addr.port());
    s.timeout_ms = 200;
    let started = Instant::now();
    assert!(matches!(discover(&s).await, Err(DiscoveryError::Timeout(_))));
    assert!(started.elapsed() >= Duration::from_millis(400));
    assert_eq!(accepts.load(std::sync::atomic::Ordering::SeqCst), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn refused_connection() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let s = ConnectionSpec::new(Transport::NetconfTcp, "127.0.0.1", port);
    assert!(matches!(discover(&s).await, Err(DiscoveryError::Connection(_))));
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_are_independent() {
    let sim = start("simx-nmda.yaml").await;
    let s = spec(&sim);
    let tasks: Vec<_> = (0..8).map(|_| tokio::spawn({
        let s = s.clone();
        async move { discover(&s).await }
    })).collect();
    for t in tasks {
        assert!(matches!(t.await.unwrap().unwrap().yang_library, Some(YangLibrary::Nmda(_))));
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn mock_catalog_pages() {
    let mut records = load_records(bundled_path("catalog/c1-ietf-interfaces.json")).unwrap();
    records.extend(load_records(bundled_path("catalog/c2-openconfig-interfaces.json")).unwrap());
    let catalog = MockCatalog::start("127.0.0.1:0".parse().unwrap(), CatalogState::new(records)).await.unwrap();
    let url = format!("{}/api/search/modules?limit=1&offset=1", catalog.base_url());
    let body: serde_json::Value = reqwest::get(&url).await.unwrap().json().await.unwrap();
    assert_eq!(body["modules"].as_array().unwrap().len(), 1);
    assert_eq!(body["modules"][0]["name"], "openconfig-interfaces");
    let url = format!("{}/api/search/modules?limit=5&offset=2", catalog.base_url());
    let body: serde_json::Value = reqwest::get(&url).await.unwrap().json().await.unwrap();
    assert!(body["modules"].as_array().unwrap().is_empty());
    assert_eq!(catalog.state.requests(), 2);
    catalog.stop().await;
}
