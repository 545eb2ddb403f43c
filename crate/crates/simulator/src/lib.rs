//! Fixture-driven device simulator: NETCONF over TCP or SSH and gNMI
//! Capabilities, plus a mock YANG catalog.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::Arc;

use netinv_protocol::{ConnectionSpec, Transport};
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub mod catalog;
pub mod fixture;
pub mod gnmi;
pub mod netconf;

pub use fixture::{Fixture, TransportDef};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ports {
    /// ports as written in the fixture
    Fixture,
    /// OS-assigned ports, for tests
    Ephemeral,
}

#[derive(Clone, Debug)]
pub struct Endpoint {
    pub transport: TransportDef,
    pub addr: SocketAddr,
    /// CA certificate clients should trust, for TLS endpoints
    pub ca_pem: Option<String>,
}

impl Endpoint {
    /// Connection details a registration event would carry for this endpoint.
    pub fn connection_spec(&self) -> ConnectionSpec {
        let mut spec = ConnectionSpec::new(self.transport.kind, self.addr.ip().to_string(), self.addr.port());
        spec.username = self.transport.username.clone();
        spec.password = self.transport.password.clone();
        spec.tls = self.transport.tls;
        spec.ca_cert = self.ca_pem.clone();
        spec
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Fixture(#[from] fixture::FixtureError),
    #[error("binding {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("tls setup: {0}")]
    Tls(String),
}

/// A running simulated device; all listeners stop when dropped or stopped.
pub struct Simulator {
    pub fixture: Arc<Fixture>,
    pub endpoints: Vec<Endpoint>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl Simulator {
    pub async fn start(fixture: Fixture, host: IpAddr, ports: Ports) -> Result<Simulator, SimError> {
        fixture.validate()?;
        let fixture = Arc::new(fixture);
        let (stop, rx) = watch::channel(false);
        let mut endpoints = Vec::new();
        let mut tasks = Vec::new();
        for t in &fixture.transports {
            let port = if ports == Ports::Ephemeral { 0 } else { t.port };
            let bind = SocketAddr::new(host, port);
            let listener = TcpListener::bind(bind).await.map_err(|source| SimError::Bind { addr: bind, source })?;
            let addr = listener.local_addr().map_err(|source| SimError::Bind { addr: bind, source })?;
            let mut ca_pem = None;
            let task = match t.kind {
                Transport::NetconfTcp => tokio::spawn(netconf::serve_tcp(listener, fixture.clone(), rx.clone())),
                Transport::NetconfSsh => tokio::spawn(netconf::serve_ssh(
                    listener,
                    fixture.clone(),
                    t.username.clone().unwrap_or_default(),
                    t.password.clone().unwrap_or_default(),
                    rx.clone(),
                )),
                Transport::Gnmi => {
                    let tls = if t.tls {
                        let material = gnmi::generate_tls().map_err(|e| SimError::Tls(e.to_string()))?;
                        ca_pem = Some(material.ca_pem.clone());
                        Some(material)
                    } else {
                        None
                    };
                    let credentials = t.username.clone().zip(t.password.clone());
                    let (fixture, rx) = (fixture.clone(), rx.clone());
                    tokio::spawn(async move {
                        if let Err(e) = gnmi::serve(listener, fixture, credentials, tls, rx).await {
                            log::error!("gnmi server on {addr} failed: {e}");
                        }
                    })
                }
            };
            log::info!("{}: {} listening on {addr}", fixture.name, t.kind.as_str());
            endpoints.push(Endpoint { transport: t.clone(), addr, ca_pem });
            tasks.push(task);
        }
        Ok(Simulator { fixture, endpoints, stop, tasks })
    }

    /// Loopback simulator on OS-assigned ports.
    pub async fn start_local(fixture: Fixture) -> Result<Simulator, SimError> {
        Simulator::start(fixture, IpAddr::V4(Ipv4Addr::LOCALHOST), Ports::Ephemeral).await
    }

    pub fn endpoint(&self, kind: Transport) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.transport.kind == kind)
    }

    pub fn connection_specs(&self) -> Vec<ConnectionSpec> {
        self.endpoints.iter().map(Endpoint::connection_spec).collect()
    }

    pub async fn stop(mut self) {
        let _ = self.stop.send(true);
        for t in std::mem::take(&mut self.tasks) {
            let _ = t.await;
        }
    }
}

impl Drop for Simulator {
    fn drop(&mut self) {
        let _ = self.stop.send(true);
    }
}
