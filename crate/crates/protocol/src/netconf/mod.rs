//! NETCONF client: hello exchange, framing negotiation and the `<get>`
//! requests used for discovery.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use netinv_core::platform::{ProtocolInfo, ProtocolKind};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::TcpStream;
use tokio::time::timeout;

use crate::capability::{advertises_yang_library, hello_modules, BASE_1_1};
use crate::{CapabilityDiscovery, ConnectionSpec, DiscoveryError, Transport, YangLibrary};

pub mod framing;
pub mod message;
pub mod xml;
pub mod yanglib;

use framing::{FramedStream, Framing};
use message::{Hello, MessageError};
use xml::Element;
use yanglib::YANG_LIBRARY_NS;

pub trait Io: AsyncRead + AsyncWrite + Unpin + Send {}
impl<T: AsyncRead + AsyncWrite + Unpin + Send> Io for T {}

impl From<MessageError> for DiscoveryError {
    fn from(e: MessageError) -> Self {
        match e {
            MessageError::RpcError(m) => DiscoveryError::Remote(m),
            MessageError::Malformed(m) => DiscoveryError::Protocol(m),
        }
    }
}

fn io_error(e: std::io::Error) -> DiscoveryError {
    match e.kind() {
        std::io::ErrorKind::InvalidData => DiscoveryError::Protocol(e.to_string()),
        _ => DiscoveryError::Connection(e.to_string()),
    }
}

async fn timed<T>(
    limit: Duration,
    what: &str,
    fut: impl Future<Output = Result<T, DiscoveryError>>,
) -> Result<T, DiscoveryError> {
    timeout(limit, fut).await.map_err(|_| DiscoveryError::Timeout(format!("{what} after {limit:?}")))?
}

/// Client side of an established session.
pub struct Session {
    framed: FramedStream<Box<dyn Io>>,
    pub server_hello: Hello,
    pub base: &'static str,
    next_id: u32,
    timeout: Duration,
    ssh: Option<russh::client::Handle<AcceptAnyHostKey>>,
}

impl Session {
    /// Exchanges hellos over an already connected stream.
    pub async fn establish(stream: Box<dyn Io>, limit: Duration) -> Result<Session, DiscoveryError> {
        let mut framed = FramedStream::new(stream);
        let client = Hello::client();
        timed(limit, "sending hello", async {
            framed.write_message(client.to_xml().as_bytes()).await.map_err(io_error)
        })
        .await?;
        let raw = timed(limit, "waiting for server hello", async { framed.read_message().await.map_err(io_error) }).await?;
        let text = String::from_utf8(raw).map_err(|_| DiscoveryError::Protocol("hello is not UTF-8".into()))?;
        let server_hello = Hello::parse(&text)?;
        let base = client
            .common_base(&server_hello)
            .ok_or_else(|| DiscoveryError::Protocol("no common NETCONF base version".into()))?;
        if base == BASE_1_1 {
            framed.set_framing(Framing::Chunked);
        }
        Ok(Session { framed, server_hello, base, next_id: 1, timeout: limit, ssh: None })
    }

    pub async fn connect(spec: &ConnectionSpec) -> Result<Session, DiscoveryError> {
        let limit = spec.timeout();
        match spec.transport {
            Transport::NetconfTcp => {
                let tcp = timed(limit, "connecting", async {
                    TcpStream::connect((spec.host.as_str(), spec.port16()))
                        .await
                        .map_err(|e| DiscoveryError::Connection(e.to_string()))
                })
                .await?;
                Session::establish(Box::new(tcp), limit).await
            }
            Transport::NetconfSsh => {
                let (handle, stream) = timed(limit, "ssh connect", ssh_connect(spec)).await?;
                let mut session = Session::establish(stream, limit).await?;
                session.ssh = Some(handle);
                Ok(session)
            }
            Transport::Gnmi => Err(DiscoveryError::InvalidSpec("gnmi is not a NETCONF transport".into())),
        }
    }

    /// `<get>` with a subtree filter; returns the reply's `<data>`.
    pub async fn get(&mut self, filter: Element) -> Result<Element, DiscoveryError> {
        let id = self.next_id;
        self.next_id += 1;
        let rpc = message::get_rpc(id, filter);
        let limit = self.timeout;
        let framed = &mut self.framed;
        let raw = timed(limit, "waiting for rpc-reply", async {
            framed.write_message(rpc.as_bytes()).await.map_err(io_error)?;
            framed.read_message().await.map_err(io_error)
        })
        .await?;
        let text = String::from_utf8(raw).map_err(|_| DiscoveryError::Protocol("reply is not UTF-8".into()))?;
        Ok(message::parse_data_reply(&text, id)?)
    }

    /// Drops the transport without sending close-session.
    pub async fn close(mut self) {
        let _ = self.framed.shutdown().await;
        if let Some(handle) = self.ssh.take() {
            let _ = handle.disconnect(russh::Disconnect::ByApplication, "", "en").await;
        }
    }
}

pub struct AcceptAnyHostKey;

impl russh::client::Handler for AcceptAnyHostKey {
    type Error = russh::Error;

    async fn check_server_key(&mut self, _key: &russh::keys::PublicKeyOrCertificate) -> Result<bool, Self::Error> {
        Ok(true)
    }
}

async fn ssh_connect(
    spec: &ConnectionSpec,
) -> Result<(russh::client::Handle<AcceptAnyHostKey>, Box<dyn Io>), DiscoveryError> {
    let conn = |e: russh::Error| DiscoveryError::Connection(format!("ssh: {e}"));
    let config = Arc::new(russh::client::Config::default());
    let mut handle = russh::client::connect(config, (spec.host.as_str(), spec.port16()), AcceptAnyHostKey)
        .await
        .map_err(conn)?;
    let user = spec.username.clone().unwrap_or_default();
    let auth = handle
        .authenticate_password(user.clone(), spec.password.clone().unwrap_or_default())
        .await
        .map_err(conn)?;
    if !auth.success() {
        return Err(DiscoveryError::Connection(format!("ssh authentication failed for user {user:?}")));
    }
    let channel = handle.channel_open_session().await.map_err(conn)?;
    channel.request_subsystem(true, "netconf").await.map_err(conn)?;
    Ok((handle, Box::new(channel.into_stream())))
}

pub fn yang_library_filter() -> Element {
    Element::new("yang-library").ns(YANG_LIBRARY_NS)
}

pub fn modules_state_filter() -> Element {
    Element::new("modules-state").ns(YANG_LIBRARY_NS)
}

fn yang_library_child<'a>(data: &'a Element, name: &str) -> Option<&'a Element> {
    data.find(name).filter(|el| el.namespace.as_deref().is_none_or(|ns| ns == YANG_LIBRARY_NS))
}

/// Hello exchange, then yang-library (when advertised) or modules-state.
pub async fn netconf_discover(spec: &ConnectionSpec) -> Result<CapabilityDiscovery, DiscoveryError> {
    let mut session = Session::connect(spec).await?;
    let result = discover_on(&mut session, spec).await;
    session.close().await;
    result
}

async fn discover_on(session: &mut Session, spec: &ConnectionSpec) -> Result<CapabilityDiscovery, DiscoveryError> {
    let capabilities = session.server_hello.capabilities.clone();
    let mut library = None;
    if advertises_yang_library(&capabilities) {
        let data = session.get(yang_library_filter()).await?;
        if let Some(el) = yang_library_child(&data, "yang-library") {
            let doc = yanglib::parse_yang_library(el).map_err(|e| DiscoveryError::Protocol(e.to_string()))?;
            // an NMDA document without datastores carries no NMDA information
            if !doc.datastores.is_empty() {
                library = Some(YangLibrary::Nmda(doc));
            }
        }
    }
    if library.is_none() {
        let data = session.get(modules_state_filter()).await?;
        if let Some(el) = yang_library_child(&data, "modules-state") {
            let doc = yanglib::parse_modules_state(el).map_err(|e| DiscoveryError::Protocol(e.to_string()))?;
            library = Some(YangLibrary::Legacy(doc));
        }
    }
    Ok(CapabilityDiscovery {
        protocol: ProtocolInfo {
            kind: ProtocolKind::Netconf,
            host: spec.host.clone(),
            port: spec.port16(),
            capabilities: capabilities.clone(),
            encodings: vec!["XML".to_string()],
            version: Some(session.base.rsplit(':').next().unwrap_or(session.base).to_string()),
        },
        yang_library: library,
        hello_modules: hello_modules(&capabilities),
    })
}
