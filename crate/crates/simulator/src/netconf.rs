//! NETCONF server side of a fixture, over TCP or the SSH `netconf` subsystem.

use std::collections::HashMap;
use std::io;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use netinv_protocol::capability::BASE_1_1;
use netinv_protocol::netconf::framing::{FramedStream, Framing};
use netinv_protocol::netconf::message::{self, Hello, Rpc};
use netinv_protocol::netconf::xml::Element;
use netinv_protocol::netconf::yanglib;
use netinv_protocol::netconf::Io;
use russh::server::{Auth, ChannelOpenHandle, Msg, Session};
use russh::{Channel, ChannelId};
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::fixture::Fixture;

static SESSION_IDS: AtomicU32 = AtomicU32::new(1);

/// Body of a `<get>` reply: the requested top-level containers that the
/// fixture has, or everything when there is no filter.
fn get_content(fixture: &Fixture, rpc: &Rpc) -> Vec<Element> {
    let filter = rpc.subtree_filter();
    let wants = |name: &str| filter.is_empty() || filter.iter().any(|f| f.name == name);
    let mut out = Vec::new();
    if let Some(doc) = &fixture.yang_library {
        if wants("yang-library") {
            out.push(yanglib::render_yang_library(doc));
        }
    }
    if let Some(doc) = &fixture.modules_state {
        if wants("modules-state") {
            out.push(yanglib::render_modules_state(doc));
        }
    }
    out
}

fn answer(fixture: &Fixture, raw: &[u8]) -> (String, bool) {
    let Some(rpc) = std::str::from_utf8(raw).ok().and_then(|s| Rpc::parse(s).ok()) else {
        return (message::error_reply("", "malformed-message", "could not parse rpc"), false);
    };
    match rpc.operation.name.as_str() {
        "get" => (message::data_reply(&rpc.message_id, get_content(fixture, &rpc)), false),
        "close-session" => {
            let ok = format!(
                r#"<rpc-reply xmlns="{}" message-id="{}"><ok/></rpc-reply>"#,
                message::NETCONF_NS,
                rpc.message_id
            );
            (ok, true)
        }
        other => (
            message::error_reply(&rpc.message_id, "operation-not-supported", &format!("operation {other} is not supported")),
            false,
        ),
    }
}

/// Runs one session to completion.
pub async fn serve_session<S: Io>(stream: S, fixture: Arc<Fixture>) -> io::Result<()> {
    let mut framed = FramedStream::new(stream);
    let hello = Hello {
        capabilities: fixture.hello_capabilities.clone(),
        session_id: Some(SESSION_IDS.fetch_add(1, Ordering::Relaxed)),
    };
    framed.write_message(hello.to_xml().as_bytes()).await?;
    let raw = framed.read_message().await?;
    let client = Hello::parse(&String::from_utf8_lossy(&raw))
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    match hello.common_base(&client) {
        Some(BASE_1_1) => framed.set_framing(Framing::Chunked),
        Some(_) => {}
        None => return Err(io::Error::new(io::ErrorKind::InvalidData, "no common base version")),
    }
    loop {
        let raw = match framed.read_message().await {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let (reply, done) = answer(&fixture, &raw);
        framed.write_message(reply.as_bytes()).await?;
        if done {
            return Ok(());
        }
    }
}

pub async fn serve_tcp(listener: TcpListener, fixture: Arc<Fixture>, mut stop: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            _ = stop.changed() => return,
            accepted = listener.accept() => match accepted {
                Ok((sock, peer)) => {
                    let fixture = fixture.clone();
                    tokio::spawn(async move {
                        if let Err(e) = serve_session(sock, fixture).await {
                            log::debug!("netconf session from {peer} ended: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }
}

struct SshHandler {
    fixture: Arc<Fixture>,
    username: String,
    password: String,
    channels: HashMap<ChannelId, Channel<Msg>>,
}

impl russh::server::Handler for SshHandler {
    type Error = russh::Error;

    async fn auth_password(&mut self, user: &str, password: &str) -> Result<Auth, Self::Error> {
        if user == self.username && password == self.password {
            Ok(Auth::Accept)
        } else {
            Ok(Auth::reject())
        }
    }

    async fn channel_open_session(
        &mut self,
        channel: Channel<Msg>,
        reply: ChannelOpenHandle,
        _session: &mut Session,
    ) -> Result<(), Self::Error> {
        self.channels.insert(channel.id(), channel);
        reply.accept().await;
        Ok(())
    }

    async fn subsystem_request(&mut self, id: ChannelId, name: &str, session: &mut Session) -> Result<(), Self::Error> {
        match (name, self.channels.remove(&id)) {
            ("netconf", Some(channel)) => {
                session.channel_success(id)?;
                let fixture = self.fixture.clone();
                tokio::spawn(async move {
                    if let Err(e) = serve_session(channel.into_stream(), fixture).await {
                        log::debug!("netconf-over-ssh session ended: {e}");
                    }
                });
            }
            _ => session.channel_failure(id)?,
        }
        Ok(())
    }
}

pub fn ssh_config() -> Arc<russh::server::Config> {
    let key = russh::keys::PrivateKey::random(&mut rand::rng(), russh::keys::Algorithm::Ed25519)
        .expect("ed25519 key generation");
    Arc::new(russh::server::Config {
        keys: vec![key],
        auth_rejection_time: std::time::Duration::from_millis(50),
        auth_rejection_time_initial: Some(std::time::Duration::ZERO),
        ..Default::default()
    })
}

pub async fn serve_ssh(
    listener: TcpListener,
    fixture: Arc<Fixture>,
    username: String,
    password: String,
    mut stop: watch::Receiver<bool>,
) {
    let config = ssh_config();
    loop {
        tokio::select! {
            _ = stop.changed() => return,
            accepted = listener.accept() => match accepted {
                Ok((sock, peer)) => {
                    let handler = SshHandler {
                        fixture: fixture.clone(),
                        username: username.clone(),
                        password: password.clone(),
                        channels: HashMap::new(),
                    };
                    let config = config.clone();
                    tokio::spawn(async move {
                        match russh::server::run_stream(config, sock, handler).await {
                            Ok(running) => {
                                if let Err(e) = running.await {
                                    log::debug!("ssh session from {peer} ended: {e}");
                                }
                            }
                            Err(e) => log::debug!("ssh handshake from {peer} failed: {e}"),
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }
}
