//! Capability discovery clients for NETCONF (SSH or raw TCP) and gNMI.

use std::fmt;
use std::time::Duration;

use netinv_core::platform::{AdvertisedModule, ModulesStateDocument, ProtocolInfo, YangLibraryDocument};
use serde::{Deserialize, Serialize};

pub mod capability;
pub mod gnmi;
pub mod netconf;

pub use capability::{parse_capability_uri, Capability};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transport {
    #[serde(rename = "netconf-ssh")]
    NetconfSsh,
    #[serde(rename = "netconf-tcp")]
    NetconfTcp,
    #[serde(rename = "gnmi")]
    Gnmi,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::NetconfSsh => "netconf-ssh",
            Transport::NetconfTcp => "netconf-tcp",
            Transport::Gnmi => "gnmi",
        }
    }

    pub fn is_netconf(self) -> bool {
        !matches!(self, Transport::Gnmi)
    }
}

impl std::str::FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "netconf-ssh" => Ok(Transport::NetconfSsh),
            "netconf-tcp" => Ok(Transport::NetconfTcp),
            "gnmi" => Ok(Transport::Gnmi),
            other => Err(format!("unknown transport {other:?} (expected netconf-ssh, netconf-tcp or gnmi)")),
        }
    }
}

fn default_timeout_ms() -> u64 {
    10_000
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConnectionSpec {
    pub host: String,
    pub port: u32,
    pub transport: Transport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
    #[serde(default)]
    pub tls: bool,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// PEM bundle trusted for gNMI TLS; system roots otherwise
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ca_cert: Option<String>,
}

impl fmt::Debug for ConnectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionSpec")
            .field("host", &self.host)
            .field("port", &self.port)
            .field("transport", &self.transport)
            .field("username", &self.username)
            .field("password", &self.password.as_ref().map(|_| "***"))
            .field("tls", &self.tls)
            .field("timeout_ms", &self.timeout_ms)
            .finish()
    }
}

impl ConnectionSpec {
    pub fn new(transport: Transport, host: impl Into<String>, port: u16) -> Self {
        ConnectionSpec {
            host: host.into(),
            port: port.into(),
            transport,
            username: None,
            password: None,
            tls: false,
            timeout_ms: default_timeout_ms(),
            ca_cert: None,
        }
    }

    pub fn with_credentials(mut self, username: impl Into<String>, password: impl Into<String>) -> Self {
        self.username = Some(username.into());
        self.password = Some(password.into());
        self
    }

    pub fn validate(&self) -> Result<(), DiscoveryError> {
        let invalid = |m: String| Err(DiscoveryError::InvalidSpec(m));
        if self.host.trim().is_empty() {
            return invalid("host must not be empty".into());
        }
        if !(1..=u16::MAX as u32).contains(&self.port) {
            return invalid(format!("port {} out of range", self.port));
        }
        if self.transport == Transport::NetconfSsh && (self.username.is_none() || self.password.is_none()) {
            return invalid("netconf-ssh requires username and password".into());
        }
        if self.tls && self.transport != Transport::Gnmi {
            return invalid("tls applies to gnmi connections only".into());
        }
        if self.timeout_ms == 0 {
            return invalid("timeoutMs must be positive".into());
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn port16(&self) -> u16 {
        self.port as u16
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "document", rename_all = "lowercase")]
pub enum YangLibrary {
    Nmda(YangLibraryDocument),
    Legacy(ModulesStateDocument),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CapabilityDiscovery {
    pub protocol: ProtocolInfo,
    pub yang_library: Option<YangLibrary>,
    pub hello_modules: Vec<AdvertisedModule>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DiscoveryError {
    #[error("connection error: {0}")]
    Connection(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("invalid connection: {0}")]
    InvalidSpec(String),
}

/// Runs the discovery matching the transport, retrying once on timeout.
pub async fn discover(spec: &ConnectionSpec) -> Result<CapabilityDiscovery, DiscoveryError> {
    spec.validate()?;
    match attempt(spec).await {
        Err(DiscoveryError::Timeout(msg)) => {
            log::warn!("discovery of {}:{} timed out ({msg}), retrying once", spec.host, spec.port);
            attempt(spec).await
        }
        other => other,
    }
}

async fn attempt(spec: &ConnectionSpec) -> Result<CapabilityDiscovery, DiscoveryError> {
    match spec.transport {
        Transport::Gnmi => gnmi::gnmi_discover(spec).await,
        _ => netconf::netconf_discover(spec).await,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let spec: ConnectionSpec =
            serde_json::from_str(r#"{"host":"10.0.0.1","port":830,"transport":"netconf-ssh","username":"u","password":"p"}"#)
                .unwrap();
        assert_eq!(spec.timeout(), Duration::from_secs(10));
        assert!(!spec.tls);
        spec.validate().unwrap();
        assert!(!format!("{spec:?}").contains("\"p\""));
    }

    #[test]
    fn spec_validation() {
        let ssh = ConnectionSpec::new(Transport::NetconfSsh, "h", 830);
        assert!(matches!(ssh.validate(), Err(DiscoveryError::InvalidSpec(_))));
        ssh.clone().with_credentials("u", "p").validate().unwrap();
        let mut bad_port = ConnectionSpec::new(Transport::NetconfTcp, "h", 1);
        bad_port.port = 70000;
        assert!(bad_port.validate().is_err());
        bad_port.port = 0;
        assert!(bad_port.validate().is_err());
        let mut tls_nc = ConnectionSpec::new(Transport::NetconfTcp, "h", 1);
        tls_nc.tls = true;
        assert!(tls_nc.validate().is_err());
        assert!(serde_json::from_str::<ConnectionSpec>(r#"{"host":"h","port":1,"transport":"telnet"}"#).is_err());
    }
}
