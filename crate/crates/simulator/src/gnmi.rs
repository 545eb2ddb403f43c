//! gNMI Capabilities server for a fixture.

use std::sync::Arc;

use netinv_protocol::gnmi::proto::g_nmi_server::{GNmi, GNmiServer};
use netinv_protocol::gnmi::proto::{CapabilityRequest, CapabilityResponse, Encoding, ModelData};
use tokio::net::TcpListener;
use tokio::sync::watch;
use tonic::transport::server::TcpIncoming;
use tonic::transport::{Identity, Server, ServerTlsConfig};
use tonic::{Request, Response, Status};

use crate::fixture::Fixture;

pub const GNMI_VERSION: &str = "0.8.0";

struct Service {
    fixture: Arc<Fixture>,
    credentials: Option<(String, String)>,
}

#[tonic::async_trait]
impl GNmi for Service {
    async fn capabilities(&self, request: Request<CapabilityRequest>) -> Result<Response<CapabilityResponse>, Status> {
        if let Some((user, pass)) = &self.credentials {
            let md = request.metadata();
            let given = |k| md.get(k).and_then(|v| v.to_str().ok());
            if given("username") != Some(user.as_str()) || given("password") != Some(pass.as_str()) {
                return Err(Status::unauthenticated("bad credentials"));
            }
        }
        let supported_models = self
            .fixture
            .gnmi_models
            .iter()
            .flatten()
            .map(|m| ModelData { name: m.name.clone(), organization: m.organization.clone(), version: m.version.clone() })
            .collect();
        let supported_encodings = self
            .fixture
            .gnmi_encodings
            .iter()
            .flatten()
            .filter_map(|e| Encoding::from_str_name(e))
            .map(|e| e as i32)
            .collect();
        Ok(Response::new(CapabilityResponse {
            supported_models,
            supported_encodings,
            g_nmi_version: GNMI_VERSION.to_string(),
        }))
    }
}

/// PEM material for a TLS-enabled gNMI endpoint.
#[derive(Clone, Debug)]
pub struct TlsMaterial {
    pub ca_pem: String,
    pub cert_pem: String,
    pub key_pem: String,
}

/// Generates a throwaway CA and a server certificate for localhost.
pub fn generate_tls() -> Result<TlsMaterial, rcgen::Error> {
    use rcgen::{BasicConstraints, CertificateParams, DnType, IsCa, Issuer, KeyPair};
    let mut ca_params = CertificateParams::new(Vec::<String>::new())?;
    ca_params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
    ca_params.distinguished_name.push(DnType::CommonName, "netinv-sim test CA");
    let ca_key = KeyPair::generate()?;
    let ca_cert = ca_params.self_signed(&ca_key)?;
    let issuer = Issuer::new(ca_params, ca_key);
    let mut leaf_params = CertificateParams::new(vec!["localhost".to_string(), "127.0.0.1".to_string()])?;
    leaf_params.distinguished_name.push(DnType::CommonName, "netinv-sim");
    let leaf_key = KeyPair::generate()?;
    let leaf = leaf_params.signed_by(&leaf_key, &issuer)?;
    Ok(TlsMaterial { ca_pem: ca_cert.pem(), cert_pem: leaf.pem(), key_pem: leaf_key.serialize_pem() })
}

pub async fn serve(
    listener: TcpListener,
    fixture: Arc<Fixture>,
    credentials: Option<(String, String)>,
    tls: Option<TlsMaterial>,
    mut stop: watch::Receiver<bool>,
) -> Result<(), tonic::transport::Error> {
    let mut builder = Server::builder();
    if let Some(tls) = tls {
        builder = builder.tls_config(ServerTlsConfig::new().identity(Identity::from_pem(tls.cert_pem, tls.key_pem)))?;
    }
    builder
        .add_service(GNmiServer::new(Service { fixture, credentials }))
        .serve_with_incoming_shutdown(TcpIncoming::from(listener), async move {
            let _ = stop.changed().await;
        })
        .await
}
