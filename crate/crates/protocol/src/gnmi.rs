//! gNMI Capabilities client.

use netinv_core::platform::{AdvertisedModule, ModuleIdentifier, ProtocolInfo, ProtocolKind};
use tonic::metadata::MetadataValue;
use tonic::transport::{Certificate, ClientTlsConfig, Endpoint};

use crate::{CapabilityDiscovery, ConnectionSpec, DiscoveryError};

pub mod proto {
    tonic::include_proto!("gnmi");
}

use proto::g_nmi_client::GNmiClient;
use proto::{CapabilityRequest, CapabilityResponse, Encoding};

/// Maps a Capabilities response; model versions become revisions verbatim.
pub fn map_response(spec: &ConnectionSpec, resp: CapabilityResponse) -> CapabilityDiscovery {
    let hello_modules = resp
        .supported_models
        .into_iter()
        .filter(|m| !m.name.is_empty())
        .map(|m| {
            let rev = Some(m.version.as_str()).filter(|v| !v.is_empty());
            let mut module = AdvertisedModule::new(ModuleIdentifier::new(m.name, rev));
            module.organization = Some(m.organization).filter(|o| !o.is_empty());
            module
        })
        .collect();
    let encodings = resp
        .supported_encodings
        .into_iter()
        .map(|e| Encoding::try_from(e).map_or_else(|_| format!("UNKNOWN({e})"), |e| e.as_str_name().to_string()))
        .collect();
    CapabilityDiscovery {
        protocol: ProtocolInfo {
            kind: ProtocolKind::Gnmi,
            host: spec.host.clone(),
            port: spec.port16(),
            capabilities: Vec::new(),
            encodings,
            version: Some(resp.g_nmi_version).filter(|v| !v.is_empty()),
        },
        yang_library: None,
        hello_modules,
    }
}

fn status_error(status: tonic::Status) -> DiscoveryError {
    use tonic::Code;
    // transport failures below gRPC (h2 errors, a TLS peer spoken to in
    // plaintext) surface as Unknown with a source error
    if status.code() == Code::Unknown && std::error::Error::source(&status).is_some() {
        return DiscoveryError::Connection(status.message().to_string());
    }
    match status.code() {
        Code::Unavailable | Code::Unauthenticated | Code::PermissionDenied => {
            DiscoveryError::Connection(format!("{}: {}", status.code(), status.message()))
        }
        Code::DeadlineExceeded => DiscoveryError::Timeout(status.message().to_string()),
        _ => DiscoveryError::Remote(format!("{}: {}", status.code(), status.message())),
    }
}

pub async fn gnmi_discover(spec: &ConnectionSpec) -> Result<CapabilityDiscovery, DiscoveryError> {
    let scheme = if spec.tls { "https" } else { "http" };
    let mut endpoint = Endpoint::from_shared(format!("{scheme}://{}:{}", spec.host, spec.port))
        .map_err(|e| DiscoveryError::InvalidSpec(e.to_string()))?
        .connect_timeout(spec.timeout())
        .timeout(spec.timeout());
    if spec.tls {
        let mut tls = ClientTlsConfig::new().domain_name(spec.host.clone());
        tls = match &spec.ca_cert {
            Some(pem) => tls.ca_certificate(Certificate::from_pem(pem)),
            None => tls.with_native_roots(),
        };
        endpoint = endpoint.tls_config(tls).map_err(|e| DiscoveryError::Connection(format!("tls: {e}")))?;
    }
    let channel = match tokio::time::timeout(spec.timeout(), endpoint.connect()).await {
        Err(_) => return Err(DiscoveryError::Timeout(format!("connecting after {:?}", spec.timeout()))),
        Ok(Err(e)) => return Err(DiscoveryError::Connection(error_chain(&e))),
        Ok(Ok(ch)) => ch,
    };
    let mut request = tonic::Request::new(CapabilityRequest {});
    if let (Some(user), Some(pass)) = (&spec.username, &spec.password) {
        let md = request.metadata_mut();
        for (key, value) in [("username", user), ("password", pass)] {
            let v: MetadataValue<_> =
                value.parse().map_err(|_| DiscoveryError::InvalidSpec(format!("{key} is not a valid header value")))?;
            md.insert(key, v);
        }
    }
    let mut client = GNmiClient::new(channel);
    let resp = client.capabilities(request).await.map_err(status_error)?;
    Ok(map_response(spec, resp.into_inner()))
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut out = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        out.push_str(": ");
        out.push_str(&s.to_string());
        src = s.source();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Transport;

    #[test]
    fn maps_models_and_encodings() {
        let spec = ConnectionSpec::new(Transport::Gnmi, "10.0.0.9", 57400);
        let resp = CapabilityResponse {
            supported_models: vec![proto::ModelData {
                name: "openconfig-interfaces".into(),
                organization: "OpenConfig working group".into(),
                version: "2.5.0".into(),
            }],
            supported_encodings: vec![Encoding::JsonIetf as i32, Encoding::Proto as i32],
            g_nmi_version: "0.8.0".into(),
        };
        let d = map_response(&spec, resp);
        assert_eq!(d.protocol.encodings, ["JSON_IETF", "PROTO"]);
        assert_eq!(d.protocol.version.as_deref(), Some("0.8.0"));
        assert!(d.yang_library.is_none());
        assert_eq!(d.hello_modules.len(), 1);
        let m = &d.hello_modules[0];
        assert_eq!(m.identifier.revision.as_deref(), Some("2.5.0"));
        assert!(!m.identifier.revision_known());
        assert_eq!(m.organization.as_deref(), Some("OpenConfig working group"));
    }

    #[test]
    fn empty_model_list() {
        let spec = ConnectionSpec::new(Transport::Gnmi, "h", 1);
        let d = map_response(&spec, CapabilityResponse::default());
        assert!(d.hello_modules.is_empty());
        assert!(d.protocol.encodings.is_empty());
    }
}
