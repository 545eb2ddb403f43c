//! Declarative device fixtures (YAML or JSON).

use std::path::Path;

use netinv_core::platform::{ModulesStateDocument, YangLibraryDocument};
use netinv_protocol::Transport;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TransportDef {
    pub kind: Transport,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
    #[serde(default)]
    pub tls: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GnmiModel {
    pub name: String,
    #[serde(default)]
    pub organization: String,
    #[serde(default)]
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub transports: Vec<TransportDef>,
    #[serde(default)]
    pub hello_capabilities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yang_library: Option<YangLibraryDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modules_state: Option<ModulesStateDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnmi_models: Option<Vec<GnmiModel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnmi_encodings: Option<Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error("fixture {name}: {message}")]
    Invalid { name: String, message: String },
}

impl Fixture {
    pub fn from_str(text: &str, origin: &str) -> Result<Fixture, FixtureError> {
        // YAML is a superset of JSON, one parser covers both
        let fixture: Fixture =
            serde_yaml::from_str(text).map_err(|e| FixtureError::Parse { path: origin.into(), message: e.to_string() })?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Fixture, FixtureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
        Fixture::from_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let invalid = |m: &str| Err(FixtureError::Invalid { name: self.name.clone(), message: m.into() });
        if self.name.trim().is_empty() {
            return invalid("name must not be empty");
        }
        if self.transports.is_empty() {
            return invalid("at least one transport is required");
        }
        if self.yang_library.is_some() && self.modules_state.is_some() {
            return invalid("yangLibrary and modulesState are mutually exclusive");
        }
        for t in &self.transports {
            if t.tls && t.kind != Transport::Gnmi {
                return invalid("tls is only supported on gnmi transports");
            }
            if t.kind == Transport::NetconfSsh && (t.username.is_none() || t.password.is_none()) {
                return invalid("netconf-ssh transports need username and password");
            }
        }
        if let Some(encodings) = &self.gnmi_encodings {
            for e in encodings {
                if netinv_protocol::gnmi::proto::Encoding::from_str_name(e).is_none() {
                    return invalid(&format!("unknown gnmi encoding {e:?}"));
                }
            }
        }
        if let Some(doc) = &self.yang_library {
            doc.validate().map_err(|e| FixtureError::Invalid { name: self.name.clone(), message: e.to_string() })?;
        }
        Ok(())
    }
}

/// Fixtures shipped with the crate, by file name.
pub fn bundled_path(file: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_load() {
        for f in ["simx-nmda.yaml", "simx-nmda2.yaml", "simx-legacy.yaml", "simx-bare.yaml", "simx-gnmi.yaml"] {
            Fixture::load(bundled_path(f)).unwrap();
        }
        let nmda = Fixture::load(bundled_path("simx-nmda.yaml")).unwrap();
        let lib = nmda.yang_library.unwrap();
        assert_eq!(lib.datastores.len(), 2);
        assert_eq!(lib.module_sets[0].modules.len(), 5);
        let legacy = Fixture::load(bundled_path("simx-legacy.yaml")).unwrap();
        assert_eq!(legacy.modules_state.unwrap().modules.len(), 3);
    }

    #[test]
    fn json_fixture_and_invariants() {
        let ok = r#"{"name":"j","transports":[{"kind":"netconf-tcp","port":1}]}"#;
        Fixture::from_str(ok, "inline").unwrap();
        let none = r#"{"name":"j","transports":[]}"#;
        assert!(matches!(Fixture::from_str(none, "inline"), Err(FixtureError::Invalid { .. })));
        let both = r#"{"name":"j","transports":[{"kind":"netconf-tcp","port":1}],"yangLibrary":{},"modulesState":{}}"#;
        assert!(matches!(Fixture::from_str(both, "inline"), Err(FixtureError::Invalid { .. })));
        let ssh = r#"{"name":"j","transports":[{"kind":"netconf-ssh","port":1}]}"#;
        assert!(Fixture::from_str(ssh, "inline").is_err());
        let unknown = r#"{"name":"j","transports":[{"kind":"netconf-tcp","port":1}],"colour":"red"}"#;
        assert!(matches!(Fixture::from_str(unknown, "inline"), Err(FixtureError::Parse { .. })));
    }
}
