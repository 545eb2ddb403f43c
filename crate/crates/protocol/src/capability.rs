//! NETCONF capability URIs.

use netinv_core::platform::{AdvertisedModule, ModuleIdentifier};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

pub const BASE_1_0: &str = "urn:ietf:params:netconf:base:1.0";
pub const BASE_1_1: &str = "urn:ietf:params:netconf:base:1.1";
pub const XPATH: &str = "urn:ietf:params:netconf:capability:xpath:1.0";
pub const YANG_LIBRARY_MODULE: &str = "ietf-yang-library";
const YANG_LIBRARY_CAPABILITY: &str = "urn:ietf:params:netconf:capability:yang-library:";

const QUERY_VALUE: &AsciiSet = &CONTROLS.add(b' ').add(b'&').add(b'=').add(b'#').add(b'%');

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Capability {
    /// anything that does not name a module: base versions, protocol features
    Base(String),
    Module(AdvertisedModule),
}

/// Classifies a capability URI. Total: anything without a `module=`
/// parameter is a base capability.
pub fn parse_capability_uri(uri: &str) -> Capability {
    let uri = uri.trim();
    let Some((namespace, query)) = uri.split_once('?') else {
        return Capability::Base(uri.to_string());
    };
    let mut name = None;
    let mut revision = None;
    let mut features = Vec::new();
    let mut deviations = Vec::new();
    for pair in query.split('&').map(|p| p.strip_prefix("amp;").unwrap_or(p)) {
        let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
        let value = percent_decode_str(value).decode_utf8_lossy().into_owned();
        match key {
            "module" if !value.is_empty() => name = Some(value),
            "revision" if !value.is_empty() => revision = Some(value),
            "features" => features = split_list(&value),
            "deviations" => deviations = split_list(&value),
            _ => {}
        }
    }
    let Some(name) = name else {
        return Capability::Base(uri.to_string());
    };
    let mut identifier = ModuleIdentifier::new(name, revision.as_deref());
    if !namespace.is_empty() {
        identifier = identifier.with_namespace(namespace);
    }
    let mut module = AdvertisedModule::new(identifier);
    module.features = features;
    module.deviations = deviations;
    Capability::Module(module)
}

fn split_list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Inverse of [`parse_capability_uri`] for module advertisements.
pub fn module_capability_uri(module: &AdvertisedModule) -> String {
    let id = &module.identifier;
    let enc = |s: &str| utf8_percent_encode(s, QUERY_VALUE).to_string();
    let ns = id.namespace.clone().unwrap_or_else(|| format!("urn:netinv:module:{}", id.name));
    let mut uri = format!("{ns}?module={}", enc(&id.name));
    if let Some(rev) = &id.revision {
        uri.push_str(&format!("&revision={}", enc(rev)));
    }
    let list = |items: &[String]| items.iter().map(|s| enc(s)).collect::<Vec<_>>().join(",");
    if !module.features.is_empty() {
        uri.push_str(&format!("&features={}", list(&module.features)));
    }
    if !module.deviations.is_empty() {
        uri.push_str(&format!("&deviations={}", list(&module.deviations)));
    }
    uri
}

/// Whether the hello advertises the yang-library module in either the
/// module form or the dedicated yang-library capability.
pub fn advertises_yang_library(capabilities: &[String]) -> bool {
    capabilities.iter().any(|c| {
        c.starts_with(YANG_LIBRARY_CAPABILITY)
            || matches!(parse_capability_uri(c), Capability::Module(m) if m.identifier.name == YANG_LIBRARY_MODULE)
    })
}

pub fn hello_modules(capabilities: &[String]) -> Vec<AdvertisedModule> {
    capabilities
        .iter()
        .filter_map(|c| match parse_capability_uri(c) {
            Capability::Module(m) => Some(m),
            Capability::Base(_) => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_capabilities() {
        assert_eq!(parse_capability_uri(BASE_1_1), Capability::Base(BASE_1_1.into()));
        let with_query = "urn:ietf:params:netconf:capability:yang-library:1.0?revision=2016-06-21&module-set-id=1";
        assert!(matches!(parse_capability_uri(with_query), Capability::Base(_)));
        assert!(matches!(parse_capability_uri("?module="), Capability::Base(_)));
    }

    #[test]
    fn module_with_revision() {
        let Capability::Module(m) =
            parse_capability_uri("urn:ietf:params:xml:ns:yang:ietf-interfaces?module=ietf-interfaces&revision=2014-05-08")
        else {
            panic!("expected a module");
        };
        assert_eq!(m.identifier.name, "ietf-interfaces");
        assert_eq!(m.identifier.revision.as_deref(), Some("2014-05-08"));
        assert_eq!(m.identifier.namespace.as_deref(), Some("urn:ietf:params:xml:ns:yang:ietf-interfaces"));
        assert!(m.features.is_empty());
    }

    #[test]
    fn features_and_deviations() {
        let Capability::Module(m) = parse_capability_uri(
            "urn:ietf:params:xml:ns:netconf:base:1.0?module=ietf-netconf&revision=2011-06-01&features=candidate,validate&deviations=vendor-dev",
        ) else {
            panic!("expected a module");
        };
        assert_eq!(m.features, ["candidate", "validate"]);
        assert_eq!(m.deviations, ["vendor-dev"]);
    }

    #[test]
    fn escaped_ampersand_tolerated() {
        let Capability::Module(m) = parse_capability_uri("urn:x?module=x&amp;revision=2020-01-01") else {
            panic!("expected a module");
        };
        assert_eq!(m.identifier.revision.as_deref(), Some("2020-01-01"));
    }

    #[test]
    fn yang_library_detection() {
        assert!(advertises_yang_library(&["urn:ietf:params:netconf:capability:yang-library:1.1?revision=2019-01-04".into()]));
        assert!(advertises_yang_library(&[
            "urn:ietf:params:xml:ns:yang:ietf-yang-library?module=ietf-yang-library&revision=2016-06-21".into()
        ]));
        assert!(!advertises_yang_library(&[BASE_1_1.into()]));
    }

    proptest! {
        #[test]
        fn parser_is_total(s in ".{0,80}") {
            let _ = parse_capability_uri(&s);
        }

        #[test]
        fn serialize_then_parse(name in "[a-z][a-z0-9-]{0,20}",
                                rev in prop::option::of("20[0-9]{2}-[01][0-9]-[0-3][0-9]"),
                                features in prop::collection::vec("[a-z][a-z-]{0,8}", 0..3),
                                deviations in prop::collection::vec("[a-z][a-z-]{0,8}", 0..3)) {
            let mut m = AdvertisedModule::new(
                ModuleIdentifier::new(name.clone(), rev.as_deref()).with_namespace(format!("urn:x:{name}")));
            m.features = features;
            m.deviations = deviations;
            prop_assert_eq!(parse_capability_uri(&module_capability_uri(&m)), Capability::Module(m));
        }
    }
}
