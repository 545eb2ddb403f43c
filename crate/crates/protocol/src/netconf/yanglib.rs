//! ietf-yang-library documents: the NMDA `yang-library` container and the
//! legacy `modules-state` container, in both directions.

use netinv_core::platform::{
    ConformanceType, DatastoreDef, ModuleIdentifier, ModuleImplementation, ModuleSet, ModulesStateDocument, SchemaDef,
    YangLibraryDocument,
};

use super::xml::{strip_prefix, Element};

pub const YANG_LIBRARY_NS: &str = "urn:ietf:params:xml:ns:yang:ietf-yang-library";
pub const DATASTORES_NS: &str = "urn:ietf:params:xml:ns:yang:ietf-datastores";

#[derive(Debug, thiserror::Error)]
#[error("invalid yang-library content: {0}")]
pub struct YangLibError(pub String);

fn required<'a>(el: &'a Element, name: &str) -> Result<&'a str, YangLibError> {
    el.child_text(name)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| YangLibError(format!("<{}> without <{name}>", el.name)))
}

fn optional(el: &Element, name: &str) -> Option<String> {
    el.child_text(name).filter(|s| !s.is_empty()).map(str::to_string)
}

fn identifier(el: &Element) -> Result<ModuleIdentifier, YangLibError> {
    let mut id = ModuleIdentifier::new(required(el, "name")?, optional(el, "revision").as_deref());
    if let Some(ns) = optional(el, "namespace") {
        id = id.with_namespace(ns);
    }
    Ok(id)
}

fn submodules(el: &Element) -> Result<Vec<ModuleIdentifier>, YangLibError> {
    el.find_all("submodule")
        .map(|s| {
            let mut id = identifier(s)?;
            id.is_submodule = true;
            Ok(id)
        })
        .collect()
}

fn features(el: &Element) -> Vec<String> {
    el.find_all("feature").map(|f| f.text.trim().to_string()).filter(|f| !f.is_empty()).collect()
}

pub fn parse_yang_library(el: &Element) -> Result<YangLibraryDocument, YangLibError> {
    let mut doc = YangLibraryDocument::default();
    for set in el.find_all("module-set") {
        let mut modules = Vec::new();
        for m in &set.children {
            let conformance = match m.name.as_str() {
                "module" => ConformanceType::Implement,
                "import-only-module" => ConformanceType::Import,
                _ => continue,
            };
            let mut imp = ModuleImplementation::new(identifier(m)?, conformance);
            if conformance == ConformanceType::Implement {
                imp.features = features(m);
                // deviation is a leafref to a module name within the same set
                imp.deviations = m
                    .find_all("deviation")
                    .map(|d| ModuleIdentifier::new(d.text.trim(), None))
                    .filter(|d| !d.name.is_empty())
                    .collect();
            }
            imp.submodules = submodules(m)?;
            modules.push(imp);
        }
        doc.module_sets.push(ModuleSet { name: required(set, "name")?.to_string(), modules });
    }
    for schema in el.find_all("schema") {
        doc.schemas.push(SchemaDef {
            name: required(schema, "name")?.to_string(),
            module_sets: schema.find_all("module-set").map(|s| s.text.trim().to_string()).collect(),
        });
    }
    for ds in el.find_all("datastore") {
        doc.datastores.push(DatastoreDef {
            name: strip_prefix(required(ds, "name")?).to_string(),
            schema: required(ds, "schema")?.to_string(),
        });
    }
    Ok(doc)
}

pub fn parse_modules_state(el: &Element) -> Result<ModulesStateDocument, YangLibError> {
    let mut doc = ModulesStateDocument::default();
    for m in el.find_all("module") {
        let conformance = match m.child_text("conformance-type") {
            Some("import") => ConformanceType::Import,
            Some("implement") | None => ConformanceType::Implement,
            Some(other) => return Err(YangLibError(format!("unknown conformance-type {other:?}"))),
        };
        let mut imp = ModuleImplementation::new(identifier(m)?, conformance);
        imp.features = features(m);
        imp.deviations = m.find_all("deviation").map(identifier).collect::<Result<_, _>>()?;
        imp.submodules = submodules(m)?;
        doc.modules.push(imp);
    }
    Ok(doc)
}

fn identifier_children(id: &ModuleIdentifier, with_empty_revision: bool) -> Vec<Element> {
    let mut out = vec![Element::leaf("name", &id.name)];
    match &id.revision {
        Some(rev) => out.push(Element::leaf("revision", rev)),
        None if with_empty_revision => out.push(Element::new("revision")),
        None => {}
    }
    if let Some(ns) = &id.namespace {
        out.push(Element::leaf("namespace", ns));
    }
    out
}

fn submodule_elements(m: &ModuleImplementation, legacy: bool) -> Vec<Element> {
    m.submodules
        .iter()
        .map(|s| {
            let mut id = s.clone();
            id.namespace = None;
            Element { name: "submodule".into(), children: identifier_children(&id, legacy), ..Element::default() }
        })
        .collect()
}

pub fn render_yang_library(doc: &YangLibraryDocument) -> Element {
    // the ds prefix declaration is emitted verbatim for the identityrefs below
    let mut root = Element::new("yang-library").ns(YANG_LIBRARY_NS).attr("xmlns:ds", DATASTORES_NS);
    for set in &doc.module_sets {
        let mut el = Element::new("module-set").child(Element::leaf("name", &set.name));
        for m in &set.modules {
            let tag = match m.conformance_type {
                ConformanceType::Import => "import-only-module",
                _ => "module",
            };
            let mut me = Element { name: tag.into(), children: identifier_children(&m.identifier, false), ..Element::default() };
            me.children.extend(submodule_elements(m, false));
            if tag == "module" {
                me.children.extend(m.features.iter().map(|f| Element::leaf("feature", f)));
                me.children.extend(m.deviations.iter().map(|d| Element::leaf("deviation", &d.name)));
            }
            el.children.push(me);
        }
        root.children.push(el);
    }
    for schema in &doc.schemas {
        let mut el = Element::new("schema").child(Element::leaf("name", &schema.name));
        el.children.extend(schema.module_sets.iter().map(|s| Element::leaf("module-set", s)));
        root.children.push(el);
    }
    for ds in &doc.datastores {
        root.children.push(
            Element::new("datastore")
                .child(Element::leaf("name", format!("ds:{}", ds.name)))
                .child(Element::leaf("schema", &ds.schema)),
        );
    }
    root.children.push(Element::leaf("content-id", "1"));
    root
}

pub fn render_modules_state(doc: &ModulesStateDocument) -> Element {
    let mut root = Element::new("modules-state").ns(YANG_LIBRARY_NS).child(Element::leaf("module-set-id", "1"));
    for m in &doc.modules {
        let mut me = Element { name: "module".into(), children: identifier_children(&m.identifier, true), ..Element::default() };
        me.children.extend(m.features.iter().map(|f| Element::leaf("feature", f)));
        for d in &m.deviations {
            me.children.push(Element { name: "deviation".into(), children: identifier_children(d, true), ..Element::default() });
        }
        me.children.push(Element::leaf("conformance-type", m.conformance_type.as_str()));
        me.children.extend(submodule_elements(m, true));
        root.children.push(me);
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nmda_doc() -> YangLibraryDocument {
        let mut snmp = ModuleImplementation::new(
            ModuleIdentifier::new("ietf-snmp", Some("2014-12-10")).with_namespace("urn:ietf:params:xml:ns:yang:ietf-snmp"),
            ConformanceType::Implement,
        );
        let mut sub = ModuleIdentifier::new("ietf-snmp-common", Some("2014-12-10"));
        sub.is_submodule = true;
        snmp.submodules.push(sub);
        snmp.features.push("proxy".into());
        snmp.deviations.push(ModuleIdentifier::new("vendor-dev", None));
        YangLibraryDocument {
            module_sets: vec![ModuleSet {
                name: "common".into(),
                modules: vec![
                    snmp,
                    ModuleImplementation::new(ModuleIdentifier::new("ietf-inet-types", Some("2013-07-15")), ConformanceType::Import),
                ],
            }],
            schemas: vec![SchemaDef { name: "complete".into(), module_sets: vec!["common".into()] }],
            datastores: vec![
                DatastoreDef { name: "running".into(), schema: "complete".into() },
                DatastoreDef { name: "operational".into(), schema: "complete".into() },
            ],
        }
    }

    #[test]
    fn nmda_round_trip() {
        let doc = nmda_doc();
        let xml = render_yang_library(&doc).to_xml();
        assert!(xml.contains("<name>ds:running</name>"));
        let back = parse_yang_library(&Element::parse(&xml).unwrap()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn legacy_round_trip() {
        let mut m = ModuleImplementation::new(
            ModuleIdentifier::new("vendorx-ifm", Some("2020-02-01")).with_namespace("urn:vendorx:ifm"),
            ConformanceType::Implement,
        );
        m.deviations.push(ModuleIdentifier::new("vendorx-dev", Some("2020-01-01")));
        let doc = ModulesStateDocument {
            modules: vec![
                m,
                ModuleImplementation::new(ModuleIdentifier::new("ietf-yang-types", None), ConformanceType::Import),
            ],
        };
        let xml = render_modules_state(&doc).to_xml();
        assert!(xml.contains("<revision/>"));
        assert_eq!(parse_modules_state(&Element::parse(&xml).unwrap()).unwrap(), doc);
    }

    #[test]
    fn missing_name_is_an_error() {
        let el = Element::parse(r#"<yang-library xmlns="urn:ietf:params:xml:ns:yang:ietf-yang-library"><module-set><module><revision>2020-01-01</revision></module></module-set></yang-library>"#).unwrap();
        assert!(parse_yang_library(&el).is_err());
        let el = Element::parse("<modules-state><module><name>a</name><conformance-type>maybe</conformance-type></module></modules-state>").unwrap();
        assert!(parse_modules_state(&el).is_err());
    }
}
