//! Minimal namespace-aware XML tree, enough for NETCONF envelopes and
//! yang-library documents.

use std::collections::HashMap;
use std::fmt::Write as _;

use quick_xml::escape::{escape, resolve_predefined_entity};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Element {
    /// local name, prefix stripped
    pub name: String,
    pub namespace: Option<String>,
    /// attributes by qualified name, namespace declarations excluded
    pub attributes: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
#[error("malformed XML: {0}")]
pub struct XmlError(pub String);

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element { name: name.into(), ..Element::default() }
    }

    pub fn ns(mut self, namespace: &str) -> Self {
        self.namespace = Some(namespace.to_string());
        self
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attributes.push((key.to_string(), value.into()));
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    /// `<name>text</name>` leaf shorthand.
    pub fn leaf(name: &str, text: impl Into<String>) -> Self {
        Element::new(name).text(text)
    }

    pub fn get_attr(&self, key: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn find(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn find_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Trimmed text of the first child called `name`.
    pub fn child_text(&self, name: &str) -> Option<&str> {
        self.find(name).map(|c| c.text.trim())
    }

    pub fn parse(input: &str) -> Result<Element, XmlError> {
        let mut reader = Reader::from_str(input);
        let mut stack: Vec<(Element, HashMap<String, String>)> = Vec::new();
        let mut root: Option<Element> = None;
        loop {
            let event = reader.read_event().map_err(|e| XmlError(e.to_string()))?;
            match event {
                Event::Start(start) => {
                    let opened = open(&start, &stack)?;
                    stack.push(opened);
                }
                Event::Empty(start) => {
                    let (el, _) = open(&start, &stack)?;
                    attach(&mut stack, &mut root, el)?;
                }
                Event::End(_) => {
                    let (el, _) = stack.pop().ok_or_else(|| XmlError("unbalanced end tag".into()))?;
                    attach(&mut stack, &mut root, el)?;
                }
                Event::Text(t) => {
                    if let Some((el, _)) = stack.last_mut() {
                        el.text.push_str(&t.xml10_content());
                    } else if !t.xml10_content().trim().is_empty() {
                        return Err(XmlError("text outside the root element".into()));
                    }
                }
                Event::CData(t) => {
                    if let Some((el, _)) = stack.last_mut() {
                        el.text.push_str(&t.xml10_content());
                    }
                }
                Event::GeneralRef(r) => {
                    let resolved = match r.resolve_char_ref().map_err(|e| XmlError(e.to_string()))? {
                        Some(c) => c.to_string(),
                        None => {
                            let name = r.xml10_content();
                            resolve_predefined_entity(&name)
                                .ok_or_else(|| XmlError(format!("unknown entity &{name};")))?
                                .to_string()
                        }
                    };
                    if let Some((el, _)) = stack.last_mut() {
                        el.text.push_str(&resolved);
                    }
                }
                Event::Eof => break,
                _ => {}
            }
        }
        if !stack.is_empty() {
            return Err(XmlError("unexpected end of document".into()));
        }
        root.ok_or_else(|| XmlError("empty document".into()))
    }

    /// Serialises with a default-namespace declaration wherever the
    /// namespace differs from the parent's.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, None);
        out
    }

    fn write(&self, out: &mut String, parent_ns: Option<&str>) {
        let _ = write!(out, "<{}", self.name);
        if self.namespace.as_deref() != parent_ns {
            if let Some(ns) = &self.namespace {
                let _ = write!(out, " xmlns=\"{}\"", escape(ns.as_str()));
            }
        }
        for (k, v) in &self.attributes {
            let _ = write!(out, " {k}=\"{}\"", escape(v.as_str()));
        }
        if self.children.is_empty() && self.text.is_empty() {
            out.push_str("/>");
            return;
        }
        out.push('>');
        out.push_str(&escape(self.text.as_str()));
        for c in &self.children {
            c.write(out, self.namespace.as_deref());
        }
        let _ = write!(out, "</{}>", self.name);
    }
}

fn split_qname(q: &str) -> (Option<&str>, &str) {
    match q.split_once(':') {
        Some((p, l)) => (Some(p), l),
        None => (None, q),
    }
}

fn open(
    start: &BytesStart<'_>,
    stack: &[(Element, HashMap<String, String>)],
) -> Result<(Element, HashMap<String, String>), XmlError> {
    // namespace scope: inherited bindings plus this element's declarations
    let mut scope = stack.last().map(|(_, s)| s.clone()).unwrap_or_default();
    let mut attributes = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| XmlError(e.to_string()))?;
        let key = attr.key.as_ref().to_string();
        let value = attr.normalized_value(quick_xml::XmlVersion::Implicit1_0).map_err(|e| XmlError(e.to_string()))?.into_owned();
        if key == "xmlns" {
            scope.insert(String::new(), value);
        } else if let Some(prefix) = key.strip_prefix("xmlns:") {
            scope.insert(prefix.to_string(), value);
        } else {
            attributes.push((key, value));
        }
    }
    let qname = start.name();
    let (prefix, local) = split_qname(qname.as_ref());
    let namespace = scope.get(prefix.unwrap_or("")).filter(|ns| !ns.is_empty()).cloned();
    if prefix.is_some() && namespace.is_none() {
        return Err(XmlError(format!("unbound prefix in <{}>", qname.as_ref())));
    }
    Ok((Element { name: local.to_string(), namespace, attributes, children: Vec::new(), text: String::new() }, scope))
}

fn attach(
    stack: &mut [(Element, HashMap<String, String>)],
    root: &mut Option<Element>,
    el: Element,
) -> Result<(), XmlError> {
    match stack.last_mut() {
        Some((parent, _)) => parent.children.push(el),
        None if root.is_none() => *root = Some(el),
        None => return Err(XmlError("multiple root elements".into())),
    }
    Ok(())
}

/// Strips an identityref prefix (`ds:running` -> `running`).
pub fn strip_prefix(value: &str) -> &str {
    value.rsplit_once(':').map_or(value, |(_, local)| local)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_namespaces_and_entities() {
        let doc = r#"<?xml version="1.0"?>
        <nc:rpc-reply xmlns:nc="urn:ietf:params:xml:ns:netconf:base:1.0" message-id="7">
          <nc:data><x xmlns="urn:x">a &amp; b &#65;</x></nc:data>
        </nc:rpc-reply>"#;
        let el = Element::parse(doc).unwrap();
        assert_eq!(el.name, "rpc-reply");
        assert_eq!(el.namespace.as_deref(), Some("urn:ietf:params:xml:ns:netconf:base:1.0"));
        assert_eq!(el.get_attr("message-id"), Some("7"));
        let x = el.find("data").unwrap().find("x").unwrap();
        assert_eq!(x.namespace.as_deref(), Some("urn:x"));
        assert_eq!(x.text, "a & b A");
    }

    #[test]
    fn round_trips_through_text() {
        let el = Element::new("a")
            .ns("urn:a")
            .attr("k", "v<\"")
            .child(Element::leaf("b", "x & y"))
            .child(Element::new("c").ns("urn:c"));
        let back = Element::parse(&el.to_xml()).unwrap();
        let mut expected = el.clone();
        expected.children[0].namespace = Some("urn:a".into());
        assert_eq!(back, expected);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Element::parse("").is_err());
        assert!(Element::parse("<a><b></a>").is_err());
        assert!(Element::parse("<a/><b/>").is_err());
        assert!(Element::parse("<p:a/>").is_err());
    }

    #[test]
    fn identityref_prefix() {
        assert_eq!(strip_prefix("ds:running"), "running");
        assert_eq!(strip_prefix("operational"), "operational");
    }
}
