//! NETCONF envelopes: hello, rpc, rpc-reply.

use super::xml::Element;
use crate::capability::{BASE_1_0, BASE_1_1};

pub const NETCONF_NS: &str = "urn:ietf:params:xml:ns:netconf:base:1.0";
const XML_DECL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;

#[derive(Debug, thiserror::Error)]
pub enum MessageError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("rpc-error: {0}")]
    RpcError(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hello {
    pub capabilities: Vec<String>,
    pub session_id: Option<u32>,
}

impl Hello {
    pub fn client() -> Self {
        Hello { capabilities: vec![BASE_1_0.to_string(), BASE_1_1.to_string()], session_id: None }
    }

    pub fn to_xml(&self) -> String {
        let mut caps = Element::new("capabilities");
        caps.children.extend(self.capabilities.iter().map(|c| Element::leaf("capability", c)));
        let mut hello = Element::new("hello").ns(NETCONF_NS).child(caps);
        if let Some(id) = self.session_id {
            hello.children.push(Element::leaf("session-id", id.to_string()));
        }
        format!("{XML_DECL}{}", hello.to_xml())
    }

    pub fn parse(xml: &str) -> Result<Hello, MessageError> {
        let el = Element::parse(xml).map_err(|e| MessageError::Malformed(e.to_string()))?;
        if el.name != "hello" {
            return Err(MessageError::Malformed(format!("expected <hello>, got <{}>", el.name)));
        }
        let capabilities: Vec<String> = el
            .find("capabilities")
            .ok_or_else(|| MessageError::Malformed("hello without <capabilities>".into()))?
            .find_all("capability")
            .map(|c| c.text.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        let session_id = match el.child_text("session-id") {
            Some(s) => Some(s.parse().map_err(|_| MessageError::Malformed(format!("bad session-id {s:?}")))?),
            None => None,
        };
        Ok(Hello { capabilities, session_id })
    }

    /// Highest base version both sides advertise.
    pub fn common_base(&self, peer: &Hello) -> Option<&'static str> {
        [BASE_1_1, BASE_1_0]
            .into_iter()
            .find(|b| self.capabilities.iter().any(|c| c == b) && peer.capabilities.iter().any(|c| c == b))
    }
}

/// `<rpc><get><filter type="subtree">{filter}</filter></get></rpc>`
pub fn get_rpc(message_id: u32, filter: Element) -> String {
    let rpc = Element::new("rpc")
        .ns(NETCONF_NS)
        .attr("message-id", message_id.to_string())
        .child(Element::new("get").child(Element::new("filter").attr("type", "subtree").child(filter)));
    format!("{XML_DECL}{}", rpc.to_xml())
}

/// Returns the `<data>` element of a successful reply.
pub fn parse_data_reply(xml: &str, message_id: u32) -> Result<Element, MessageError> {
    let el = Element::parse(xml).map_err(|e| MessageError::Malformed(e.to_string()))?;
    if el.name != "rpc-reply" {
        return Err(MessageError::Malformed(format!("expected <rpc-reply>, got <{}>", el.name)));
    }
    if let Some(got) = el.get_attr("message-id") {
        if got != message_id.to_string() {
            return Err(MessageError::Malformed(format!("reply to message-id {got}, expected {message_id}")));
        }
    }
    if let Some(err) = el.find("rpc-error") {
        let msg = err
            .child_text("error-message")
            .or_else(|| err.child_text("error-tag"))
            .unwrap_or("unspecified error");
        return Err(MessageError::RpcError(msg.to_string()));
    }
    el.find("data").cloned().ok_or_else(|| MessageError::Malformed("rpc-reply without <data>".into()))
}

/// Incoming request as seen by a server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rpc {
    pub message_id: String,
    pub operation: Element,
}

impl Rpc {
    pub fn parse(xml: &str) -> Result<Rpc, MessageError> {
        let el = Element::parse(xml).map_err(|e| MessageError::Malformed(e.to_string()))?;
        if el.name != "rpc" {
            return Err(MessageError::Malformed(format!("expected <rpc>, got <{}>", el.name)));
        }
        let message_id = el.get_attr("message-id").unwrap_or("").to_string();
        let operation = el
            .children
            .into_iter()
            .next()
            .ok_or_else(|| MessageError::Malformed("empty <rpc>".into()))?;
        Ok(Rpc { message_id, operation })
    }

    /// Top-level elements of a `<get>` subtree filter.
    pub fn subtree_filter(&self) -> Vec<&Element> {
        self.operation.find("filter").map(|f| f.children.iter().collect()).unwrap_or_default()
    }
}

fn reply(message_id: &str, body: Element) -> String {
    let mut r = Element::new("rpc-reply").ns(NETCONF_NS).child(body);
    if !message_id.is_empty() {
        r.attributes.push(("message-id".into(), message_id.into()));
    }
    format!("{XML_DECL}{}", r.to_xml())
}

pub fn data_reply(message_id: &str, content: Vec<Element>) -> String {
    let mut data = Element::new("data");
    data.children = content;
    reply(message_id, data)
}

pub fn error_reply(message_id: &str, tag: &str, message: &str) -> String {
    reply(
        message_id,
        Element::new("rpc-error")
            .child(Element::leaf("error-type", "protocol"))
            .child(Element::leaf("error-tag", tag))
            .child(Element::leaf("error-severity", "error"))
            .child(Element::leaf("error-message", message)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_round_trip_and_negotiation() {
        let server = Hello { capabilities: vec![BASE_1_0.into(), "urn:x?module=x".into()], session_id: Some(4) };
        let parsed = Hello::parse(&server.to_xml()).unwrap();
        assert_eq!(parsed, server);
        assert_eq!(Hello::client().common_base(&parsed), Some(BASE_1_0));
        let v11 = Hello { capabilities: vec![BASE_1_1.into()], session_id: Some(1) };
        assert_eq!(Hello::client().common_base(&v11), Some(BASE_1_1));
        let none = Hello { capabilities: vec![], session_id: None };
        assert_eq!(Hello::client().common_base(&none), None);
    }

    #[test]
    fn malformed_hello() {
        assert!(Hello::parse("<hello/>").is_err());
        assert!(Hello::parse("<rpc/>").is_err());
        assert!(Hello::parse("not xml <").is_err());
    }

    #[test]
    fn rpc_and_replies() {
        let filter = Element::new("yang-library").ns("urn:ietf:params:xml:ns:yang:ietf-yang-library");
        let rpc = Rpc::parse(&get_rpc(3, filter.clone())).unwrap();
        assert_eq!(rpc.message_id, "3");
        assert_eq!(rpc.operation.name, "get");
        assert_eq!(rpc.subtree_filter(), vec![&filter]);

        let data = parse_data_reply(&data_reply("3", vec![Element::leaf("x", "1")]), 3).unwrap();
        assert_eq!(data.child_text("x"), Some("1"));
        match parse_data_reply(&error_reply("3", "operation-not-supported", "no such rpc"), 3) {
            Err(MessageError::RpcError(m)) => assert_eq!(m, "no such rpc"),
            other => panic!("{other:?}"),
        }
        assert!(parse_data_reply(&data_reply("9", vec![]), 3).is_err());
    }
}
