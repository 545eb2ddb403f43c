//! `netinv`: operator client for the inventory service. Every subcommand is
//! one HTTP call (entity listing pages through results) and `--json` prints
//! the response body unchanged.

use std::io::Write;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use comfy_table::{presets, Table};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::{Method, StatusCode};
use serde_json::{json, Map, Value};
use url::Url;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_REMOTE: i32 = 2;

const TRANSPORTS: [&str; 3] = ["netconf-ssh", "netconf-tcp", "gnmi"];
const PAGE: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "netinv", version, about = "Network inventory client")]
pub struct Cli {
    /// inventory service base URL
    #[arg(long, global = true, env = "NETINV_SERVER", default_value = "http://127.0.0.1:8080")]
    pub server: String,
    /// print the raw JSON response instead of a table
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Register a platform and discover its capabilities
    Register(RegisterArgs),
    /// Re-run discovery for a registered platform
    Refresh { name: String },
    /// Remove a platform and its platform-scoped entities
    Deregister { name: String },
    /// List registered platforms
    Platforms,
    /// Datastores and the schema backing each
    Datastores { platform: String },
    /// Modules of a platform, optionally filtered by a name regex
    Modules {
        platform: String,
        #[arg(long = "match")]
        pattern: Option<String>,
    },
    /// Protocols a platform speaks
    Protocols { platform: String },
    /// Metadata for one module or submodule
    Module { name: String, revision: String },
    /// Dependency graph of a module
    Deps {
        name: String,
        revision: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Pull metadata from the module catalog
    SyncCatalog {
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long)]
        page_size: Option<usize>,
    },
    /// Report relationships whose target entity is missing
    GraphCheck,
    /// Query entities
    Entities {
        #[arg(long = "type")]
        entity_type: Option<String>,
        #[arg(long)]
        q: Option<String>,
        /// single page of this size instead of fetching everything
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        offset: Option<usize>,
    },
    /// Fetch one entity by id
    Entity { id: String },
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    pub name: Option<String>,
    /// transport://[user[:password]@]host:port, repeatable
    #[arg(long = "connect", value_name = "URI")]
    pub connect: Vec<String>,
    /// registration event as a JSON file, instead of the flags
    #[arg(long, conflicts_with_all = ["name", "connect", "vendor", "model"])]
    pub event: Option<std::path::PathBuf>,
    #[arg(long)]
    pub vendor: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// use TLS for gNMI connections
    #[arg(long)]
    pub tls: bool,
    /// PEM file trusted for gNMI TLS
    #[arg(long)]
    pub ca_cert: Option<std::path::PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    /// bad local input or HTTP 400
    Validation(String),
    /// unreachable server, 404, 409, 5xx
    Remote(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Remote(_) => EXIT_REMOTE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Remote(m) => m,
        }
    }
}

/// Parses a `--connect` URI into a connection object of a registration event.
pub fn parse_connect(raw: &str) -> Result<Map<String, Value>, Failure> {
    let bad = |m: String| Failure::Validation(format!("--connect {raw:?}: {m}"));
    let url = Url::parse(raw).map_err(|e| bad(e.to_string()))?;
    if !TRANSPORTS.contains(&url.scheme()) {
        return Err(bad(format!("transport must be one of {}", TRANSPORTS.join(", "))));
    }
    let host = url.host_str().filter(|h| !h.is_empty()).ok_or_else(|| bad("missing host".into()))?;
    let host = host.trim_start_matches('[').trim_end_matches(']');
    let port = url.port().ok_or_else(|| bad("missing port".into()))?;
    if !url.path().trim_matches('/').is_empty() || url.query().is_some() {
        return Err(bad("unexpected path or query".into()));
    }
    let mut conn = Map::new();
    conn.insert("host".into(), json!(host));
    conn.insert("port".into(), json!(port));
    conn.insert("transport".into(), json!(url.scheme()));
    let decode = |s: &str| percent_decode(s);
    if !url.username().is_empty() {
        conn.insert("username".into(), json!(decode(url.username())));
    }
    if let Some(p) = url.password() {
        conn.insert("password".into(), json!(decode(p)));
    }
    Ok(conn)
}

fn percent_decode(s: &str) -> String {
    percent_encoding::percent_decode_str(s).decode_utf8_lossy().into_owned()
}

fn registration_event(args: &RegisterArgs) -> Result<Value, Failure> {
    if let Some(path) = &args.event {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("reading {}: {e}", path.display())))?;
        return serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(format!("{}: invalid JSON: {e}", path.display())));
    }
    let name = args
        .name
        .clone()
        .ok_or_else(|| Failure::Validation("register needs a platform name or --event".into()))?;
    if args.connect.is_empty() {
        return Err(Failure::Validation("register needs at least one --connect".into()));
    }
    let ca_cert = match &args.ca_cert {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| Failure::Validation(format!("reading {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut connections = Vec::new();
    for raw in &args.connect {
        let mut c = parse_connect(raw)?;
        if let Some(t) = args.timeout_ms {
            c.insert("timeoutMs".into(), json!(t));
        }
        if c["transport"] == "gnmi" {
            if args.tls {
                c.insert("tls".into(), json!(true));
            }
            if let Some(pem) = &ca_cert {
                c.insert("caCert".into(), json!(pem));
            }
        }
        connections.push(Value::Object(c));
    }
    let mut event = Map::new();
    event.insert("platformName".into(), json!(name));
    if let Some(v) = &args.vendor {
        event.insert("vendor".into(), json!(v));
    }
    if let Some(m) = &args.model {
        event.insert("model".into(), json!(m));
    }
    event.insert("connections".into(), Value::Array(connections));
    Ok(Value::Object(event))
}

struct Api {
    base: Url,
    http: Client,
}

impl Api {
    fn new(server: &str) -> Result<Api, Failure> {
        let base = Url::parse(server).map_err(|e| Failure::Validation(format!("--server {server:?}: {e}")))?;
        if base.cannot_be_a_base() {
            return Err(Failure::Validation(format!("--server {server:?} is not a base URL")));
        }
        let http = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Failure::Remote(e.to_string()))?;
        Ok(Api { base, http })
    }

    fn url(&self, segments: &[&str], query: &[(&str, String)]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("checked base").pop_if_empty().extend(segments);
        if !query.is_empty() {
            url.query_pairs_mut().extend_pairs(query.iter().map(|(k, v)| (*k, v.as_str())));
        }
        url
    }

    /// Sends the request and returns the raw body of a successful response.
    fn call(&self, req: RequestBuilder) -> Result<String, Failure> {
        let resp = req.send().map_err(|e| Failure::Remote(format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| Failure::Remote(format!("reading response: {e}")))?;
        if status.is_success() {
            return Ok(body);
        }
        let detail = serde_json::from_str::<Value>(&body)
            .ok()
            .and_then(|v| v.get("detail").and_then(Value::as_str).map(str::to_string))
            .unwrap_or(body);
        let message = format!("{status}: {detail}");
        Err(if status == StatusCode::BAD_REQUEST { Failure::Validation(message) } else { Failure::Remote(message) })
    }

    fn get(&self, segments: &[&str], query: &[(&str, String)]) -> Result<String, Failure> {
        self.call(self.http.get(self.url(segments, query)))
    }

    fn send(&self, method: Method, segments: &[&str], body: Option<&Value>) -> Result<String, Failure> {
        let mut req = self.http.request(method, self.url(segments, &[]));
        if let Some(b) = body {
            req = req.json(b);
        }
        self.call(req)
    }
}

fn parse_body(raw: &str) -> Result<Value, Failure> {
    serde_json::from_str(raw).map_err(|e| Failure::Remote(format!("malformed response: {e}")))
}

fn table(header: &[&str]) -> Table {
    let mut t = Table::new();
    t.load_preset(presets::UTF8_FULL_CONDENSED);
    t.set_header(header.to_vec());
    t
}

fn text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(text).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn rows(v: &Value) -> &[Value] {
    v.as_array().map(Vec::as_slice).unwrap_or(&[])
}

fn render_registration(v: &Value) -> String {
    let mut out = format!("platform {}  mode {}\n", text(&v["platformId"]), text(&v["mode"]));
    let mut counts = table(&["datastores", "schemas", "moduleSets", "modules", "submodules"]);
    counts.add_row(["datastores", "schemas", "moduleSets", "modules", "submodules"].map(|k| text(&v["counts"][k])));
    out += &format!("{counts}\n");
    let mut protos = table(&["protocol", "host", "port", "outcome", "error"]);
    for p in rows(&v["perProtocol"]) {
        protos.add_row(["kind", "host", "port", "outcome", "error"].map(|k| text(&p[k])));
    }
    out += &protos.to_string();
    for w in rows(&v["warnings"]) {
        out += &format!("\nwarning: {}", text(w));
    }
    out
}

fn render_kv(v: &Value) -> String {
    let mut t = table(&["attribute", "value"]);
    if let Some(map) = v.as_object() {
        for (k, val) in map {
            let nested = match val {
                Value::Object(_) => true,
                Value::Array(a) => a.is_empty() || a.iter().any(Value::is_object),
                _ => false,
            };
            if !nested {
                t.add_row([k.clone(), text(val)]);
            }
        }
    }
    t.to_string()
}

fn render_module(v: &Value) -> String {
    let mut out = render_kv(v);
    let mut sets = table(&["platform", "moduleSet", "conformance", "features", "deviatedBy"]);
    for m in rows(&v["moduleSets"]) {
        sets.add_row(["platform", "moduleSet", "conformanceType", "features", "deviatedBy"].map(|k| text(&m[k])));
    }
    out += &format!("\n{sets}");
    for (title, key) in [("depends on", "dependencies"), ("required by", "dependents")] {
        let list = rows(&v[key]);
        if !list.is_empty() {
            let names: Vec<_> = list.iter().map(|d| format!("{}@{}", text(&d["name"]), text(&d["revision"]))).collect();
            out += &format!("\n{title}: {}", names.join(", "));
        }
    }
    if let Some(cat) = v["catalog"].as_object().filter(|c| !c.is_empty()) {
        out += &format!("\ncatalog:\n{}", render_kv(&Value::Object(cat.clone())));
    }
    out
}

/// One row per attribute instance; sub-attributes follow as `attr.sub`.
fn render_entity(v: &Value) -> String {
    let mut t = table(&["attribute", "kind", "value", "datasetId"]);
    t.add_row(["id".to_string(), String::new(), text(&v["id"]), String::new()]);
    t.add_row(["type".to_string(), String::new(), text(&v["type"]), String::new()]);
    fn add(t: &mut Table, name: &str, attr: &Value) {
        for inst in match attr {
            Value::Array(items) => items.iter().collect::<Vec<_>>(),
            other => vec![other],
        } {
            let value = inst.get("value").or_else(|| inst.get("object")).unwrap_or(&Value::Null);
            let shown = if value.is_object() { value.to_string() } else { text(value) };
            t.add_row([name.to_string(), text(&inst["type"]), shown, text(&inst["datasetId"])]);
            for (k, sub) in inst.as_object().into_iter().flatten() {
                if sub.is_object() && !matches!(k.as_str(), "value" | "object") {
                    add(t, &format!("{name}.{k}"), sub);
                }
            }
        }
    }
    for (k, attr) in v.as_object().into_iter().flatten() {
        if !matches!(k.as_str(), "id" | "type" | "@context") {
            add(&mut t, k, attr);
        }
    }
    t.to_string()
}

fn render_entities(v: &Value) -> String {
    let mut t = table(&["id", "type", "attributes"]);
    for e in rows(v) {
        let attrs: Vec<_> =
            e.as_object().map(|m| m.keys().filter(|k| !matches!(k.as_str(), "id" | "type" | "@context")).cloned().collect()).unwrap_or_default();
        t.add_row([text(&e["id"]), text(&e["type"]), attrs.join(", ")]);
    }
    t.to_string()
}

fn render(command: &Command, v: &Value) -> String {
    match command {
        Command::Register(_) | Command::Refresh { .. } => render_registration(v),
        Command::Deregister { .. } => format!(
            "removed {} entities and {} memberships of {}",
            text(&v["removedEntities"]),
            text(&v["removedMemberships"]),
            text(&v["platformId"])
        ),
        Command::Platforms => {
            let mut t = table(&["name", "vendor", "model", "nmda", "protocols", "module sets"]);
            for p in rows(v) {
                t.add_row(["name", "vendor", "model", "nmda", "protocols", "moduleSets"].map(|k| text(&p[k])));
            }
            t.to_string()
        }
        Command::Datastores { .. } => {
            let mut t = table(&["datastore", "schema"]);
            for d in rows(v) {
                t.add_row([text(&d["datastoreName"]), text(&d["schemaName"])]);
            }
            t.to_string()
        }
        Command::Modules { .. } => {
            let mut t = table(&["name", "revision", "conformance", "module set", "catalog", "schema"]);
            for m in rows(v) {
                let enriched = if m["catalogEnriched"] == true { "yes" } else { "no" };
                t.add_row([
                    text(&m["name"]),
                    text(&m["revision"]),
                    text(&m["conformanceType"]),
                    text(&m["moduleSet"]),
                    enriched.to_string(),
                    text(&m["schemaUrl"]),
                ]);
            }
            t.to_string()
        }
        Command::Protocols { .. } => {
            let mut t = table(&["kind", "address", "port", "version", "encodings", "xpath filter", "capabilities"]);
            for p in rows(v) {
                t.add_row([
                    text(&p["kind"]),
                    text(&p["address"]),
                    text(&p["port"]),
                    text(&p["version"]),
                    text(&p["encodings"]),
                    text(&p["xpathFilter"]),
                    rows(&p["capabilities"]).len().to_string(),
                ]);
            }
            t.to_string()
        }
        Command::Module { .. } => render_module(v),
        Command::Deps { .. } => {
            let mut t = table(&["from", "to", "depth"]);
            for e in rows(&v["edges"]) {
                t.add_row(["from", "to", "depth"].map(|k| text(&e[k])));
            }
            let missing: Vec<_> =
                rows(&v["nodes"]).iter().filter(|n| n["stored"] == false || n["placeholder"] == true).map(|n| text(&n["id"])).collect();
            let mut out = t.to_string();
            if !missing.is_empty() {
                out += &format!("\nnot yet described: {}", missing.join(", "));
            }
            out
        }
        Command::SyncCatalog { .. } => {
            let mut out = render_kv(v);
            for f in rows(&v["failures"]) {
                out += &format!("\nfailed: {}", text(f));
            }
            out
        }
        Command::GraphCheck => {
            let mut t = table(&["source", "attribute", "missing target"]);
            for d in rows(&v["dangling"]) {
                t.add_row(["sourceEntity", "attributeName", "danglingObject"].map(|k| text(&d[k])));
            }
            format!("{} dangling references\n{t}", text(&v["count"]))
        }
        Command::Entities { .. } => render_entities(v),
        Command::Entity { .. } => render_entity(v),
    }
}

/// Performs the command and returns the raw response body.
fn execute(api: &Api, command: &Command) -> Result<String, Failure> {
    match command {
        Command::Register(args) => {
            let event = registration_event(args)?;
            api.send(Method::POST, &["registry", "platforms"], Some(&event))
        }
        Command::Refresh { name } => api.send(Method::POST, &["registry", "platforms", name, "refresh"], None),
        Command::Deregister { name } => api.send(Method::DELETE, &["registry", "platforms", name], None),
        Command::Platforms => api.get(&["inventory", "platforms"], &[]),
        Command::Datastores { platform } => api.get(&["inventory", "platforms", platform, "datastores"], &[]),
        Command::Modules { platform, pattern } => {
            let query: Vec<_> = pattern.iter().map(|p| ("match", p.clone())).collect();
            api.get(&["inventory", "platforms", platform, "modules"], &query)
        }
        Command::Protocols { platform } => api.get(&["inventory", "platforms", platform, "protocols"], &[]),
        Command::Module { name, revision } => api.get(&["inventory", "modules", name, revision], &[]),
        Command::Deps { name, revision, depth } => {
            api.get(&["inventory", "modules", name, revision, "dependencies"], &[("depth", depth.to_string())])
        }
        Command::SyncCatalog { base_url, page_size } => {
            let mut body = Map::new();
            if let Some(u) = base_url {
                body.insert("baseUrl".into(), json!(u));
            }
            if let Some(p) = page_size {
                body.insert("pageSize".into(), json!(p));
            }
            api.send(Method::POST, &["catalog", "sync"], Some(&Value::Object(body)))
        }
        Command::GraphCheck => api.get(&["graph", "integrity"], &[]),
        Command::Entities { entity_type, q, limit, offset } => {
            let mut query = Vec::new();
            if let Some(t) = entity_type {
                query.push(("type", t.clone()));
            }
            if let Some(q) = q {
                query.push(("q", q.clone()));
            }
            if limit.is_some() || offset.is_some() {
                query.push(("limit", limit.unwrap_or(PAGE).to_string()));
                query.push(("offset", offset.unwrap_or(0).to_string()));
                return api.get(&["ngsi-ld", "v1", "entities"], &query);
            }
            let mut all = Vec::new();
            loop {
                let mut page_query = query.clone();
                page_query.push(("limit", PAGE.to_string()));
                page_query.push(("offset", all.len().to_string()));
                let page = parse_body(&api.get(&["ngsi-ld", "v1", "entities"], &page_query)?)?;
                let page = page.as_array().cloned().unwrap_or_default();
                let done = page.len() < PAGE;
                all.extend(page);
                if done {
                    break;
                }
            }
            Ok(serde_json::to_string(&all).expect("json values serialize"))
        }
        Command::Entity { id } => api.get(&["ngsi-ld", "v1", "entities", id], &[]),
    }
}

pub fn run_cli(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let api = Api::new(&cli.server)?;
    let body = execute(&api, &cli.command)?;
    let rendered = if cli.json { body } else { render(&cli.command, &parse_body(&body)?) };
    writeln!(out, "{rendered}").map_err(|e| Failure::Remote(format!("writing output: {e}")))
}

/// Runs `netinv` with the given arguments (program name first) and returns
/// the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    match run_cli(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "netinv: {}", f.message());
            f.code()
        }
    }
}
