//! Single-threaded static server for the UI and one exported document.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};

use crate::CliError;

const EMBEDDED_INDEX: &str = include_str!("../assets/index.html");

pub fn serve(doc: &Path, port: u16, ui_dir: Option<&Path>) -> Result<(), CliError> {
    let body = std::fs::read(doc).map_err(|e| CliError::Input(format!("cannot read {}: {e}", doc.display())))?;
    serde_json::from_slice::<serde_json::Value>(&body)
        .map_err(|e| CliError::Input(format!("{} is not JSON: {e}", doc.display())))?;
    if let Some(dir) = ui_dir {
        if !dir.join("index.html").is_file() {
            return Err(CliError::Input(format!("{} has no index.html", dir.display())));
        }
    }
    let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => CliError::Input(format!("port {port} is already in use")),
        _ => CliError::Input(format!("cannot bind port {port}: {e}")),
    })?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("serving http://{addr}/");
    io::stdout().flush().ok();
    for stream in listener.incoming() {
        match stream {
            Ok(s) => {
                if let Err(e) = handle(s, &body, ui_dir) {
                    log::warn!("request failed: {e}");
                }
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
    Ok(())
}

fn handle(mut stream: TcpStream, doc: &[u8], ui_dir: Option<&Path>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
            break;
        }
    }
    let mut parts = request_line.split_whitespace();
    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    if method != "GET" && method != "HEAD" {
        return respond(&mut stream, "405 Method Not Allowed", "text/plain", b"method not allowed\n", true);
    }
    let head_only = method == "HEAD";
    let path = target.split(['?', '#']).next().unwrap_or("/");
    match path {
        "/data.json" => respond(&mut stream, "200 OK", "application/json", doc, !head_only),
        "/" | "/index.html" => match ui_dir {
            Some(dir) => {
                let page = std::fs::read(dir.join("index.html"))?;
                respond(&mut stream, "200 OK", "text/html; charset=utf-8", &page, !head_only)
            }
            None => respond(
                &mut stream,
                "200 OK",
                "text/html; charset=utf-8",
                EMBEDDED_INDEX.as_bytes(),
                !head_only,
            ),
        },
        _ => match ui_dir.and_then(|dir| static_file(dir, path)) {
            Some(file) => match std::fs::read(&file) {
                Ok(bytes) => respond(&mut stream, "200 OK", content_type(&file), &bytes, !head_only),
                Err(_) => not_found(&mut stream),
            },
            None => not_found(&mut stream),
        },
    }
}

fn not_found(stream: &mut TcpStream) -> io::Result<()> {
    respond(stream, "404 Not Found", "text/plain", b"not found\n", true)
}

/// Maps a URL path into `dir`, refusing anything that escapes it.
fn static_file(dir: &Path, url_path: &str) -> Option<PathBuf> {
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = dir.join(rel);
    full.is_file().then_some(full)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

fn respond(stream: &mut TcpStream, status: &str, ctype: &str, body: &[u8], with_body: bool) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    if with_body {
        stream.write_all(body)?;
    }
    stream.flush()
}
