//! Minimal HTTP server standing in for a completions endpoint.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

pub enum Reply {
    Text(String),
    Status(u16),
    /// Sleep before answering with the text.
    Slow(Duration, String),
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub path: String,
    pub authorization: Option<String>,
    pub body: Value,
}

pub struct StubServer {
    pub url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl StubServer {
    /// `handler` gets the zero-based request number and the JSON body.
    pub fn start<F>(mut handler: F) -> StubServer
    where
        F: FnMut(usize, &Value) -> Reply + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        thread::spawn(move || {
            for (n, stream) in listener.incoming().enumerate() {
                let Ok(stream) = stream else { continue };
                let Some(req) = read_request(&stream) else { continue };
                let reply = handler(n, &req.body);
                log.lock().unwrap().push(req);
                // a client that timed out may have hung up already
                let _ = write_reply(stream, reply);
            }
        });
        StubServer { url, seen }
    }

    /// Serve `texts` in order, then 404.
    pub fn scripted(texts: Vec<String>) -> StubServer {
        StubServer::start(move |n, _| match texts.get(n) {
            Some(t) => Reply::Text(t.clone()),
            None => Reply::Status(404),
        })
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn read_request(stream: &TcpStream) -> Option<Seen> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let path = line.split_whitespace().nth(1)?.to_string();
    let mut length = 0;
    let mut authorization = None;
    loop {
        line.clear();
        reader.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        let (name, value) = l.split_once(':')?;
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().ok()?,
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some(Seen {
        path,
        authorization,
        body: serde_json::from_slice(&body).unwrap_or(Value::Null),
    })
}

fn write_reply(mut stream: TcpStream, reply: Reply) -> std::io::Result<()> {
    let (status, body) = match reply {
        Reply::Text(t) => (200, completion(&t)),
        Reply::Slow(d, t) => {
            thread::sleep(d);
            (200, completion(&t))
        }
        Reply::Status(code) => (code, json!({"error": {"message": "stub"}}).to_string()),
    };
    write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn completion(text: &str) -> String {
    json!({
        "id": "cmpl-stub",
        "object": "text_completion",
        "choices": [{"text": text, "index": 0, "finish_reason": "stop"}],
    })
    .to_string()
}
