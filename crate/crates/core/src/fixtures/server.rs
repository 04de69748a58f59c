use std::io;
use std::sync::Arc;
use std::thread::JoinHandle;

use super::Handler;
use crate::http::{HttpRequest, Method};

const WORKERS: usize = 4;

/// A fixture handler served over HTTP on localhost. Stops on drop.
pub struct FixtureServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
    port: u16,
}

/// Serves `handler` on `addr` (e.g. `127.0.0.1:0` for any free port).
pub fn serve(handler: Arc<dyn Handler>, addr: &str) -> io::Result<FixtureServer> {
    let server = Arc::new(tiny_http::Server::http(addr).map_err(io::Error::other)?);
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| io::Error::other("not an IP listener"))?;
    let workers = (0..WORKERS)
        .map(|_| {
            let server = server.clone();
            let handler = handler.clone();
            std::thread::spawn(move || {
                while let Ok(rq) = server.recv() {
                    respond(&*handler, rq);
                }
            })
        })
        .collect();
    Ok(FixtureServer { server, workers, port })
}

fn respond(handler: &dyn Handler, mut rq: tiny_http::Request) {
    let Ok(method) = rq.method().as_str().parse::<Method>() else {
        let _ = rq.respond(tiny_http::Response::from_string("unsupported method").with_status_code(405));
        return;
    };
    let url = rq.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((&url, ""));
    let mut request = HttpRequest::new(method, path);
    request.query = url::form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    request.headers = rq
        .headers()
        .iter()
        .map(|h| (h.field.as_str().to_string(), h.value.as_str().to_string()))
        .collect();
    let mut body = String::new();
    if rq.as_reader().read_to_string(&mut body).is_ok() && !body.is_empty() {
        request.body = Some(body);
    }
    let resp = handler.handle(&request);
    let mut out = tiny_http::Response::from_string(resp.body).with_status_code(resp.status);
    for (k, v) in &resp.headers {
        if let Ok(h) = tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            out = out.with_header(h);
        }
    }
    let _ = rq.respond(out);
}

impl FixtureServer {
    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::RealClock;
    use crate::fixtures::FixtureApi;
    use crate::http::{NetworkTransport, Transport};
    use std::time::Duration;

    #[test]
    fn serves_over_http() {
        let s = serve(Arc::new(FixtureApi::new(Arc::new(RealClock::new()))), "127.0.0.1:0").unwrap();
        let mut t = NetworkTransport::new(&s.base_url(), Duration::from_secs(5)).unwrap();
        let r = t.send(&HttpRequest::new(Method::Post, "/api/links/create")).unwrap();
        assert_eq!(r.status, 200);
        let mut get = HttpRequest::new(Method::Get, "/api/links/users/user1/101");
        get.query.push(("name".into(), "B R".into()));
        assert_eq!(t.send(&get).unwrap().status, 200);
    }
}
