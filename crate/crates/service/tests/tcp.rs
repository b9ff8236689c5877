//! The NDJSON transport over a real socket.

mod support;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use pair_service::config::ServiceConfig;
use pair_service::protocol::{Envelope, MessageType};
use pair_service::server::Server;
use pair_service::service::{init_envelope, Service};
use support::*;

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        Client {
            reader: BufReader::new(stream.try_clone().unwrap()),
            writer: stream,
        }
    }

    fn send_raw(&mut self, line: &str) {
        writeln!(self.writer, "{line}").unwrap();
    }

    fn recv(&mut self) -> Envelope {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        Envelope::from_line(line.trim_end()).unwrap()
    }
}

#[test]
fn financial_session_over_tcp() {
    let dir = pool_copy();
    let service = Service::with_rules(ServiceConfig::default());
    service.load_pool_dir(dir.path()).unwrap();
    let addr = Server::bind("127.0.0.1:0", service).unwrap().spawn().unwrap();

    let mut c = Client::connect(addr);
    c.send_raw("this is not json");
    let err = c.recv();
    assert_eq!(err.kind, MessageType::Error);
    assert_eq!(err.payload["stage"], "protocol");

    let s = financial();
    c.send_raw(&init_envelope("tcp", &s.spatial, "user_123", None, None).to_line());
    assert_eq!(c.recv().kind, MessageType::Snapshot);

    c.send_raw(&prompt("tcp", "Show me my credit card spending on the table in front of me.").to_line());
    let event = c.recv();
    assert_eq!(event.kind, MessageType::EventOut);
    assert_eq!(event.payload["position"], "anchor_12");
    assert_eq!(c.recv().kind, MessageType::Snapshot);
    assert_eq!(c.recv().kind, MessageType::ReasoningTrace);

    // a second client cannot drive the first one's session
    let mut other = Client::connect(addr);
    other.send_raw(&prompt("tcp", "show my spending").to_line());
    assert_eq!(other.recv().payload["stage"], "protocol");
}
