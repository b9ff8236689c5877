//! Newline-delimited JSON over TCP: one thread and one [`Connection`] per
//! client socket.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use crate::service::Service;

pub struct Server {
    listener: TcpListener,
    service: Arc<Service>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, service: Arc<Service>) -> io::Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            service,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts clients until the listener fails.
    pub fn serve(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let service = Arc::clone(&self.service);
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_client(stream, &service) {
                    log::debug!("client {peer:?}: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs [`Server::serve`] on a background thread.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || {
            if let Err(e) = self.serve() {
                log::error!("server stopped: {e}");
            }
        });
        Ok(addr)
    }
}

fn handle_client(stream: TcpStream, service: &Arc<Service>) -> io::Result<()> {
    let conn = service.connect();
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for env in conn.send_line(&line) {
            writeln!(writer, "{}", env.to_line())?;
        }
        writer.flush()?;
    }
    Ok(())
}
