use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};

use crate::protocol::{respond, BAD_REQUEST};
use crate::DatabaseHandle;

/// Longest accepted request line in bytes.
pub const MAX_LINE: usize = 4096;

/// TCP lookup service. Each connection is handled on its own task and
/// shares the database read-only.
pub struct Server {
    listener: TcpListener,
    db: Arc<DatabaseHandle>,
}

impl Server {
    pub async fn bind(db: Arc<DatabaseHandle>, addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr).await?,
            db,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until the process ends.
    pub async fn run(self) -> std::io::Result<()> {
        self.run_until(std::future::pending()).await
    }

    /// Serves until `shutdown` completes. Open connections are left to
    /// finish on their own.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) -> std::io::Result<()> {
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => return Ok(()),
                accepted = self.listener.accept() => {
                    let (stream, peer) = accepted?;
                    let db = Arc::clone(&self.db);
                    tokio::spawn(async move {
                        if let Err(e) = handle(stream, db).await {
                            log::debug!("connection {peer} closed: {e}");
                        }
                    });
                }
            }
        }
    }
}

async fn handle(stream: TcpStream, db: Arc<DatabaseHandle>) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let (rd, mut wr) = stream.into_split();
    let mut rd = BufReader::new(rd);
    let mut buf = Vec::with_capacity(64);
    loop {
        buf.clear();
        let n = (&mut rd).take(MAX_LINE as u64 + 1).read_until(b'\n', &mut buf).await?;
        if n == 0 {
            return Ok(());
        }
        let mut reply = if buf.last() != Some(&b'\n') && buf.len() > MAX_LINE {
            // discard the rest of the oversized line
            let mut sink = Vec::new();
            rd.read_until(b'\n', &mut sink).await?;
            BAD_REQUEST.to_string()
        } else {
            match std::str::from_utf8(&buf) {
                Ok(line) => respond(&db, line.trim_end_matches(['\n', '\r'])),
                Err(_) => BAD_REQUEST.to_string(),
            }
        };
        reply.push('\n');
        wr.write_all(reply.as_bytes()).await?;
    }
}
