use std::fmt;
use std::io;

use tokio::io::{AsyncRead, AsyncWrite, DuplexStream};
use tokio::net::TcpStream;
use tokio::sync::mpsc;

/// Buffer size of each direction of an in-process stream.
const MEMORY_PIPE_CAPACITY: usize = 1 << 20;

pub trait DuplexIo: AsyncRead + AsyncWrite + Send + Unpin {}
impl<T: AsyncRead + AsyncWrite + Send + Unpin> DuplexIo for T {}

pub type BoxedStream = Box<dyn DuplexIo>;

/// In-process listener address. Opening it hands one half of a fresh duplex
/// pipe to the listening server.
#[derive(Clone)]
pub struct MemoryEndpoint {
    name: String,
    acceptor: mpsc::Sender<DuplexStream>,
}

impl MemoryEndpoint {
    pub fn new(name: impl Into<String>) -> (MemoryEndpoint, mpsc::Receiver<DuplexStream>) {
        let (tx, rx) = mpsc::channel(64);
        (
            MemoryEndpoint {
                name: name.into(),
                acceptor: tx,
            },
            rx,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Where a peer can be reached.
#[derive(Clone)]
pub enum Endpoint {
    /// `host:port`
    Tcp(String),
    Memory(MemoryEndpoint),
}

impl Endpoint {
    pub async fn open(&self) -> io::Result<BoxedStream> {
        match self {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr).await?;
                stream.set_nodelay(true)?;
                Ok(Box::new(stream))
            }
            Endpoint::Memory(m) => {
                let (client, server) = tokio::io::duplex(MEMORY_PIPE_CAPACITY);
                m.acceptor.send(server).await.map_err(|_| {
                    io::Error::new(
                        io::ErrorKind::ConnectionRefused,
                        format!("in-process endpoint `{}` is closed", m.name),
                    )
                })?;
                Ok(Box::new(client))
            }
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp://{addr}"),
            Endpoint::Memory(m) => write!(f, "mem://{}", m.name),
        }
    }
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
