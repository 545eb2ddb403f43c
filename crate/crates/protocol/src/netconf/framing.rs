//! NETCONF message framing: end-of-message delimiter (base:1.0) and
//! chunked framing (base:1.1).

use std::io;

use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

pub const EOM: &[u8] = b"]]>]]>";
const END_OF_CHUNKS: &[u8] = b"\n##\n";
const MAX_CHUNK: usize = 4_294_967_295;
const MAX_SIZE_DIGITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Framing {
    EndOfMessage,
    Chunked,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FramingError {
    #[error("invalid chunk header at byte {0}")]
    BadChunkHeader(usize),
    #[error("chunk size out of range")]
    ChunkSize,
}

/// Encodes one message. `max_chunk` splits the body into chunks of at most
/// that many bytes under chunked framing; it is ignored for end-of-message.
pub fn encode(framing: Framing, message: &[u8], max_chunk: usize) -> Vec<u8> {
    match framing {
        Framing::EndOfMessage => {
            let mut out = Vec::with_capacity(message.len() + EOM.len());
            out.extend_from_slice(message);
            out.extend_from_slice(EOM);
            out
        }
        Framing::Chunked => {
            let max_chunk = max_chunk.clamp(1, MAX_CHUNK);
            let mut out = Vec::with_capacity(message.len() + 16);
            for chunk in message.chunks(max_chunk) {
                out.extend_from_slice(format!("\n#{}\n", chunk.len()).as_bytes());
                out.extend_from_slice(chunk);
            }
            out.extend_from_slice(END_OF_CHUNKS);
            out
        }
    }
}

/// Incremental decoder; feed bytes as they arrive and pull whole messages.
#[derive(Debug)]
pub struct Decoder {
    framing: Framing,
    buf: Vec<u8>,
    /// body accumulated so far for a chunked message in progress
    partial: Vec<u8>,
}

impl Decoder {
    pub fn new(framing: Framing) -> Self {
        Decoder { framing, buf: Vec::new(), partial: Vec::new() }
    }

    pub fn framing(&self) -> Framing {
        self.framing
    }

    /// Switching applies to bytes not yet consumed as a message.
    pub fn set_framing(&mut self, framing: Framing) {
        self.framing = framing;
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() + self.partial.len()
    }

    pub fn next_message(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        match self.framing {
            Framing::EndOfMessage => Ok(self.next_eom()),
            Framing::Chunked => self.next_chunked(),
        }
    }

    fn next_eom(&mut self) -> Option<Vec<u8>> {
        let pos = self.buf.windows(EOM.len()).position(|w| w == EOM)?;
        let msg = self.buf[..pos].to_vec();
        self.buf.drain(..pos + EOM.len());
        Some(msg)
    }

    fn next_chunked(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        loop {
            // every header starts with "\n#"
            if self.buf.len() < 3 {
                return Ok(None);
            }
            if self.buf[0] != b'\n' || self.buf[1] != b'#' {
                return Err(FramingError::BadChunkHeader(0));
            }
            if self.buf[2] == b'#' {
                if self.buf.len() < END_OF_CHUNKS.len() {
                    return Ok(None);
                }
                if self.buf[3] != b'\n' {
                    return Err(FramingError::BadChunkHeader(3));
                }
                self.buf.drain(..END_OF_CHUNKS.len());
                return Ok(Some(std::mem::take(&mut self.partial)));
            }
            let digits_end = match self.buf[2..].iter().position(|b| !b.is_ascii_digit()) {
                Some(n) => 2 + n,
                None if self.buf.len() - 2 > MAX_SIZE_DIGITS => return Err(FramingError::ChunkSize),
                None => return Ok(None),
            };
            let digits = &self.buf[2..digits_end];
            if digits.len() > MAX_SIZE_DIGITS {
                return Err(FramingError::ChunkSize);
            }
            if digits.is_empty() || digits[0] == b'0' {
                return Err(FramingError::BadChunkHeader(2));
            }
            if self.buf[digits_end] != b'\n' {
                return Err(FramingError::BadChunkHeader(digits_end));
            }
            let size: usize = std::str::from_utf8(digits)
                .ok()
                .and_then(|s| s.parse().ok())
                .filter(|n| *n <= MAX_CHUNK)
                .ok_or(FramingError::ChunkSize)?;
            let data_start = digits_end + 1;
            if self.buf.len() < data_start + size {
                return Ok(None);
            }
            self.partial.extend_from_slice(&self.buf[data_start..data_start + size]);
            self.buf.drain(..data_start + size);
        }
    }
}

/// Message-oriented wrapper over a byte stream.
pub struct FramedStream<S> {
    stream: S,
    decoder: Decoder,
    max_chunk: usize,
}

impl<S: AsyncRead + AsyncWrite + Unpin> FramedStream<S> {
    pub fn new(stream: S) -> Self {
        FramedStream { stream, decoder: Decoder::new(Framing::EndOfMessage), max_chunk: 8192 }
    }

    pub fn framing(&self) -> Framing {
        self.decoder.framing()
    }

    pub fn set_framing(&mut self, framing: Framing) {
        self.decoder.set_framing(framing);
    }

    pub async fn read_message(&mut self) -> io::Result<Vec<u8>> {
        let mut buf = [0u8; 8192];
        loop {
            if let Some(msg) = self
                .decoder
                .next_message()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
            {
                return Ok(msg);
            }
            let n = self.stream.read(&mut buf).await?;
            if n == 0 {
                return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "session closed mid-message"));
            }
            self.decoder.feed(&buf[..n]);
        }
    }

    pub async fn write_message(&mut self, message: &[u8]) -> io::Result<()> {
        let bytes = encode(self.decoder.framing(), message, self.max_chunk);
        self.stream.write_all(&bytes).await?;
        self.stream.flush().await
    }

    pub async fn shutdown(&mut self) -> io::Result<()> {
        self.stream.shutdown().await
    }
}
