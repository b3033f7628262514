//! Subprocess host for external restorers.
//!
//! Wire protocol: the plugin first writes the line `RECMAP-PLUGIN 1\n` to stdout. Frames
//! then flow in both directions with the same layout: the magic `IMG0`, width, height
//! and channels as little-endian `u32`, and `width × height × channels` raw row-major RGB
//! bytes. The plugin answers every request frame with exactly one frame; closing its
//! stdin asks it to exit.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use crate::image::Image;
use crate::plate::{PLATE_HEIGHT, PLATE_WIDTH};

pub const HANDSHAKE: &str = "RECMAP-PLUGIN 1";
pub const FRAME_MAGIC: &[u8; 4] = b"IMG0";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_SIDE: u32 = 1 << 14;

#[derive(Debug, thiserror::Error)]
pub enum PluginError {
    #[error("failed to launch plugin `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: io::Error,
    },
    #[error("plugin handshake failed: {0}")]
    Handshake(String),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("plugin returned {got:?}, expected {expected:?} (width, height, channels)")]
    DimensionMismatch {
        expected: (u32, u32, u32),
        got: (u32, u32, u32),
    },
    #[error("plugin exited or closed its output: {0}")]
    Crashed(String),
    #[error("plugin did not answer within {0:?}")]
    Timeout(Duration),
    #[error("plugin I/O failure: {0}")]
    Io(#[from] io::Error),
}

/// Serialises `img` as one protocol frame.
pub fn encode_frame(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data().len());
    out.extend_from_slice(FRAME_MAGIC);
    for v in [img.width(), img.height(), img.channels()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(img.data());
    out
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Image>, PluginError> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut magic[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(PluginError::MalformedFrame("truncated magic".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if &magic != FRAME_MAGIC {
        return Err(PluginError::MalformedFrame(format!("bad magic {magic:?}")));
    }
    let mut header = [0u8; 12];
    r.read_exact(&mut header)
        .map_err(|e| PluginError::MalformedFrame(format!("truncated header: {e}")))?;
    let field = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap());
    let (w, h, c) = (field(0), field(1), field(2));
    if w == 0 || h == 0 || w > MAX_SIDE || h > MAX_SIDE || !(c == 1 || c == 3) {
        return Err(PluginError::MalformedFrame(format!("implausible header {w}x{h}x{c}")));
    }
    let mut payload = vec![0u8; (w * h * c) as usize];
    r.read_exact(&mut payload)
        .map_err(|e| PluginError::MalformedFrame(format!("truncated payload: {e}")))?;
    Image::from_raw(w as usize, h as usize, c as usize, payload)
        .map(Some)
        .map_err(|e| PluginError::MalformedFrame(e.to_string()))
}

pub fn write_frame<W: Write>(w: &mut W, img: &Image) -> io::Result<()> {
    w.write_all(&encode_frame(img))?;
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluginConfig {
    /// Command line run through `sh -c`.
    pub cmd: String,
    pub workers: usize,
    /// Spawn a new process for every image.
    pub fresh: bool,
    pub timeout: Duration,
}

impl PluginConfig {
    pub fn new(cmd: impl Into<String>) -> Self {
        PluginConfig {
            cmd: cmd.into(),
            workers: 1,
            fresh: false,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

enum Message {
    Handshake(Result<(), String>),
    Frame(Result<Image, String>),
}

/// One running plugin process.
pub struct PluginProcess {
    child: Child,
    stdin: Option<ChildStdin>,
    rx: Receiver<Message>,
    timeout: Duration,
}

impl PluginProcess {
    /// Launches `cmd` and waits for the handshake line.
    pub fn spawn(cmd: &str, timeout: Duration) -> Result<Self, PluginError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PluginError::Spawn {
                cmd: cmd.to_string(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut line = Vec::new();
            let handshake = match reader.by_ref().take(64).read_until(b'\n', &mut line) {
                Ok(0) => Err("plugin closed stdout before the handshake".to_string()),
                Ok(_) if line == format!("{HANDSHAKE}\n").as_bytes() => Ok(()),
                Ok(_) => Err(format!(
                    "unexpected handshake line {:?}",
                    String::from_utf8_lossy(&line)
                )),
                Err(e) => Err(e.to_string()),
            };
            let ok = handshake.is_ok();
            if tx.send(Message::Handshake(handshake)).is_err() || !ok {
                return;
            }
            loop {
                let msg = match read_frame(&mut reader) {
                    Ok(Some(img)) => Ok(img),
                    Ok(None) => Err("end of stream".to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let stop = msg.is_err();
                if tx.send(Message::Frame(msg)).is_err() || stop {
                    return;
                }
            }
        });
        let mut process = PluginProcess {
            child,
            stdin,
            rx,
            timeout,
        };
        match process.rx.recv_timeout(timeout) {
            Ok(Message::Handshake(Ok(()))) => Ok(process),
            Ok(Message::Handshake(Err(e))) => {
                process.kill();
                Err(PluginError::Handshake(e))
            }
            Ok(Message::Frame(_)) => unreachable!("frames follow the handshake"),
            Err(RecvTimeoutError::Timeout) => {
                process.kill();
                Err(PluginError::Handshake(format!("no handshake within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                process.kill();
                Err(PluginError::Handshake("plugin exited".into()))
            }
        }
    }

    /// Sends one frame and waits for the answer.
    pub fn round_trip(&mut self, img: &Image) -> Result<Image, PluginError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| PluginError::Crashed("stdin already closed".into()))?;
        if let Err(e) = write_frame(stdin, img) {
            return Err(if e.kind() == io::ErrorKind::BrokenPipe {
                PluginError::Crashed("broken pipe while sending frame".into())
            } else {
                e.into()
            });
        }
        self.receive()
    }

    fn receive(&mut self) -> Result<Image, PluginError> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(Message::Frame(Ok(img))) => Ok(img),
            Ok(Message::Frame(Err(e))) if e == "end of stream" => Err(PluginError::Crashed(e)),
            Ok(Message::Frame(Err(e))) => Err(PluginError::MalformedFrame(e)),
            Ok(Message::Handshake(_)) => unreachable!("handshake is consumed at spawn"),
            Err(RecvTimeoutError::Timeout) => Err(PluginError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(PluginError::Crashed("reader thread ended".into()))
            }
        }
    }

    /// Closes stdin and waits for exit.
    pub fn shutdown(mut self) -> io::Result<std::process::ExitStatus> {
        self.stdin.take();
        self.child.wait()
    }

    pub fn kill(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    pub fn id(&self) -> u32 {
        self.child.id()
    }
}

impl Drop for PluginProcess {
    fn drop(&mut self) {
        self.stdin.take();
        if let Ok(None) = self.child.try_wait() {
            // give a well-behaved plugin a moment to exit on EOF
            for _ in 0..20 {
                thread::sleep(Duration::from_millis(5));
                if let Ok(Some(_)) = self.child.try_wait() {
                    return;
                }
            }
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Pool of plugin processes; job `i` is served by worker `i % workers`.
pub struct PluginHost {
    config: PluginConfig,
    workers: Vec<Mutex<Option<PluginProcess>>>,
}

impl PluginHost {
    pub fn new(config: PluginConfig) -> Self {
        let n = config.workers.max(1);
        PluginHost {
            config,
            workers: (0..n).map(|_| Mutex::new(None)).collect(),
        }
    }

    pub fn config(&self) -> &PluginConfig {
        &self.config
    }

    /// Restores one 256×64×3 image through the plugin.
    pub fn restore(&self, img: &Image, job: usize) -> Result<Image, PluginError> {
        let out = if self.config.fresh {
            let mut p = PluginProcess::spawn(&self.config.cmd, self.config.timeout)?;
            let r = p.round_trip(img);
            if r.is_ok() {
                let _ = p.shutdown();
            }
            r?
        } else {
            let slot = &self.workers[job % self.workers.len()];
            let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
            if guard.is_none() {
                *guard = Some(PluginProcess::spawn(&self.config.cmd, self.config.timeout)?);
            }
            let r = guard.as_mut().expect("spawned above").round_trip(img);
            if r.is_err() {
                // the stream is out of sync or dead; start over on the next job
                if let Some(mut p) = guard.take() {
                    p.kill();
                }
            }
            r?
        };
        let expected = (PLATE_WIDTH as u32, PLATE_HEIGHT as u32, 3);
        let got = (out.width() as u32, out.height() as u32, out.channels() as u32);
        if got != expected {
            return Err(PluginError::DimensionMismatch { expected, got });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgb;

    #[test]
    fn frame_layout_is_bit_exact() {
        let img = Image::from_raw(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = encode_frame(&img);
        assert_eq!(
            bytes,
            [
                b'I', b'M', b'G', b'0', 2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0, 1, 2, 3, 4, 5, 6
            ]
        );
        assert_eq!(read_frame(&mut &bytes[..]).unwrap(), Some(img));
    }

    #[test]
    fn read_frame_errors() {
        assert!(read_frame(&mut &b""[..]).unwrap().is_none());
        assert!(matches!(
            read_frame(&mut &b"IMGX\x01\0\0\0\x01\0\0\0\x03\0\0\0abc"[..]),
            Err(PluginError::MalformedFrame(_))
        ));
        assert!(matches!(
            read_frame(&mut &b"IMG0\x01\0\0\0\x01\0\0\0\x03\0\0\0ab"[..]),
            Err(PluginError::MalformedFrame(_))
        ));
        assert!(matches!(
            read_frame(&mut &b"IMG0\x01\0\0\0\x01\0\0\0\x02\0\0\0ab"[..]),
            Err(PluginError::MalformedFrame(_))
        ));
        assert!(matches!(read_frame(&mut &b"IM"[..]), Err(PluginError::MalformedFrame(_))));
    }

    #[test]
    fn multiple_frames_in_sequence() {
        let a = Image::filled(3, 2, Rgb::gray(7));
        let b = Image::filled(1, 1, Rgb::new(1, 2, 3));
        let mut bytes = encode_frame(&a);
        bytes.extend(encode_frame(&b));
        let mut r = &bytes[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some(a));
        assert_eq!(read_frame(&mut r).unwrap(), Some(b));
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }
}
