//! Length-prefixed frames: a 4-byte big-endian length, then that many bytes.

use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {len} bytes exceeds the {limit}-byte limit")]
    TooLarge { len: usize, limit: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames.
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R, limit: usize) -> Result<Option<Vec<u8>>, FrameError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > limit {
        return Err(FrameError::TooLarge { len, limit });
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).await?;
    Ok(Some(buf))
}

pub async fn write_frame<W: AsyncWrite + Unpin>(w: &mut W, payload: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "frame longer than 4 GiB"))?;
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(payload);
    w.write_all(&out).await?;
    w.flush().await
}

/// Error frames are the only payloads that do not start with `<`.
pub fn is_error_frame(payload: &[u8]) -> bool {
    payload.first() != Some(&b'<')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn round_trip_and_eof() {
        let mut wire = Vec::new();
        write_frame(&mut wire, b"<protocol/>").await.unwrap();
        write_frame(&mut wire, b"").await.unwrap();
        assert_eq!(&wire[..4], &[0, 0, 0, 11]);
        let mut r = wire.as_slice();
        assert_eq!(read_frame(&mut r, 64).await.unwrap().unwrap(), b"<protocol/>");
        assert_eq!(read_frame(&mut r, 64).await.unwrap().unwrap(), b"");
        assert!(read_frame(&mut r, 64).await.unwrap().is_none());
    }

    #[tokio::test]
    async fn limits_and_truncation() {
        let mut r: &[u8] = &[0, 0, 1, 0, b'x'];
        assert!(matches!(
            read_frame(&mut r, 255).await,
            Err(FrameError::TooLarge { len: 256, limit: 255 })
        ));
        let mut r: &[u8] = &[0, 0, 0, 5, b'x'];
        assert!(matches!(read_frame(&mut r, 255).await, Err(FrameError::Io(_))));
    }

    #[test]
    fn error_frames() {
        assert!(is_error_frame(b"ERR Timeout: slow"));
        assert!(is_error_frame(b""));
        assert!(!is_error_frame(b"<protocol/>"));
    }
}
