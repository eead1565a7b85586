//! Fernet tokens: AES-128-CBC + HMAC-SHA256, url-safe base64.
//!
//! ```text
//! 0x80 | timestamp (u64 BE, seconds) | iv (16) | ciphertext | hmac (32)
//! ```
//!
//! The MAC covers everything before it and is checked before any
//! decryption happens.

use std::time::{SystemTime, UNIX_EPOCH};

use aes::cipher::block_padding::Pkcs7;
use aes::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use base64::alphabet::URL_SAFE;
use base64::engine::{DecodePaddingMode, GeneralPurpose, GeneralPurposeConfig};
use base64::Engine;
use hmac::{Hmac, Mac};
use sha2::Sha256;

type Aes128CbcEnc = cbc::Encryptor<aes::Aes128>;
type Aes128CbcDec = cbc::Decryptor<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

const VERSION: u8 = 0x80;
const HEADER_LEN: usize = 1 + 8 + 16;
const MAC_LEN: usize = 32;
/// Tokens stamped further than this in the future are refused when a TTL
/// is enforced.
const MAX_CLOCK_SKEW_S: u64 = 60;

const B64: GeneralPurpose = GeneralPurpose::new(
    &URL_SAFE,
    GeneralPurposeConfig::new().with_decode_padding_mode(DecodePaddingMode::Indifferent),
);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("malformed key: {0}")]
    MalformedKey(String),
    /// Bad encoding, bad version, bad MAC or bad padding; deliberately not
    /// distinguished further.
    #[error("token failed authentication")]
    Authentication,
    #[error("token expired: {age_s}s old, ttl {ttl_s}s")]
    Expired { age_s: u64, ttl_s: u64 },
}

/// 32-byte key: signing half first, encryption half second.
#[derive(Clone, PartialEq, Eq)]
pub struct TokenKey {
    signing: [u8; 16],
    encryption: [u8; 16],
}

impl std::fmt::Debug for TokenKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenKey(..)")
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl TokenKey {
    pub fn generate() -> Self {
        Self::from_bytes(rand::random())
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        let mut signing = [0u8; 16];
        let mut encryption = [0u8; 16];
        signing.copy_from_slice(&bytes[..16]);
        encryption.copy_from_slice(&bytes[16..]);
        Self { signing, encryption }
    }

    /// Parse the url-safe base64 form.
    pub fn from_base64(text: &str) -> Result<Self, TokenError> {
        let raw = B64
            .decode(text.trim())
            .map_err(|e| TokenError::MalformedKey(e.to_string()))?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|v: Vec<u8>| TokenError::MalformedKey(format!("{} bytes, need 32", v.len())))?;
        Ok(Self::from_bytes(bytes))
    }

    pub fn to_base64(&self) -> String {
        let mut bytes = [0u8; 32];
        bytes[..16].copy_from_slice(&self.signing);
        bytes[16..].copy_from_slice(&self.encryption);
        B64.encode(bytes)
    }

    fn mac(&self) -> HmacSha256 {
        <HmacSha256 as Mac>::new_from_slice(&self.signing).expect("hmac takes any key length")
    }

    /// Encrypt with the current time and a random IV.
    pub fn encrypt(&self, plaintext: &[u8]) -> String {
        self.encrypt_with(plaintext, unix_now(), rand::random())
    }

    /// Encrypt with explicit timestamp and IV, for reproducible tokens.
    pub fn encrypt_with(&self, plaintext: &[u8], timestamp: u64, iv: [u8; 16]) -> String {
        let ciphertext = Aes128CbcEnc::new(&self.encryption.into(), &iv.into())
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext);
        let mut out = Vec::with_capacity(HEADER_LEN + ciphertext.len() + MAC_LEN);
        out.push(VERSION);
        out.extend_from_slice(&timestamp.to_be_bytes());
        out.extend_from_slice(&iv);
        out.extend_from_slice(&ciphertext);
        let tag = self.mac().chain_update(&out).finalize().into_bytes();
        out.extend_from_slice(&tag);
        B64.encode(out)
    }

    pub fn decrypt(&self, token: &str, ttl_s: Option<u64>) -> Result<Vec<u8>, TokenError> {
        self.decrypt_at(token, ttl_s, unix_now())
    }

    /// Verify and decrypt as if the clock read `now` (seconds).
    pub fn decrypt_at(&self, token: &str, ttl_s: Option<u64>, now: u64) -> Result<Vec<u8>, TokenError> {
        let raw = B64.decode(token.trim()).map_err(|_| TokenError::Authentication)?;
        if raw.len() < HEADER_LEN + 16 + MAC_LEN || raw[0] != VERSION {
            return Err(TokenError::Authentication);
        }
        let (body, tag) = raw.split_at(raw.len() - MAC_LEN);
        self.mac()
            .chain_update(body)
            .verify_slice(tag)
            .map_err(|_| TokenError::Authentication)?;

        let timestamp = u64::from_be_bytes(body[1..9].try_into().expect("8 bytes"));
        if let Some(ttl_s) = ttl_s {
            if timestamp > now.saturating_add(MAX_CLOCK_SKEW_S) {
                return Err(TokenError::Authentication);
            }
            let age_s = now.saturating_sub(timestamp);
            if age_s > ttl_s {
                return Err(TokenError::Expired { age_s, ttl_s });
            }
        }
        let iv: [u8; 16] = body[9..HEADER_LEN].try_into().expect("16 bytes");
        let ciphertext = &body[HEADER_LEN..];
        if ciphertext.len() % 16 != 0 {
            return Err(TokenError::Authentication);
        }
        Aes128CbcDec::new(&self.encryption.into(), &iv.into())
            .decrypt_padded_vec_mut::<Pkcs7>(ciphertext)
            .map_err(|_| TokenError::Authentication)
    }
}

/// Seconds stamped in a token, without verifying it.
pub fn token_timestamp(token: &str) -> Option<u64> {
    let raw = B64.decode(token.trim()).ok()?;
    Some(u64::from_be_bytes(raw.get(1..9)?.try_into().ok()?))
}
