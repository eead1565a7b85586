//! Tokens produced by an independent implementation of the same format.

use base64::Engine as _;
use serde::Deserialize;

use safegate_gateway::token::{token_timestamp, TokenError, TokenKey};

#[derive(Deserialize)]
struct Vectors {
    key: String,
    vectors: Vec<Vector>,
}

#[derive(Deserialize)]
struct Vector {
    token: String,
    plaintext_b64: String,
    timestamp: u64,
    iv_hex: String,
}

fn load() -> Vectors {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/fernet_vectors.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn iv(hex: &str) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).unwrap();
    }
    out
}

#[test]
fn decrypts_and_reproduces_every_vector() {
    let v = load();
    let key = TokenKey::from_base64(&v.key).unwrap();
    assert!(!v.vectors.is_empty());
    for t in &v.vectors {
        let plain = base64::engine::general_purpose::STANDARD.decode(&t.plaintext_b64).unwrap();
        assert_eq!(key.decrypt(&t.token, None).unwrap(), plain);
        assert_eq!(token_timestamp(&t.token), Some(t.timestamp));
        assert_eq!(key.encrypt_with(&plain, t.timestamp, iv(&t.iv_hex)), t.token);
    }
}

#[test]
fn vectors_respect_ttl_and_key() {
    let v = load();
    let key = TokenKey::from_base64(&v.key).unwrap();
    let t = &v.vectors[0];
    assert!(matches!(key.decrypt_at(&t.token, Some(60), t.timestamp + 61), Err(TokenError::Expired { .. })));
    assert!(key.decrypt_at(&t.token, Some(60), t.timestamp + 30).is_ok());
    assert!(matches!(TokenKey::generate().decrypt(&t.token, None), Err(TokenError::Authentication)));
}
