//! Synthetic media bytes. Sessions carry no real imagery; each media item gets
//! deterministic pseudo-random bytes of its advertised size.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharecam_core::protocol::{Fnv64, MediaItem};

pub fn synthetic_payload(media: &MediaItem) -> Vec<u8> {
    let mut h = Fnv64::new();
    h.write(media.payload_digest.as_bytes());
    let mut bytes = vec![0u8; usize::try_from(media.size_bytes).expect("media size fits in memory")];
    ChaCha8Rng::seed_from_u64(h.finish()).fill_bytes(&mut bytes);
    bytes
}

pub fn encode_payload(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_payload(text: &str) -> Option<Vec<u8>> {
    STANDARD.decode(text).ok()
}
