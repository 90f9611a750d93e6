/// Mixes a base seed with a stream tag and a position into an independent
/// 64-bit seed (splitmix64 finaliser over each input).
pub fn derive_seed(seed: u64, stream: u64, position: u64) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    h = mix(h ^ stream.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    mix(h ^ position.wrapping_mul(0x94d0_49bb_1331_11eb))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
