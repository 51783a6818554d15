//! Simulated time is kept in whole nanoseconds so that sums of iteration
//! latencies are exact and runs are bit-for-bit reproducible.

pub type Nanos = u64;

pub const NANOS_PER_MS: f64 = 1e6;
pub const NANOS_PER_SEC: f64 = 1e9;

pub fn ms_to_nanos(ms: f64) -> Nanos {
    (ms * NANOS_PER_MS).round() as Nanos
}

pub fn secs_to_nanos(secs: f64) -> Nanos {
    (secs * NANOS_PER_SEC).round() as Nanos
}

pub fn nanos_to_secs(t: Nanos) -> f64 {
    t as f64 / NANOS_PER_SEC
}

pub fn nanos_to_ms(t: Nanos) -> f64 {
    t as f64 / NANOS_PER_MS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_anchor() {
        assert_eq!(ms_to_nanos(128.59), 128_590_000);
        assert_eq!(secs_to_nanos(1.5), 1_500_000_000);
        assert_eq!(nanos_to_ms(128_590_000), 128.59);
    }
}
