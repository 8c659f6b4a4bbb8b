//! Closed-form I/O cost formulas of the external-memory model, evaluated for
//! concrete parameters. Used for strategy choices and predicted bounds.

use super::EmParams;

fn log_base(x: f64, base: f64) -> f64 {
    x.ln() / base.ln()
}

/// `scan(n) = ceil(n / B)`.
pub fn scan(words: f64, p: &EmParams) -> f64 {
    (words / p.block_words as f64).ceil()
}

/// `sort(n) = (n/B) * log_{M/B}(n/B)`, with the logarithm floored at one pass.
pub fn sort(words: f64, p: &EmParams) -> f64 {
    let blocks = words / p.block_words as f64;
    if blocks <= 0.0 {
        return 0.0;
    }
    let passes = log_base(blocks, p.ram_blocks() as f64).ceil().max(1.0);
    blocks * passes
}

/// The envelope `(n/B) * (1 + ceil(log_{M/B}(n/B)))` that bounds ext_sort.
pub fn sort_envelope(words: f64, p: &EmParams) -> f64 {
    let blocks = (words / p.block_words as f64).max(1.0);
    let passes = log_base(blocks, p.ram_blocks() as f64).ceil().max(0.0);
    blocks * (1.0 + passes)
}

/// `permute(N) = min(N, sort(N))` for `records` records totalling `words`.
pub fn permute(records: f64, words: f64, p: &EmParams) -> f64 {
    records.min(sort(words, p))
}

/// Ingestion bound for a vertex-based sketch with `v` sketch slots of `phi`
/// words over a stream of `n` updates:
/// `min(N, (N/B) log_{M/B}(V phi / B)) + scan(N phi / M) + scan(V phi)`.
pub fn vsketch(n: f64, v: f64, phi: f64, p: &EmParams) -> f64 {
    let b = p.block_words as f64;
    let m = p.ram_words as f64;
    let log_term = log_base((v * phi / b).max(1.0), p.ram_blocks() as f64).max(1.0);
    n.min(n / b * log_term) + scan(n * phi / m, p) + scan(v * phi, p)
}

/// Number of merge passes ext_sort performs on `words` of `record_words`-word
/// records, and the implementation's predicted I/O.
pub fn sort_implementation_cost(records: usize, record_words: usize, p: &EmParams) -> f64 {
    let words = (records * record_words) as f64;
    let b = p.block_words as f64;
    let blocks = (words / b).ceil();
    if blocks * b <= p.ram_words as f64 {
        return 2.0 * blocks;
    }
    let chunk_records = ((p.ram_words - 2 * p.block_words) / record_words).max(1);
    let runs = records.div_ceil(chunk_records) as f64;
    let fan_in = super::sort::fan_in(p, record_words) as f64;
    let passes = log_base(runs, fan_in).ceil().max(0.0);
    2.0 * (blocks + runs) * (1.0 + passes)
}
