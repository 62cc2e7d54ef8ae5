//! Mixed-radix indexing of symbol histories and windows.
//!
//! Two conventions are used throughout the crate:
//!
//! * a *history* `s_0 … s_i` is indexed with the oldest symbol most
//!   significant, so appending a symbol is `idx * radix + s`;
//! * a *window* of the `depth` most recent symbols is indexed with the most
//!   recent symbol most significant. Positions before time 0 read as symbol 0.

/// Index of a full history, oldest symbol most significant.
pub fn history_index(symbols: &[usize], radix: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * radix + s)
}

/// Inverse of [`history_index`] for a history of `out.len()` symbols.
pub fn decode_history(mut idx: usize, radix: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % radix;
        idx /= radix;
    }
}

/// Index of the window formed by the last `depth` symbols of `history`,
/// most recent first. Missing positions are padded with symbol 0.
pub fn tail_window_index(history: &[usize], depth: usize, radix: usize) -> usize {
    let mut idx = 0;
    for k in 0..depth {
        let s = if k < history.len() {
            history[history.len() - 1 - k]
        } else {
            0
        };
        idx = idx * radix + s;
    }
    idx
}

/// Decodes a window index into `out`, `out[0]` being the most recent symbol.
pub fn decode_window(idx: usize, radix: usize, out: &mut [usize]) {
    decode_history(idx, radix, out);
}

/// `radix^len` with overflow checking.
pub fn count(radix: usize, len: usize) -> Option<usize> {
    radix.checked_pow(len as u32)
}
