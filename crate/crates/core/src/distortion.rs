//! Per-stage distortion measures `ρ_i(x^i, y^i)`.

use crate::error::{Error, Result};
use crate::history::{count, history_index, tail_window_index};

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `ρ(x_i, …, x_{i-m}, y_{i-1}, …, y_{i-k}; y_i)`, identical at every stage.
    Windowed {
        source_window: usize,
        recon_window: usize,
        table: Vec<f64>,
    },
    /// One table per stage over full histories `(x^i, y^i)`.
    FullHistory { stages: Vec<Vec<f64>> },
}

/// A distortion measure with bounded or full memory.
///
/// Windowed tables are laid out as rows of reconstruction symbols. Row index
/// is `source_ctx * |Y|^k + recon_ctx` where `source_ctx` encodes
/// `(x_i, x_{i-1}, …, x_{i-m})` most recent first, and `recon_ctx` encodes
/// `(y_{i-1}, …, y_{i-k})` the same way. Symbols before time 0 read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    source_size: usize,
    recon_size: usize,
    kind: Kind,
}

fn check_entries(values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distortion entries must be finite and nonnegative, found {bad}"
        )));
    }
    Ok(())
}

impl DistortionSpec {
    pub fn windowed(
        source_size: usize,
        recon_size: usize,
        source_window: usize,
        recon_window: usize,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if source_size == 0 || recon_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let contexts = count(source_size, source_window + 1)
            .zip(count(recon_size, recon_window))
            .and_then(|(a, b)| a.checked_mul(b))
            .ok_or_else(|| Error::InvalidArgument("distortion window too large".into()))?;
        if rows.len() != contexts {
            return Err(Error::LengthMismatch {
                expected: contexts,
                found: rows.len(),
            });
        }
        let mut table = Vec::with_capacity(contexts * recon_size);
        for row in rows {
            if row.len() != recon_size {
                return Err(Error::LengthMismatch {
                    expected: recon_size,
                    found: row.len(),
                });
            }
            check_entries(&row)?;
            table.extend(row);
        }
        Ok(Self {
            source_size,
            recon_size,
            kind: Kind::Windowed {
                source_window,
                recon_window,
                table,
            },
        })
    }

    /// Stage `i` table has `|X|^{i+1} · |Y|^{i+1}` entries indexed by
    /// `history(x^i) * |Y|^{i+1} + history(y^i)`.
    pub fn full_history(
        source_size: usize,
        recon_size: usize,
        stages: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if source_size == 0 || recon_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for (i, stage) in stages.iter().enumerate() {
            let expected = count(source_size, i + 1)
                .zip(count(recon_size, i + 1))
                .and_then(|(a, b)| a.checked_mul(b))
                .ok_or(Error::HorizonTooLarge {
                    horizon: i,
                    limit: i.saturating_sub(1),
                })?;
            if stage.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    found: stage.len(),
                });
            }
            check_entries(stage)?;
        }
        Ok(Self {
            source_size,
            recon_size,
            kind: Kind::FullHistory { stages },
        })
    }

    /// Hamming distortion `[x_i ≠ y_i]` on a common alphabet.
    pub fn hamming(size: usize) -> Result<Self> {
        let rows = (0..size)
            .map(|x| (0..size).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::windowed(size, size, 0, 0, rows)
    }

    /// Binary detector of two consecutive ones: `y_i` should equal
    /// `[x_i = 1 and x_{i-1} = 1]`, Hamming cost otherwise.
    pub fn consecutive_ones() -> Self {
        let rows = vec![
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        Self::windowed(2, 2, 1, 0, rows).expect("static table is valid")
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn recon_size(&self) -> usize {
        self.recon_size
    }

    pub fn is_windowed(&self) -> bool {
        matches!(self.kind, Kind::Windowed { .. })
    }

    /// Source memory `m` of a windowed table.
    pub fn source_window(&self) -> Option<usize> {
        match self.kind {
            Kind::Windowed { source_window, .. } => Some(source_window),
            Kind::FullHistory { .. } => None,
        }
    }

    /// Reconstruction memory `k` of a windowed table.
    pub fn recon_window(&self) -> Option<usize> {
        match self.kind {
            Kind::Windowed { recon_window, .. } => Some(recon_window),
            Kind::FullHistory { .. } => None,
        }
    }

    /// Last stage a full-history table covers.
    pub fn max_stage(&self) -> Option<usize> {
        match &self.kind {
            Kind::Windowed { .. } => None,
            Kind::FullHistory { stages } => stages.len().checked_sub(1),
        }
    }

    /// Number of rows of a windowed table.
    pub fn context_count(&self) -> Option<usize> {
        match &self.kind {
            Kind::Windowed { table, .. } => Some(table.len() / self.recon_size),
            Kind::FullHistory { .. } => None,
        }
    }

    /// Row `ctx` of a windowed table.
    pub fn row(&self, ctx: usize) -> Option<&[f64]> {
        match &self.kind {
            Kind::Windowed { table, .. } => {
                Some(&table[ctx * self.recon_size..(ctx + 1) * self.recon_size])
            }
            Kind::FullHistory { .. } => None,
        }
    }

    /// `ρ_i(x^i, y^i)` where `xs = x_0..=x_i` and `ys = y_0..=y_i`.
    pub fn rho(&self, xs: &[usize], ys: &[usize]) -> f64 {
        debug_assert_eq!(xs.len(), ys.len());
        let stage = xs.len() - 1;
        match &self.kind {
            Kind::Windowed {
                source_window,
                recon_window,
                table,
            } => {
                let xw = tail_window_index(xs, source_window + 1, self.source_size);
                let yw = tail_window_index(&ys[..stage], *recon_window, self.recon_size);
                let ctx = xw * self.recon_size.pow(*recon_window as u32) + yw;
                table[ctx * self.recon_size + ys[stage]]
            }
            Kind::FullHistory { stages } => {
                let t = &stages[stage];
                let yi = history_index(ys, self.recon_size);
                let xi = history_index(xs, self.source_size);
                t[xi * self.recon_size.pow(stage as u32 + 1) + yi]
            }
        }
    }

    /// Smallest-index reconstruction symbol with minimal cost in row `ctx`.
    pub fn best_symbol(&self, ctx: usize) -> Option<usize> {
        let row = self.row(ctx)?;
        let mut best = 0;
        for (y, &v) in row.iter().enumerate() {
            if v < row[best] {
                best = y;
            }
        }
        Some(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consecutive_ones_table() {
        let d = DistortionSpec::consecutive_ones();
        // (x_{i-1}, x_i) = (1, 1): only y = 1 is free
        assert_eq!(d.rho(&[1, 1], &[0, 0]), 1.0);
        assert_eq!(d.rho(&[1, 1], &[0, 1]), 0.0);
        assert_eq!(d.rho(&[0, 1], &[0, 0]), 0.0);
        assert_eq!(d.rho(&[1, 0], &[1, 1]), 1.0);
        // stage 0 pads x_{-1} = 0
        assert_eq!(d.rho(&[1], &[0]), 0.0);
        assert_eq!(d.rho(&[1], &[1]), 1.0);
        assert_eq!(d.best_symbol(3), Some(1));
        assert_eq!(d.best_symbol(1), Some(0));
    }

    #[test]
    fn recon_window_indexing() {
        // cost 1 whenever y_i differs from y_{i-1}
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let d = DistortionSpec::windowed(2, 2, 0, 1, rows).unwrap();
        assert_eq!(d.rho(&[0, 1], &[1, 1]), 0.0);
        assert_eq!(d.rho(&[0, 1], &[1, 0]), 1.0);
        assert_eq!(d.rho(&[1], &[1]), 1.0);
    }

    #[test]
    fn full_history_lookup() {
        let stage0 = vec![0.0, 1.0, 1.0, 0.0];
        let mut stage1 = vec![0.0; 16];
        stage1[0b10 * 4 + 0b01] = 2.5;
        let d = DistortionSpec::full_history(2, 2, vec![stage0, stage1]).unwrap();
        assert_eq!(d.rho(&[1], &[0]), 1.0);
        assert_eq!(d.rho(&[1, 0], &[0, 1]), 2.5);
        assert_eq!(d.max_stage(), Some(1));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DistortionSpec::windowed(2, 2, 1, 0, vec![vec![0.0, 1.0]; 3]).is_err());
        assert!(DistortionSpec::windowed(2, 2, 0, 0, vec![vec![0.0, -1.0]; 2]).is_err());
        assert!(DistortionSpec::full_history(2, 2, vec![vec![0.0; 3]]).is_err());
    }
}
