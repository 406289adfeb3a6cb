//! Finite time series and the cut / shift / Hankel operators.
//!
//! Every finite-horizon vector in this crate uses the same layout: samples in
//! time order, channels contiguous within a sample. A Hankel column is therefore
//! `(w(j), w(j+1), ..., w(j+L-1))` with each `w(t)` a block of `q` entries.
//!
//! Time indices in the public API are 1-based (`w(1)` is the first sample).

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{singular_values, RankTolerance};

/// A length-`T`, `q`-channel real time series stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    channels: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from time-major data (`data.len()` must be a positive multiple of `channels`).
    pub fn new(channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Dimension("trajectory needs at least one channel".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(channels) {
            return Err(Error::Dimension(format!(
                "{} values cannot form a nonempty {}-channel trajectory",
                data.len(),
                channels
            )));
        }
        Ok(Self { channels, data })
    }

    /// Builds a trajectory from a list of samples, one `Vec` per time step.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let q = samples
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Dimension("no samples".into()))?;
        if samples.iter().any(|s| s.len() != q) {
            return Err(Error::Dimension("ragged samples".into()));
        }
        Self::new(q, samples.concat())
    }

    /// Scalar trajectory.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn zeros(channels: usize, len: usize) -> Result<Self> {
        Self::new(channels, vec![0.0; channels * len])
    }

    /// Number of channels `q`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of samples `T`.
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw time-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sample `w(t)` for `1 <= t <= T`.
    pub fn sample(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.len(), "sample index {t} outside 1..={}", self.len());
        let q = self.channels;
        &self.data[(t - 1) * q..t * q]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    /// Keeps the listed channels (0-based), in the listed order.
    pub fn select_channels(&self, picks: &[usize]) -> Result<Self> {
        if let Some(&bad) = picks.iter().find(|&&p| p >= self.channels) {
            return Err(Error::Dimension(format!(
                "channel {bad} out of range for a {}-channel trajectory",
                self.channels
            )));
        }
        let data = self
            .samples()
            .flat_map(|s| picks.iter().map(move |&p| s[p]))
            .collect();
        Self::new(picks.len(), data)
    }

    /// Channel-wise concatenation `(a, b)` of two trajectories of equal length.
    pub fn stack(a: &Trajectory, b: &Trajectory) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "cannot stack trajectories of lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let data = a
            .samples()
            .zip(b.samples())
            .flat_map(|(x, y)| x.iter().chain(y).copied())
            .collect();
        Self::new(a.channels + b.channels, data)
    }

    /// Reads the CSV format: one row per sample, one column per channel, optional
    /// `ch1,...,chq` header. Ragged rows are rejected.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut channels = None;
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if row == 0 && is_header(&record) {
                channels = Some(record.len());
                continue;
            }
            if let Some(q) = channels {
                if record.len() != q {
                    return Err(Error::Parse(format!(
                        "row {} has {} columns, expected {q}",
                        row + 1,
                        record.len()
                    )));
                }
            }
            channels = Some(record.len());
            for field in record.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", row + 1)))?;
                data.push(v);
            }
        }
        let q = channels.ok_or_else(|| Error::Parse("empty CSV".into()))?;
        if data.is_empty() {
            return Err(Error::Parse("CSV has a header but no samples".into()));
        }
        Self::new(q, data)
    }

    /// Writes the CSV format with a `ch1,...,chq` header. Values use the shortest
    /// round-trip decimal representation, so output is byte-stable.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.channels).map(|j| format!("ch{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for s in self.samples() {
            let row: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    record
        .iter()
        .enumerate()
        .all(|(j, f)| f.eq_ignore_ascii_case(&format!("ch{}", j + 1)))
}

/// Split of a variable vector into to-be-controlled channels `w` and control channels `c`.
///
/// Indices are 0-based; [`Partition::from_one_based`] accepts the 1-based form used
/// on the command line and in model files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    total: usize,
    picks_w: Vec<usize>,
    picks_c: Vec<usize>,
}

impl Partition {
    pub fn new(total: usize, picks_w: Vec<usize>, picks_c: Vec<usize>) -> Result<Self> {
        if picks_w.is_empty() || picks_c.is_empty() {
            return Err(Error::Partition("both w and c must select at least one channel".into()));
        }
        if picks_w.len() + picks_c.len() != total {
            return Err(Error::Partition(format!(
                "{} + {} picks do not cover {total} channels",
                picks_w.len(),
                picks_c.len()
            )));
        }
        let mut seen = vec![false; total];
        for &p in picks_w.iter().chain(&picks_c) {
            if p >= total {
                return Err(Error::Partition(format!("channel {} out of range 1..={total}", p + 1)));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Partition(format!("channel {} picked twice", p + 1)));
            }
        }
        Ok(Self {
            total,
            picks_w,
            picks_c,
        })
    }

    pub fn from_one_based(total: usize, picks_w: &[usize], picks_c: &[usize]) -> Result<Self> {
        let shift = |v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&i| {
                    i.checked_sub(1)
                        .ok_or_else(|| Error::Partition("channel indices are 1-based".into()))
                })
                .collect()
        };
        Self::new(total, shift(picks_w)?, shift(picks_c)?)
    }

    /// Partition with `w` the first `q` channels and `c` the remaining `k`.
    pub fn leading(q: usize, k: usize) -> Result<Self> {
        Self::new(q + k, (0..q).collect(), (q..q + k).collect())
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of to-be-controlled channels `q`.
    pub fn q(&self) -> usize {
        self.picks_w.len()
    }

    /// Number of control channels `k`.
    pub fn k(&self) -> usize {
        self.picks_c.len()
    }

    pub fn picks_w(&self) -> &[usize] {
        &self.picks_w
    }

    pub fn picks_c(&self) -> &[usize] {
        &self.picks_c
    }

    pub fn picks_w_one_based(&self) -> Vec<usize> {
        self.picks_w.iter().map(|p| p + 1).collect()
    }

    pub fn picks_c_one_based(&self) -> Vec<usize> {
        self.picks_c.iter().map(|p| p + 1).collect()
    }

    /// Splits a full-variable trajectory into its `w` and `c` parts.
    pub fn split(&self, traj: &Trajectory) -> Result<(Trajectory, Trajectory)> {
        if traj.channels() != self.total {
            return Err(Error::Dimension(format!(
                "trajectory has {} channels, partition expects {}",
                traj.channels(),
                self.total
            )));
        }
        Ok((traj.select_channels(&self.picks_w)?, traj.select_channels(&self.picks_c)?))
    }

    /// Reorders a full-variable trajectory into `(w, c)` channel order.
    pub fn to_wc_order(&self, traj: &Trajectory) -> Result<Trajectory> {
        let (w, c) = self.split(traj)?;
        Trajectory::stack(&w, &c)
    }

    /// Row indices of the `w` channels inside a length-`horizon` stacked vector.
    pub fn w_rows(&self, horizon: usize) -> Vec<usize> {
        stacked_rows(self.total, &self.picks_w, horizon)
    }

    /// Row indices of the `c` channels inside a length-`horizon` stacked vector.
    pub fn c_rows(&self, horizon: usize) -> Vec<usize> {
        stacked_rows(self.total, &self.picks_c, horizon)
    }
}

/// Rows of a time-major stacked vector that belong to `picks`, ordered by time then pick order.
pub fn stacked_rows(channels: usize, picks: &[usize], horizon: usize) -> Vec<usize> {
    (0..horizon)
        .flat_map(|t| picks.iter().map(move |&p| t * channels + p))
        .collect()
}

/// First `horizon` samples of `w`.
pub fn cut(w: &Trajectory, horizon: usize) -> Result<Trajectory> {
    if horizon == 0 || horizon > w.len() {
        return Err(Error::Range(format!("cut length {horizon} outside 1..={}", w.len())));
    }
    Trajectory::new(w.channels(), w.as_slice()[..horizon * w.channels()].to_vec())
}

/// Samples `tau..=T` of `w`.
pub fn shift(w: &Trajectory, tau: usize) -> Result<Trajectory> {
    if tau == 0 || tau > w.len() {
        return Err(Error::Range(format!("shift {tau} outside 1..={}", w.len())));
    }
    Trajectory::new(w.channels(), w.as_slice()[(tau - 1) * w.channels()..].to_vec())
}

/// Hankel matrix of depth `depth`: `qL x (T - L + 1)`, column `j` the window starting at `w(j)`.
pub fn hankel(w: &Trajectory, depth: usize) -> Result<DMatrix<f64>> {
    let t = w.len();
    if depth == 0 || depth > t {
        return Err(Error::Range(format!("Hankel depth {depth} outside 1..={t}")));
    }
    let q = w.channels();
    let rows = q * depth;
    let cols = t - depth + 1;
    let data = w.as_slice();
    // Column j is the contiguous slice starting at sample j.
    Ok(DMatrix::from_fn(rows, cols, |i, j| data[j * q + i]))
}

/// Outcome of a generalized persistency-of-excitation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpeReport {
    pub gpe: bool,
    pub rank: usize,
    pub expected: usize,
}

/// Checks whether `rank H_L(w) = m_bound * L + n_bound` under `tol`.
pub fn is_gpe(
    w: &Trajectory,
    depth: usize,
    m_bound: usize,
    n_bound: usize,
    tol: RankTolerance,
) -> Result<GpeReport> {
    let h = hankel(w, depth)?;
    let expected = m_bound * depth + n_bound;
    if expected > h.nrows().min(h.ncols()) {
        return Err(Error::InfeasibleRank {
            requested: expected,
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let rank = tol.rank_from(&singular_values(&h), h.nrows(), h.ncols());
    Ok(GpeReport {
        gpe: rank == expected,
        rank,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64]) -> Trajectory {
        Trajectory::scalar(v).unwrap()
    }

    #[test]
    fn cut_keeps_leading_samples() {
        let w = scalar(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cut(&w, 2).unwrap(), scalar(&[1.0, 2.0]));
        assert_eq!(cut(&w, 4).unwrap(), w);
        assert!(matches!(cut(&w, 0), Err(Error::Range(_))));
        assert!(matches!(cut(&w, 5), Err(Error::Range(_))));
    }

    #[test]
    fn shift_drops_leading_samples() {
        let w = scalar(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(shift(&w, 2).unwrap(), scalar(&[2.0, 3.0, 4.0]));
        assert_eq!(shift(&w, 1).unwrap(), w);
        assert!(matches!(shift(&w, 5), Err(Error::Range(_))));
    }

    #[test]
    fn hankel_scalar() {
        let h = hankel(&scalar(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn hankel_full_depth_is_one_column() {
        let w = scalar(&[1.0, 2.0, 3.0]);
        let h = hankel(&w, 3).unwrap();
        assert_eq!(h.shape(), (3, 1));
        assert_eq!(h.column(0).as_slice(), w.as_slice());
    }

    #[test]
    fn hankel_interleaves_channels_per_sample() {
        let w = Trajectory::from_samples(&[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]]).unwrap();
        let h = hankel(&w, 2).unwrap();
        assert_eq!(h.column(0).as_slice(), &[1.0, 10.0, 2.0, 20.0]);
        assert_eq!(h.column(1).as_slice(), &[2.0, 20.0, 3.0, 30.0]);
    }

    #[test]
    fn zero_signal_is_not_gpe() {
        let w = Trajectory::zeros(1, 20).unwrap();
        let r = is_gpe(&w, 3, 1, 0, RankTolerance::default()).unwrap();
        assert!(!r.gpe);
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn gpe_rejects_infeasible_bound() {
        let w = scalar(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            is_gpe(&w, 2, 2, 0, RankTolerance::default()),
            Err(Error::InfeasibleRank { requested: 4, .. })
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(3, vec![0], vec![1, 2]).is_ok());
        assert!(matches!(Partition::new(2, vec![], vec![0, 1]), Err(Error::Partition(_))));
        assert!(matches!(Partition::new(2, vec![0], vec![0]), Err(Error::Partition(_))));
        assert!(matches!(Partition::new(3, vec![0], vec![1]), Err(Error::Partition(_))));
        assert!(matches!(Partition::from_one_based(2, &[0], &[1]), Err(Error::Partition(_))));
        let p = Partition::from_one_based(3, &[3], &[1, 2]).unwrap();
        assert_eq!(p.picks_w(), &[2]);
        assert_eq!(p.w_rows(2), vec![2, 5]);
        assert_eq!(p.c_rows(2), vec![0, 1, 3, 4]);
    }

    #[test]
    fn csv_round_trip_and_ragged_rows() {
        let w = Trajectory::from_samples(&[vec![1.5, -2.0], vec![0.1, 3.0]]).unwrap();
        let text = w.to_csv_string();
        assert!(text.starts_with("ch1,ch2\n"));
        assert_eq!(Trajectory::read_csv(text.as_bytes()).unwrap(), w);
        let headerless = Trajectory::read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(headerless.len(), 2);
        assert!(Trajectory::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("ch1,ch2\n1,2,3\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("".as_bytes()).is_err());
    }
}
