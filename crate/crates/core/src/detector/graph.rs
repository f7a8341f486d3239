//! Neighborhood structure of the detection factor graph.
//!
//! Under the twisted-cyclic-shift channel, the transmitted symbol at grid
//! position `(k, l)` shows up in exactly `P` received samples, one per path:
//! path `i` carries it to `([k + lv_i]_N, [l + lt_i]_M)`. Conversely, the
//! received sample observing `(k, l)` through path `i` also contains the
//! `P - 1` symbols the *other* paths deposit there, at positions
//! `([k + lv_i - lv_j]_N, [l + lt_i - lt_j]_M)`.
//!
//! All positions are affine in `(k, l)`, so the index stores only the
//! per-path shift table and the per-pair relative shifts; concrete positions
//! are computed on demand.

use num_complex::Complex64;

use crate::channel::{wrap, ChannelRealization};

/// One interfering symbol slot at an observation: which path deposits it and
/// the relative grid shift from the observed symbol's position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfererSlot {
    /// Index of the interfering path.
    pub path: usize,
    /// Doppler offset `lv_i - lv_j`.
    pub d_doppler: isize,
    /// Delay offset `lt_i - lt_j`.
    pub d_delay: isize,
}

/// Precomputed shift tables and effective gains for a channel realization.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    n: usize,
    m: usize,
    shifts: Vec<(isize, usize)>,
    eff_gains: Vec<Complex64>,
    slots: Vec<Vec<InterfererSlot>>,
}

impl NeighborIndex {
    pub fn new(ch: &ChannelRealization) -> Self {
        let p = ch.num_paths();
        let shifts: Vec<(isize, usize)> = ch
            .paths
            .iter()
            .map(|path| (path.doppler_idx, path.delay_idx))
            .collect();
        let eff_gains = ch
            .paths
            .iter()
            .map(|path| path.effective_gain(ch.n_doppler, ch.m_delay))
            .collect();
        let slots = (0..p)
            .map(|i| {
                (0..p)
                    .filter(|&j| j != i)
                    .map(|j| InterfererSlot {
                        path: j,
                        d_doppler: shifts[i].0 - shifts[j].0,
                        d_delay: shifts[i].1 as isize - shifts[j].1 as isize,
                    })
                    .collect()
            })
            .collect();
        Self {
            n: ch.n_doppler,
            m: ch.m_delay,
            shifts,
            eff_gains,
            slots,
        }
    }

    pub fn num_paths(&self) -> usize {
        self.shifts.len()
    }

    pub fn n_doppler(&self) -> usize {
        self.n
    }

    pub fn m_delay(&self) -> usize {
        self.m
    }

    /// Gain of path `i` with the delay-Doppler coupling phase folded in.
    pub fn eff_gain(&self, i: usize) -> Complex64 {
        self.eff_gains[i]
    }

    /// Position of the received sample observing `(k, l)` through path `i`.
    pub fn obs_pos(&self, k: usize, l: usize, i: usize) -> (usize, usize) {
        let (dk, dl) = self.shifts[i];
        (
            wrap(k as isize + dk, self.n),
            wrap(l as isize + dl as isize, self.m),
        )
    }

    /// Interferer slots of the observation `(k, l, i)`, in path order.
    pub fn slots(&self, i: usize) -> &[InterfererSlot] {
        &self.slots[i]
    }

    /// Grid position of the symbol occupying `slot` at observation `(k, l, i)`.
    pub fn interferer_pos(&self, k: usize, l: usize, i: usize, slot: usize) -> (usize, usize) {
        let s = self.slots[i][slot];
        (
            wrap(k as isize + s.d_doppler, self.n),
            wrap(l as isize + s.d_delay, self.m),
        )
    }
}
