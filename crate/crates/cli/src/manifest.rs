//! Run manifests: the resolved configuration echoed at the top of every CSV.

use std::time::{SystemTime, UNIX_EPOCH};

use otfs_core::sim::{RunOptions, SimConfig};
use sha2::{Digest, Sha256};

/// Resolved configuration, tool version and a content hash over both. The
/// hash covers everything that determines the data rows, so equal hashes
/// mean equal rows for equal seeds; the timestamp stays outside the hash
/// and is written on its own comment line.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub tool: String,
    pub entries: Vec<(String, String)>,
    pub config_hash: String,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(cfg: &SimConfig, opts: &RunOptions, modulation: &str) -> Self {
        let tool = format!("otfs-sim {}", env!("CARGO_PKG_VERSION"));
        let snr_list = cfg
            .snr_db_list
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        // Worker count is deliberately absent: results are independent of it.
        let entries: Vec<(String, String)> = [
            ("n", cfg.n.to_string()),
            ("m", cfg.m.to_string()),
            ("paths", cfg.p.to_string()),
            ("lmax", cfg.l_max.to_string()),
            ("kmax", cfg.k_max.to_string()),
            ("snr_db", snr_list),
            ("detector", cfg.detector.to_string()),
            ("l_map", cfg.l_map.to_string()),
            ("l_effective", cfg.l_effective().to_string()),
            ("iters", cfg.iters.to_string()),
            ("damping", cfg.damping.to_string()),
            ("mod", modulation.to_string()),
            ("min_frames", cfg.min_frames.to_string()),
            ("min_errors", cfg.min_bit_errors.to_string()),
            ("max_frames", cfg.max_frames.to_string()),
            ("seed", cfg.seed.to_string()),
            ("count_ops", opts.count_ops.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

        let mut hasher = Sha256::new();
        hasher.update(tool.as_bytes());
        for (k, v) in &entries {
            hasher.update(b"\n");
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
        }
        let digest = hasher.finalize();
        let config_hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();

        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool,
            entries,
            config_hash,
            timestamp_unix,
        }
    }

    /// Comment lines in file order; the timestamp is the last line so tests
    /// can exclude exactly one line from byte comparisons.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = Vec::with_capacity(self.entries.len() + 3);
        lines.push(format!("# {}", self.tool));
        lines.push(format!("# config_hash = {}", self.config_hash));
        for (k, v) in &self.entries {
            lines.push(format!("# {k} = {v}"));
        }
        lines.push(format!("# timestamp = {}", self.timestamp_unix));
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use otfs_core::sim::DetectorKind;

    fn config() -> SimConfig {
        SimConfig {
            n: 4,
            m: 4,
            p: 2,
            l_max: 1,
            k_max: 1,
            snr_db_list: vec![8.0, 10.0],
            detector: DetectorKind::Hybrid,
            l_map: 1,
            iters: 10,
            damping: 1.0,
            min_frames: 10,
            min_bit_errors: 200,
            max_frames: 1000,
            seed: 1,
        }
    }

    #[test]
    fn hash_ignores_time_but_tracks_config() {
        let cfg = config();
        let opts = RunOptions::default();
        let a = RunManifest::new(&cfg, &opts, "qpsk");
        let b = RunManifest::new(&cfg, &opts, "qpsk");
        assert_eq!(a.config_hash, b.config_hash);

        let mut changed = cfg.clone();
        changed.seed = 2;
        let c = RunManifest::new(&changed, &opts, "qpsk");
        assert_ne!(a.config_hash, c.config_hash);
    }

    #[test]
    fn timestamp_is_the_last_comment_line() {
        let manifest = RunManifest::new(&config(), &RunOptions::default(), "qpsk");
        let lines = manifest.comment_lines();
        assert!(lines.last().unwrap().starts_with("# timestamp = "));
        assert!(lines.iter().all(|l| l.starts_with('#')));
        let timestamp_lines = lines
            .iter()
            .filter(|l| l.starts_with("# timestamp"))
            .count();
        assert_eq!(timestamp_lines, 1);
    }
}
