//! Traffic counters, cluster-formation events and CSV export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::protocol::{MsgKind, NodeId};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no formation events for subject `{0}`")]
    NoData(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("bin width must be at least 1 tick")]
    InvalidBin,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Primary,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormationEvent {
    pub node: NodeId,
    pub subject: u16,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CensusEntry {
    pub cluster_point: NodeId,
    pub subject: u16,
    pub topic: Option<u16>,
    pub member: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficRow {
    pub tick: u64,
    pub subject: String,
    pub msg_type: MsgKind,
    pub count: u64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    /// Subject names indexed by subject id.
    pub subjects: Vec<String>,
    /// Topic names indexed by topic id.
    pub topics: Vec<String>,
    /// Number of nodes classified into each subject.
    pub subject_sizes: Vec<u32>,
    traffic: BTreeMap<(u64, u16, MsgKind), u64>,
    pub transmissions: u64,
    pub deliveries: u64,
    pub malformed_dropped: u64,
    formation: BTreeMap<(Level, NodeId), FormationEvent>,
    pub census: Vec<CensusEntry>,
    /// `key=value` echo of the configuration that produced the log.
    pub config_echo: Vec<(String, String)>,
    pub final_tick: u64,
    /// Messages still queued when the last phase window closed.
    pub in_flight_at_schedule_end: usize,
}

impl MetricsLog {
    pub fn new(subjects: Vec<String>, topics: Vec<String>, subject_sizes: Vec<u32>) -> Self {
        Self {
            subjects,
            topics,
            subject_sizes,
            ..Self::default()
        }
    }

    pub fn record_transmission(
        &mut self,
        tick: u64,
        subject: u16,
        kind: MsgKind,
        receivers: usize,
    ) {
        *self.traffic.entry((tick, subject, kind)).or_default() += 1;
        self.transmissions += 1;
        self.deliveries += receivers as u64;
    }

    /// Records a cluster entry. Returns false if the node already entered
    /// at this level.
    pub fn record_entry(&mut self, level: Level, node: NodeId, subject: u16, tick: u64) -> bool {
        if self.formation.contains_key(&(level, node)) {
            return false;
        }
        self.formation.insert(
            (level, node),
            FormationEvent {
                node,
                subject,
                tick,
            },
        );
        true
    }

    pub fn entry(&self, level: Level, node: NodeId) -> Option<&FormationEvent> {
        self.formation.get(&(level, node))
    }

    pub fn entries(&self, level: Level) -> impl Iterator<Item = &FormationEvent> {
        self.formation
            .iter()
            .filter(move |((l, _), _)| *l == level)
            .map(|(_, e)| e)
    }

    pub fn subject_index(&self, subject: &str) -> Result<u16, MetricsError> {
        self.subjects
            .iter()
            .position(|s| s == subject)
            .map(|i| i as u16)
            .ok_or_else(|| MetricsError::UnknownSubject(subject.to_string()))
    }

    /// Ticks between the first and the last node of `subject` entering
    /// its primary cluster.
    pub fn time_to_form(&self, subject: &str) -> Result<u64, MetricsError> {
        let idx = self.subject_index(subject)?;
        let ticks = self
            .entries(Level::Primary)
            .filter(|e| e.subject == idx)
            .map(|e| e.tick);
        let (lo, hi) = ticks.fold((u64::MAX, 0), |(lo, hi), t| (lo.min(t), hi.max(t)));
        if lo == u64::MAX {
            return Err(MetricsError::NoData(subject.to_string()));
        }
        Ok(hi - lo)
    }

    /// Cluster-point traffic (density and cluster summary transmissions) of
    /// `subject`, in bins of `bin` ticks starting at tick 0. Bins run up to
    /// the end of the run so quiet tails show up as zeros.
    pub fn traffic_series(&self, subject: &str, bin: u64) -> Result<Vec<(u64, u64)>, MetricsError> {
        if bin == 0 {
            return Err(MetricsError::InvalidBin);
        }
        let idx = self.subject_index(subject)?;
        let Some(last) = self.traffic.keys().map(|k| k.0).max() else {
            return Ok(Vec::new());
        };
        let last = last.max(self.final_tick);
        let mut series: Vec<(u64, u64)> = (0..=last / bin).map(|b| (b * bin, 0)).collect();
        for (&(tick, s, kind), &count) in &self.traffic {
            if s == idx && kind.is_cluster_point_traffic() {
                series[(tick / bin) as usize].1 += count;
            }
        }
        Ok(series)
    }

    /// Total transmissions per message kind for one subject.
    pub fn traffic_by_kind(&self, subject: u16) -> BTreeMap<MsgKind, u64> {
        let mut out = BTreeMap::new();
        for (&(_, s, kind), &count) in &self.traffic {
            if s == subject {
                *out.entry(kind).or_default() += count;
            }
        }
        out
    }

    pub fn traffic_rows(&self) -> Vec<TrafficRow> {
        self.traffic
            .iter()
            .map(|(&(tick, s, kind), &count)| TrafficRow {
                tick,
                subject: self.subjects[s as usize].clone(),
                msg_type: kind,
                count,
            })
            .collect()
    }

    /// `(subject, n_nodes, time_to_form)` for every subject with nodes.
    pub fn formation_rows(&self) -> Vec<(String, u32, Option<u64>)> {
        self.subjects
            .iter()
            .zip(&self.subject_sizes)
            .filter(|(_, &n)| n > 0)
            .map(|(s, &n)| (s.clone(), n, self.time_to_form(s).ok()))
            .collect()
    }

    /// Writes `traffic.csv`, `formation.csv` and `census.csv` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
        fs::create_dir_all(dir).map_err(|source| MetricsError::Io {
            path: dir.to_path_buf(),
            source,
        })?;

        let traffic = dir.join("traffic.csv");
        write_csv(&traffic, ["tick", "subject", "msg_type", "count"], |w| {
            for row in self.traffic_rows() {
                w.write_record([
                    row.tick.to_string(),
                    row.subject,
                    row.msg_type.as_str().to_string(),
                    row.count.to_string(),
                ])?;
            }
            Ok(())
        })?;

        let formation = dir.join("formation.csv");
        write_csv(
            &formation,
            ["subject", "n_nodes", "time_to_form_ticks"],
            |w| {
                for (subject, n, time) in self.formation_rows() {
                    w.write_record([
                        subject,
                        n.to_string(),
                        time.map(|t| t.to_string()).unwrap_or_default(),
                    ])?;
                }
                Ok(())
            },
        )?;

        let census = dir.join("census.csv");
        write_csv(
            &census,
            ["cluster_point", "subject", "topic", "member"],
            |w| {
                let mut rows = self.census.clone();
                rows.sort();
                for e in rows {
                    w.write_record([
                        e.cluster_point.to_string(),
                        self.subjects[e.subject as usize].clone(),
                        e.topic
                            .map(|t| self.topics[t as usize].clone())
                            .unwrap_or_default(),
                        e.member.to_string(),
                    ])?;
                }
                Ok(())
            },
        )?;

        Ok(vec![traffic, formation, census])
    }

    /// Members of each primary cluster, keyed by cluster point.
    pub fn clusters(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut out: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for e in &self.census {
            out.entry(e.cluster_point).or_default().insert(e.member);
        }
        out
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, MetricsError> {
    let file = fs::File::create(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub(crate) fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> Result<(), csv::Error>,
) -> Result<(), MetricsError> {
    let mut w = csv_writer(path)?;
    let csv_err = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(header).map_err(csv_err)?;
    body(&mut w).map_err(csv_err)?;
    w.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a `traffic.csv` written by [`MetricsLog::export`].
pub fn read_traffic_csv(path: &Path) -> Result<Vec<TrafficRow>, MetricsError> {
    let csv_err = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| MetricsError::Format {
            path: path.to_path_buf(),
            message: format!("bad {what} in record {rec:?}"),
        };
        let field = |i: usize| rec.get(i).unwrap_or("");
        rows.push(TrafficRow {
            tick: field(0).parse().map_err(|_| bad("tick"))?,
            subject: field(1).to_string(),
            msg_type: MsgKind::parse(field(2)).ok_or_else(|| bad("msg_type"))?,
            count: field(3).parse().map_err(|_| bad("count"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log() -> MetricsLog {
        MetricsLog::new(
            vec!["alpha".into(), "beta".into(), "empty".into()],
            vec!["t0".into()],
            vec![2, 1, 0],
        )
    }

    #[test]
    fn time_to_form_cases() {
        let mut m = log();
        assert!(matches!(
            m.time_to_form("alpha"),
            Err(MetricsError::NoData(_))
        ));
        assert!(matches!(
            m.time_to_form("gamma"),
            Err(MetricsError::UnknownSubject(_))
        ));
        m.record_entry(Level::Primary, 0, 0, 10);
        assert_eq!(m.time_to_form("alpha").unwrap(), 0);
        m.record_entry(Level::Primary, 1, 0, 130);
        assert_eq!(m.time_to_form("alpha").unwrap(), 120);
        // recorded once per node and level
        assert!(!m.record_entry(Level::Primary, 1, 0, 500));
        assert!(m.record_entry(Level::Sub, 1, 0, 500));
        assert_eq!(m.time_to_form("alpha").unwrap(), 120);
    }

    #[test]
    fn empty_series() {
        let m = log();
        assert!(m.traffic_series("alpha", 60).unwrap().is_empty());
        assert!(matches!(
            m.traffic_series("alpha", 0),
            Err(MetricsError::InvalidBin)
        ));
    }

    #[test]
    fn series_bins_and_conserves() {
        let mut m = log();
        m.record_transmission(1, 0, MsgKind::Density, 3);
        m.record_transmission(59, 0, MsgKind::Density, 3);
        m.record_transmission(60, 0, MsgKind::ClusterSummary, 0);
        m.record_transmission(61, 0, MsgKind::ExpertiseRequest, 1);
        m.record_transmission(130, 1, MsgKind::Density, 1);
        m.final_tick = 200;
        let s = m.traffic_series("alpha", 60).unwrap();
        assert_eq!(s, vec![(0, 2), (60, 1), (120, 0), (180, 0)]);
        let total: u64 = ["alpha", "beta"]
            .iter()
            .map(|s| {
                m.traffic_series(s, 7)
                    .unwrap()
                    .iter()
                    .map(|b| b.1)
                    .sum::<u64>()
            })
            .sum();
        assert_eq!(total, 4);
        assert_eq!(m.transmissions, 5);
        assert_eq!(m.deliveries, 8);
    }

    #[test]
    fn export_empty_has_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = MetricsLog::default();
        m.export(dir.path()).unwrap();
        let read = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(read("traffic.csv"), "tick,subject,msg_type,count\n");
        assert_eq!(
            read("formation.csv"),
            "subject,n_nodes,time_to_form_ticks\n"
        );
        assert_eq!(read("census.csv"), "cluster_point,subject,topic,member\n");
    }

    #[test]
    fn export_rows_and_reexport_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut m = log();
        m.record_transmission(4, 1, MsgKind::Density, 2);
        m.record_entry(Level::Primary, 0, 0, 10);
        m.census.push(CensusEntry {
            cluster_point: 0,
            subject: 0,
            topic: Some(0),
            member: 0,
        });
        m.census.push(CensusEntry {
            cluster_point: 2,
            subject: 1,
            topic: None,
            member: 2,
        });
        m.export(a.path()).unwrap();
        m.export(b.path()).unwrap();
        for f in ["traffic.csv", "formation.csv", "census.csv"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
        let formation = fs::read_to_string(a.path().join("formation.csv")).unwrap();
        // two subjects have nodes; "beta" has no entries yet
        assert_eq!(
            formation,
            "subject,n_nodes,time_to_form_ticks\nalpha,2,0\nbeta,1,\n"
        );
        let census = fs::read_to_string(a.path().join("census.csv")).unwrap();
        assert_eq!(
            census,
            "cluster_point,subject,topic,member\n0,alpha,t0,0\n2,beta,,2\n"
        );
        assert_eq!(
            read_traffic_csv(&a.path().join("traffic.csv")).unwrap(),
            m.traffic_rows()
        );
    }

    #[test]
    fn export_to_unwritable_path_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = log().export(&blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
