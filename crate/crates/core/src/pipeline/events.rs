use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ground-truth state of the structure when an event was recorded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Healthy,
    /// Named damage class, e.g. `mild` or `severe`.
    Damage(String),
}

impl Label {
    pub fn is_damage(&self) -> bool {
        matches!(self, Label::Damage(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Healthy => f.write_str("healthy"),
            Label::Damage(c) => f.write_str(c),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.contains([',', '\n', '"']) {
            return Err(Error::Parse(format!("invalid label {s:?}")));
        }
        Ok(if s.eq_ignore_ascii_case("healthy") {
            Label::Healthy
        } else {
            Label::Damage(s.to_string())
        })
    }
}

/// One recorded event: a time series per sensor sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub id: String,
    /// `signals[sensor][sample]`.
    pub signals: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    pub label: Label,
}

impl EventRecord {
    pub fn new(id: String, signals: Vec<Vec<f64>>, sample_rate_hz: f64, label: Label) -> Result<Self> {
        let Some(first) = signals.first() else {
            return Err(Error::input(format!("event {id} has no sensors")));
        };
        if signals.iter().any(|s| s.len() != first.len()) {
            return Err(Error::input(format!("event {id}: sensors differ in sample count")));
        }
        if first.is_empty() {
            return Err(Error::input(format!("event {id} has no samples")));
        }
        if signals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("event {id} contains non-finite samples")));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::input(format!("event {id}: sample rate must be positive")));
        }
        Ok(Self { id, signals, sample_rate_hz, label })
    }

    pub fn sensors(&self) -> usize {
        self.signals.len()
    }

    pub fn samples(&self) -> usize {
        self.signals[0].len()
    }
}

/// Write one `sensor_id,sample_index,value` CSV per event plus a
/// `manifest.csv` (`event_id,path,label,sample_rate_hz`) into `dir`.
/// Returns the manifest path.
pub fn write_events(dir: &Path, events: &[EventRecord]) -> Result<PathBuf> {
    let data = dir.join("events");
    fs::create_dir_all(&data)?;
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = csv::Writer::from_path(&manifest_path)?;
    manifest.write_record(["event_id", "path", "label", "sample_rate_hz"])?;
    for e in events {
        let rel = format!("events/{}.csv", e.id);
        let mut w = csv::Writer::from_path(dir.join(&rel))?;
        w.write_record(["sensor_id", "sample_index", "value"])?;
        for (s, sig) in e.signals.iter().enumerate() {
            for (i, v) in sig.iter().enumerate() {
                w.write_record(&[s.to_string(), i.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        manifest.write_record(&[e.id.clone(), rel, e.label.to_string(), e.sample_rate_hz.to_string()])?;
    }
    manifest.flush()?;
    Ok(manifest_path)
}

/// Load every event listed in a manifest. Event paths are resolved relative
/// to the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<EventRecord>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["event_id", "path", "label", "sample_rate_hz"] {
        return Err(Error::Parse(format!("unexpected manifest header {:?}", headers)));
    }
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec[0].to_string();
        let label: Label = rec[2].parse()?;
        let rate: f64 = rec[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("event {id}: bad sample rate {:?}", &rec[3])))?;
        let signals = read_event_csv(&base.join(&rec[1]))?;
        events.push(EventRecord::new(id, signals, rate, label)?);
    }
    Ok(events)
}

fn read_event_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut signals: Vec<Vec<f64>> = Vec::new();
    let bad = |what: &str, row: usize| Error::Parse(format!("{}: bad {what} on data row {row}", path.display()));
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(bad("field count", row));
        }
        let s: usize = rec[0].trim().parse().map_err(|_| bad("sensor_id", row))?;
        let i: usize = rec[1].trim().parse().map_err(|_| bad("sample_index", row))?;
        let v: f64 = rec[2].trim().parse().map_err(|_| bad("value", row))?;
        if s >= signals.len() {
            signals.resize(s + 1, Vec::new());
        }
        let sig = &mut signals[s];
        if i >= sig.len() {
            sig.resize(i + 1, f64::NAN);
        }
        sig[i] = v;
    }
    if signals.iter().flatten().any(|v| v.is_nan()) || signals.iter().any(Vec::is_empty) {
        return Err(Error::Parse(format!("{}: missing samples", path.display())));
    }
    Ok(signals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for s in ["healthy", "mild", "severe"] {
            assert_eq!(s.parse::<Label>().unwrap().to_string(), s);
        }
        assert_eq!("Healthy".parse::<Label>().unwrap(), Label::Healthy);
        assert!("".parse::<Label>().is_err());
    }

    #[test]
    fn rejects_ragged_sensors() {
        let r = EventRecord::new("e".into(), vec![vec![1.0, 2.0], vec![1.0]], 10.0, Label::Healthy);
        assert!(r.is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![
            EventRecord::new("e0".into(), vec![vec![0.5, -1.25, 3.0], vec![1.0, 2.0, 0.1]], 600.0, Label::Healthy)
                .unwrap(),
            EventRecord::new("e1".into(), vec![vec![1e-300, 2.0, 7.0], vec![0.0, 0.0, 1.0]], 600.0, "mild".parse().unwrap())
                .unwrap(),
        ];
        let path = write_events(dir.path(), &events).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), events);
    }
}
