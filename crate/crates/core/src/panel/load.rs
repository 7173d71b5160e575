use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{bin_counts_to_levels, ActivityCutoffs, BinningMode, CovariateTable, DataError, PanelDataset};
use crate::network::Adjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorValues {
    /// `value` is already a level in `[1, L]`.
    #[default]
    Levels,
    /// `value` is a raw count, discretized on load.
    Counts,
}

/// Key/value dataset configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_levels: u32,
    #[serde(default)]
    pub behavior_values: BehaviorValues,
    #[serde(default)]
    pub binning: BinningMode,
    #[serde(default = "default_lower")]
    pub lower_percentile: f64,
    #[serde(default = "default_upper")]
    pub upper_percentile: f64,
}

fn default_lower() -> f64 {
    0.10
}

fn default_upper() -> f64 {
    0.90
}

impl DataConfig {
    pub fn levels(n_levels: u32) -> Self {
        Self {
            n_levels,
            behavior_values: BehaviorValues::Levels,
            binning: BinningMode::Pooled,
            lower_percentile: default_lower(),
            upper_percentile: default_upper(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, DataError> {
        let cfg: Self = toml::from_str(s).map_err(|e| DataError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.n_levels < 2 {
            return Err(DataError::Config(format!("n_levels must be >= 2, got {}", self.n_levels)));
        }
        let ok = |p: f64| p > 0.0 && p < 1.0;
        if !ok(self.lower_percentile) || !ok(self.upper_percentile) || self.lower_percentile >= self.upper_percentile {
            return Err(DataError::Config(format!(
                "percentile cutoffs must satisfy 0 < lower < upper < 1, got {} / {}",
                self.lower_percentile, self.upper_percentile
            )));
        }
        Ok(())
    }

    pub fn cutoffs(&self) -> ActivityCutoffs {
        ActivityCutoffs {
            lower: self.lower_percentile,
            upper: self.upper_percentile,
        }
    }
}

/// Paths of the three panel files.
#[derive(Debug, Clone)]
pub struct DatasetFiles {
    pub edges: PathBuf,
    pub behavior: PathBuf,
    pub covariates: PathBuf,
}

impl DatasetFiles {
    /// Standard file names inside a dataset directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.csv"),
            behavior: dir.join("behavior.csv"),
            covariates: dir.join("covariates.csv"),
        }
    }
}

struct Table {
    file: String,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path, header: &[&str]) -> Result<Self, DataError> {
        let file = path.display().to_string();
        let f = File::open(path).map_err(|source| DataError::Io {
            path: file.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
        let got = reader
            .headers()
            .map_err(|e| DataError::Parse {
                file: file.clone(),
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if got.iter().collect::<Vec<_>>() != header {
            return Err(DataError::Parse {
                file,
                line: 1,
                message: format!("expected header `{}`", header.join(",")),
            });
        }
        Ok(Self { file, reader })
    }

    /// Parsed rows with their 1-based line numbers.
    fn rows(&mut self) -> Result<Vec<(u64, Vec<i64>)>, DataError> {
        let mut out = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| DataError::Parse {
                file: self.file.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let vals = rec
                .iter()
                .map(parse_integer)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| DataError::Parse {
                    file: self.file.clone(),
                    line,
                    message: format!("non-integer field in `{}`", rec.iter().collect::<Vec<_>>().join(",")),
                })?;
            out.push((line, vals));
        }
        Ok(out)
    }
}

fn parse_integer(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        let f = s.parse::<f64>().ok()?;
        (f.is_finite() && f.fract() == 0.0).then_some(f as i64)
    })
}

fn actor_id(file: &str, line: u64, raw: i64, n: usize) -> Result<usize, DataError> {
    if raw < 0 || raw as usize >= n {
        return Err(DataError::UnknownActor {
            file: file.to_string(),
            line,
            actor: raw.max(0) as usize,
        });
    }
    Ok(raw as usize)
}

fn wave_index(file: &str, line: u64, raw: i64, n_waves: usize) -> Result<usize, DataError> {
    if raw < 1 || raw as usize > n_waves {
        return Err(DataError::Parse {
            file: file.to_string(),
            line,
            message: format!("wave {raw} outside 1..={n_waves}"),
        });
    }
    Ok(raw as usize - 1)
}

fn load_covariates(path: &Path) -> Result<CovariateTable, DataError> {
    let mut t = Table::open(path, &["actor", "gender", "age", "tenure_days"])?;
    let rows = t.rows()?;
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut table = CovariateTable::zeros(n);
    for (line, r) in rows {
        let i = actor_id(&t.file, line, r[0], n)?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(DataError::Parse {
                file: t.file.clone(),
                line,
                message: format!("duplicate covariate row for actor {i}"),
            });
        }
        table.gender[i] = r[1];
        table.age[i] = r[2];
        table.tenure_days[i] = r[3];
    }
    Ok(table)
}

/// Reads and validates a panel. The actor count comes from the covariate
/// file (one row per actor, ids dense in `[0, N)`); the wave count from the
/// behavior file.
pub fn load_dataset(files: &DatasetFiles, config: &DataConfig) -> Result<PanelDataset, DataError> {
    config.validate()?;
    let covariates = load_covariates(&files.covariates)?;
    let n = covariates.len();
    if n == 0 {
        return Err(DataError::Invalid("covariate file lists no actors".into()));
    }

    let mut bt = Table::open(&files.behavior, &["wave", "actor", "value"])?;
    let brows = bt.rows()?;
    let n_waves = brows.iter().map(|(_, r)| r[0]).max().unwrap_or(0).max(0) as usize;
    if n_waves < 2 {
        return Err(DataError::Invalid(format!("behavior file covers {n_waves} wave(s); need >= 2")));
    }
    let mut values: Vec<Vec<Option<u64>>> = vec![vec![None; n]; n_waves];
    for (line, r) in brows {
        let w = wave_index(&bt.file, line, r[0], n_waves)?;
        let i = actor_id(&bt.file, line, r[1], n)?;
        if r[2] < 0 {
            return Err(DataError::Parse {
                file: bt.file.clone(),
                line,
                message: format!("negative behavior value {}", r[2]),
            });
        }
        if values[w][i].replace(r[2] as u64).is_some() {
            return Err(DataError::DuplicateBehavior { wave: w + 1, actor: i });
        }
    }
    let mut raw = Vec::with_capacity(n_waves);
    for (w, wave) in values.into_iter().enumerate() {
        let row = wave
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(DataError::MissingBehavior { wave: w + 1, actor: i }))
            .collect::<Result<Vec<_>, _>>()?;
        raw.push(row);
    }

    let mut et = Table::open(&files.edges, &["wave", "src", "dst"])?;
    let mut edge_sets: Vec<BTreeMap<(usize, usize), u64>> = vec![BTreeMap::new(); n_waves];
    for (line, r) in et.rows()? {
        let w = wave_index(&et.file, line, r[0], n_waves)?;
        let a = actor_id(&et.file, line, r[1], n)?;
        let b = actor_id(&et.file, line, r[2], n)?;
        if a == b {
            return Err(DataError::SelfLoop { wave: w + 1, actor: a });
        }
        let key = (a.min(b), a.max(b));
        if edge_sets[w].insert(key, line).is_some() {
            return Err(DataError::DuplicateEdge {
                wave: w + 1,
                src: key.0,
                dst: key.1,
            });
        }
    }
    let networks: Vec<Adjacency> = edge_sets
        .iter()
        .map(|set| Adjacency::from_edges(n, set.keys().copied()))
        .collect();

    let dataset = match config.behavior_values {
        BehaviorValues::Levels => {
            let mut levels = Vec::with_capacity(n_waves);
            for (w, wave) in raw.iter().enumerate() {
                let mut row = Vec::with_capacity(n);
                for (i, &v) in wave.iter().enumerate() {
                    if v < 1 || v > config.n_levels as u64 {
                        return Err(DataError::LevelOutOfRange {
                            wave: w + 1,
                            actor: i,
                            value: v,
                            n_levels: config.n_levels,
                        });
                    }
                    row.push(v as u32);
                }
                levels.push(row);
            }
            PanelDataset::new(networks, levels, config.n_levels, covariates)?
        }
        BehaviorValues::Counts => {
            let binning = bin_counts_to_levels(&raw, config.n_levels, config.binning)?;
            PanelDataset::new(networks, binning.levels.clone(), config.n_levels, covariates)?
                .with_raw_counts(raw, Some(binning))
        }
    };
    Ok(dataset.with_cutoffs(config.cutoffs()))
}

/// CSV text of the three dataset files, with behavior written as levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetText {
    pub edges: String,
    pub behavior: String,
    pub covariates: String,
}

fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = i64>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.into_iter().map(|v| v.to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// Renders a panel in the format [`load_dataset`] reads: every tie is listed
/// at every wave where it is present.
pub fn dataset_text(dataset: &PanelDataset) -> DatasetText {
    let edges = csv_text(
        &["wave", "src", "dst"],
        dataset.networks().iter().enumerate().flat_map(|(w, net)| {
            net.edges()
                .map(move |(i, j)| [w as i64 + 1, i as i64, j as i64])
                .collect::<Vec<_>>()
        }),
    );
    let behavior = csv_text(
        &["wave", "actor", "value"],
        dataset.behaviors().iter().enumerate().flat_map(|(w, levels)| {
            levels
                .iter()
                .enumerate()
                .map(move |(i, &p)| [w as i64 + 1, i as i64, p as i64])
        }),
    );
    let c = dataset.covariates();
    let covariates = csv_text(
        &["actor", "gender", "age", "tenure_days"],
        (0..c.len()).map(|i| [i as i64, c.gender[i], c.age[i], c.tenure_days[i]]),
    );
    DatasetText {
        edges,
        behavior,
        covariates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    struct Fixture {
        _dir: tempfile::TempDir,
        files: DatasetFiles,
    }

    fn fixture(edges: &str, behavior: &str, covariates: &str) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let files = DatasetFiles::in_dir(dir.path());
        for (path, body) in [(&files.edges, edges), (&files.behavior, behavior), (&files.covariates, covariates)] {
            let mut f = File::create(path).unwrap();
            f.write_all(body.as_bytes()).unwrap();
        }
        Fixture { _dir: dir, files }
    }

    const COVS: &str = "actor,gender,age,tenure_days\n0,1,20,300\n1,0,21,400\n2,1,19,350\n";
    const BEH: &str = "wave,actor,value\n1,0,1\n1,1,2\n1,2,1\n2,0,2\n2,1,2\n2,2,1\n";

    #[test]
    fn minimal_panel() {
        let fx = fixture("wave,src,dst\n1,1,2\n2,1,2\n2,0,1\n", BEH, COVS);
        let d = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap();
        assert_eq!(d.n_actors(), 3);
        assert_eq!(d.n_waves(), 2);
        let ties: Vec<_> = d.networks().iter().map(|a| a.tie_count()).collect();
        assert_eq!(ties, vec![1, 2]);
        assert_eq!(d.covariates().age, vec![20, 21, 19]);
    }

    #[test]
    fn self_loop() {
        let fx = fixture("wave,src,dst\n1,2,2\n", BEH, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
    }

    #[test]
    fn dissolution() {
        let fx = fixture("wave,src,dst\n1,0,1\n", BEH, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(err.to_string().contains("tie dissolution"), "{err}");
    }

    #[test]
    fn duplicate_edge_either_orientation() {
        let fx = fixture("wave,src,dst\n1,0,1\n1,1,0\n2,0,1\n", BEH, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(matches!(err, DataError::DuplicateEdge { wave: 1, src: 0, dst: 1 }), "{err}");
    }

    #[test]
    fn unknown_actor_names_the_line() {
        let fx = fixture("wave,src,dst\n1,0,7\n", BEH, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(matches!(err, DataError::UnknownActor { actor: 7, line: 2, .. }), "{err}");
    }

    #[test]
    fn level_out_of_range() {
        let beh = "wave,actor,value\n1,0,1\n1,1,3\n1,2,1\n2,0,2\n2,1,2\n2,2,1\n";
        let fx = fixture("wave,src,dst\n", beh, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(matches!(err, DataError::LevelOutOfRange { wave: 1, actor: 1, value: 3, .. }));
    }

    #[test]
    fn missing_behavior() {
        let beh = "wave,actor,value\n1,0,1\n1,1,1\n1,2,1\n2,0,2\n2,1,2\n";
        let fx = fixture("wave,src,dst\n", beh, COVS);
        let err = load_dataset(&fx.files, &DataConfig::levels(2)).unwrap_err();
        assert!(matches!(err, DataError::MissingBehavior { wave: 2, actor: 2 }));
    }

    #[test]
    fn counts_are_binned() {
        let beh = "wave,actor,value\n1,0,0\n1,1,10\n1,2,20\n2,0,30\n2,1,5\n2,2,40\n";
        let fx = fixture("wave,src,dst\n", beh, COVS);
        let cfg = DataConfig::from_toml_str("n_levels = 2\nbehavior_values = \"counts\"\n").unwrap();
        let d = load_dataset(&fx.files, &cfg).unwrap();
        assert_eq!(d.behavior(0), &[1, 1, 2]);
        assert_eq!(d.behavior(1), &[2, 1, 2]);
        assert_eq!(d.raw_counts().unwrap()[1], vec![30, 5, 40]);
        assert_eq!(d.binning().unwrap().breakpoints, vec![vec![10]]);
    }

    #[test]
    fn config_validation() {
        assert!(DataConfig::from_toml_str("n_levels = 1").is_err());
        assert!(DataConfig::from_toml_str("n_levels = 4\nlower_percentile = 0.9\nupper_percentile = 0.1").is_err());
        assert!(DataConfig::from_toml_str("n_levels = 4\nbogus = 1").is_err());
        let c = DataConfig::from_toml_str("n_levels = 4\nbinning = \"per_wave\"").unwrap();
        assert_eq!(c.binning, BinningMode::PerWave);
        assert_eq!(DataConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn text_round_trip() {
        let nets = vec![
            Adjacency::from_edges(4, [(0, 1)]),
            Adjacency::from_edges(4, [(0, 1), (2, 3)]),
        ];
        let covs = CovariateTable {
            gender: vec![1, 2, 1, 2],
            age: vec![19, 20, 21, 22],
            tenure_days: vec![10, 20, 30, 40],
        };
        let d = PanelDataset::new(nets, vec![vec![1, 2, 3, 1], vec![2, 2, 3, 1]], 3, covs).unwrap();
        let text = dataset_text(&d);
        let dir = tempfile::tempdir().unwrap();
        let files = DatasetFiles::in_dir(dir.path());
        std::fs::write(&files.edges, &text.edges).unwrap();
        std::fs::write(&files.behavior, &text.behavior).unwrap();
        std::fs::write(&files.covariates, &text.covariates).unwrap();
        let back = load_dataset(&files, &DataConfig::levels(3)).unwrap();
        assert_eq!(back.networks(), d.networks());
        assert_eq!(back.behaviors(), d.behaviors());
        assert_eq!(back.covariates(), d.covariates());
    }
}
