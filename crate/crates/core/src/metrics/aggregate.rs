use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Catalog, Region};

/// Scores of one class on one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub term_id: String,
    pub dataset_id: String,
    pub scan_id: String,
    pub dsc: f64,
    pub nsd: f64,
}

/// Mean over the records of one class within one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub term_id: String,
    pub dataset_id: String,
    pub count: usize,
    pub dsc: f64,
    pub nsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub term_id: String,
    pub region: Region,
    pub datasets: usize,
    pub records: usize,
    pub dsc: f64,
    pub nsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub name: String,
    pub classes: usize,
    pub records: usize,
    pub dsc: f64,
    pub nsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub schema_version: u32,
    pub cells: Vec<CellMean>,
    pub classes: Vec<ClassRow>,
    pub regions: Vec<GroupRow>,
    pub datasets: Vec<GroupRow>,
    pub all: GroupRow,
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Macro-averaged class, region and dataset views of per-scan scores.
///
/// A class seen in several datasets is averaged within each dataset first,
/// then across datasets. Region and dataset rows average class values, and
/// the "All" row averages every class.
pub fn aggregate(records: &[MetricsRecord], catalog: &Catalog) -> Result<AggregationReport> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no metric records to aggregate".into()));
    }
    let mut cells: BTreeMap<(&str, &str), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        for v in [r.dsc, r.nsd] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("score {v} of {}/{} outside [0, 1]", r.scan_id, r.term_id)));
            }
        }
        cells.entry((&r.term_id, &r.dataset_id)).or_default().push(r);
    }
    let cells: Vec<CellMean> = cells
        .into_iter()
        .map(|((t, d), rs)| CellMean {
            term_id: t.to_string(),
            dataset_id: d.to_string(),
            count: rs.len(),
            dsc: mean(rs.iter().map(|r| r.dsc)),
            nsd: mean(rs.iter().map(|r| r.nsd)),
        })
        .collect();

    let mut by_class: BTreeMap<&str, Vec<&CellMean>> = BTreeMap::new();
    let mut by_dataset: BTreeMap<&str, Vec<&CellMean>> = BTreeMap::new();
    for c in &cells {
        by_class.entry(&c.term_id).or_default().push(c);
        by_dataset.entry(&c.dataset_id).or_default().push(c);
    }
    let classes = by_class
        .into_iter()
        .map(|(t, cs)| {
            Ok(ClassRow {
                term_id: t.to_string(),
                region: catalog.region_of(t)?,
                datasets: cs.len(),
                records: cs.iter().map(|c| c.count).sum(),
                dsc: mean(cs.iter().map(|c| c.dsc)),
                nsd: mean(cs.iter().map(|c| c.nsd)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let group = |name: &str, rows: &[&ClassRow]| GroupRow {
        name: name.to_string(),
        classes: rows.len(),
        records: rows.iter().map(|c| c.records).sum(),
        dsc: mean(rows.iter().map(|c| c.dsc)),
        nsd: mean(rows.iter().map(|c| c.nsd)),
    };
    let regions = Region::ALL
        .iter()
        .filter_map(|r| {
            let rows: Vec<&ClassRow> = classes.iter().filter(|c| c.region == *r).collect();
            (!rows.is_empty()).then(|| group(r.short(), &rows))
        })
        .collect();
    let all = group("All", &classes.iter().collect::<Vec<_>>());
    let datasets = by_dataset
        .into_iter()
        .map(|(d, cs)| GroupRow {
            name: d.to_string(),
            classes: cs.len(),
            records: cs.iter().map(|c| c.count).sum(),
            dsc: mean(cs.iter().map(|c| c.dsc)),
            nsd: mean(cs.iter().map(|c| c.nsd)),
        })
        .collect();

    Ok(AggregationReport {
        schema_version: crate::SCHEMA_VERSION,
        cells,
        classes,
        regions,
        datasets,
        all,
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

impl AggregationReport {
    /// Record-weighted means recovered from the cell table.
    pub fn grand_mean(&self) -> (f64, f64) {
        let n: usize = self.cells.iter().map(|c| c.count).sum();
        let w = |f: fn(&CellMean) -> f64| self.cells.iter().map(|c| c.count as f64 * f(c)).sum::<f64>() / n as f64;
        (w(|c| c.dsc), w(|c| c.nsd))
    }

    pub fn region(&self, r: Region) -> Option<&GroupRow> {
        self.regions.iter().find(|g| g.name == r.short())
    }

    /// Region table: one row per metric, one column per region plus "All",
    /// scores in percent. Regions without classes are left blank.
    pub fn region_csv(&self) -> String {
        let mut s = String::from("metric");
        for r in Region::ALL {
            write!(s, ",{}", r.short()).unwrap();
        }
        s.push_str(",All\n");
        for (name, f) in [("DSC", (|g: &GroupRow| g.dsc) as fn(&GroupRow) -> f64), ("NSD", |g| g.nsd)] {
            s.push_str(name);
            for r in Region::ALL {
                s.push(',');
                if let Some(g) = self.region(r) {
                    s.push_str(&pct(f(g)));
                }
            }
            writeln!(s, ",{}", pct(f(&self.all))).unwrap();
        }
        s
    }

    pub fn class_csv(&self) -> String {
        let mut s = String::from("term_id,region,datasets,records,DSC,NSD\n");
        for c in &self.classes {
            writeln!(s, "{},{},{},{},{},{}", c.term_id, c.region.short(), c.datasets, c.records, pct(c.dsc), pct(c.nsd)).unwrap();
        }
        s
    }

    pub fn dataset_csv(&self) -> String {
        let mut s = String::from("dataset_id,classes,records,DSC,NSD\n");
        for d in &self.datasets {
            writeln!(s, "{},{},{},{},{}", d.name, d.classes, d.records, pct(d.dsc), pct(d.nsd)).unwrap();
        }
        s
    }

    /// Writes `report.json`, `report.csv`, `classes.csv` and `datasets.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::labels::write_json(&dir.join("report.json"), self)?;
        for (name, body) in [("report.csv", self.region_csv()), ("classes.csv", self.class_csv()), ("datasets.csv", self.dataset_csv())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::labels::read_json(path.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Terminology;
    use crate::volume::Modality;

    fn rec(t: &str, d: &str, s: &str, v: f64) -> MetricsRecord {
        MetricsRecord {
            term_id: t.into(),
            dataset_id: d.into(),
            scan_id: s.into(),
            dsc: v,
            nsd: v,
        }
    }

    fn catalog() -> Catalog {
        Catalog::new(
            "t",
            ["liver", "spleen", "liver tumor", "heart"]
                .iter()
                .map(|n| Terminology::new(n, Modality::CT))
                .collect(),
        )
    }

    #[test]
    fn macro_average_over_datasets() {
        let records = [
            rec("liver_ct", "a", "a1", 0.9),
            rec("liver_ct", "a", "a2", 0.7),
            rec("liver_ct", "b", "b1", 0.6),
        ];
        let r = aggregate(&records, &catalog()).unwrap();
        assert_eq!(r.classes[0].dsc, 0.7);
        assert_eq!(r.classes[0].records, 3);
        let (g, _) = r.grand_mean();
        assert!((g - (0.9 + 0.7 + 0.6) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn region_is_mean_of_its_classes() {
        let records = [rec("liver_ct", "a", "1", 0.7), rec("spleen_ct", "a", "1", 0.9), rec("liver_tumor_ct", "a", "1", 0.2)];
        let r = aggregate(&records, &catalog()).unwrap();
        assert!((r.region(Region::Abdomen).unwrap().dsc - 0.8).abs() < 1e-15);
        assert_eq!(r.region(Region::Lesion).unwrap().dsc, 0.2);
        assert!((r.all.dsc - 0.6).abs() < 1e-15);
        assert!(r.region_csv().starts_with("metric,Brain,H&N,UL,Thorax,Spine,Abdomen,LL,Pelvis,WB,Lesion,All\nDSC,,,,,,80.00,,,,20.00,60.00\n"));
    }

    #[test]
    fn single_record_shows_in_every_view() {
        let r = aggregate(&[rec("heart_ct", "d", "s", 0.42)], &catalog()).unwrap();
        assert_eq!(r.classes[0].dsc, 0.42);
        assert_eq!(r.regions[0].dsc, 0.42);
        assert_eq!(r.datasets[0].dsc, 0.42);
        assert_eq!(r.all.dsc, 0.42);
    }

    #[test]
    fn unknown_term_is_rejected() {
        let e = aggregate(&[rec("brain_ct", "d", "s", 0.5)], &catalog()).unwrap_err();
        assert!(matches!(e, Error::UnknownTerminology(_)));
        assert!(aggregate(&[rec("heart_ct", "d", "s", 1.5)], &catalog()).is_err());
    }
}
