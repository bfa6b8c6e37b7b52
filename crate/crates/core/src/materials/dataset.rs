use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde_json::Value;

use super::record::MaterialRecord;
use super::{exact_name_key, DatasetError};

/// A record that failed validation during load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordViolation {
    /// Zero-based position in the source array.
    pub index: usize,
    pub id: Option<u64>,
    pub name: Option<String>,
    pub reason: String,
}

impl std::fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "record #{}", self.index)?;
        if let Some(id) = self.id {
            write!(f, " (id {id}")?;
            if let Some(name) = &self.name {
                write!(f, ", {name:?}")?;
            }
            write!(f, ")")?;
        }
        write!(f, ": {}", self.reason)
    }
}

/// Result of a successful load: the usable dataset plus any records that
/// were rejected on the way in.
#[derive(Debug, Clone)]
pub struct DatasetLoad {
    pub dataset: MaterialDataset,
    pub rejected: Vec<RecordViolation>,
}

/// Validated, immutable materials dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDataset {
    records: Vec<MaterialRecord>,
    by_id: HashMap<u64, usize>,
    name_index: BTreeMap<String, u64>,
    source_label: String,
}

impl MaterialDataset {
    /// Build a dataset from already-parsed records, applying the same
    /// validation as [`load_dataset`].
    pub fn from_records(
        records: Vec<MaterialRecord>,
        source_label: impl Into<String>,
    ) -> Result<DatasetLoad, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        check_duplicate_ids(records.iter().enumerate().map(|(i, r)| (i, r.id, Some(r.material_name.clone()))))?;
        let mut rejected = Vec::new();
        let mut valid = Vec::with_capacity(records.len());
        for (index, record) in records.into_iter().enumerate() {
            let problems = record.violations();
            if problems.is_empty() {
                valid.push((index, record));
            } else {
                rejected.push(RecordViolation {
                    index,
                    id: Some(record.id),
                    name: Some(record.material_name.clone()),
                    reason: problems.join("; "),
                });
            }
        }
        Self::index(valid, rejected, source_label.into())
    }

    /// Index records that already passed the per-record checks. Records
    /// whose normalized name collides with an earlier one are rejected.
    fn index(
        valid: Vec<(usize, MaterialRecord)>,
        mut rejected: Vec<RecordViolation>,
        source_label: String,
    ) -> Result<DatasetLoad, DatasetError> {
        let mut kept = Vec::with_capacity(valid.len());
        let mut name_index = BTreeMap::new();
        for (index, record) in valid {
            let key = exact_name_key(&record.material_name);
            if let Some(existing) = name_index.get(&key) {
                rejected.push(RecordViolation {
                    index,
                    id: Some(record.id),
                    name: Some(record.material_name.clone()),
                    reason: format!("material_name duplicates id {existing}"),
                });
                continue;
            }
            name_index.insert(key, record.id);
            kept.push(record);
        }
        if kept.is_empty() {
            return Err(DatasetError::NoValidRecords { rejected: rejected.len() });
        }
        rejected.sort_by_key(|r| r.index);
        let by_id = kept.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        Ok(DatasetLoad {
            dataset: MaterialDataset { records: kept, by_id, name_index, source_label },
            rejected,
        })
    }

    pub fn records(&self) -> &[MaterialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn get(&self, id: u64) -> Option<&MaterialRecord> {
        self.by_id.get(&id).map(|&i| &self.records[i])
    }

    /// Exact lookup on the normalized (case-folded, whitespace-collapsed)
    /// material name. Unit parentheticals are significant here.
    pub fn id_by_name(&self, name: &str) -> Option<u64> {
        self.name_index.get(&exact_name_key(name)).copied()
    }

    pub fn name_index(&self) -> &BTreeMap<String, u64> {
        &self.name_index
    }

    /// Serialize back to the JSON array format accepted by [`load_dataset`].
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(&self.records)
    }
}

/// Parse and validate a JSON array of material records.
pub fn load_dataset<R: Read>(mut source: R, source_label: &str) -> Result<DatasetLoad, DatasetError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let (valid, rejected) = parse_records(&bytes)?;
    MaterialDataset::index(valid, rejected, source_label.to_string())
}

/// Run every check `load_dataset` performs and return one line per problem.
/// An empty result means the file is clean.
pub fn validate_dataset(bytes: &[u8]) -> Vec<String> {
    let (valid, rejected) = match parse_records(bytes) {
        Ok(parsed) => parsed,
        Err(e) => return vec![e.to_string()],
    };
    match MaterialDataset::index(valid, rejected, String::new()) {
        Ok(load) => load.rejected.iter().map(ToString::to_string).collect(),
        Err(e) => vec![e.to_string()],
    }
}

/// Split the raw array into records that deserialized cleanly and
/// rejections for those that did not, keyed by source-array position.
fn parse_records(bytes: &[u8]) -> Result<(Vec<(usize, MaterialRecord)>, Vec<RecordViolation>), DatasetError> {
    let values: Vec<Value> = serde_json::from_slice(bytes).map_err(|e| DatasetError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if values.is_empty() {
        return Err(DatasetError::Empty);
    }
    check_duplicate_ids(values.iter().enumerate().filter_map(|(i, v)| {
        let id = v.get("id")?.as_u64()?;
        let name = v.get("material_name").and_then(Value::as_str).map(str::to_string);
        Some((i, id, name))
    }))?;

    let mut records = Vec::with_capacity(values.len());
    let mut rejected = Vec::new();
    for (index, value) in values.into_iter().enumerate() {
        let id = value.get("id").and_then(Value::as_u64);
        let name = value.get("material_name").and_then(Value::as_str).map(str::to_string);
        match serde_json::from_value::<MaterialRecord>(value) {
            Ok(record) => {
                let problems = record.violations();
                if problems.is_empty() {
                    records.push((index, record));
                } else {
                    rejected.push(RecordViolation { index, id, name, reason: problems.join("; ") });
                }
            }
            Err(e) => rejected.push(RecordViolation { index, id, name, reason: e.to_string() }),
        }
    }
    Ok((records, rejected))
}

fn check_duplicate_ids(
    entries: impl Iterator<Item = (usize, u64, Option<String>)>,
) -> Result<(), DatasetError> {
    let mut seen: HashMap<u64, (usize, Option<String>)> = HashMap::new();
    for (index, id, name) in entries {
        if let Some((first_index, first_name)) = seen.get(&id) {
            return Err(DatasetError::DuplicateId {
                id,
                first_index: *first_index,
                first_name: first_name.clone().unwrap_or_default(),
                second_index: index,
                second_name: name.unwrap_or_default(),
            });
        }
        seen.insert(id, (index, name));
    }
    Ok(())
}

/// Convert serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}
