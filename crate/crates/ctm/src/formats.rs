//! On-disk formats: JSON Lines documents, corpus directories, word2vec text
//! embeddings, reference topics, score tables, priors and theta tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use ctm_core::corpus::{Corpus, RawDocument};
use ctm_core::{EmbeddingTable, Matrix, PriorMatrix, ReferenceTopics, ScoreMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

fn fmt_row(id: &str, values: &[f64]) -> String {
    let mut line = csv_field(id);
    for v in values {
        line.push(',');
        line.push_str(&v.to_string());
    }
    line
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(path, Some(line), format!("'{field}' is not a number")))
}

// ---------------------------------------------------------------------------
// Raw documents

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelField {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct JsonlDoc {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<LabelField>,
}

/// Reads one `{"id", "text", "label"?}` object per line; `label` may be a
/// string or an array of strings. Blank lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let text = read_text(path)?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: JsonlDoc =
            serde_json::from_str(line).map_err(|e| Error::parse(path, Some(i + 1), e.to_string()))?;
        let labels = match doc.label {
            None => Vec::new(),
            Some(LabelField::One(l)) => vec![l],
            Some(LabelField::Many(ls)) => ls,
        };
        docs.push(RawDocument { id: doc.id, text: doc.text, labels });
    }
    if docs.is_empty() {
        return Err(Error::parse(path, None, "no documents"));
    }
    Ok(docs)
}

// ---------------------------------------------------------------------------
// Corpus directory

/// Writes `vocab.txt`, `docs.txt` (document ids in corpus order),
/// `counts.csv` and, for labeled corpora, `labels.csv`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut vocab = corpus.vocab().join("\n");
    vocab.push('\n');
    write_text(&dir.join("vocab.txt"), &vocab)?;
    let mut ids = corpus.doc_ids().join("\n");
    ids.push('\n');
    write_text(&dir.join("docs.txt"), &ids)?;

    let mut counts = String::from("doc_id,word_id,count\n");
    for (d, id) in corpus.doc_ids().iter().enumerate() {
        for &(w, c) in corpus.counts(d) {
            counts.push_str(&format!("{},{w},{c}\n", csv_field(id)));
        }
    }
    write_text(&dir.join("counts.csv"), &counts)?;

    let labels_path = dir.join("labels.csv");
    if let Some(labels) = corpus.labels() {
        let mut out = String::from("doc_id,label\n");
        for (d, ls) in labels.iter().enumerate() {
            for &l in ls {
                out.push_str(&format!(
                    "{},{}\n",
                    csv_field(&corpus.doc_ids()[d]),
                    csv_field(&corpus.label_names()[l])
                ));
            }
        }
        write_text(&labels_path, &out)?;
    } else if labels_path.exists() {
        fs::remove_file(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

/// Reads `doc_id,label` rows; a document may appear on several rows.
pub fn read_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv_reader(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::parse(path, line, "expected doc_id,label"));
        }
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

/// Reads a corpus directory written by [`write_corpus`].
///
/// Token sequences are rebuilt from the counts in word-id order.
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let vocab = read_lines(&dir.join("vocab.txt"))?;
    let doc_ids = read_lines(&dir.join("docs.txt"))?;
    let index: BTreeMap<&str, usize> = doc_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let counts_path = dir.join("counts.csv");
    let mut docs: Vec<Vec<usize>> = vec![Vec::new(); doc_ids.len()];
    let mut reader = csv_reader(&counts_path)?;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&counts_path, e))?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::parse(&counts_path, line, "expected doc_id,word_id,count"));
        }
        let d = *index
            .get(&record[0])
            .ok_or_else(|| Error::parse(&counts_path, line, format!("unknown document '{}'", &record[0])))?;
        let w: usize = record[1]
            .parse()
            .map_err(|_| Error::parse(&counts_path, line, format!("bad word id '{}'", &record[1])))?;
        let c: usize = record[2]
            .parse()
            .map_err(|_| Error::parse(&counts_path, line, format!("bad count '{}'", &record[2])))?;
        docs[d].extend(std::iter::repeat(w).take(c));
    }
    for doc in &mut docs {
        doc.sort_unstable();
    }

    let labels_path = dir.join("labels.csv");
    let (label_names, labels) = if labels_path.exists() {
        let rows = read_labels(&labels_path)?;
        let names: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); doc_ids.len()];
        for (id, label) in &rows {
            let d = *index
                .get(id.as_str())
                .ok_or_else(|| Error::parse(&labels_path, None, format!("unknown document '{id}'")))?;
            sets[d].insert(names.binary_search(label).expect("collected above"));
        }
        (names, Some(sets.into_iter().map(|s| s.into_iter().collect()).collect()))
    } else {
        (Vec::new(), None)
    };
    Ok(Corpus::from_parts(vocab, doc_ids, docs, label_names, labels)?)
}

// ---------------------------------------------------------------------------
// Embeddings

/// Loads word2vec text format: an optional `V L` header, then one
/// `word x1 .. xL` row per line.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let first = lines.peek().ok_or_else(|| Error::parse(path, None, "empty embedding file"))?.1;

    let mut header_count = None;
    let mut dim = None;
    let fields: Vec<&str> = first.split_whitespace().collect();
    if let [a, b] = fields[..] {
        if let (Ok(n), Ok(l)) = (a.parse::<usize>(), b.parse::<usize>()) {
            header_count = Some(n);
            dim = Some(l);
            lines.next();
        }
    }

    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-blank line");
        let values = parts.map(|f| parse_f64(path, i + 1, f)).collect::<Result<Vec<f64>>>()?;
        let l = *dim.get_or_insert(values.len());
        if values.len() != l || l == 0 {
            return Err(Error::parse(
                path,
                Some(i + 1),
                format!("expected {l} values for '{word}', found {}", values.len()),
            ));
        }
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(l)?),
        };
        t.insert(word, values).map_err(|e| Error::parse(path, Some(i + 1), e.to_string()))?;
    }
    let table = table.ok_or_else(|| Error::parse(path, None, "no embedding rows"))?;
    if let Some(n) = header_count.filter(|&n| n != table.len()) {
        log::warn!("{}: header announces {n} words, file has {}", path.display(), table.len());
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Reference topics

#[derive(Serialize, Deserialize)]
struct ReferenceFile {
    names: Vec<String>,
    vocab: Vec<String>,
    beta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub fn save_reference(reference: &ReferenceTopics, meta: Option<serde_json::Value>, path: &Path) -> Result<()> {
    let file = ReferenceFile {
        names: reference.names().to_vec(),
        vocab: reference.vocab().to_vec(),
        beta: reference.beta().row_iter().map(<[f64]>::to_vec).collect(),
        meta,
    };
    write_json(path, &file)
}

pub fn load_reference(path: &Path) -> Result<ReferenceTopics> {
    let file: ReferenceFile = read_json(path)?;
    let beta = Matrix::from_rows(&file.beta).ok_or_else(|| Error::parse(path, None, "beta rows differ in length"))?;
    ReferenceTopics::new(file.names, file.vocab, beta).map_err(|e| Error::parse(path, None, e.to_string()))
}

// ---------------------------------------------------------------------------
// Scores, priors and theta tables

/// Reads a score file aligned to `corpus` and `names`: CSV with header
/// `doc_id,<name>...`, or (for `.json`) a map from doc id to an array in
/// `names` order.
pub fn load_scores(path: &Path, corpus: &Corpus, names: &[String]) -> Result<ScoreMatrix> {
    let (rows, columns) = if path.extension().is_some_and(|e| e == "json") {
        let map: BTreeMap<String, Vec<f64>> = read_json(path)?;
        (map.into_iter().collect(), names.to_vec())
    } else {
        read_table(path)?
    };
    Ok(ScoreMatrix::align(rows, &columns, corpus, names)?)
}

/// Reads a `doc_id,<col>...` CSV into rows and column names.
pub fn read_table(path: &Path) -> Result<(Vec<(String, Vec<f64>)>, Vec<String>)> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("doc_id") {
        return Err(Error::parse(path, Some(1), "first column must be doc_id"));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let values = record.iter().skip(1).map(|f| parse_f64(path, line, f)).collect::<Result<Vec<f64>>>()?;
        rows.push((record[0].to_string(), values));
    }
    Ok((rows, columns))
}

pub fn write_table(path: &Path, doc_ids: &[String], columns: &[String], m: &Matrix) -> Result<()> {
    write_text(path, &format_table(doc_ids, columns, m))
}

pub fn format_table(doc_ids: &[String], columns: &[String], m: &Matrix) -> String {
    let mut out = String::from("doc_id");
    for c in columns {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push('\n');
    for (id, row) in doc_ids.iter().zip(m.row_iter()) {
        out.push_str(&fmt_row(id, row));
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
pub struct PriorFile {
    pub names: Vec<String>,
    /// Rows keyed by document id.
    pub rows: BTreeMap<String, Vec<f64>>,
    /// Documents whose row fell back to uniform.
    #[serde(default)]
    pub flagged: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

pub fn save_prior(prior: &PriorMatrix, meta: Option<serde_json::Value>, path: &Path) -> Result<()> {
    let file = PriorFile {
        names: prior.names().to_vec(),
        rows: prior.doc_ids().iter().cloned().zip(prior.theta().row_iter().map(<[f64]>::to_vec)).collect(),
        flagged: prior.flagged().iter().map(|&d| prior.doc_ids()[d].clone()).collect(),
        meta,
    };
    write_json(path, &file)
}

/// Loads a prior and orders its rows like `corpus`.
pub fn load_prior(path: &Path, corpus: &Corpus) -> Result<PriorMatrix> {
    let file: PriorFile = read_json(path)?;
    let k = file.names.len();
    if let Some(id) = corpus.doc_ids().iter().find(|id| !file.rows.contains_key(id.as_str())) {
        return Err(Error::Invalid(format!(
            "{}: prior has no row for corpus document '{id}'",
            path.display()
        )));
    }
    let known: BTreeSet<&str> = corpus.doc_ids().iter().map(String::as_str).collect();
    if let Some(id) = file.rows.keys().find(|id| !known.contains(id.as_str())) {
        return Err(Error::Invalid(format!(
            "{}: prior document '{id}' is not in the corpus",
            path.display()
        )));
    }
    let mut theta = Matrix::zeros(corpus.num_docs(), k);
    for (d, id) in corpus.doc_ids().iter().enumerate() {
        let row = &file.rows[id];
        if row.len() != k {
            return Err(Error::parse(path, None, format!("row '{id}' has {} entries, expected {k}", row.len())));
        }
        theta.row_mut(d).copy_from_slice(row);
    }
    let flagged: BTreeSet<&str> = file.flagged.iter().map(String::as_str).collect();
    let flagged = (0..corpus.num_docs()).filter(|&d| flagged.contains(corpus.doc_ids()[d].as_str())).collect();
    Ok(PriorMatrix::new(theta, corpus.doc_ids().to_vec(), file.names)?.with_flagged(flagged))
}
