//! Dataset loaders, the binary graph format, and result files.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::knn::{Neighbor, NeighborList};
use crate::metric::{Dataset, MetricKind, ObjectId};
use crate::mrpg::{GraphKind, Mrpg};

pub const GRAPH_MAGIC: &[u8; 4] = b"MRPG";
pub const GRAPH_VERSION: u32 = 1;

const FLAG_PIVOT: u8 = 1;
const FLAG_EXACT: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Fvecs,
    Bvecs,
    Csv,
    Words,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Fvecs => "fvecs",
            DataFormat::Bvecs => "bvecs",
            DataFormat::Csv => "csv",
            DataFormat::Words => "words",
        })
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvecs" => Ok(DataFormat::Fvecs),
            "bvecs" => Ok(DataFormat::Bvecs),
            "csv" => Ok(DataFormat::Csv),
            "words" | "txt" => Ok(DataFormat::Words),
            other => Err(Error::Config(format!("unknown dataset format `{other}`"))),
        }
    }
}

impl DataFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .and_then(|e| e.parse().ok())
    }
}

/// Loads a dataset. `normalize` rescales every vector to unit length.
pub fn load_dataset(
    path: &Path,
    format: DataFormat,
    metric: MetricKind,
    normalize: bool,
) -> Result<Dataset> {
    if (format == DataFormat::Words) != (metric == MetricKind::Edit) {
        return Err(Error::Config(format!(
            "metric {metric} cannot be used with {format} data"
        )));
    }
    let (mut values, dim) = match format {
        DataFormat::Words => return Dataset::from_strings(&read_words(path)?),
        DataFormat::Fvecs => read_vecs(path, VecsKind::Float)?,
        DataFormat::Bvecs => read_vecs(path, VecsKind::Byte)?,
        DataFormat::Csv => read_csv(path)?,
    };
    if normalize {
        for row in values.chunks_exact_mut(dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    Dataset::from_flat(values, dim, metric)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VecsKind {
    Float,
    Byte,
}

fn format_error(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn read_vecs(path: &Path, kind: VecsKind) -> Result<(Vec<f64>, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_vecs(&bytes, path, kind)
}

fn parse_vecs(bytes: &[u8], path: &Path, kind: VecsKind) -> Result<(Vec<f64>, usize)> {
    let width = match kind {
        VecsKind::Float => 4,
        VecsKind::Byte => 1,
    };
    let total = bytes.len() as u64;
    let mut cur = Cursor::new(bytes);
    let mut dim = None;
    let mut values = Vec::new();
    while cur.position() < total {
        let offset = cur.position();
        let d = cur
            .read_i32::<LittleEndian>()
            .map_err(|_| format_error(path, offset, "truncated dimension prefix"))?;
        if d <= 0 {
            return Err(format_error(path, offset, format!("invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(first) if first != d => {
                return Err(format_error(
                    path,
                    offset,
                    format!("record dimension {d} differs from first record dimension {first}"),
                ))
            }
            _ => {}
        }
        let body = cur.position();
        if total - body < (d * width) as u64 {
            return Err(format_error(path, body, "truncated vector record"));
        }
        for _ in 0..d {
            let v = match kind {
                VecsKind::Float => f64::from(cur.read_f32::<LittleEndian>().unwrap()),
                VecsKind::Byte => f64::from(cur.read_u8().unwrap()),
            };
            values.push(v);
        }
    }
    match dim {
        Some(d) => Ok((values, d)),
        None => Err(format_error(path, 0, "file contains no vectors")),
    }
}

fn read_csv(path: &Path) -> Result<(Vec<f64>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut dim = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let offset = record.position().map_or(0, |p| p.byte());
        if record.iter().all(str::is_empty) {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(format_error(
                    path,
                    offset,
                    format!("row has {} fields, expected {d}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| format_error(path, offset, format!("`{field}` is not a number")))?;
            values.push(v);
        }
    }
    match dim {
        Some(d) => Ok((values, d)),
        None => Err(format_error(path, 0, "file contains no rows")),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => format_error(path, offset, format!("{kind:?}")),
    }
}

fn read_words(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut words = Vec::new();
    let mut offset = 0u64;
    for line in BufReader::new(file).split(b'\n') {
        let line = line.map_err(|e| Error::io(path, e))?;
        let len = line.len() as u64 + 1;
        let text = String::from_utf8(line)
            .map_err(|_| format_error(path, offset, "line is not valid UTF-8"))?;
        let text = text.strip_suffix('\r').unwrap_or(&text);
        if !text.is_empty() {
            words.push(text.to_string());
        }
        offset += len;
    }
    Ok(words)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes a dataset in the given format; the inverse of [`load_dataset`]
/// (fvecs stores single precision).
pub fn write_dataset(path: &Path, ds: &Dataset, format: DataFormat) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    match format {
        DataFormat::Words => {
            for id in ds.ids() {
                let word = ds
                    .string(id)
                    .ok_or_else(|| Error::Config("words format needs a string dataset".into()))?;
                writeln!(out, "{word}").map_err(io)?;
            }
        }
        _ => {
            for id in ds.ids() {
                let row = ds
                    .vector(id)
                    .ok_or_else(|| Error::Config(format!("{format} format needs a vector dataset")))?;
                match format {
                    DataFormat::Csv => {
                        let line: Vec<String> = row.iter().map(f64::to_string).collect();
                        writeln!(out, "{}", line.join(",")).map_err(io)?;
                    }
                    DataFormat::Fvecs => {
                        out.write_i32::<LittleEndian>(row.len() as i32).map_err(io)?;
                        for &v in row {
                            out.write_f32::<LittleEndian>(v as f32).map_err(io)?;
                        }
                    }
                    DataFormat::Bvecs => {
                        out.write_i32::<LittleEndian>(row.len() as i32).map_err(io)?;
                        for &v in row {
                            out.write_u8(v.round().clamp(0.0, 255.0) as u8).map_err(io)?;
                        }
                    }
                    DataFormat::Words => unreachable!(),
                }
            }
        }
    }
    out.flush().map_err(io)
}

/// Header of a serialized graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphHeader {
    pub version: u32,
    pub n: u64,
    pub k: u32,
    pub k_prime: u32,
    pub kind: GraphKind,
    /// Checksum of the dataset the graph was built from.
    pub dataset_checksum: u64,
}

/// Serializes a graph bound to the dataset with `dataset_checksum`.
pub fn write_graph(path: &Path, g: &Mrpg, dataset_checksum: u64) -> Result<()> {
    let mut out = create(path)?;
    encode_graph(&mut out, g, dataset_checksum).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_graph<W: Write>(out: &mut W, g: &Mrpg, dataset_checksum: u64) -> std::io::Result<()> {
    out.write_all(GRAPH_MAGIC)?;
    out.write_u32::<LittleEndian>(GRAPH_VERSION)?;
    out.write_u64::<LittleEndian>(g.len() as u64)?;
    out.write_u32::<LittleEndian>(g.k as u32)?;
    out.write_u32::<LittleEndian>(g.k_prime as u32)?;
    out.write_u8(g.kind.code())?;
    out.write_u64::<LittleEndian>(dataset_checksum)?;
    for v in 0..g.len() as ObjectId {
        let exact = g.exact_list(v);
        let mut flags = 0;
        if g.is_pivot(v) {
            flags |= FLAG_PIVOT;
        }
        if exact.is_some() {
            flags |= FLAG_EXACT;
        }
        out.write_u8(flags)?;
        let neighbors = g.adjacency.neighbors(v);
        out.write_u32::<LittleEndian>(neighbors.len() as u32)?;
        for &u in neighbors {
            out.write_u32::<LittleEndian>(u)?;
        }
        if let Some(list) = exact {
            out.write_u32::<LittleEndian>(list.capacity() as u32)?;
            out.write_u32::<LittleEndian>(list.len() as u32)?;
            for e in list.entries() {
                out.write_u32::<LittleEndian>(e.id)?;
                out.write_f64::<LittleEndian>(e.dist)?;
            }
        }
    }
    Ok(())
}

/// Reads a graph file written by [`write_graph`].
pub fn read_graph(path: &Path) -> Result<(GraphHeader, Mrpg)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_graph(&bytes, path)
}

pub fn decode_graph(bytes: &[u8], path: &Path) -> Result<(GraphHeader, Mrpg)> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)
        .map_err(|_| format_error(path, 0, "truncated header"))?;
    if &magic != GRAPH_MAGIC {
        return Err(format_error(path, 0, "not a graph file (bad magic)"));
    }
    let eof = |cur: &Cursor<&[u8]>| format_error(path, cur.position(), "unexpected end of file");
    let version = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))?;
    if version != GRAPH_VERSION {
        return Err(format_error(path, 4, format!("unsupported version {version}")));
    }
    let n = cur.read_u64::<LittleEndian>().map_err(|_| eof(&cur))?;
    let k = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))?;
    let k_prime = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))?;
    let kind_at = cur.position();
    let code = cur.read_u8().map_err(|_| eof(&cur))?;
    let kind = GraphKind::from_code(code)
        .ok_or_else(|| format_error(path, kind_at, format!("unknown graph kind {code}")))?;
    let dataset_checksum = cur.read_u64::<LittleEndian>().map_err(|_| eof(&cur))?;
    if n > u32::MAX as u64 || n > bytes.len() as u64 {
        return Err(format_error(path, 8, format!("implausible vertex count {n}")));
    }
    let n_us = n as usize;

    let mut lists = Vec::with_capacity(n_us);
    let mut is_pivot = Vec::with_capacity(n_us);
    let mut exact = Vec::with_capacity(n_us);
    let read_id = |cur: &mut Cursor<&[u8]>| -> Result<ObjectId> {
        let at = cur.position();
        let id = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| format_error(path, at, "unexpected end of file"))?;
        if id as u64 >= n {
            return Err(format_error(path, at, format!("vertex id {id} out of range")));
        }
        Ok(id)
    };
    for v in 0..n_us {
        let flags_at = cur.position();
        let flags = cur.read_u8().map_err(|_| eof(&cur))?;
        if flags & !(FLAG_PIVOT | FLAG_EXACT) != 0 {
            return Err(format_error(path, flags_at, format!("invalid flags {flags:#x}")));
        }
        let degree = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))? as usize;
        if degree > n_us {
            return Err(format_error(path, flags_at + 1, format!("degree {degree} exceeds n")));
        }
        let list_at = cur.position();
        let mut list = Vec::with_capacity(degree);
        for _ in 0..degree {
            list.push(read_id(&mut cur)?);
        }
        if !list.windows(2).all(|w| w[0] < w[1]) || list.contains(&(v as ObjectId)) {
            return Err(format_error(
                path,
                list_at,
                format!("neighbor list of vertex {v} is not sorted, unique and loop-free"),
            ));
        }
        lists.push(list);
        is_pivot.push(flags & FLAG_PIVOT != 0);
        if flags & FLAG_EXACT != 0 {
            let capacity = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))? as usize;
            let len_at = cur.position();
            let len = cur.read_u32::<LittleEndian>().map_err(|_| eof(&cur))? as usize;
            if len > capacity || len > n_us {
                return Err(format_error(path, len_at, format!("exact list length {len} invalid")));
            }
            let mut entries = Vec::with_capacity(len);
            for _ in 0..len {
                let id = read_id(&mut cur)?;
                let dist = cur.read_f64::<LittleEndian>().map_err(|_| eof(&cur))?;
                entries.push(Neighbor { dist, id });
            }
            exact.push(Some(NeighborList::from_entries(entries, capacity)));
        } else {
            exact.push(None);
        }
    }
    if cur.position() != bytes.len() as u64 {
        return Err(format_error(path, cur.position(), "trailing bytes after last vertex"));
    }
    let header = GraphHeader {
        version,
        n,
        k,
        k_prime,
        kind,
        dataset_checksum,
    };
    let graph = Mrpg {
        kind,
        adjacency: Adjacency::from_lists(lists),
        is_pivot,
        exact,
        k: k as usize,
        k_prime: k_prime as usize,
    };
    Ok((header, graph))
}

/// Refuses a graph that was not built from `ds`.
pub fn check_graph_matches(header: &GraphHeader, ds: &Dataset) -> Result<()> {
    if header.n != ds.len() as u64 {
        return Err(Error::Mismatch(format!(
            "graph has {} vertices but the dataset has {} objects",
            header.n,
            ds.len()
        )));
    }
    let checksum = ds.checksum();
    if header.dataset_checksum != checksum {
        return Err(Error::Mismatch(format!(
            "graph was built from a different dataset (checksum {:016x}, dataset {:016x})",
            header.dataset_checksum, checksum
        )));
    }
    Ok(())
}

/// Writes one id per line.
pub fn write_ids(path: &Path, ids: &[ObjectId]) -> Result<()> {
    let mut out = create(path)?;
    for id in ids {
        writeln!(out, "{id}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ids(path: &Path) -> Result<Vec<ObjectId>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut offset = 0u64;
    let mut ids = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            ids.push(
                trimmed
                    .parse()
                    .map_err(|_| format_error(path, offset, format!("`{trimmed}` is not an id")))?,
            );
        }
        offset += line.len() as u64;
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::BuildParams;
    use crate::mrpg::build_graph;
    use std::path::PathBuf;

    fn fvecs_bytes(rows: &[&[f32]]) -> Vec<u8> {
        let mut out = Vec::new();
        for row in rows {
            out.write_i32::<LittleEndian>(row.len() as i32).unwrap();
            for &v in *row {
                out.write_f32::<LittleEndian>(v).unwrap();
            }
        }
        out
    }

    #[test]
    fn fvecs_parses_and_rejects_drift() {
        let p = PathBuf::from("x.fvecs");
        let bytes = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let (values, dim) = parse_vecs(&bytes, &p, VecsKind::Float).unwrap();
        assert_eq!((values, dim), (vec![1.0, 2.0, 3.0, 4.0], 2));

        let drift = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0, 5.0]]);
        match parse_vecs(&drift, &p, VecsKind::Float) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
        let truncated = &bytes[..bytes.len() - 2];
        assert!(matches!(
            parse_vecs(truncated, &p, VecsKind::Float),
            Err(Error::Format { offset: 16, .. })
        ));
        assert!(parse_vecs(&[], &p, VecsKind::Float).is_err());
    }

    #[test]
    fn bvecs_parses_bytes() {
        let bytes = [3, 0, 0, 0, 1, 2, 255];
        let (values, dim) = parse_vecs(&bytes, Path::new("b"), VecsKind::Byte).unwrap();
        assert_eq!((values, dim), (vec![1.0, 2.0, 255.0], 3));
    }

    #[test]
    fn datasets_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::from_vectors(vec![vec![0.5, 1.0], vec![-2.0, 3.25]], MetricKind::L2).unwrap();
        for format in [DataFormat::Fvecs, DataFormat::Csv] {
            let path = dir.path().join(format!("d.{format}"));
            write_dataset(&path, &ds, format).unwrap();
            let back = load_dataset(&path, format, MetricKind::L2, false).unwrap();
            assert_eq!(back.checksum(), ds.checksum());
        }
        let words = Dataset::from_strings(&["kitten", "sitting", "naïve"]).unwrap();
        let path = dir.path().join("w.txt");
        write_dataset(&path, &words, DataFormat::Words).unwrap();
        let back = load_dataset(&path, DataFormat::Words, MetricKind::Edit, false).unwrap();
        assert_eq!(back.string(2).unwrap(), "naïve");
        assert_eq!(back.checksum(), words.checksum());
    }

    #[test]
    fn normalize_flag_scales_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "3,4\n0,2\n").unwrap();
        let ds = load_dataset(&path, DataFormat::Csv, MetricKind::L2, true).unwrap();
        assert_eq!(ds.vector(0).unwrap(), &[0.6, 0.8]);
        let raw = load_dataset(&path, DataFormat::Csv, MetricKind::L2, false).unwrap();
        assert_eq!(raw.vector(0).unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn csv_errors_carry_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "1,2\n3,x\n").unwrap();
        assert!(matches!(
            load_dataset(&path, DataFormat::Csv, MetricKind::L1, false),
            Err(Error::Format { offset: 4, .. })
        ));
        assert!(matches!(
            load_dataset(&dir.path().join("missing.csv"), DataFormat::Csv, MetricKind::L1, false),
            Err(Error::Io { .. })
        ));
        assert!(matches!(
            load_dataset(&path, DataFormat::Csv, MetricKind::Edit, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn graph_round_trip_and_corruption() {
        let rows = (0..200).map(|i| vec![(i % 17) as f64, (i / 17) as f64 * 1.5]).collect();
        let ds = Dataset::from_vectors(rows, MetricKind::L2).unwrap();
        let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(5).with_seed(3))
            .unwrap()
            .graph;
        let mut bytes = Vec::new();
        encode_graph(&mut bytes, &g, ds.checksum()).unwrap();
        let p = Path::new("g.bin");
        let (header, back) = decode_graph(&bytes, p).unwrap();
        assert_eq!(back, g);
        assert_eq!(header.n, 200);
        check_graph_matches(&header, &ds).unwrap();

        let other = ds.subset(&(0..199).collect::<Vec<_>>()).unwrap();
        assert!(matches!(check_graph_matches(&header, &other), Err(Error::Mismatch(_))));

        assert!(matches!(decode_graph(&bytes[..bytes.len() - 1], p), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_graph(&bad, p), Err(Error::Format { offset: 0, .. })));
        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(decode_graph(&bad, p), Err(Error::Format { .. })));
    }

    #[test]
    fn ids_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.txt");
        write_ids(&path, &[3, 10, 42]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "3\n10\n42\n");
        assert_eq!(read_ids(&path).unwrap(), vec![3, 10, 42]);
    }
}
