use std::fs;
use std::path::Path;

use super::{Labels, Point, PointCloud};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NPCD";
const VERSION: u32 = 1;
const HEADER: usize = 13;

const COLORS: u8 = 1;
const NORMALS: u8 = 1 << 1;
const POINT_LABELS: u8 = 1 << 2;
const CLOUD_LABEL: u8 = 1 << 3;

/// Binary NPCD v1 encoding. Heights are derived data and are not stored.
pub fn encode_npcd(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate(None)?;
    let p = cloud.len();
    let mut flags = 0;
    if cloud.colors.is_some() {
        flags |= COLORS;
    }
    if cloud.normals.is_some() {
        flags |= NORMALS;
    }
    match cloud.labels {
        Labels::Points(_) => flags |= POINT_LABELS,
        Labels::Cloud(_) => flags |= CLOUD_LABEL,
        Labels::None => {}
    }
    let mut out = Vec::with_capacity(HEADER + 36 * p + 2 * p);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(p).map_err(|_| Error::Input("too many points for NPCD".into()))?.to_le_bytes());
    out.push(flags);
    let mut put = |v: &[Point]| v.iter().flatten().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    put(&cloud.positions);
    if let Some(c) = &cloud.colors {
        put(c);
    }
    if let Some(n) = &cloud.normals {
        put(n);
    }
    match &cloud.labels {
        Labels::Points(l) => l.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Labels::Cloud(x) => out.extend_from_slice(&x.to_le_bytes()),
        Labels::None => {}
    }
    Ok(out)
}

pub(crate) struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format(self.pos as u64, "length overflow"))?, what)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn points(&mut self, p: usize, what: &str) -> Result<Vec<Point>> {
        let bytes = self.take(12 * p, what)?;
        Ok(bytes
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap());
                [f(0), f(1), f(2)]
            })
            .collect())
    }
}

pub fn decode_npcd(buf: &[u8]) -> Result<PointCloud> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected NPCD"));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let p = u32::from_le_bytes(r.take(4, "point count")?.try_into().unwrap()) as usize;
    let flags = r.take(1, "flags")?[0];
    if flags & !(COLORS | NORMALS | POINT_LABELS | CLOUD_LABEL) != 0 {
        return Err(Error::format(12, format!("unknown flag bits {flags:#04x}")));
    }
    if flags & POINT_LABELS != 0 && flags & CLOUD_LABEL != 0 {
        return Err(Error::format(12, "both per-point and per-cloud label flags set"));
    }
    let mut cloud = PointCloud::new(r.points(p, "positions")?);
    if flags & COLORS != 0 {
        cloud.colors = Some(r.points(p, "colors")?);
    }
    if flags & NORMALS != 0 {
        cloud.normals = Some(r.points(p, "normals")?);
    }
    let u16s = |b: &[u8]| b.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect::<Vec<_>>();
    if flags & POINT_LABELS != 0 {
        cloud.labels = Labels::Points(u16s(r.take(2 * p, "labels")?));
    } else if flags & CLOUD_LABEL != 0 {
        cloud.labels = Labels::Cloud(u16s(r.take(2, "label")?)[0]);
    }
    if r.pos != buf.len() {
        return Err(Error::format(r.pos as u64, format!("{} trailing bytes after a {p}-point payload", buf.len() - r.pos)));
    }
    Ok(cloud)
}

const CSV_COLUMNS: [&str; 11] = ["x", "y", "z", "r", "g", "b", "nx", "ny", "nz", "label", "cloud_label"];

/// CSV with a header row `x,y,z[,r,g,b][,nx,ny,nz][,label|cloud_label]`.
/// `label` holds per-point labels; `cloud_label` repeats one per-cloud label on every row.
pub fn decode_csv(text: &str) -> Result<PointCloud> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_lowercase).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    if let Some(h) = header.iter().find(|h| !CSV_COLUMNS.contains(&h.as_str())) {
        return Err(Error::Input(format!("unknown CSV column `{h}`")));
    }
    let need = |names: [&str; 3]| -> Result<Option<[usize; 3]>> {
        let idx: Vec<Option<usize>> = names.iter().map(|n| col(n)).collect();
        match (idx[0], idx[1], idx[2]) {
            (Some(a), Some(b), Some(c)) => Ok(Some([a, b, c])),
            (None, None, None) => Ok(None),
            _ => Err(Error::Input(format!("CSV needs all of {} or none", names.join(",")))),
        }
    };
    let xyz = need(["x", "y", "z"])?.ok_or_else(|| Error::Input("CSV needs x,y,z columns".into()))?;
    let rgb = need(["r", "g", "b"])?;
    let nrm = need(["nx", "ny", "nz"])?;
    let (label, cloud_label) = (col("label"), col("cloud_label"));
    if label.is_some() && cloud_label.is_some() {
        return Err(Error::Input("CSV has both label and cloud_label columns".into()));
    }
    let mut cloud = PointCloud::default();
    let mut colors = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f32> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Input(format!("row {}: bad number in column {}", line + 2, header[i])))
        };
        let tri = |c: [usize; 3]| -> Result<Point> { Ok([num(c[0])?, num(c[1])?, num(c[2])?]) };
        cloud.positions.push(tri(xyz)?);
        if let Some(c) = rgb {
            colors.push(tri(c)?);
        }
        if let Some(c) = nrm {
            normals.push(tri(c)?);
        }
        if let Some(i) = label.or(cloud_label) {
            let v = rec
                .get(i)
                .and_then(|s| s.parse::<u16>().ok())
                .ok_or_else(|| Error::Input(format!("row {}: bad label", line + 2)))?;
            labels.push(v);
        }
    }
    if rgb.is_some() {
        cloud.colors = Some(colors);
    }
    if nrm.is_some() {
        cloud.normals = Some(normals);
    }
    if label.is_some() {
        cloud.labels = Labels::Points(labels);
    } else if cloud_label.is_some() {
        let first = *labels.first().ok_or_else(|| Error::Input("cloud_label column without rows".into()))?;
        if labels.iter().any(|&l| l != first) {
            return Err(Error::Input("cloud_label differs between rows".into()));
        }
        cloud.labels = Labels::Cloud(first);
    }
    cloud.validate(None)?;
    Ok(cloud)
}

pub fn encode_csv(cloud: &PointCloud) -> Result<String> {
    cloud.validate(None)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x", "y", "z"];
    if cloud.colors.is_some() {
        header.extend(["r", "g", "b"]);
    }
    if cloud.normals.is_some() {
        header.extend(["nx", "ny", "nz"]);
    }
    match cloud.labels {
        Labels::Points(_) => header.push("label"),
        Labels::Cloud(_) => header.push("cloud_label"),
        Labels::None => {}
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..cloud.len() {
        let mut row: Vec<String> = cloud.positions[i].iter().map(f32::to_string).collect();
        if let Some(c) = &cloud.colors {
            row.extend(c[i].iter().map(f32::to_string));
        }
        if let Some(n) = &cloud.normals {
            row.extend(n[i].iter().map(f32::to_string));
        }
        match &cloud.labels {
            Labels::Points(l) => row.push(l[i].to_string()),
            Labels::Cloud(l) => row.push(l.to_string()),
            Labels::None => {}
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("CSV: {e}"))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads NPCD, or CSV when the extension is `.csv`.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    if is_csv(path) {
        decode_csv(&fs::read_to_string(path)?)
    } else {
        decode_npcd(&fs::read(path)?)
    }
}

/// Writes NPCD, or CSV when the extension is `.csv`.
pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        fs::write(path, encode_csv(cloud)?)?;
    } else {
        fs::write(path, encode_npcd(cloud)?)?;
    }
    Ok(())
}

/// Every `.npcd` and `.csv` file of a directory, in file-name order.
pub fn read_dir(dir: impl AsRef<Path>) -> Result<Vec<PointCloud>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("npcd") || e.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths.iter().map(read_cloud).collect()
}

/// Writes `cloud_00000.npcd`, `cloud_00001.npcd`, ... into `dir`, creating it if needed.
pub fn write_dir(clouds: &[PointCloud], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, c) in clouds.iter().enumerate() {
        write_cloud(c, dir.join(format!("cloud_{i:05}.npcd")))?;
    }
    Ok(())
}
