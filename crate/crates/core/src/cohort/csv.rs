//! QC record CSV: fixed header, booleans as true/false, laterality outcome as
//! pass/fail/na, reals with 6 significant digits, LF line endings.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::heuristics::{LateralityOutcome, Measurements, SegmentQCRecord};
use crate::volume::Laterality;

pub const QC_HEADER: [&str; 19] = [
    "patientId",
    "studyId",
    "seriesId",
    "acquisitionIndex",
    "structure",
    "laterality",
    "voxelCount",
    "volumeMl",
    "comX",
    "comY",
    "comZ",
    "connectedComponentCount",
    "largestComponentVoxels",
    "zMin",
    "zMax",
    "completenessPass",
    "connectedPass",
    "lateralityPass",
    "minVolumePass",
];

/// Formats a real with 6 significant digits in the style of C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub(crate) fn lf_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Streaming QC CSV writer; the header is written on construction.
pub struct QcCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> QcCsvWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = lf_writer(w);
        inner.write_record(QC_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &SegmentQCRecord) -> Result<()> {
        let m = &r.measurements;
        let com = |k: usize| m.center_of_mass_world.map(|c| fmt_sig6(c[k])).unwrap_or_default();
        let z = |hi: bool| {
            m.z_extent
                .map(|(lo, h)| if hi { h } else { lo }.to_string())
                .unwrap_or_default()
        };
        self.inner.write_record([
            r.patient_id.clone(),
            r.study_id.clone(),
            r.series_id.clone(),
            r.acquisition_index.to_string(),
            r.structure.clone(),
            r.laterality.to_string(),
            m.voxel_count.to_string(),
            fmt_sig6(m.volume_ml),
            com(0),
            com(1),
            com(2),
            m.connected_component_count.to_string(),
            m.largest_component_voxels.to_string(),
            z(false),
            z(true),
            r.completeness_pass.to_string(),
            r.connected_pass.to_string(),
            r.laterality_pass.to_string(),
            r.min_volume_pass.to_string(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<csv output>", e.into_error()))
    }
}

pub fn write_qc_csv<W: Write>(w: W, records: &[SegmentQCRecord]) -> Result<W> {
    let mut out = QcCsvWriter::new(w)?;
    for r in records {
        out.write(r)?;
    }
    out.into_inner()
}

pub fn qc_csv_string(records: &[SegmentQCRecord]) -> String {
    let bytes = write_qc_csv(Vec::new(), records).expect("in-memory write");
    String::from_utf8(bytes).expect("utf-8 output")
}

fn field(row: &csv::StringRecord, idx: usize) -> &str {
    row.get(idx).unwrap_or("")
}

fn parse_num<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, line: u64) -> Result<T> {
    field(row, idx)
        .parse()
        .map_err(|_| Error::schema(QC_HEADER[idx], format!("line {line}: invalid value {:?}", field(row, idx))))
}

fn parse_opt<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, line: u64) -> Result<Option<T>> {
    if field(row, idx).is_empty() {
        Ok(None)
    } else {
        parse_num(row, idx, line).map(Some)
    }
}

fn parse_bool(row: &csv::StringRecord, idx: usize, line: u64) -> Result<bool> {
    match field(row, idx) {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::schema(QC_HEADER[idx], format!("line {line}: expected true|false, got {other:?}"))),
    }
}

/// Reads a QC CSV, validating the header column by column.
pub fn read_qc_csv<R: Read>(r: R) -> Result<Vec<SegmentQCRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(r);
    let header = reader.headers()?.clone();
    for (i, expected) in QC_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *expected => {}
            Some(h) => return Err(Error::schema(*expected, format!("header has {h:?} in position {i}"))),
            None => return Err(Error::schema(*expected, "column missing from header")),
        }
    }
    if header.len() > QC_HEADER.len() {
        return Err(Error::schema(&header[QC_HEADER.len()], "unexpected extra column"));
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() > QC_HEADER.len() {
            return Err(Error::schema(QC_HEADER[QC_HEADER.len() - 1], format!("line {line}: too many fields")));
        }
        let com = match (parse_opt::<f64>(&row, 8, line)?, parse_opt(&row, 9, line)?, parse_opt(&row, 10, line)?) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            (None, None, None) => None,
            _ => return Err(Error::schema("comX", format!("line {line}: partial center of mass"))),
        };
        let z_extent = match (parse_opt::<usize>(&row, 13, line)?, parse_opt(&row, 14, line)?) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(Error::schema("zMin", format!("line {line}: partial z extent"))),
        };
        let laterality: Laterality = field(&row, 5)
            .parse()
            .map_err(|_| Error::schema("laterality", format!("line {line}: invalid value {:?}", field(&row, 5))))?;
        let laterality_pass: LateralityOutcome = field(&row, 17)
            .parse()
            .map_err(|_| Error::schema("lateralityPass", format!("line {line}: invalid value {:?}", field(&row, 17))))?;
        out.push(SegmentQCRecord {
            patient_id: field(&row, 0).to_string(),
            study_id: field(&row, 1).to_string(),
            series_id: field(&row, 2).to_string(),
            acquisition_index: parse_num(&row, 3, line)?,
            structure: field(&row, 4).to_string(),
            laterality,
            measurements: Measurements {
                voxel_count: parse_num(&row, 6, line)?,
                volume_ml: parse_num(&row, 7, line)?,
                center_of_mass_world: com,
                connected_component_count: parse_num(&row, 11, line)?,
                largest_component_voxels: parse_num(&row, 12, line)?,
                z_extent,
            },
            completeness_pass: parse_bool(&row, 15, line)?,
            connected_pass: parse_bool(&row, 16, line)?,
            laterality_pass,
            min_volume_pass: parse_bool(&row, 18, line)?,
        });
    }
    Ok(out)
}
