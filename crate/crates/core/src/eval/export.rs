use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::align::AlignmentModel;
use crate::data::PairedData;
use crate::error::{Error, Result};

/// Writes projected embeddings as CSV with columns
/// `modality,image_id,concept_id,dim_0..dim_{d-1}`: one `neural` row per
/// pair followed by one `image` row per pair, in the same order.
pub fn write_embeddings_csv(
    model: &AlignmentModel<f32>,
    pairs: &PairedData<'_>,
    concept_of: &HashMap<String, String>,
    writer: impl Write,
) -> Result<usize> {
    let batch = pairs.all();
    let v = model.embed_neural(&batch.neural)?;
    let w = model.embed_images(&batch.embeddings)?;
    let (_, d) = v.dims2("export_embeddings")?;
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let mut header = vec!["modality".to_string(), "image_id".into(), "concept_id".into()];
    header.extend((0..d).map(|j| format!("dim_{j}")));
    wtr.write_record(&header).map_err(csv_err)?;
    let mut rows = 0;
    for (modality, t) in [("neural", &v), ("image", &w)] {
        for (i, id) in batch.image_ids.iter().enumerate() {
            let concept = concept_of.get(id).map(String::as_str).unwrap_or("");
            let mut rec = vec![modality.to_string(), id.clone(), concept.to_string()];
            rec.extend(t.row(i).iter().map(|x| x.to_string()));
            wtr.write_record(&rec).map_err(csv_err)?;
            rows += 1;
        }
    }
    wtr.flush()?;
    Ok(rows)
}

/// [`write_embeddings_csv`] to a file; returns the number of data rows.
pub fn export_embeddings(
    model: &AlignmentModel<f32>,
    pairs: &PairedData<'_>,
    concept_of: &HashMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_embeddings_csv(model, pairs, concept_of, file)
}
