use crate::error::{Error, Result};
use crate::model::{IrradianceEmbedding, NamedTensor, ParamSet};
use crate::numeric::ParamTensor;

/// `|D_i| / |D|` for each center, in input order.
pub fn aggregation_weights(volumes: &[usize]) -> Result<Vec<f64>> {
    if volumes.is_empty() {
        return Err(Error::Contract("aggregation needs at least one client".into()));
    }
    if let Some(i) = volumes.iter().position(|&v| v == 0) {
        return Err(Error::Contract(format!("client {i} reported zero data volume")));
    }
    let total: usize = volumes.iter().sum();
    Ok(volumes.iter().map(|&v| v as f64 / total as f64).collect())
}

/// Coordinate-wise `Σ w_i x_i`, accumulated in input order.
fn weighted_sum(vectors: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; vectors[0].len()];
    for (v, &w) in vectors.iter().zip(weights) {
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += w * x;
        }
    }
    acc
}

/// Volume-weighted average of base parameter sets.
///
/// `bases` pairs each set with the id of the center that produced it so
/// layout errors can name the offender.
pub fn aggregate_base(bases: &[(&str, &ParamSet)], volumes: &[usize]) -> Result<ParamSet> {
    let weights = aggregation_weights(volumes)?;
    if bases.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} bases but {} volumes",
            bases.len(),
            weights.len()
        )));
    }
    let (_, reference) = bases[0];
    for (center, b) in &bases[1..] {
        if !reference.same_layout(b) {
            return Err(Error::Aggregation {
                center: center.to_string(),
                detail: format!(
                    "base layout {} differs from {}",
                    b.describe_layout(),
                    reference.describe_layout()
                ),
            });
        }
    }
    let mut entries = Vec::with_capacity(reference.entries.len());
    for (k, first) in reference.entries.iter().enumerate() {
        let parts: Vec<&[f64]> = bases.iter().map(|(_, b)| b.entries[k].tensor.values()).collect();
        let values = weighted_sum(&parts, &weights);
        entries.push(NamedTensor {
            name: first.name.clone(),
            tensor: ParamTensor::new(first.tensor.shape().to_vec(), values)?,
        });
    }
    Ok(ParamSet { entries })
}

pub fn aggregate_embedding(
    embeddings: &[(&str, &IrradianceEmbedding)],
    volumes: &[usize],
) -> Result<IrradianceEmbedding> {
    let weights = aggregation_weights(volumes)?;
    if embeddings.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} embeddings but {} volumes",
            embeddings.len(),
            weights.len()
        )));
    }
    let len = embeddings[0].1.len();
    if let Some((center, e)) = embeddings.iter().find(|(_, e)| e.len() != len) {
        return Err(Error::Aggregation {
            center: center.to_string(),
            detail: format!("embedding length {} differs from {len}", e.len()),
        });
    }
    let parts: Vec<&[f64]> = embeddings.iter().map(|(_, e)| e.as_slice()).collect();
    Ok(IrradianceEmbedding(weighted_sum(&parts, &weights)))
}

/// Weighting factor `(cos(e_local, e_global) + 1) / 2`.
///
/// A zero-norm argument has no direction; the factor falls back to 0.5.
pub fn compute_lambda(e_local: &IrradianceEmbedding, e_global: &IrradianceEmbedding) -> Result<f64> {
    if e_local.len() != e_global.len() {
        return Err(Error::dim(
            "compute_lambda",
            format!("{} values", e_local.len()),
            format!("{} values", e_global.len()),
        ));
    }
    if !e_local
        .as_slice()
        .iter()
        .chain(e_global.as_slice())
        .all(|v| v.is_finite())
    {
        return Err(Error::Contract("embeddings must be finite".into()));
    }
    let (nl, ng) = (e_local.norm(), e_global.norm());
    if nl == 0.0 || ng == 0.0 {
        log::warn!("zero-norm irradiance embedding; using lambda = 0.5");
        return Ok(0.5);
    }
    let cos = (e_local.dot(e_global) / (nl * ng)).clamp(-1.0, 1.0);
    Ok((cos + 1.0) / 2.0)
}

/// `λ·global + (1 − λ)·local`, coordinate-wise over matching layouts.
pub fn local_aggregate(local: &ParamSet, global: &ParamSet, lambda: f64) -> Result<ParamSet> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Contract(format!("lambda {lambda} is outside [0, 1]")));
    }
    if !local.same_layout(global) {
        return Err(Error::dim(
            "local_aggregate",
            local.describe_layout(),
            global.describe_layout(),
        ));
    }
    let mut out = local.clone();
    for (o, g) in out.entries.iter_mut().zip(&global.entries) {
        for (x, y) in o.tensor.values_mut().iter_mut().zip(g.tensor.values()) {
            *x = lambda * y + (1.0 - lambda) * *x;
        }
    }
    Ok(out)
}
