/// Ray count for the next batch so that the sample total tracks `target`.
///
/// Keeps `prev_rays` when the previous batch produced no samples.
pub fn dynamic_batch_size(
    prev_rays: usize,
    prev_total_samples: usize,
    target_samples: usize,
    min_rays: usize,
    max_rays: usize,
) -> usize {
    if prev_total_samples == 0 {
        return prev_rays.clamp(min_rays, max_rays);
    }
    let next = (prev_rays as f64 * target_samples as f64 / prev_total_samples as f64).round() as usize;
    next.clamp(min_rays, max_rays)
}
