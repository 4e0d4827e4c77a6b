use std::fmt::Write as _;

/// One line of the evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scene: String,
    pub rotation_deg: f64,
    pub translation: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
}

/// Whitespace-aligned table with a header row. LPIPS is printed as `n/a`.
pub fn format_table(rows: &[MetricsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>12} {:>12} {:>9} {:>7} {:>8} {:>6}",
        "scene", "rotation_deg", "translation", "psnr", "ssim", "ms_ssim", "lpips"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>12.4} {:>12.5} {:>9.3} {:>7.4} {:>8.4} {:>6}",
            r.scene, r.rotation_deg, r.translation, r.psnr, r.ssim, r.ms_ssim, "n/a"
        );
    }
    s
}
