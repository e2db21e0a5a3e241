use super::ClassifyError;

/// One-way ANOVA F statistic of `column` grouped by `labels` (class indices).
///
/// Returns 0 when the between-group sum of squares is 0 and `+inf` when the
/// within-group sum is 0 but the between-group sum is not. Needs at least two
/// non-empty groups.
pub fn anova_f(column: &[f64], labels: &[usize]) -> Result<f64, ClassifyError> {
    assert_eq!(column.len(), labels.len(), "column and labels must align");
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; groups];
    let mut cnt = vec![0usize; groups];
    for (&x, &g) in column.iter().zip(labels) {
        sum[g] += x;
        cnt[g] += 1;
    }
    let k = cnt.iter().filter(|&&c| c > 0).count();
    if k < 2 {
        return Err(ClassifyError::Groups(k));
    }
    let n = column.len();
    let grand = sum.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sum
        .iter()
        .zip(&cnt)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let ssb: f64 = means
        .iter()
        .zip(&cnt)
        .map(|(&m, &c)| c as f64 * (m - grand) * (m - grand))
        .sum();
    let ssw: f64 = column
        .iter()
        .zip(labels)
        .map(|(&x, &g)| (x - means[g]) * (x - means[g]))
        .sum();
    // Sums of squares below this relative size are rounding noise.
    let scale = column.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let tiny = 1e-24 * scale;
    if ssb <= tiny {
        return Ok(0.0);
    }
    if ssw <= tiny || n == k {
        return Ok(f64::INFINITY);
    }
    let msb = ssb / (k - 1) as f64;
    let msw = ssw / (n - k) as f64;
    Ok(msb / msw)
}
