use super::EvalError;

/// Sample Pearson correlation.
///
/// Values are shifted by their first element before the sums, which keeps
/// integer ratings exact and limits cancellation for large offsets.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let (a0, b0) = (a[0], b[0]);
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x - a0, y - b0);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(((n * sxy - sx * sy) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}
