//! Golden-section maximization on a scalar interval.

use crate::error::{Error, Result};

const INVPHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2
const INVPHI2: f64 = 1.0 - INVPHI;

/// Locates the maximizer of a unimodal `f` on `[lo, hi]` to within
/// `tol`. The bracket shrinks by the golden ratio each iteration; for a
/// constant `f` any point of the interval is returned.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::Config(format!("golden search needs lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("golden search tolerance {tol} must be positive")));
    }

    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("objective returned {v} at x = {x}")));
        }
        Ok(v)
    };

    let mut a = lo;
    let mut b = hi;
    let mut c = a + INVPHI2 * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;

    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + INVPHI2 * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = eval(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
