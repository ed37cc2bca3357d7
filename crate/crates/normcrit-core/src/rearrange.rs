//! Volume-cell re-binning form of the symmetric decreasing rearrangement.

use alloc::vec::Vec;

/// Sorts the (value, cell volume) pairs by decreasing value and pours them back
/// into the cells from the origin outward; each output sample is the average of
/// what landed in its cell.
pub(crate) fn rearrange(weights: &[f64], values: &[f64]) -> (Vec<f64>, bool) {
    let m = values.len();
    let clamped = values.iter().any(|&x| x < 0.0);
    let vals: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));

    let mut out = alloc::vec![0.0; m];
    let mut k = 0usize;
    let mut rem = weights[order[0]];
    for j in 0..m {
        let mut need = weights[j];
        let first = vals[order[k.min(m - 1)]];
        let mut single = true;
        let mut acc = 0.0;
        while k < m {
            let idx = order[k];
            let take = rem.min(need);
            acc += take * vals[idx];
            single &= vals[idx] == first;
            need -= take;
            rem -= take;
            if rem <= 1e-13 * weights[idx] {
                k += 1;
                if k < m {
                    rem = weights[order[k]];
                }
            }
            if need <= 1e-13 * weights[j] {
                break;
            }
        }
        out[j] = if single { first } else { acc / (weights[j] - need.max(0.0)) };
    }
    (out, clamped)
}
