use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::{Gradient, LabeledBatch, Layout, MlpParams};
use crate::error::{input, Result};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pre-activations and activations of every layer for one batch.
struct Trace {
    // acts[0] is the input; acts[l + 1] is the output of computing layer l
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

fn check_width(layout: &Layout, width: usize) -> Result<()> {
    if width != layout.input_len() {
        return input(format!(
            "input has {width} samples, network expects {}",
            layout.input_len()
        ));
    }
    Ok(())
}

fn run(layout: &Layout, flat: &[f64], x: ArrayView2<'_, f64>) -> Trace {
    let layers = layout.num_layers();
    let mut acts = Vec::with_capacity(layers + 1);
    let mut pre = Vec::with_capacity(layers);
    acts.push(x.to_owned());
    for l in 0..layers {
        let w = layout.weight(flat, l);
        let b = layout.bias(flat, l);
        let z = acts[l].dot(&w.t()) + &b;
        let a = if l + 1 == layers {
            z.mapv(sigmoid)
        } else {
            z.mapv(|v| v.max(0.0))
        };
        pre.push(z);
        acts.push(a);
    }
    Trace { acts, pre }
}

fn relu_mask(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Network outputs for every row of `x`.
pub fn predict(p: &MlpParams, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_width(p.layout(), x.ncols())?;
    let trace = run(p.layout(), p.values(), x);
    Ok(trace.acts.last().expect("output layer").column(0).to_vec())
}

/// Output for a single received symbol, in `[0, 1]`.
pub fn forward(p: &MlpParams, x: &[f64]) -> Result<f64> {
    let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
    Ok(predict(p, view)?[0])
}

/// Bit decision: 1 iff the output is at least 0.5.
pub fn detect(p: &MlpParams, x: &[f64]) -> Result<u8> {
    Ok((forward(p, x)? >= 0.5) as u8)
}

fn nonempty(batch: &LabeledBatch) -> Result<()> {
    if batch.is_empty() {
        return input("batch is empty");
    }
    Ok(())
}

fn labels_column(batch: &LabeledBatch) -> Array1<f64> {
    batch.labels().iter().map(|&b| b as f64).collect()
}

/// Mean squared error between label bits and outputs.
pub fn loss(p: &MlpParams, batch: &LabeledBatch) -> Result<f64> {
    nonempty(batch)?;
    let out = predict(p, batch.inputs())?;
    let n = batch.len() as f64;
    Ok(out
        .iter()
        .zip(batch.labels())
        .map(|(o, &y)| (y as f64 - o).powi(2))
        .sum::<f64>()
        / n)
}

/// Loss and its exact gradient by reverse-mode accumulation.
pub fn loss_and_grad(p: &MlpParams, batch: &LabeledBatch) -> Result<(f64, Gradient)> {
    nonempty(batch)?;
    check_width(p.layout(), batch.width())?;
    let layout = p.layout();
    let flat = p.values();
    let trace = run(layout, flat, batch.inputs());
    let layers = layout.num_layers();
    let n = batch.len() as f64;
    let y = labels_column(batch);
    let out = trace.acts[layers].column(0).to_owned();
    let resid = &y - &out;
    let loss = resid.dot(&resid) / n;

    let mut g = vec![0.0; layout.num_params()];
    // dL/dz at the output: -2 (y - a) σ'(z) / n
    let mut delta: Array2<f64> = {
        let d = Zip::from(&resid)
            .and(&out)
            .map_collect(|&r, &a| -2.0 * r * a * (1.0 - a) / n);
        d.insert_axis(Axis(1))
    };
    for l in (0..layers).rev() {
        let (wo, bo, end) = layout.block(l);
        let gw = delta.t().dot(&trace.acts[l]);
        g[wo..bo].copy_from_slice(gw.as_slice().expect("contiguous"));
        let gb = delta.sum_axis(Axis(0));
        g[bo..end].copy_from_slice(gb.as_slice().expect("contiguous"));
        if l > 0 {
            let back = delta.dot(&layout.weight(flat, l));
            delta = back * relu_mask(&trace.pre[l - 1]);
        }
    }
    Ok((loss, Gradient { flat: g }))
}

pub fn grad(p: &MlpParams, batch: &LabeledBatch) -> Result<Gradient> {
    Ok(loss_and_grad(p, batch)?.1)
}

/// Exact `∇²L(p)·v` by forward-over-reverse differentiation. ReLU kinks
/// contribute nothing.
pub fn hvp(p: &MlpParams, batch: &LabeledBatch, v: &Gradient) -> Result<Gradient> {
    nonempty(batch)?;
    check_width(p.layout(), batch.width())?;
    let layout = p.layout();
    if v.flat.len() != layout.num_params() {
        return input(format!(
            "direction has {} entries, network has {} parameters",
            v.flat.len(),
            layout.num_params()
        ));
    }
    let flat = p.values();
    let dir = &v.flat[..];
    let trace = run(layout, flat, batch.inputs());
    let layers = layout.num_layers();
    let n = batch.len() as f64;

    // forward R-pass
    let mut r_acts: Vec<Array2<f64>> = Vec::with_capacity(layers + 1);
    let mut r_pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
    r_acts.push(Array2::zeros(trace.acts[0].raw_dim()));
    for l in 0..layers {
        let w = layout.weight(flat, l);
        let vw = layout.weight(dir, l);
        let vb = layout.bias(dir, l);
        let rz = trace.acts[l].dot(&vw.t()) + &vb + r_acts[l].dot(&w.t());
        let ra = if l + 1 == layers {
            let a = &trace.acts[l + 1];
            Zip::from(&rz).and(a).map_collect(|&r, &s| r * s * (1.0 - s))
        } else {
            &rz * &relu_mask(&trace.pre[l])
        };
        r_pre.push(rz);
        r_acts.push(ra);
    }

    // backward pass and its R-derivative
    let y = labels_column(batch);
    let out = trace.acts[layers].column(0).to_owned();
    let r_out = r_acts[layers].column(0).to_owned();
    let r_zout = r_pre[layers - 1].column(0).to_owned();
    let mut delta = Array2::zeros((batch.len(), 1));
    let mut r_delta = Array2::zeros((batch.len(), 1));
    for i in 0..batch.len() {
        let (a, yi, ra, rz) = (out[i], y[i], r_out[i], r_zout[i]);
        let d1 = a * (1.0 - a);
        let d2 = d1 * (1.0 - 2.0 * a);
        delta[[i, 0]] = -2.0 * (yi - a) * d1 / n;
        r_delta[[i, 0]] = 2.0 * (ra * d1 - (yi - a) * d2 * rz) / n;
    }

    let mut h = vec![0.0; layout.num_params()];
    for l in (0..layers).rev() {
        let (wo, bo, end) = layout.block(l);
        let rgw = r_delta.t().dot(&trace.acts[l]) + delta.t().dot(&r_acts[l]);
        h[wo..bo].copy_from_slice(rgw.as_standard_layout().as_slice().expect("contiguous"));
        let rgb = r_delta.sum_axis(Axis(0));
        h[bo..end].copy_from_slice(rgb.as_slice().expect("contiguous"));
        if l > 0 {
            let w = layout.weight(flat, l);
            let vw = layout.weight(dir, l);
            let mask = relu_mask(&trace.pre[l - 1]);
            let r_back = r_delta.dot(&w) + delta.dot(&vw);
            let back = delta.dot(&w);
            delta = back * &mask;
            r_delta = r_back * &mask;
        }
    }
    Ok(Gradient { flat: h })
}

/// Fraction of rows whose detected bit differs from the label.
pub fn ber_eval(p: &MlpParams, batch: &LabeledBatch) -> Result<f64> {
    nonempty(batch)?;
    let mut errors = 0usize;
    const CHUNK: usize = 4096;
    let inputs = batch.inputs();
    for start in (0..batch.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(batch.len());
        let out = predict(p, inputs.slice(ndarray::s![start..end, ..]))?;
        errors += out
            .iter()
            .zip(&batch.labels()[start..end])
            .filter(|(o, &y)| ((**o >= 0.5) as u8) != y)
            .count();
    }
    Ok(errors as f64 / batch.len() as f64)
}

/// `1 − ber_eval`.
pub fn accuracy(p: &MlpParams, batch: &LabeledBatch) -> Result<f64> {
    Ok(1.0 - ber_eval(p, batch)?)
}
