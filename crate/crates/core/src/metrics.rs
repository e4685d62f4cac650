//! Observables and error functionals.
//!
//! Every engine state and dense oracle implements [`PauliMeasure`], which
//! returns raw values `Tr[Pρ]` (or `⟨ψ|P|ψ⟩`). A [`Measurement`] divides by
//! the trace when normalization is requested and assembles fermionic
//! observables from their Jordan–Wigner images.

use std::io::Write;

use nalgebra::DMatrix;

use crate::models::{jw_observable, BondHamiltonian, Observable, PauliStringOperator};
use crate::pauli::{Pauli, PauliString};
use crate::{Error, Result, C64};

/// Traces below this magnitude make normalized values diverge.
pub const TRACE_THRESHOLD: f64 = 1e-12;

pub trait PauliMeasure {
    fn num_sites(&self) -> usize;

    /// `Tr ρ`, or `⟨ψ|ψ⟩` for a pure state.
    fn trace(&self) -> f64;

    /// Unnormalized `Tr[Pρ]`.
    fn raw_pauli(&self, string: &PauliString) -> Result<C64>;

    fn raw_operator(&self, op: &PauliStringOperator) -> Result<C64> {
        op.terms().map(|(c, s)| Ok(c * self.raw_pauli(s)?)).sum()
    }

    /// Raw values of `a_i σᶻ_{i+1} ⋯ σᶻ_{j−1} b_j` for `j = i+1 … L−1`.
    fn raw_jw_pairs(&self, i: usize, a: Pauli, b: Pauli) -> Result<Vec<C64>> {
        (i + 1..self.num_sites())
            .map(|j| {
                let mut f = vec![(i, a), (j, b)];
                f.extend((i + 1..j).map(|k| (k, Pauli::Z)));
                self.raw_pauli(&PauliString::new(f)?)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Divide every value by the trace.
    ByTrace,
    /// Report raw values.
    Raw,
}

/// Observable evaluation on one snapshot.
pub struct Measurement<'a> {
    source: &'a dyn PauliMeasure,
    norm: f64,
}

impl<'a> Measurement<'a> {
    /// Fails with [`Error::Divergence`] when normalization is requested and
    /// the trace is numerically zero.
    pub fn new(source: &'a dyn PauliMeasure, normalization: Normalization) -> Result<Self> {
        let norm = match normalization {
            Normalization::Raw => 1.0,
            Normalization::ByTrace => {
                let tr = source.trace();
                if !(tr.abs() >= TRACE_THRESHOLD) {
                    return Err(Error::Divergence { trace: tr });
                }
                tr
            }
        };
        Ok(Self { source, norm })
    }

    pub fn num_sites(&self) -> usize {
        self.source.num_sites()
    }

    pub fn trace(&self) -> f64 {
        self.source.trace()
    }

    pub fn pauli(&self, s: &PauliString) -> Result<C64> {
        Ok(self.source.raw_pauli(s)? / self.norm)
    }

    pub fn operator(&self, op: &PauliStringOperator) -> Result<C64> {
        Ok(self.source.raw_operator(op)? / self.norm)
    }

    pub fn observable(&self, obs: Observable) -> Result<C64> {
        self.operator(&jw_observable(obs, self.num_sites())?)
    }

    /// `⟨n_i⟩` for every site.
    pub fn densities(&self) -> Result<Vec<f64>> {
        (0..self.num_sites()).map(|i| Ok(0.5 * (1.0 + self.pauli(&PauliString::single(i, Pauli::Z))?.re))).collect()
    }

    /// `⟨H⟩ / L`
    pub fn energy_density(&self, model: &BondHamiltonian) -> Result<f64> {
        if model.len() != self.num_sites() {
            return Err(Error::domain(format!(
                "model on {} sites measured on a state of {}",
                model.len(),
                self.num_sites()
            )));
        }
        Ok(self.operator(&model.energy_density_operator())?.re)
    }

    /// `⟨n_i n_j⟩ − ⟨n_i⟩⟨n_j⟩`
    pub fn connected_correlation(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::domain("connected correlation needs i ≠ j"));
        }
        let (a, b) = (i.min(j), i.max(j));
        let nn = self.observable(Observable::DensityDensity(a, b))?.re;
        let ni = self.observable(Observable::Number(a))?.re;
        let nj = self.observable(Observable::Number(b))?.re;
        Ok(nn - ni * nj)
    }

    /// The full table `C_ij = ⟨c_i†c_j⟩`.
    pub fn correlation_matrix(&self) -> Result<DMatrix<C64>> {
        let len = self.num_sites();
        let mut c = DMatrix::zeros(len, len);
        let dens = self.densities()?;
        for i in 0..len {
            c[(i, i)] = C64::new(dens[i], 0.0);
            if i + 1 == len {
                continue;
            }
            let pair = |a, b| -> Result<Vec<C64>> {
                Ok(self.source.raw_jw_pairs(i, a, b)?.into_iter().map(|z| z / self.norm).collect())
            };
            let (xx, xy, yx, yy) = (
                pair(Pauli::X, Pauli::X)?,
                pair(Pauli::X, Pauli::Y)?,
                pair(Pauli::Y, Pauli::X)?,
                pair(Pauli::Y, Pauli::Y)?,
            );
            for (k, j) in (i + 1..len).enumerate() {
                let sign = if (j - i - 1) % 2 == 0 { 0.25 } else { -0.25 };
                let im = C64::new(0.0, 1.0);
                let v = (xx[k] - im * xy[k] + im * yx[k] + yy[k]) * sign;
                c[(i, j)] = v;
                c[(j, i)] = v.conj();
            }
        }
        Ok(c)
    }
}

/// `√(Σ_i (n_i − n_i^exact)² / Σ_i (n_i^exact)²)`
pub fn fermion_number_error(method: &[f64], exact: &[f64]) -> Result<f64> {
    if method.len() != exact.len() {
        return Err(Error::domain(format!("profiles of length {} and {}", method.len(), exact.len())));
    }
    let den: f64 = exact.iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(Error::domain("exact profile is identically zero"));
    }
    let num: f64 = method.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((num / den).sqrt())
}

/// `(1/L) Σ_i ⟨n_i⟩`
pub fn total_number_density(densities: &[f64]) -> f64 {
    densities.iter().sum::<f64>() / densities.len() as f64
}

/// `(1/L) Σ_j e^{−ik(j−½)} ⟨n_j⟩` with `j` counted from 1.
pub fn fourier_number(densities: &[f64], k: f64) -> C64 {
    let len = densities.len() as f64;
    densities.iter().enumerate().map(|(j, &n)| C64::from_polar(n / len, -k * (j as f64 + 0.5))).sum()
}

/// `Σ_{ij} e^{−ik(i−j)} C_ij`
pub fn nk_double_sum(c: &DMatrix<C64>, k: f64) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            total += C64::from_polar(1.0, -k * (i as f64 - j as f64)) * c[(i, j)];
        }
    }
    total
}

/// Trapezoid rule over the samples in `[t0, t1]`, with linear interpolation
/// at the end points.
fn trapezoid(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::domain("time series and values differ in length or are empty"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("times are not strictly increasing"));
    }
    let (first, last) = (times[0], times[times.len() - 1]);
    let slack = 1e-9 * (1.0 + last.abs());
    if t0 < first - slack || t1 > last + slack || !(t1 >= t0) {
        return Err(Error::domain(format!("interval [{t0}, {t1}] is not covered by samples on [{first}, {last}]")));
    }
    let (t0, t1) = (t0.max(first), t1.min(last));
    let at = |t: f64| -> f64 {
        let k = times.partition_point(|&x| x < t).clamp(1, times.len() - 1);
        let (ta, tb) = (times[k - 1], times[k]);
        if tb == ta {
            return values[k];
        }
        values[k - 1] + (values[k] - values[k - 1]) * (t - ta) / (tb - ta)
    };
    let mut pts = vec![(t0, if times.len() == 1 { values[0] } else { at(t0) })];
    pts.extend(times.iter().zip(values).filter(|(&t, _)| t > t0 && t < t1).map(|(&t, &v)| (t, v)));
    if t1 > t0 {
        pts.push((t1, if times.len() == 1 { values[0] } else { at(t1) }));
    }
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

/// Mean of `values` over `[t0, t1]` by the trapezoid rule.
pub fn time_average(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    if !(t1 > t0) {
        return Err(Error::domain("averaging window must have positive length"));
    }
    Ok(trapezoid(times, values, t0, t1)? / (t1 - t0))
}

/// `√((1/T_f) ∫_0^{T_f} |ε(t) − ε(0)|² dt)` by the trapezoid rule.
pub fn avg_energy_error(times: &[f64], eps: &[f64], t_final: f64) -> Result<f64> {
    if eps.is_empty() {
        return Err(Error::domain("empty energy series"));
    }
    if !(t_final > 0.0) {
        return Err(Error::domain("T_f must be positive"));
    }
    let dev: Vec<f64> = eps.iter().map(|e| (e - eps[0]).powi(2)).collect();
    let start = times.first().copied().unwrap_or(0.0);
    Ok((trapezoid(times, &dev, start, start + t_final)? / t_final).sqrt())
}

/// Named columns sampled at strictly increasing times.
///
/// Values may be NaN only in rows where a measurement diverged; such rows
/// carry a `1` in the `diverged` column when it exists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(names: &[&str]) -> Self {
        Self {
            times: Vec::new(),
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); names.len()],
        }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::domain(format!("row of {} values for {} columns", row.len(), self.names.len())));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::domain(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        for (col, &v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    /// CSV with a `t` column first, `{:.16e}` numbers, LF line endings.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv_writer(w);
        let header = std::iter::once("t").chain(self.names.iter().map(String::as_str));
        out.write_record(header).map_err(csv_error)?;
        for (r, t) in self.times.iter().enumerate() {
            let row = std::iter::once(format_number(*t)).chain(self.columns.iter().map(|c| format_number(c[r])));
            out.write_record(row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InternalConsistency(format!("csv: {other:?}")),
    }
}

/// 17 significant digits; `NaN` for non-finite values.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fock_initial_state, fock_site_vectors, spin_initial_state};
    use crate::oracle::DenseState;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn number_error_cases() {
        let exact = vec![1.0, 0.0, 1.0, 0.0];
        assert_eq!(fermion_number_error(&exact, &exact).unwrap(), 0.0);
        let d = 0.01;
        let shifted: Vec<f64> = exact.iter().map(|x| x + d).collect();
        let expected = d * (4.0f64).sqrt() / 2.0f64.sqrt();
        assert!((fermion_number_error(&shifted, &exact).unwrap() - expected).abs() < 1e-15);
        assert!(fermion_number_error(&[0.0], &[0.0]).is_err());
        assert!(fermion_number_error(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn fourier_cases() {
        let uniform = vec![0.3; 16];
        assert!(fourier_number(&uniform, FRAC_PI_4).norm() < 1e-10);
        let occ: Vec<f64> = fock_initial_state(16).iter().map(|&n| n as f64).collect();
        let period: C64 = (1..=8)
            .filter(|j| matches!(j % 8, 1 | 2 | 7 | 0))
            .map(|j| C64::from_polar(1.0, -FRAC_PI_4 * (j as f64 - 0.5)))
            .sum();
        let expected = period * 2.0 / 16.0;
        assert!((fourier_number(&occ, FRAC_PI_4) - expected).norm() < 1e-14);
        assert!(fourier_number(&occ, FRAC_PI_4).im.abs() < 1e-14);
        assert!((fourier_number(&occ, 0.0).re - total_number_density(&occ)).abs() < 1e-15);
        let noisy: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        assert!((fourier_number(&noisy, -0.7) - fourier_number(&noisy, 0.7).conj()).norm() < 1e-12);
    }

    #[test]
    fn nk_cases() {
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        assert!((nk_double_sum(&c, 0.0).re - 2.0).abs() < 1e-15);
        assert!((nk_double_sum(&c, 1.3).re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn avg_energy_error_cases() {
        let times: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
        let constant = vec![0.7; times.len()];
        assert_eq!(avg_energy_error(&times, &constant, 10.0).unwrap(), 0.0);
        let a = 0.3;
        let step: Vec<f64> = times.iter().map(|&t| if t > 0.0 { 0.7 + a } else { 0.7 }).collect();
        let v = avg_energy_error(&times, &step, 10.0).unwrap();
        // trapezoid: a²(T − dt/2)/T
        assert!((v - a * ((10.0 - 0.05) / 10.0f64).sqrt()).abs() < 1e-12);
        let b = 0.02;
        let drift: Vec<f64> = times.iter().map(|&t| 0.7 + b * t).collect();
        let v = avg_energy_error(&times, &drift, 10.0).unwrap();
        assert!((v - b * 10.0 / 3f64.sqrt()).abs() < 1e-4);
        let shifted: Vec<f64> = drift.iter().map(|e| e + 5.0).collect();
        assert!((avg_energy_error(&times, &shifted, 10.0).unwrap() - v).abs() < 1e-12);
        assert!(avg_energy_error(&times, &drift, 10.5).is_err());
        assert!((avg_energy_error(&times, &drift, 5.05).unwrap() - b * 5.05 / 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn time_series_rules() {
        let mut ts = TimeSeries::new(&["trace", "n_tot"]);
        ts.push(0.0, &[1.0, 0.5]).unwrap();
        assert!(ts.push(0.0, &[1.0, 0.5]).is_err());
        assert!(ts.push(0.1, &[1.0]).is_err());
        ts.push(0.08, &[0.9, f64::NAN]).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,trace,n_tot\n0.0000000000000000e0,1.0000000000000000e0,5.0000000000000000e-1\n8.0000000000000002e-2,9.0000000000000002e-1,NaN\n"
        );
    }

    #[test]
    fn fock_state_observables() {
        let len = 8;
        let s = DenseState::product(&fock_site_vectors(&fock_initial_state(len))).unwrap();
        let m = Measurement::new(&s, Normalization::ByTrace).unwrap();
        let model = BondHamiltonian::free_fermion(len, 1.0).unwrap();
        assert!(m.energy_density(&model).unwrap().abs() < 1e-15);
        assert!((total_number_density(&m.densities().unwrap()) - 0.5).abs() < 1e-15);
        assert!(m.connected_correlation(0, 7).unwrap().abs() < 1e-12);
        let c = m.correlation_matrix().unwrap();
        assert!((nk_double_sum(&c, 0.0).re - 4.0).abs() < 1e-14);
        let empty = DenseState::product(&fock_site_vectors(&[0; 4])).unwrap();
        let m0 = Measurement::new(&empty, Normalization::Raw).unwrap();
        assert_eq!(total_number_density(&m0.densities().unwrap()), 0.0);
    }

    #[test]
    fn spin_energy_matches_dense_expectation() {
        let len = 6;
        let model = BondHamiltonian::spin(len, 1.0, 0.9045, 0.809).unwrap();
        let s = DenseState::product(&spin_initial_state(len)).unwrap();
        let h = model.dense().unwrap();
        let v = s.vector();
        let exact = (v.adjoint() * h * v)[(0, 0)].re / len as f64;
        let m = Measurement::new(&s, Normalization::ByTrace).unwrap();
        assert!((m.energy_density(&model).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn divergence_reported() {
        let s = DenseState::new(2, nalgebra::DVector::zeros(4)).unwrap();
        assert!(matches!(Measurement::new(&s, Normalization::ByTrace), Err(Error::Divergence { .. })));
        assert!(Measurement::new(&s, Normalization::Raw).is_ok());
    }
}
