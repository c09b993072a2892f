//! Hand-derived derivatives of the benchmark solutions and the differential
//! operators written out term by term.

use std::f64::consts::PI;

use splayer::problems::ProblemId;

/// Value, first and second derivatives per axis of one component.
#[derive(Clone, Debug)]
pub struct Jet {
    pub u: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

fn jet1(u: f64, d1: f64, d2: f64) -> Jet {
    Jet { u, d1: vec![d1], d2: vec![d2] }
}

/// `(1 - e^{-t/d}) / (1 - e^{-1/d})` with its two derivatives.
fn ramp(t: f64, d: f64) -> [f64; 3] {
    let den = 1.0 - (-1.0 / d).exp();
    let e = (-t / d).exp();
    [(1.0 - e) / den, e / (d * den), -e / (d * d * den)]
}

/// `(e^{-t/d} + e^{-(1-t)/d}) / (1 - e^{-1/d})` with its two derivatives.
fn twin(t: f64, d: f64) -> [f64; 3] {
    let den = 1.0 - (-1.0 / d).exp();
    let (a, b) = ((-t / d).exp(), (-(1.0 - t) / d).exp());
    [(a + b) / den, (b - a) / (d * den), (a + b) / (d * d * den)]
}

pub fn jets(id: ProblemId, eps: f64, mu: f64, p: &[f64]) -> Vec<Jet> {
    match id {
        ProblemId::Cd1d => {
            let x = p[0];
            let e = ((x - 1.0) / eps).exp();
            let (s, c) = x.sin_cos();
            vec![jet1(
                (1.0 - e) * s,
                -e / eps * s + (1.0 - e) * c,
                -e / (eps * eps) * s - 2.0 * e / eps * c - (1.0 - e) * s,
            )]
        }
        ProblemId::Rd1d => {
            let x = p[0];
            let (a, b) = ((-x / eps).exp(), (-(1.0 - x) / eps).exp());
            vec![jet1(a + b - 1.0 - (-1.0 / eps).exp(), (b - a) / eps, (a + b) / (eps * eps))]
        }
        ProblemId::CdCoupled => {
            let x = p[0];
            let (re, rm) = (ramp(x, eps), ramp(x, mu));
            let (s, c) = (PI * x / 2.0).sin_cos();
            let g = (x - 1.0).exp();
            vec![
                jet1(re[0] + rm[0] - 2.0 * s, re[1] + rm[1] - PI * c, re[2] + rm[2] + PI * PI / 2.0 * s),
                jet1(rm[0] - x * g, rm[1] - (1.0 + x) * g, rm[2] - (2.0 + x) * g),
            ]
        }
        ProblemId::RdCoupled => {
            let x = p[0];
            let (ge, gm) = (twin(x, eps), twin(x, mu));
            vec![jet1(ge[0] + gm[0] - 2.0, ge[1] + gm[1], ge[2] + gm[2]), jet1(gm[0] - 1.0, gm[1], gm[2])]
        }
        ProblemId::Cd2dEx2 => {
            let (x, y) = (p[0], p[1]);
            let den = 1.0 - (-1.0 / eps).exp();
            let ex = (-x / eps).exp();
            let (s, c) = (PI * x / 2.0).sin_cos();
            let fx = [
                c - (ex - (-1.0 / eps).exp()) / den,
                -PI / 2.0 * s + ex / (eps * den),
                -PI * PI / 4.0 * c - ex / (eps * eps * den),
            ];
            let fy = ramp(y, eps);
            vec![Jet {
                u: fx[0] * fy[0],
                d1: vec![fx[1] * fy[0], fx[0] * fy[1]],
                d2: vec![fx[2] * fy[0], fx[0] * fy[2]],
            }]
        }
        ProblemId::Cd2dEx3 => {
            let factor = |t: f64| {
                let e = (-t / eps).exp();
                let (s, c) = (PI * t).sin_cos();
                [
                    s * (1.0 - e),
                    PI * c * (1.0 - e) + s * e / eps,
                    -PI * PI * s * (1.0 - e) + 2.0 * PI * c * e / eps - s * e / (eps * eps),
                ]
            };
            let (fx, fy) = (factor(p[0]), factor(p[1]));
            vec![Jet {
                u: fx[0] * fy[0],
                d1: vec![fx[1] * fy[0], fx[0] * fy[1]],
                d2: vec![fx[2] * fy[0], fx[0] * fy[2]],
            }]
        }
    }
}

/// `L[u](p)` per equation.
pub fn operator(id: ProblemId, eps: f64, mu: f64, p: &[f64], j: &[Jet]) -> Vec<f64> {
    match id {
        ProblemId::Cd1d => vec![-eps * j[0].d2[0] + j[0].d1[0] + j[0].u],
        ProblemId::Rd1d => vec![-eps * eps * j[0].d2[0] + 8.0 * j[0].u],
        ProblemId::CdCoupled => vec![
            -eps * j[0].d2[0] - j[0].d1[0] + 2.0 * j[0].u - j[1].u,
            -mu * j[1].d2[0] - 2.0 * j[1].d1[0] - j[0].u + 4.0 * j[1].u,
        ],
        ProblemId::RdCoupled => {
            vec![-eps * eps * j[0].d2[0] + 2.0 * j[0].u - j[1].u, -mu * mu * j[1].d2[0] - j[0].u + 4.0 * j[1].u]
        }
        ProblemId::Cd2dEx2 => {
            let u = &j[0];
            vec![-eps * (u.d2[0] + u.d2[1]) - (2.0 - p[0]) * u.d1[0] - u.d1[1] + 1.5 * u.u]
        }
        ProblemId::Cd2dEx3 => {
            let u = &j[0];
            vec![-eps * (u.d2[0] + u.d2[1]) - u.d1[0] - u.d1[1] + u.u]
        }
    }
}
