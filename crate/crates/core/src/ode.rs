//! Dormand–Prince 8(5,3) integrator with 7th-order dense output.
//!
//! The state update is compensated (Kahan summation) so that long, tight-
//! tolerance runs do not accumulate rounding in the solution itself.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude; `0` means unbounded.
    pub h_max: f64,
    /// Smallest admissible step magnitude before reporting underflow.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-13,
            h_max: 0.0,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 8],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|i| {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= a && t <= b
    }
}

/// Stepper for `y' = f(t, y)`; `f` writes the derivative into its last argument.
pub struct Dop853<const N: usize, F: FnMut(f64, &[f64; N], &mut [f64; N])> {
    f: F,
    opts: OdeOptions,
    t: f64,
    y: [f64; N],
    comp: [f64; N],
    k1: [f64; N],
    h: f64,
    last_rejected: bool,
    steps: usize,
    evals: usize,
    // Data of the last accepted step, for the dense output.
    t_old: f64,
    h_old: f64,
    y_old: [f64; N],
    stages: [[f64; N]; 13],
    dense_cache: Option<DenseSegment<N>>,
}

impl<const N: usize, F: FnMut(f64, &[f64; N], &mut [f64; N])> Dop853<N, F> {
    /// Starts at `(t0, y0)`, integrating toward `direction`'s sign.
    pub fn new(mut f: F, t0: f64, y0: [f64; N], direction: f64, opts: OdeOptions) -> Self {
        let mut k1 = [0.0; N];
        f(t0, &y0, &mut k1);
        let mut s = Self {
            f,
            opts,
            t: t0,
            y: y0,
            comp: [0.0; N],
            k1,
            h: 0.0,
            last_rejected: false,
            steps: 0,
            evals: 1,
            t_old: t0,
            h_old: 0.0,
            y_old: y0,
            stages: [[0.0; N]; 13],
            dense_cache: None,
        };
        s.h = s.initial_step(direction.signum());
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    /// Start of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn y_prev(&self) -> &[f64; N] {
        &self.y_old
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, dir: f64) -> f64 {
        let mut f0 = [0.0; N];
        (self.f)(self.t, &self.y, &mut f0);
        self.evals += 1;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (f0[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        if self.opts.h_max > 0.0 {
            h = h.min(self.opts.h_max);
        }
        let y1: [f64; N] = std::array::from_fn(|i| self.y[i] + dir * h * f0[i]);
        let mut f1 = [0.0; N];
        (self.f)(self.t + dir * h, &y1, &mut f1);
        self.evals += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            der2 += ((f1[i] - f0[i]) / self.scale(self.y[i], 0.0)).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        let mut h = (100.0 * h).min(h1);
        if self.opts.h_max > 0.0 {
            h = h.min(self.opts.h_max);
        }
        dir * h
    }

    /// Takes one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        let dir = self.h.signum();
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::TooManySteps(self.steps));
            }
            let remaining = t_end - self.t;
            if remaining * dir <= 0.0 {
                return Err(Error::InvalidArgument("step requested past the end point".into()));
            }
            let mut h = self.h;
            if self.opts.h_max > 0.0 && h.abs() > self.opts.h_max {
                h = dir * self.opts.h_max;
            }
            let last = (self.t + 1.01 * h - t_end) * dir >= 0.0;
            if last {
                h = remaining;
            }
            if h.abs() < self.opts.h_min && !last {
                return Err(Error::StepUnderflow { t: self.t, h: h.abs() });
            }
            self.steps += 1;
            let (err, y_inc) = self.attempt(h);
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / SAFE).clamp(FACC2, FACC1);
            let mut h_new = h / fac;
            if err <= 1.0 {
                self.accept(h, &y_inc);
                if self.last_rejected {
                    h_new = if dir > 0.0 { h_new.min(h) } else { h_new.max(h) };
                }
                self.last_rejected = false;
                self.h = h_new;
                return Ok(());
            }
            self.last_rejected = true;
            self.h = h / FACC1.min(fac11 / SAFE);
            if self.h.abs() < self.opts.h_min {
                return Err(Error::StepUnderflow { t: self.t, h: self.h.abs() });
            }
        }
    }

    /// Runs the twelve stages; returns the scaled error and the increment `h·Σ b k`.
    fn attempt(&mut self, h: f64) -> (f64, [f64; N]) {
        let t = self.t;
        let y = self.y;
        let k = &mut self.stages;
        k[0] = self.k1;
        let combo = |k: &[[f64; N]; 13], coefs: &[(usize, f64)]| -> [f64; N] {
            std::array::from_fn(|i| {
                let mut s = 0.0;
                for &(j, a) in coefs {
                    s += a * k[j][i];
                }
                y[i] + h * s
            })
        };
        let mut eval = |k: &mut [[f64; N]; 13], idx: usize, c: f64, coefs: &[(usize, f64)]| {
            let yy = combo(k, coefs);
            let mut out = [0.0; N];
            (self.f)(t + c * h, &yy, &mut out);
            k[idx] = out;
        };
        eval(k, 1, C2, &[(0, A21)]);
        eval(k, 2, C3, &[(0, A31), (1, A32)]);
        eval(k, 3, C4, &[(0, A41), (2, A43)]);
        eval(k, 4, C5, &[(0, A51), (2, A53), (3, A54)]);
        eval(k, 5, C6, &[(0, A61), (3, A64), (4, A65)]);
        eval(k, 6, C7, &[(0, A71), (3, A74), (4, A75), (5, A76)]);
        eval(k, 7, C8, &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)]);
        eval(k, 8, C9, &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)]);
        eval(k, 9, C10, &[(0, A101), (3, A104), (4, A105), (5, A106), (6, A107), (7, A108), (8, A109)]);
        eval(
            k,
            10,
            C11,
            &[(0, A111), (3, A114), (4, A115), (5, A116), (6, A117), (7, A118), (8, A119), (9, A1110)],
        );
        eval(
            k,
            11,
            1.0,
            &[(0, A121), (3, A124), (4, A125), (5, A126), (6, A127), (7, A128), (8, A129), (9, A1210), (10, A1211)],
        );
        self.evals += 11;
        let k = &self.stages;
        let mut inc = [0.0; N];
        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..N {
            let b = B1 * k[0][i] + B6 * k[5][i] + B7 * k[6][i] + B8 * k[7][i] + B9 * k[8][i]
                + B10 * k[9][i] + B11 * k[10][i] + B12 * k[11][i];
            inc[i] = h * b;
            let sk = self.scale(y[i], y[i] + inc[i]);
            let e2 = b - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k[0][i] + ER6 * k[5][i] + ER7 * k[6][i] + ER8 * k[7][i] + ER9 * k[8][i]
                + ER10 * k[9][i] + ER11 * k[10][i] + ER12 * k[11][i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        (h.abs() * err * (1.0 / (deno * N as f64)).sqrt(), inc)
    }

    fn accept(&mut self, h: f64, inc: &[f64; N]) {
        self.t_old = self.t;
        self.h_old = h;
        self.y_old = self.y;
        for i in 0..N {
            let d = inc[i] + self.comp[i];
            let s = self.y[i] + d;
            self.comp[i] = d - (s - self.y[i]);
            self.y[i] = s;
        }
        self.t = self.t_old + h;
        let mut f_new = [0.0; N];
        (self.f)(self.t, &self.y, &mut f_new);
        self.evals += 1;
        self.stages[12] = f_new;
        self.k1 = f_new;
        self.dense_cache = None;
    }

    /// Continuous extension of the last accepted step (three extra evaluations).
    pub fn dense(&mut self) -> &DenseSegment<N> {
        if self.dense_cache.is_none() {
            let seg = self.build_dense();
            self.dense_cache = Some(seg);
        }
        self.dense_cache.as_ref().unwrap()
    }

    fn build_dense(&mut self) -> DenseSegment<N> {
        let h = self.h_old;
        let y0 = self.y_old;
        let y1 = self.y;
        // Stage aliases: 0 = k1, 5..11 = k6..k12, 12 = f(t1, y1).
        let k = self.stages;
        let mut cont = [[0.0; N]; 8];
        for i in 0..N {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            cont[0][i] = y0[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * k[12][i] - bspl;
        }
        let lin = |d: &[f64; 8]| -> [f64; N] {
            std::array::from_fn(|i| {
                d[0] * k[0][i] + d[1] * k[5][i] + d[2] * k[6][i] + d[3] * k[7][i] + d[4] * k[8][i]
                    + d[5] * k[9][i] + d[6] * k[10][i] + d[7] * k[11][i]
            })
        };
        let mut c5 = lin(&[D41, D46, D47, D48, D49, D410, D411, D412]);
        let mut c6 = lin(&[D51, D56, D57, D58, D59, D510, D511, D512]);
        let mut c7 = lin(&[D61, D66, D67, D68, D69, D610, D611, D612]);
        let mut c8 = lin(&[D71, D76, D77, D78, D79, D710, D711, D712]);

        let t0 = self.t_old;
        let stage = |f: &mut F, c: f64, coefs: &[([f64; N], f64)]| -> [f64; N] {
            let yy: [f64; N] = std::array::from_fn(|i| {
                let mut s = 0.0;
                for (kk, a) in coefs {
                    s += a * kk[i];
                }
                y0[i] + h * s
            });
            let mut out = [0.0; N];
            f(t0 + c * h, &yy, &mut out);
            out
        };
        let k14 = stage(
            &mut self.f,
            C14,
            &[
                (k[0], A141),
                (k[6], A147),
                (k[7], A148),
                (k[8], A149),
                (k[9], A1410),
                (k[10], A1411),
                (k[11], A1412),
                (k[12], A1413),
            ],
        );
        let k15 = stage(
            &mut self.f,
            C15,
            &[
                (k[0], A151),
                (k[5], A156),
                (k[6], A157),
                (k[7], A158),
                (k[10], A1511),
                (k[11], A1512),
                (k[12], A1513),
                (k14, A1514),
            ],
        );
        let k16 = stage(
            &mut self.f,
            C16,
            &[
                (k[0], A161),
                (k[5], A166),
                (k[6], A167),
                (k[7], A168),
                (k[8], A169),
                (k[12], A1613),
                (k14, A1614),
                (k15, A1615),
            ],
        );
        self.evals += 3;
        for i in 0..N {
            c5[i] = h * (c5[i] + D413 * k[12][i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
            c6[i] = h * (c6[i] + D513 * k[12][i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
            c7[i] = h * (c7[i] + D613 * k[12][i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
            c8[i] = h * (c8[i] + D713 * k[12][i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
        }
        cont[4] = c5;
        cont[5] = c6;
        cont[6] = c7;
        cont[7] = c8;
        DenseSegment { t0, h, cont }
    }
}

/// Root of `g` on `[a, b]` given opposite signs at the ends (Illinois variant
/// of regula falsi with a bisection safeguard).
pub fn find_root(mut g: impl FnMut(f64) -> f64, a: f64, b: f64, ga: f64, gb: f64, tol: f64) -> f64 {
    let (mut a, mut b, mut ga, mut gb) = (a, b, ga, gb);
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let mut side = 0;
    let mut best = (a, ga.abs());
    for it in 0..200 {
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) || it % 8 == 7 {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc.abs() < best.1 {
            best = (c, gc.abs());
        }
        if gc == 0.0 || gc.abs() < tol || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
            return c;
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    best.0
}

const SAFE: f64 = 0.9;
const FACC1: f64 = 1.0 / 0.333;
const FACC2: f64 = 1.0 / 6.0;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let mut s = Dop853::new(oscillator, 0.0, [1.0, 0.0], 1.0, OdeOptions::default());
        let t_end = 20.0;
        while s.t() < t_end {
            s.step(t_end).unwrap();
        }
        assert_eq!(s.t(), t_end);
        assert!((s.y()[0] - t_end.cos()).abs() < 1e-10);
        assert!((s.y()[1] + t_end.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let mut s = Dop853::new(oscillator, 0.0, [1.0, 0.0], 1.0, OdeOptions::default());
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            s.step(10.0).unwrap();
            let seg = s.dense().clone();
            for k in 0..=10 {
                let t = seg.t0 + seg.h * k as f64 / 10.0;
                let y = seg.eval(t);
                worst = worst.max((y[0] - t.cos()).abs());
            }
            assert!((seg.eval(seg.t1())[0] - s.y()[0]).abs() < 1e-14);
        }
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn backward_integration() {
        let mut s = Dop853::new(oscillator, 0.0, [1.0, 0.0], -1.0, OdeOptions::default());
        while s.t() > -5.0 {
            s.step(-5.0).unwrap();
        }
        assert!((s.y()[0] - (-5f64).cos()).abs() < 1e-10);
    }

    #[test]
    fn exponential_growth_relative_accuracy() {
        let f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0];
        let mut s = Dop853::new(f, 0.0, [1.0], 1.0, OdeOptions::with_tolerances(1e-14, 1e-300));
        while s.t() < 10.0 {
            s.step(10.0).unwrap();
        }
        assert!((s.y()[0] / 10f64.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn root_finder_on_dense_output() {
        let r = find_root(|t| t.cos(), 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-15);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }
}
