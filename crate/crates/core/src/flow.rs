//! Time integration of `x' = y`, `y' = -V'(x) - g(x) + f(t)`.
//!
//! The scheme is Dormand-Prince 8(5,3) with Hairer's step-size control and
//! 7th-order dense output. For the piecewise-linear potential the field is
//! only continuous at `x = 0`, so steps are cut exactly at every crossing.

use crate::action_angle::angle_of;
use crate::error::{Error, Result};
use crate::model::{OscillatorSystem, PotentialSpec};
use crate::numerics::{find_root, RootSpec};

use std::f64::consts::PI;

/// Position, velocity and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn amplitude(&self) -> f64 {
        self.x.abs() + self.y.abs()
    }
}

/// Integrator tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-11, abs_tol: 1e-12, max_step: 0.1, event_tol: 1e-12 }
    }
}

impl FlowSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rel_tol, self.abs_tol, self.max_step, self.event_tol]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("flow tolerances must be positive: {self:?}")))
        }
    }
}

/// Overflow guard on `|x| + |y|`.
pub const BLOW_UP: f64 = 1e12;

pub(crate) trait VectorField {
    fn eval(&self, t: f64, u: [f64; 2]) -> [f64; 2];
    fn kink_at_origin(&self) -> bool;
}

pub(crate) struct Forced<'a>(pub &'a OscillatorSystem);

impl VectorField for Forced<'_> {
    fn eval(&self, t: f64, u: [f64; 2]) -> [f64; 2] {
        [u[1], self.0.acceleration(u[0], t)]
    }
    fn kink_at_origin(&self) -> bool {
        self.0.potential.has_kink_at_origin()
    }
}

pub(crate) struct Free<'a>(pub &'a PotentialSpec);

impl VectorField for Free<'_> {
    fn eval(&self, _t: f64, u: [f64; 2]) -> [f64; 2] {
        [u[1], -self.0.dv(u[0])]
    }
    fn kink_at_origin(&self) -> bool {
        self.0.has_kink_at_origin()
    }
}

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

const SAFE: f64 = 0.9;
const FACC1: f64 = 1.0 / 0.333;
const FACC2: f64 = 1.0 / 6.0;

type V2 = [f64; 2];

#[inline]
fn lin(y: V2, h: f64, terms: &[(f64, V2)]) -> V2 {
    let mut out = y;
    for i in 0..2 {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Stages of one DOP853 step; `k[i]` is stage `i + 1`.
struct Trial {
    y_new: V2,
    err: f64,
    k: [V2; 12],
}

/// Dense output of the last accepted step.
#[derive(Clone, Copy)]
pub(crate) struct Dense {
    pub(crate) t_old: f64,
    h: f64,
    cont: [V2; 8],
}

impl Dense {
    pub(crate) fn eval(&self, t: f64) -> V2 {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
        out
    }
}

/// Record of one accepted step handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub state: PhaseState,
    /// The step ended on a crossing of `x = 0` that was cut out exactly.
    pub event: bool,
    /// `|x|` at the located crossing before it was snapped to zero.
    pub event_residual: f64,
}

pub(crate) struct Stepper<F: VectorField> {
    field: F,
    spec: FlowSpec,
    t: f64,
    u: V2,
    f0: V2,
    h: f64,
    dir: f64,
    facold: f64,
    last_rejected: bool,
    // data of the last accepted step, for dense output
    prev: Option<(f64, V2, f64, [V2; 12], V2)>,
    pub accepted: usize,
}

impl<F: VectorField> Stepper<F> {
    pub(crate) fn new(field: F, s0: PhaseState, dir: f64, spec: FlowSpec) -> Result<Self> {
        spec.validate()?;
        if !(s0.x.is_finite() && s0.y.is_finite() && s0.t.is_finite()) {
            return Err(Error::InvalidInput(format!("initial state must be finite: {s0:?}")));
        }
        let u = [s0.x, s0.y];
        let f0 = field.eval(s0.t, u);
        let mut st = Self {
            field,
            spec,
            t: s0.t,
            u,
            f0,
            h: 0.0,
            dir,
            facold: 1e-4,
            last_rejected: false,
            prev: None,
            accepted: 0,
        };
        st.h = dir * st.initial_step();
        Ok(st)
    }

    pub(crate) fn state(&self) -> PhaseState {
        PhaseState { x: self.u[0], y: self.u[1], t: self.t }
    }

    fn sk(&self, a: f64, b: f64) -> f64 {
        self.spec.abs_tol + self.spec.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&self) -> f64 {
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..2 {
            let sk = self.sk(self.u[i], self.u[i]);
            dnf += (self.f0[i] / sk).powi(2);
            dny += (self.u[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
        h = h.min(self.spec.max_step);
        let u1 = lin(self.u, self.dir * h, &[(1.0, self.f0)]);
        let f1 = self.field.eval(self.t + self.dir * h, u1);
        let mut der2: f64 = 0.0;
        for i in 0..2 {
            let sk = self.sk(self.u[i], self.u[i]);
            der2 += ((f1[i] - self.f0[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(self.spec.max_step)
    }

    fn trial(&self, t: f64, u: V2, f0: V2, h: f64) -> Trial {
        let f = &self.field;
        let s1 = f0;
        let s2 = f.eval(t + C2 * h, lin(u, h, &[(A21, s1)]));
        let s3 = f.eval(t + C3 * h, lin(u, h, &[(A31, s1), (A32, s2)]));
        let s4 = f.eval(t + C4 * h, lin(u, h, &[(A41, s1), (A43, s3)]));
        let s5 = f.eval(t + C5 * h, lin(u, h, &[(A51, s1), (A53, s3), (A54, s4)]));
        let s6 = f.eval(t + C6 * h, lin(u, h, &[(A61, s1), (A64, s4), (A65, s5)]));
        let s7 = f.eval(t + C7 * h, lin(u, h, &[(A71, s1), (A74, s4), (A75, s5), (A76, s6)]));
        let s8 = f.eval(t + C8 * h, lin(u, h, &[(A81, s1), (A84, s4), (A85, s5), (A86, s6), (A87, s7)]));
        let s9 = f.eval(
            t + C9 * h,
            lin(u, h, &[(A91, s1), (A94, s4), (A95, s5), (A96, s6), (A97, s7), (A98, s8)]),
        );
        let s10 = f.eval(
            t + C10 * h,
            lin(u, h, &[(A101, s1), (A104, s4), (A105, s5), (A106, s6), (A107, s7), (A108, s8), (A109, s9)]),
        );
        let s11 = f.eval(
            t + C11 * h,
            lin(
                u,
                h,
                &[(A111, s1), (A114, s4), (A115, s5), (A116, s6), (A117, s7), (A118, s8), (A119, s9), (A1110, s10)],
            ),
        );
        let yy1 = lin(
            u,
            h,
            &[
                (A121, s1),
                (A124, s4),
                (A125, s5),
                (A126, s6),
                (A127, s7),
                (A128, s8),
                (A129, s9),
                (A1210, s10),
                (A1211, s11),
            ],
        );
        let s12 = f.eval(t + h, yy1);
        let y_new = lin(
            u,
            h,
            &[(B1, s1), (B6, s6), (B7, s7), (B8, s8), (B9, s9), (B10, s10), (B11, s11), (B12, s12)],
        );

        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..2 {
            let sk = self.sk(u[i], y_new[i]);
            let bsum = B1 * s1[i]
                + B6 * s6[i]
                + B7 * s7[i]
                + B8 * s8[i]
                + B9 * s9[i]
                + B10 * s10[i]
                + B11 * s11[i]
                + B12 * s12[i];
            let e2 = bsum - BHH1 * s1[i] - BHH2 * s9[i] - BHH3 * s12[i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * s1[i]
                + ER6 * s6[i]
                + ER7 * s7[i]
                + ER8 * s8[i]
                + ER9 * s9[i]
                + ER10 * s10[i]
                + ER11 * s11[i]
                + ER12 * s12[i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * 2.0)).sqrt();
        Trial { y_new, err, k: [s1, s2, s3, s4, s5, s6, s7, s8, s9, s10, s11, s12] }
    }

    fn x_after(&self, tau: f64) -> f64 {
        self.trial(self.t, self.u, self.f0, tau).y_new[0]
    }

    fn check_finite(&self) -> Result<()> {
        let amp = self.u[0].abs() + self.u[1].abs();
        if !amp.is_finite() || amp > BLOW_UP {
            return Err(Error::BlowUp { t: self.t, amplitude: amp });
        }
        Ok(())
    }

    /// Takes one accepted step, never passing `t_limit`. Lands exactly on
    /// `t_limit` when it is within reach.
    pub(crate) fn step(&mut self, t_limit: f64) -> Result<StepInfo> {
        let remaining = (t_limit - self.t) * self.dir;
        if remaining <= 0.0 {
            return Err(Error::InvalidInput(format!("step limit {t_limit} is behind t = {}", self.t)));
        }
        let mut rejections = 0usize;
        loop {
            let mut h = self.h.abs().min(self.spec.max_step);
            let lands = h >= remaining;
            if lands {
                h = remaining;
            }
            let h = h * self.dir;
            if h.abs() < 1e-14 * self.t.abs().max(1.0) && !lands {
                return Err(Error::NonConvergent(format!("step size underflow at t = {}", self.t)));
            }
            if rejections > 1000 {
                return Err(Error::NonConvergent(format!("too many rejected steps at t = {}", self.t)));
            }
            let trial = self.trial(self.t, self.u, self.f0, h);
            if !(trial.err.is_finite() && trial.y_new.iter().all(|v| v.is_finite())) {
                self.h = h * 0.25;
                self.last_rejected = true;
                rejections += 1;
                continue;
            }

            let fac11 = trial.err.powf(1.0 / 8.0);
            let fac = FACC2.max(FACC1.min(fac11 / SAFE));
            if trial.err > 1.0 {
                self.h = h / FACC1.min(fac11 / SAFE);
                self.last_rejected = true;
                rejections += 1;
                continue;
            }
            let mut h_new = h / fac;
            if self.last_rejected {
                h_new = self.dir * h_new.abs().min(h.abs());
            }

            if self.field.kink_at_origin() && self.crosses(trial.y_new[0]) {
                let info = self.cut_at_crossing(h)?;
                self.h = h_new;
                self.facold = trial.err.max(1e-4);
                self.last_rejected = false;
                return Ok(info);
            }

            self.facold = trial.err.max(1e-4);
            self.last_rejected = false;
            let t_new = if lands { t_limit } else { self.t + h };
            let f_new = self.field.eval(t_new, trial.y_new);
            self.prev = Some((self.t, self.u, h, trial.k, f_new));
            self.t = t_new;
            self.u = trial.y_new;
            self.f0 = f_new;
            self.h = h_new;
            self.accepted += 1;
            self.check_finite()?;
            return Ok(StepInfo { state: self.state(), event: false, event_residual: 0.0 });
        }
    }

    // Side of the origin the orbit currently moves in.
    fn side(&self) -> f64 {
        if self.u[0] != 0.0 {
            self.u[0].signum()
        } else {
            (self.u[1] * self.dir).signum()
        }
    }

    fn crosses(&self, x_end: f64) -> bool {
        x_end != 0.0 && x_end.signum() != self.side()
    }

    fn cut_at_crossing(&mut self, h: f64) -> Result<StepInfo> {
        let side = self.side();
        // lower end of the bracket must sit on the starting side
        let mut lo = 0.0;
        if self.u[0] == 0.0 {
            let mut tau = h;
            for _ in 0..60 {
                tau *= 0.5;
                if self.x_after(tau) * side > 0.0 {
                    lo = tau;
                    break;
                }
            }
            if lo == 0.0 {
                return Err(Error::NonConvergent(format!("cannot leave x = 0 at t = {}", self.t)));
            }
        }
        let speed = self.u[1].abs().max(self.f0[1].abs() * h.abs()).max(1e-300);
        let tol = (0.5 * self.spec.event_tol / speed).max(4.0 * f64::EPSILON * h.abs());
        let root_spec = RootSpec { abs_tol: tol, max_iters: 200 };
        let tau = if h > 0.0 {
            find_root(|s| self.x_after(s), lo, h, &root_spec)?
        } else {
            find_root(|s| self.x_after(s), h, lo, &root_spec)?
        };
        let trial = self.trial(self.t, self.u, self.f0, tau);
        let residual = trial.y_new[0].abs();
        let mut u = trial.y_new;
        u[0] = 0.0;
        let t_new = self.t + tau;
        let f_new = self.field.eval(t_new, u);
        self.prev = Some((self.t, self.u, tau, trial.k, f_new));
        self.t = t_new;
        self.u = u;
        self.f0 = f_new;
        self.accepted += 1;
        self.check_finite()?;
        Ok(StepInfo { state: self.state(), event: true, event_residual: residual })
    }

    /// Dense interpolant over the last accepted step.
    pub(crate) fn dense(&self) -> Option<Dense> {
        let (t_old, y_old, h, k, f_new) = self.prev?;
        let f = &self.field;
        let [s1, _, _, _, _, s6, s7, s8, s9, s10, s11, s12] = k;
        let y_new = self.u;
        let mut cont = [[0.0; 2]; 8];
        for i in 0..2 {
            let ydiff = y_new[i] - y_old[i];
            let bspl = h * s1[i] - ydiff;
            cont[0][i] = y_old[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * f_new[i] - bspl;
        }
        let s14 = f.eval(
            t_old + C14 * h,
            lin(
                y_old,
                h,
                &[(A141, s1), (A147, s7), (A148, s8), (A149, s9), (A1410, s10), (A1411, s11), (A1412, s12), (A1413, f_new)],
            ),
        );
        let s15 = f.eval(
            t_old + C15 * h,
            lin(
                y_old,
                h,
                &[(A151, s1), (A156, s6), (A157, s7), (A158, s8), (A1511, s11), (A1512, s12), (A1513, f_new), (A1514, s14)],
            ),
        );
        let s16 = f.eval(
            t_old + C16 * h,
            lin(
                y_old,
                h,
                &[
                    (A161, s1),
                    (A166, s6),
                    (A167, s7),
                    (A168, s8),
                    (A169, s9),
                    (A1613, f_new),
                    (A1614, s14),
                    (A1615, s15),
                ],
            ),
        );
        let d = [
            [D41, D46, D47, D48, D49, D410, D411, D412, D413, D414, D415, D416],
            [D51, D56, D57, D58, D59, D510, D511, D512, D513, D514, D515, D516],
            [D61, D66, D67, D68, D69, D610, D611, D612, D613, D614, D615, D616],
            [D71, D76, D77, D78, D79, D710, D711, D712, D713, D714, D715, D716],
        ];
        let ks = [s1, s6, s7, s8, s9, s10, s11, s12, f_new, s14, s15, s16];
        for (row, coeffs) in d.iter().enumerate() {
            for i in 0..2 {
                let acc: f64 = coeffs.iter().zip(&ks).map(|(c, k)| c * k[i]).sum();
                cont[4 + row][i] = h * acc;
            }
        }
        Some(Dense { t_old, h, cont })
    }

    /// Steps up to exactly `t_end`, reporting each accepted step.
    pub(crate) fn run_to(&mut self, t_end: f64, on_step: &mut dyn FnMut(&StepInfo)) -> Result<()> {
        while (t_end - self.t) * self.dir > 0.0 {
            let info = self.step(t_end)?;
            on_step(&info);
        }
        Ok(())
    }
}

fn direction(from: f64, to: f64) -> f64 {
    if to >= from {
        1.0
    } else {
        -1.0
    }
}

/// State of the forced system at `t_end`. Backward integration is allowed.
pub fn integrate_to(sys: &OscillatorSystem, s0: PhaseState, t_end: f64, spec: &FlowSpec) -> Result<PhaseState> {
    integrate_with(sys, s0, t_end, spec, |_| {})
}

/// Like [`integrate_to`], calling `on_step` after every accepted step.
pub fn integrate_with<C: FnMut(&StepInfo)>(
    sys: &OscillatorSystem,
    s0: PhaseState,
    t_end: f64,
    spec: &FlowSpec,
    mut on_step: C,
) -> Result<PhaseState> {
    if !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("end time must be finite, got {t_end}")));
    }
    let mut st = Stepper::new(Forced(sys), s0, direction(s0.t, t_end), *spec)?;
    st.run_to(t_end, &mut on_step)?;
    Ok(st.state())
}

/// Autonomous flow of `x'' + V'(x) = 0`.
pub(crate) fn free_flow(p: &PotentialSpec, s0: PhaseState, t_end: f64, spec: &FlowSpec) -> Result<PhaseState> {
    let mut st = Stepper::new(Free(p), s0, direction(s0.t, t_end), *spec)?;
    st.run_to(t_end, &mut |_| {})?;
    Ok(st.state())
}

/// Stroboscopic samples of one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct StrobeOrbit {
    /// States at `t0 + 2πk`, `k = 1, 2, ...`.
    pub states: Vec<PhaseState>,
    /// The overflow guard fired before all periods were completed.
    pub escaped: bool,
}

/// Samples the orbit at `t = s0.t + 2πk`, `k = 1..=n_periods`.
pub fn strobe_orbit(sys: &OscillatorSystem, s0: PhaseState, n_periods: usize, spec: &FlowSpec) -> Result<StrobeOrbit> {
    if n_periods == 0 {
        return Err(Error::InvalidInput("n_periods must be at least 1".into()));
    }
    let mut st = Stepper::new(Forced(sys), s0, 1.0, *spec)?;
    let mut states = Vec::with_capacity(n_periods);
    for k in 1..=n_periods {
        match st.run_to(s0.t + 2.0 * PI * k as f64, &mut |_| {}) {
            Ok(()) => states.push(st.state()),
            Err(Error::BlowUp { .. }) => return Ok(StrobeOrbit { states, escaped: true }),
            Err(e) => return Err(e),
        }
    }
    Ok(StrobeOrbit { states, escaped: false })
}

/// Integrates until the angle variable has swept `revolutions` full turns
/// of length `2π/ω`. Returns the end state and the elapsed time.
///
/// The angle decreases along the unperturbed flow, so each step must report
/// a decrement; anything else means the energy is too low for the
/// action-angle picture to hold along the orbit.
pub fn angle_return(
    sys: &OscillatorSystem,
    s0: PhaseState,
    revolutions: usize,
    spec: &FlowSpec,
) -> Result<(PhaseState, f64)> {
    if revolutions == 0 {
        return Err(Error::InvalidInput("revolutions must be at least 1".into()));
    }
    if s0.x == 0.0 && s0.y == 0.0 {
        return Err(Error::OriginState);
    }
    let p = &sys.potential;
    let period = 2.0 * PI / sys.omega;
    let target = revolutions as f64 * period;
    // generous horizon; a monotone angle gets there long before
    let horizon = s0.t + 8.0 * target + 100.0;

    let mut st = Stepper::new(Forced(sys), s0, 1.0, *spec)?;
    let theta0 = angle_of(p, s0.x, s0.y)?;
    let mut theta_prev = theta0;
    let mut swept = 0.0;
    loop {
        let info = st.step(horizon)?;
        let s = info.state;
        let theta = angle_of(p, s.x, s.y).map_err(|_| Error::OriginApproach { t: s.t })?;
        let dec = (theta_prev - theta).rem_euclid(period);
        if dec > 0.5 * period {
            return Err(Error::AngleNotMonotone { t: s.t });
        }
        if swept + dec >= target {
            let dense = st.dense().expect("an accepted step exists");
            let base = swept;
            let from = theta_prev;
            let residual = |t: f64| -> f64 {
                let u = dense.eval(t);
                match angle_of(p, u[0], u[1]) {
                    Ok(th) => {
                        let d = (from - th).rem_euclid(period);
                        // right after the step start a tiny backward wobble
                        // wraps to ≈ period
                        let d = if d > 0.5 * period { d - period } else { d };
                        base + d - target
                    }
                    Err(_) => f64::NAN,
                }
            };
            let t_old = dense.t_old;
            let t_hit = if swept + dec == target {
                s.t
            } else {
                let tol = 1e-13 * t_old.abs().max(1.0);
                find_root(residual, t_old, s.t, &RootSpec { abs_tol: tol, max_iters: 200 })
                    .map_err(|e| match e {
                        Error::NoBracket { .. } => Error::AngleNotMonotone { t: s.t },
                        other => other,
                    })?
            };
            let u = if t_hit == s.t { [s.x, s.y] } else { dense.eval(t_hit) };
            let end = PhaseState { x: u[0], y: u[1], t: t_hit };
            return Ok((end, t_hit - s0.t));
        }
        swept += dec;
        theta_prev = theta;
        if s.t >= horizon {
            return Err(Error::NonConvergent(format!(
                "angle swept only {swept} of {target} by t = {}",
                s.t
            )));
        }
    }
}
