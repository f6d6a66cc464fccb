//! Plant, controller, detector, attack resources and the augmented
//! closed-loop / detector-error systems driven by the attack vector.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{spectral_radius, Blocks};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Process-noise input.
    pub g: DMatrix<f64>,
    /// Fault / physical-attack input.
    pub f: DMatrix<f64>,
    pub delta_w: f64,
    pub delta_v: f64,
    pub sample_time: f64,
}

impl PlantModel {
    /// Plant with `G = I`, no fault input and zero noise-mean bounds.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self {
            a,
            b,
            c,
            g: DMatrix::identity(n, n),
            f: DMatrix::zeros(n, 0),
            delta_w: 0.0,
            delta_v: 0.0,
            sample_time: 1.0,
        }
        .validated()
    }

    pub fn with_fault(mut self, f: DMatrix<f64>) -> Result<Self> {
        self.f = f;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let n = self.a.nrows();
        let ok = self.a.is_square()
            && n > 0
            && self.b.nrows() == n
            && self.c.ncols() == n
            && self.g.nrows() == n
            && self.f.nrows() == n;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "plant A {:?}, B {:?}, C {:?}, G {:?}, F {:?}",
                self.a.shape(),
                self.b.shape(),
                self.c.shape(),
                self.g.shape(),
                self.f.shape()
            )));
        }
        if self.delta_w < 0.0 || self.delta_v < 0.0 || !(self.sample_time > 0.0) {
            return Err(Error::InvalidParameter(
                "noise bounds must be nonnegative and the sample time positive".into(),
            ));
        }
        Ok(self)
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn faults(&self) -> usize {
        self.f.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerModel {
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub cc: DMatrix<f64>,
    pub dc: DMatrix<f64>,
}

impl ControllerModel {
    pub fn new(ac: DMatrix<f64>, bc: DMatrix<f64>, cc: DMatrix<f64>, dc: DMatrix<f64>) -> Self {
        Self { ac, bc, cc, dc }
    }

    /// Static output feedback `u = D y`.
    pub fn static_gain(dc: DMatrix<f64>) -> Self {
        let (q, p) = dc.shape();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, p), DMatrix::zeros(q, 0), dc)
    }

    pub fn states(&self) -> usize {
        self.ac.nrows()
    }

    pub fn check(&self, plant: &PlantModel) -> Result<()> {
        let m = self.ac.nrows();
        let (p, q) = (plant.outputs(), plant.inputs());
        let ok = self.ac.is_square()
            && self.bc.shape() == (m, p)
            && self.cc.shape() == (q, m)
            && self.dc.shape() == (q, p);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "controller Ac {:?}, Bc {:?}, Cc {:?}, Dc {:?} for plant with {q} inputs, {p} outputs",
                self.ac.shape(),
                self.bc.shape(),
                self.cc.shape(),
                self.dc.shape()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub k: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub delta_r: f64,
    pub delta_alpha: f64,
}

impl DetectorModel {
    /// Detector with `V = I`.
    pub fn new(k: DMatrix<f64>, delta_r: f64, delta_alpha: f64) -> Self {
        let p = k.ncols();
        Self {
            k,
            v: DMatrix::identity(p, p),
            delta_r,
            delta_alpha,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.delta_r + self.delta_alpha
    }

    pub fn residues(&self) -> usize {
        self.v.nrows()
    }

    pub fn check(&self, plant: &PlantModel) -> Result<()> {
        let (n, p) = (plant.states(), plant.outputs());
        if self.k.shape() != (n, p) || self.v.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "detector K {:?}, V {:?} for plant with {n} states, {p} outputs",
                self.k.shape(),
                self.v.shape()
            )));
        }
        if !(self.delta_r > 0.0 && self.delta_alpha > 0.0) {
            return Err(Error::InvalidParameter("detector thresholds must be positive".into()));
        }
        let ae = error_dynamics(plant, &self.k);
        let rho = spectral_radius(&ae);
        if rho >= 1.0 {
            return Err(Error::UnstableSystem {
                what: "(I - KC)A",
                radius: rho,
            });
        }
        Ok(())
    }
}

fn error_dynamics(plant: &PlantModel, k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = plant.states();
    (DMatrix::identity(n, n) - k * &plant.c) * &plant.a
}

/// Channel sets available to the adversary, 0-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackResources {
    pub disclosure_u: Vec<usize>,
    pub disclosure_y: Vec<usize>,
    pub decept_u: Vec<usize>,
    pub decept_y: Vec<usize>,
    pub dos_u: Vec<usize>,
    pub dos_y: Vec<usize>,
    /// Selected columns of `F`; empty means no physical attack.
    pub physical: Vec<usize>,
}

impl AttackResources {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, plant: &PlantModel) -> Result<()> {
        let (q, p, d) = (plant.inputs(), plant.outputs(), plant.faults());
        for (set, total) in [
            (&self.disclosure_u, q),
            (&self.decept_u, q),
            (&self.dos_u, q),
            (&self.disclosure_y, p),
            (&self.decept_y, p),
            (&self.dos_y, p),
            (&self.physical, d),
        ] {
            for (i, &c) in set.iter().enumerate() {
                if c >= total {
                    return Err(Error::IndexOutOfRange { index: c, total });
                }
                if set[..i].contains(&c) {
                    return Err(Error::InvalidResources(format!("channel {c} listed twice")));
                }
            }
        }
        Ok(())
    }

    pub fn gamma_u(&self, q: usize) -> Result<DMatrix<f64>> {
        incidence(&self.decept_u, q)
    }
    pub fn gamma_y(&self, p: usize) -> Result<DMatrix<f64>> {
        incidence(&self.decept_y, p)
    }
    pub fn upsilon_u(&self, q: usize) -> Result<DMatrix<f64>> {
        incidence(&self.disclosure_u, q)
    }
    pub fn upsilon_y(&self, p: usize) -> Result<DMatrix<f64>> {
        incidence(&self.disclosure_y, p)
    }
}

/// `total × |channels|` binary matrix with one unit column per selected
/// channel, in the given order.
pub fn incidence(channels: &[usize], total: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(total, channels.len());
    for (j, &c) in channels.iter().enumerate() {
        if c >= total {
            return Err(Error::IndexOutOfRange { index: c, total });
        }
        m[(c, j)] = 1.0;
    }
    Ok(m)
}

/// Ordering of the attack vector `a_k = [f_k; bᵘ_k; bʸ_{k+1}; bʸ_k]`.
///
/// The steady-state and bias computations work on the reduced vector
/// `[f; bᵘ; bʸ]`, where a constant sensor bias occupies both sensor slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackLayout {
    pub physical: usize,
    pub actuator: usize,
    pub sensor: usize,
}

impl AttackLayout {
    pub fn dim(&self) -> usize {
        self.physical + self.actuator + 2 * self.sensor
    }
    pub fn reduced_dim(&self) -> usize {
        self.physical + self.actuator + self.sensor
    }
    pub fn f(&self) -> Range<usize> {
        0..self.physical
    }
    pub fn bu(&self) -> Range<usize> {
        let s = self.physical;
        s..s + self.actuator
    }
    pub fn by_next(&self) -> Range<usize> {
        let s = self.physical + self.actuator;
        s..s + self.sensor
    }
    pub fn by_now(&self) -> Range<usize> {
        let s = self.physical + self.actuator + self.sensor;
        s..s + self.sensor
    }

    /// Maps a reduced vector `[f; bᵘ; bʸ]` to the layout, copying `bʸ` into
    /// both sensor slots.
    pub fn expansion(&self) -> DMatrix<f64> {
        let (d, u, y) = (self.physical, self.actuator, self.sensor);
        let mut e = DMatrix::zeros(self.dim(), self.reduced_dim());
        for i in 0..d + u + y {
            e[(i, i)] = 1.0;
        }
        for i in 0..y {
            e[(d + u + y + i, d + u + i)] = 1.0;
        }
        e
    }

    /// Assembles `a_k` from the channel-level pieces of steps `k` and `k+1`.
    pub fn assemble(&self, f: &DVector<f64>, bu: &DVector<f64>, by_next: &DVector<f64>, by_now: &DVector<f64>) -> DVector<f64> {
        crate::numerics::vstack(&[f, bu, by_next, by_now])
    }

    /// Splits a reduced vector into `(f, bᵘ, bʸ)`.
    pub fn split_reduced(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (d, u, y) = (self.physical, self.actuator, self.sensor);
        (
            v.rows(0, d).into_owned(),
            v.rows(d, u).into_owned(),
            v.rows(d + u, y).into_owned(),
        )
    }
}

/// State-space matrices `(A, B, C, D, G, H)` of one augmented system.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

/// Closed loop `η = [x; z]` and detector error `ξ = x − x̂` under attack.
#[derive(Debug, Clone)]
pub struct LoopSystem {
    pub plant: PlantModel,
    pub controller: ControllerModel,
    pub detector: DetectorModel,
    pub resources: AttackResources,
    pub closed: AugmentedSystem,
    pub error: AugmentedSystem,
    pub layout: AttackLayout,
    /// Selected physical columns of `F`.
    pub f_sel: DMatrix<f64>,
}

fn layout_for(resources: &AttackResources) -> AttackLayout {
    AttackLayout {
        physical: resources.physical.len(),
        actuator: resources.decept_u.len(),
        sensor: resources.decept_y.len(),
    }
}

fn selected_f(plant: &PlantModel, resources: &AttackResources) -> DMatrix<f64> {
    plant.f.select_columns(resources.physical.iter())
}

/// Closed-loop matrices of `η_{k+1} = 𝐀η_k + 𝐁a_k + 𝐆[w_k; v_k]`,
/// `ỹ_k = 𝐂η_k + 𝐃a_k + 𝐇[w_k; v_k]`.
pub fn build_closed_loop(
    plant: &PlantModel,
    controller: &ControllerModel,
    resources: &AttackResources,
) -> Result<AugmentedSystem> {
    controller.check(plant)?;
    resources.validate(plant)?;
    let (n, m, p, q) = (plant.states(), controller.states(), plant.outputs(), plant.inputs());
    let lay = layout_for(resources);
    let (a, b, c) = (&plant.a, &plant.b, &plant.c);
    let (ac, bc, cc, dc) = (&controller.ac, &controller.bc, &controller.cc, &controller.dc);
    let gu = resources.gamma_u(q)?;
    let gy = resources.gamma_y(p)?;
    let nw = plant.g.ncols();

    let big_a = Blocks::new(&[n, m], &[n, m])
        .set(0, 0, &(a + b * dc * c))
        .set(0, 1, &(b * cc))
        .set(1, 0, &(bc * c))
        .set(1, 1, ac)
        .build();
    let big_b = Blocks::new(&[n, m], &[lay.physical, lay.actuator, lay.sensor, lay.sensor])
        .set(0, 0, &selected_f(plant, resources))
        .set(0, 1, &(b * &gu))
        .set(0, 3, &(b * dc * &gy))
        .set(1, 3, &(bc * &gy))
        .build();
    let big_c = Blocks::new(&[p], &[n, m]).set(0, 0, c).build();
    let big_d = Blocks::new(&[p], &[lay.physical, lay.actuator, lay.sensor, lay.sensor])
        .set(0, 3, &gy)
        .build();
    let big_g = Blocks::new(&[n, m], &[nw, p])
        .set(0, 0, &plant.g)
        .set(0, 1, &(b * dc))
        .set(1, 1, bc)
        .build();
    let big_h = Blocks::new(&[p], &[nw, p])
        .set(0, 1, &DMatrix::identity(p, p))
        .build();
    Ok(AugmentedSystem {
        a: big_a,
        b: big_b,
        c: big_c,
        d: big_d,
        g: big_g,
        h: big_h,
    })
}

/// Detector-error matrices of `ξ_k = 𝐀eξ_{k−1} + 𝐁e a_{k−1} + 𝐆e[w_{k−1}; v_k]`,
/// `r_k = 𝐂eξ_{k−1} + 𝐃e a_{k−1} + 𝐇e[w_{k−1}; v_k]`.
pub fn build_detector_error(
    plant: &PlantModel,
    detector: &DetectorModel,
    resources: &AttackResources,
) -> Result<AugmentedSystem> {
    if detector.k.shape() != (plant.states(), plant.outputs()) || detector.v.ncols() != plant.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "detector K {:?}, V {:?}",
            detector.k.shape(),
            detector.v.shape()
        )));
    }
    resources.validate(plant)?;
    let (n, p, q) = (plant.states(), plant.outputs(), plant.inputs());
    let lay = layout_for(resources);
    let (a, b, c, k, v) = (&plant.a, &plant.b, &plant.c, &detector.k, &detector.v);
    let gu = resources.gamma_u(q)?;
    let gy = resources.gamma_y(p)?;
    let nw = plant.g.ncols();
    let pd = v.nrows();

    let ikc = DMatrix::identity(n, n) - k * c;
    let ick = DMatrix::identity(p, p) - c * k;
    let f_sel = selected_f(plant, resources);
    let cols = [lay.physical, lay.actuator, lay.sensor, lay.sensor];

    let ae = &ikc * a;
    let be = Blocks::new(&[n], &cols)
        .set(0, 0, &(&ikc * &f_sel))
        .set(0, 1, &(&ikc * b * &gu))
        .set(0, 2, &(-(k * &gy)))
        .build();
    let ce = v * c * &ae;
    let de = Blocks::new(&[pd], &cols)
        .set(0, 0, &(v * c * &ikc * &f_sel))
        .set(0, 1, &(v * c * &ikc * b * &gu))
        .set(0, 2, &(v * &ick * &gy))
        .build();
    let ge = Blocks::new(&[n], &[nw, p])
        .set(0, 0, &(&ikc * &plant.g))
        .set(0, 1, &(-k))
        .build();
    let he = Blocks::new(&[pd], &[nw, p])
        .set(0, 0, &(v * c * &ikc * &plant.g))
        .set(0, 1, &(v * &ick))
        .build();
    Ok(AugmentedSystem {
        a: ae,
        b: be,
        c: ce,
        d: de,
        g: ge,
        h: he,
    })
}

impl LoopSystem {
    pub fn new(
        plant: PlantModel,
        controller: ControllerModel,
        detector: DetectorModel,
        resources: AttackResources,
    ) -> Result<Self> {
        let closed = build_closed_loop(&plant, &controller, &resources)?;
        let error = build_detector_error(&plant, &detector, &resources)?;
        let layout = layout_for(&resources);
        let f_sel = selected_f(&plant, &resources);
        Ok(Self {
            plant,
            controller,
            detector,
            resources,
            closed,
            error,
            layout,
            f_sel,
        })
    }

    /// Same loop with a different resource set.
    pub fn with_resources(&self, resources: AttackResources) -> Result<Self> {
        Self::new(
            self.plant.clone(),
            self.controller.clone(),
            self.detector.clone(),
            resources,
        )
    }

    pub fn plant_states(&self) -> usize {
        self.plant.states()
    }
}

/// Steady-state gains `(G_ra, G_xa)` from the reduced constant attack
/// `[f; bᵘ; bʸ]` to the residual and to the plant state.
pub fn steady_state_gains(lp: &LoopSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let e = lp.layout.expansion();
    let (cl, er) = (&lp.closed, &lp.error);
    for (what, m) in [("closed loop", &cl.a), ("detector error", &er.a)] {
        let radius = spectral_radius(m);
        if radius >= 1.0 {
            return Err(Error::UnstableSystem { what, radius });
        }
    }
    let g_ra = dc_gain(&er.a, &(&er.b * &e), &er.c, &(&er.d * &e))?;
    let n = lp.plant.states();
    let extract = Blocks::new(&[n], &[n, lp.controller.states()])
        .set(0, 0, &DMatrix::identity(n, n))
        .build();
    let g_xa = dc_gain(&cl.a, &(&cl.b * &e), &extract, &DMatrix::zeros(n, e.ncols()))?;
    Ok((g_ra, g_xa))
}

/// `C (I − A)⁻¹ B + D` by an LU solve.
pub fn dc_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let x = (DMatrix::identity(n, n) - a)
        .lu()
        .solve(b)
        .ok_or(Error::UnstableSystem { what: "I - A", radius: 1.0 })?;
    Ok(c * x + d)
}
