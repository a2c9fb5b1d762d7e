//! One driver per report. Each returns a serializable report and writes its
//! CSV/binary artifacts next to the JSON.

use std::cell::OnceCell;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anosov_core::cones::{verify_anosov_cones, ConeReport};
use anosov_core::conjugacy::{compute_conjugacy, holder_estimate, Conjugacy, HolderEstimate};
use anosov_core::dimension::{
    bilipschitz_invariance, dimension_survey, hausdorff_consistency, BoxDimension, Region,
    ScaleWindow, TestMap,
};
use anosov_core::equilibrium::{
    ensemble_from_set, entropy_estimate, exponent_report_from, periodic_points, ExponentReport,
    OrbitEnsemble,
};
use anosov_core::export;
use anosov_core::leaves::LeafChart;
use anosov_core::map::AnosovMap;
use anosov_core::periodic::PeriodicSet;
use anosov_core::product::{
    check_dynamical_jacobian, check_holonomy_jacobian, leaf_measure_on_chart,
    product_reconstruction, JacobianCheck, ProductConfig, ProductReport, DEFAULT_IMAGE_SPACING,
};
use anosov_core::rigidity::{
    affine_straightening_residual, centralizer_generator, chi_bar_linear, commutant_candidates,
    entropy_spectrum, estimate_h, fourier_coefficients, grid_samples, quotient_contraction,
    rational_grid, rational_point, AffineFit, CentralizerData, EntropySpectrum, HEstimate,
    RationalPoint, DEFAULT_CLOSURE_CAP,
};
use anosov_core::splitting::Side;
use anosov_core::torus::TorusPoint;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ReportKind, RunConfig};
use crate::error::CliError;

/// Shared state of one run: the map and lazily computed intermediates.
pub struct Context {
    pub cfg: RunConfig,
    pub map: AnosovMap,
    pub out: PathBuf,
    conjugacy: OnceCell<Conjugacy>,
    ensembles: std::cell::RefCell<
        std::collections::BTreeMap<u32, std::rc::Rc<(PeriodicSet, OrbitEnsemble)>>,
    >,
}

type Res<T> = Result<T, CliError>;

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Res<Self> {
        let map = cfg.anosov_map()?;
        Ok(Context {
            cfg,
            map,
            out,
            conjugacy: OnceCell::new(),
            ensembles: Default::default(),
        })
    }

    fn create(&self, name: &str) -> Res<BufWriter<File>> {
        std::fs::create_dir_all(&self.out).map_err(io(&self.out))?;
        let path = self.out.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(io(&path))?))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Res<()> {
        use std::io::Write;
        let mut w = self.create(name)?;
        let path = self.out.join(name);
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io(&path))?;
        w.flush().map_err(io(&path))
    }

    fn conjugacy(&self) -> Res<&Conjugacy> {
        if let Some(c) = self.conjugacy.get() {
            return Ok(c);
        }
        let n = &self.cfg.numerics;
        let c = compute_conjugacy(
            &self.map,
            n.conjugacy_grid,
            n.conjugacy_tol,
            n.conjugacy_max_iter,
        )
        .map_err(CliError::core("conjugacy"))?;
        Ok(self.conjugacy.get_or_init(|| c))
    }

    /// The conjugacy when the potential needs it.
    fn phi_conjugacy(&self) -> Res<Option<&Conjugacy>> {
        if self.cfg.potential.needs_conjugacy() {
            self.conjugacy().map(Some)
        } else {
            Ok(None)
        }
    }

    fn ensemble(
        &self,
        period: u32,
        report: &'static str,
    ) -> Res<std::rc::Rc<(PeriodicSet, OrbitEnsemble)>> {
        if let Some(e) = self.ensembles.borrow().get(&period) {
            return Ok(e.clone());
        }
        let conj = self.phi_conjugacy()?;
        let set = periodic_points(&self.map, period, conj).map_err(CliError::core(report))?;
        let e = ensemble_from_set(&self.map, &set, &self.cfg.potential, conj)
            .map_err(CliError::core(report))?;
        let rc = std::rc::Rc::new((set, e));
        self.ensembles.borrow_mut().insert(period, rc.clone());
        Ok(rc)
    }

    fn exponents(&self, report: &'static str) -> Res<ExponentReport> {
        let n = &self.cfg.numerics;
        let fine = self.ensemble(n.period, report)?;
        let coarse = self.ensemble(n.refinement(), report)?;
        exponent_report_from(&fine.1, &coarse.1).map_err(CliError::core(report))
    }

    pub fn run(&self, kind: ReportKind) -> Res<(serde_json::Value, String)> {
        fn pack<T: Serialize>(r: T, s: String) -> Res<(serde_json::Value, String)> {
            let v = serde_json::to_value(r).expect("reports serialize");
            Ok((v, s))
        }
        match kind {
            ReportKind::Verify => {
                let r = verify(self)?;
                let s = format!(
                    "verify: {} (worst expansion {:.6}, containment margin {:.6})",
                    if r.pass { "pass" } else { "FAIL" },
                    r.worst_expansion,
                    r.worst_containment_margin
                );
                if !r.pass {
                    self.write_json("verify.json", &r)?;
                    return Err(CliError::CheckFailed {
                        report: "verify",
                        message: format!(
                            "cone condition fails at cell {:?} ({})",
                            r.witness_cell, r.witness_side
                        ),
                    });
                }
                pack(r, s)
            }
            ReportKind::Conjugacy => {
                let r = conjugacy(self)?;
                let s = format!(
                    "conjugacy: residual {:.3e}, {} iterations, period-{} pushforward error {:.3e}",
                    r.residual, r.iterations, r.pushforward.period, r.pushforward.max_error
                );
                pack(r, s)
            }
            ReportKind::Equilibrium => {
                let r = equilibrium(self)?;
                let s = format!(
                    "equilibrium: P_{} = {:.10}, entropy {:.10}, {} atoms",
                    r.period, r.pressure, r.entropy, r.atoms
                );
                pack(r, s)
            }
            ReportKind::Exponents => {
                let r = self.exponents("exponents")?;
                let s = format!(
                    "exponents: lambda_u {:.8}, lambda_s {:.8}, h {:.8}, dim {:.6}",
                    r.lambda_u, r.lambda_s, r.entropy, r.dim_total
                );
                pack(r, s)
            }
            ReportKind::Dimension => {
                let r = dimension(self)?;
                let s = format!(
                    "dimension: median slope {:.4} over {} centers (target {:.4})",
                    r.median_slope,
                    r.centers.len(),
                    r.dim_total
                );
                pack(r, s)
            }
            ReportKind::Leaf => {
                let r = leaf(self)?;
                let s = format!(
                    "leaf: dynamical TV {}, holonomy TV {:.3e}, product TV {:.4}, base shift {:.3e}",
                    r.dynamical
                        .iter()
                        .map(|c| format!("{:.3e}@{}", c.discrepancy, c.generation))
                        .collect::<Vec<_>>()
                        .join("/"),
                    r.holonomy.discrepancy,
                    r.product.tv,
                    r.product.base_shift_tv
                );
                pack(r, s)
            }
            ReportKind::Rigidity => {
                let r = rigidity(self)?;
                let s = format!(
                    "rigidity: generator {:?} with A = {}M^{}, |H| = {}, index {}, straightening residual {:.3e}",
                    r.centralizer.m.entries(),
                    if r.centralizer.sign < 0 { "-" } else { "" },
                    r.centralizer.k,
                    if r.h_is_full_grid { "full grid".to_string() } else { r.h.members.len().to_string() },
                    r.commutant.as_ref().map_or("n/a".to_string(), |c| c.index.to_string()),
                    r.straightening.conjugated.residual
                );
                pack(r, s)
            }
            ReportKind::Spectrum => {
                let r = spectrum(self)?;
                let s = format!(
                    "spectrum: quantum {:.10}, {} entries",
                    r.spectrum.gap,
                    r.spectrum.entries.len()
                );
                pack(r, s)
            }
        }
    }
}

fn verify(ctx: &Context) -> Res<ConeReport> {
    let n = &ctx.cfg.numerics;
    Ok(verify_anosov_cones(&ctx.map, n.cone_grid, n.cone_halfwidth))
}

#[derive(Debug, Serialize)]
pub struct PushforwardCheck {
    pub period: u32,
    pub points: usize,
    /// Max distance between h(p) and the matched fixed point of L_Aⁿ.
    pub max_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ConjugacyReport {
    pub grid_n: usize,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub off_grid_error: f64,
    pub normalization_offset: f64,
    pub measured_rate: Option<f64>,
    pub holder: HolderEstimate,
    pub pushforward: PushforwardCheck,
}

fn conjugacy(ctx: &Context) -> Res<ConjugacyReport> {
    let c = ctx.conjugacy()?;
    let period = ctx.cfg.numerics.pushforward_period;
    let set = periodic_points(&ctx.map, period, Some(c)).map_err(CliError::core("conjugacy"))?;
    let max_error = set
        .points
        .iter()
        .zip(&set.linear_points)
        .map(|(p, q)| c.apply_h(p).distance(q))
        .fold(0.0, f64::max);
    export::write_conjugacy_grid(ctx.create("conjugacy.bin")?, c)
        .map_err(CliError::core("conjugacy"))?;
    export::conjugacy_summary_csv(ctx.create("conjugacy.csv")?, c)
        .map_err(CliError::core("conjugacy"))?;
    Ok(ConjugacyReport {
        grid_n: c.grid_n,
        residual: c.residual,
        converged: c.converged,
        iterations: c.iterations,
        off_grid_error: c.off_grid_error,
        normalization_offset: c.normalization_offset,
        measured_rate: c.measured_rate(),
        holder: holder_estimate(c),
        pushforward: PushforwardCheck {
            period,
            points: set.len(),
            max_error,
        },
    })
}

#[derive(Debug, Serialize)]
pub struct EquilibriumReport {
    pub period: u32,
    pub atoms: usize,
    pub orbits: usize,
    pub pressure: f64,
    pub entropy: f64,
    pub entropy_raw: f64,
    pub entropy_clamped: bool,
    pub mean_potential: f64,
    pub max_periodic_residual: f64,
}

fn equilibrium(ctx: &Context) -> Res<EquilibriumReport> {
    let rc = ctx.ensemble(ctx.cfg.numerics.period, "equilibrium")?;
    let (set, e) = (&rc.0, &rc.1);
    export::ensemble_csv(ctx.create("ensemble.csv")?, e).map_err(CliError::core("equilibrium"))?;
    export::periodic_csv(ctx.create("periodic.csv")?, set)
        .map_err(CliError::core("equilibrium"))?;
    let h = entropy_estimate(e);
    Ok(EquilibriumReport {
        period: e.period,
        atoms: e.len(),
        orbits: set.orbits.len(),
        pressure: e.pressure_n,
        entropy: h.value,
        entropy_raw: h.raw,
        entropy_clamped: h.clamped,
        mean_potential: e.mean_potential(),
        max_periodic_residual: set.max_residual,
    })
}

#[derive(Debug, Serialize)]
pub struct CenterSlope {
    pub center: TorusPoint,
    pub slope: f64,
    pub slope_stderr: f64,
    pub unreliable: bool,
}

#[derive(Debug, Serialize)]
pub struct BilipschitzSummary {
    pub map: TestMap,
    pub median_difference: f64,
}

#[derive(Debug, Serialize)]
pub struct DimensionReport {
    pub period: u32,
    pub atoms: usize,
    pub seed: u64,
    pub window: ScaleWindow,
    pub median_slope: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    /// δ^u + δ^s from the exponent report.
    pub dim_total: f64,
    pub centers: Vec<CenterSlope>,
    pub bilipschitz: Vec<BilipschitzSummary>,
    pub box_counting: BoxDimension,
}

fn dimension(ctx: &Context) -> Res<DimensionReport> {
    let n = &ctx.cfg.numerics;
    let err = CliError::core("dimension");
    let period = n.dimension_period.unwrap_or(n.period);
    let rc = ctx.ensemble(period, "dimension")?;
    let e = &rc.1;
    let survey = dimension_survey(e, n.dimension_centers, ctx.cfg.seed).map_err(err)?;
    export::dimension_csv(ctx.create("dimension.csv")?, &survey.estimates)
        .map_err(CliError::core("dimension"))?;
    let centers: Vec<TorusPoint> = survey.estimates.iter().map(|d| d.center).collect();
    let bilipschitz = TestMap::battery()
        .iter()
        .map(|g| {
            let r = bilipschitz_invariance(e, g, &centers).map_err(CliError::core("dimension"))?;
            Ok(BilipschitzSummary {
                map: r.map,
                median_difference: r.median_difference,
            })
        })
        .collect::<Res<Vec<_>>>()?;
    let region = Region {
        center: TorusPoint::new(n.box_region[0], n.box_region[1]),
        half_size: n.box_region[2],
    };
    let box_counting = hausdorff_consistency(e, &region).map_err(CliError::core("dimension"))?;
    let dim_total = ctx.exponents("dimension")?.dim_total;
    Ok(DimensionReport {
        period,
        atoms: e.len(),
        seed: ctx.cfg.seed,
        window: survey.window,
        median_slope: survey.median_slope,
        min_slope: survey.min_slope,
        max_slope: survey.max_slope,
        dim_total,
        centers: survey
            .estimates
            .iter()
            .map(|d| CenterSlope {
                center: d.center,
                slope: d.slope,
                slope_stderr: d.slope_stderr,
                unreliable: d.unreliable,
            })
            .collect(),
        bilipschitz,
        box_counting,
    })
}

#[derive(Debug, Serialize)]
pub struct LeafReport {
    pub center: TorusPoint,
    pub dynamical: Vec<JacobianCheck>,
    /// Discrepancies strictly decrease with the generation.
    pub dynamical_decreasing: bool,
    pub holonomy: JacobianCheck,
    pub product: ProductReport,
}

fn leaf(ctx: &Context) -> Res<LeafReport> {
    let n = &ctx.cfg.numerics;
    let err = || CliError::core("leaf");
    let conj = ctx.phi_conjugacy()?;
    let phi = &ctx.cfg.potential;
    let center = TorusPoint::new(n.product_center[0], n.product_center[1]);
    let chart = LeafChart::new(&ctx.map, &center, Side::Unstable).map_err(err())?;
    let mut dynamical = Vec::new();
    let mut last = None;
    for &g in &n.leaf_generations {
        let lm = leaf_measure_on_chart(
            &ctx.map,
            phi,
            conj,
            &chart,
            -n.leaf_half_length,
            n.leaf_half_length,
            g,
            DEFAULT_IMAGE_SPACING,
        )
        .map_err(err())?;
        dynamical
            .push(check_dynamical_jacobian(&ctx.map, phi, conj, &lm, n.leaf_bins).map_err(err())?);
        last = Some(lm);
    }
    if let Some(lm) = &last {
        export::leaf_measure_csv(ctx.create("leaf_measure.csv")?, lm, n.leaf_bins).map_err(err())?;
    }
    let dynamical_decreasing = dynamical
        .windows(2)
        .all(|w| w[1].discrepancy < w[0].discrepancy);
    let stable = LeafChart::new(&ctx.map, &center, Side::Stable).map_err(err())?;
    let x_s = TorusPoint::from_vec(stable.point(n.holonomy_offset).map_err(err())?);
    let generation = *n.leaf_generations.last().expect("validated non-empty");
    let holonomy = check_holonomy_jacobian(
        &ctx.map,
        phi,
        conj,
        &center,
        &x_s,
        n.leaf_half_length,
        generation,
        n.leaf_bins,
    )
    .map_err(err())?;
    let rc = ctx.ensemble(n.period, "leaf")?;
    let cfg = ProductConfig {
        resolution: n.product_resolution,
        half_size: n.chart_half_size,
        generation: n.product_generation,
        shift: n.product_shift,
    };
    let product =
        product_reconstruction(&ctx.map, phi, conj, &rc.1, &center, &cfg).map_err(err())?;
    Ok(LeafReport {
        center,
        dynamical,
        dynamical_decreasing,
        holonomy,
        product,
    })
}

#[derive(Debug, Serialize)]
pub struct Straightening {
    /// Fit to exact samples of T(v)∘L_A with v = (1/3, 1/4).
    pub exact: AffineFit,
    pub exact_translation: RationalPoint,
    /// Fit to samples (h(x), h(a x)) of the straightened map.
    pub conjugated: AffineFit,
    pub conjugacy_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct RigidityReport {
    pub centralizer: CentralizerData,
    /// Eigenvalue of the generator and of A on E^s(A).
    pub generator_quotient: f64,
    pub automorphism_quotient: f64,
    /// log |eigenvalue of M on E^u(A)|.
    pub generator_chi_bar: f64,
    pub h: HEstimate,
    /// Every rational point on the grid passes: h_*μ is translation
    /// invariant (Haar) and no finite commutant is enumerated.
    pub h_is_full_grid: bool,
    pub commutant: Option<CommutantSummary>,
    pub straightening: Straightening,
}

#[derive(Debug, Serialize)]
pub struct CommutantSummary {
    pub translations: Vec<RationalPoint>,
    /// Index of ⟨M^k⟩ in the enumerated group.
    pub index: usize,
    pub expected_index: usize,
    pub axioms_verified: bool,
}

fn rigidity(ctx: &Context) -> Res<RigidityReport> {
    let n = &ctx.cfg.numerics;
    let err = || CliError::core("rigidity");
    let a = ctx.map.linear_part();
    let cd = centralizer_generator(&a, n.entry_bound).map_err(err())?;
    let conj = if ctx.map.is_linear() {
        None
    } else {
        Some(ctx.conjugacy()?)
    };
    // H from the Fourier coefficients of h_*μ, with the period-refinement
    // change as noise floor
    let fine = ctx.ensemble(n.period, "rigidity")?;
    let coarse = ctx.ensemble(n.refinement(), "rigidity")?;
    let cf = fourier_coefficients(&fine.1, conj, n.fourier_modes);
    let cc = fourier_coefficients(&coarse.1, conj, n.fourier_modes);
    let h = estimate_h(&cf, cf.refinement_floor(&cc), n.max_denominator);
    let h_is_full_grid = h.members.len() == rational_grid(n.max_denominator).len();
    let commutant = if h_is_full_grid {
        None
    } else {
        let c = commutant_candidates(&a, &cd, &h.members, DEFAULT_CLOSURE_CAP).map_err(err())?;
        Some(CommutantSummary {
            translations: c.translations,
            index: c.index,
            expected_index: c.expected_index,
            axioms_verified: c.axioms_verified,
        })
    };

    let v = rational_point((1, 3), (1, 4));
    let vf = anosov_core::rigidity::to_f64(&v);
    let lin = a.to_real();
    let g = n.straightening_grid;
    let exact = grid_samples(g, |p| {
        let x = lin.apply(p.coords());
        Ok(TorusPoint::new(x[0] + vf[0], x[1] + vf[1]))
    })
    .and_then(|s| affine_straightening_residual(&s))
    .map_err(err())?;
    let (conjugated, conjugacy_residual) = match conj {
        Some(c) => {
            let s: Vec<(TorusPoint, TorusPoint)> = {
                let map = &ctx.map;
                grid_samples(g, |p| Ok(map.apply(p)))
            }
            .map_err(err())?
            .par_iter()
            .map(|(x, ax)| (c.apply_h(x), c.apply_h(ax)))
            .collect();
            (
                affine_straightening_residual(&s).map_err(err())?,
                c.residual,
            )
        }
        None => {
            let map = &ctx.map;
            let s = grid_samples(g, |p| Ok(map.apply(p))).map_err(err())?;
            (affine_straightening_residual(&s).map_err(err())?, 0.0)
        }
    };
    Ok(RigidityReport {
        generator_quotient: quotient_contraction(&cd.m, &a).map_err(err())?,
        automorphism_quotient: quotient_contraction(&a, &a).map_err(err())?,
        generator_chi_bar: chi_bar_linear(&cd.m, &a).map_err(err())?,
        centralizer: cd,
        h,
        h_is_full_grid,
        commutant,
        straightening: Straightening {
            exact,
            exact_translation: v,
            conjugated,
            conjugacy_residual,
        },
    })
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub lambda_u: f64,
    pub delta_u: f64,
    pub spectrum: EntropySpectrum,
    /// Every entry is |m| times the quantum.
    pub quantized: bool,
}

fn spectrum(ctx: &Context) -> Res<SpectrumReport> {
    let r = ctx.exponents("spectrum")?;
    let [lo, hi] = ctx.cfg.numerics.m_range;
    let spectrum = entropy_spectrum(&r, (lo, hi)).map_err(CliError::core("spectrum"))?;
    let quantized = spectrum.entries.iter().all(|(m, h)| {
        (h - m.unsigned_abs() as f64 * spectrum.base_entropy).abs() <= 1e-12 * h.abs().max(1.0)
    });
    Ok(SpectrumReport {
        lambda_u: r.lambda_u,
        delta_u: r.delta_u,
        spectrum,
        quantized,
    })
}
