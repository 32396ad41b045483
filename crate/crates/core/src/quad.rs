//! Adaptive quadrature: a Gauss-Kronrod 21-point pair for 1D panels and an
//! embedded degree 7/5 cubature for 2D boxes, both driven by a worst-cell
//! priority queue with deterministic tie-breaking.
//!
//! Pair integrals over two radial arguments are reduced to bipolar
//! coordinates `(r, s, d)` with the separation `d` as the inner variable, so
//! the caller can pin integrand jumps in `d` (shell boundaries) onto exact
//! panel edges. Nested integrals propagate the inner error bound through an
//! auxiliary channel that is integrated alongside the value, keeping the
//! reported `error_bound` honest.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureConfigError {
    #[error("absolute tolerance must be positive, got {0}")]
    AbsTol(f64),
    #[error("relative tolerance must be positive, got {0}")]
    RelTol(f64),
    #[error("evaluation budget must be at least 1000, got {0}")]
    Budget(u64),
    #[error("tail cut must be positive and finite, got {0}")]
    TailCut(f64),
}

/// Tolerances and budget for one integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evaluations: u64,
    /// Truncation radius for semi-infinite ranges; the analytic tail beyond
    /// it is the caller's responsibility.
    pub tail_cut: f64,
}

impl QuadratureConfig {
    pub fn new(
        abs_tol: f64,
        rel_tol: f64,
        max_evaluations: u64,
        tail_cut: f64,
    ) -> Result<Self, QuadratureConfigError> {
        if !(abs_tol > 0.0) {
            return Err(QuadratureConfigError::AbsTol(abs_tol));
        }
        if !(rel_tol > 0.0) {
            return Err(QuadratureConfigError::RelTol(rel_tol));
        }
        if max_evaluations < 1000 {
            return Err(QuadratureConfigError::Budget(max_evaluations));
        }
        if !(tail_cut > 0.0 && tail_cut.is_finite()) {
            return Err(QuadratureConfigError::TailCut(tail_cut));
        }
        Ok(Self { abs_tol, rel_tol, max_evaluations, tail_cut })
    }

    /// Scales both tolerances, clamping the budget from below.
    #[must_use]
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-9, max_evaluations: 4_000_000, tail_cut: 40.0 }
    }
}

/// Value, an upper estimate of its error, and the work spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: u64,
    /// False when the budget ran out first; the fields then carry the best
    /// estimate reached.
    pub converged: bool,
}

impl QuadratureResult {
    fn zero() -> Self {
        Self { value: 0.0, error_bound: 0.0, evaluations: 0, converged: true }
    }
}

// ── Gauss-Kronrod 21/10 rule ────────────────────────────────────────────────

#[allow(clippy::excessive_precision)]
const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// QUADPACK error rescaling: damps the raw rule difference against the
/// deviation integral and floors it at the roundoff of `res_abs`.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

struct PanelEstimate {
    value: f64,
    error: f64,
    /// Integral of the auxiliary channel with the (positive) Kronrod weights.
    aux: f64,
}

/// One GK21 pass over `[a, b]` of a bivalued integrand `(value, aux)`.
fn gk21<F: FnMut(f64) -> (f64, f64)>(f: &mut F, a: f64, b: f64) -> PanelEstimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let (fc, auxc) = f(center);
    let mut kronrod = fc * WGK21[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut aux = auxc * WGK21[10];
    let mut fv = [0.0f64; 21];
    fv[10] = fc;

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let x = half * XGK21[jtw];
        let (f1, a1) = f(center - x);
        let (f2, a2) = f(center + x);
        fv[10 - jtw] = f1;
        fv[10 + jtw] = f2;
        gauss += WG10[j] * (f1 + f2);
        kronrod += WGK21[jtw] * (f1 + f2);
        res_abs += WGK21[jtw] * (f1.abs() + f2.abs());
        aux += WGK21[jtw] * (a1 + a2);
    }
    for j in 0..5 {
        let jtw = 2 * j;
        let x = half * XGK21[jtw];
        let (f1, a1) = f(center - x);
        let (f2, a2) = f(center + x);
        fv[10 - jtw] = f1;
        fv[10 + jtw] = f2;
        kronrod += WGK21[jtw] * (f1 + f2);
        res_abs += WGK21[jtw] * (f1.abs() + f2.abs());
        aux += WGK21[jtw] * (a1 + a2);
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK21[10] * (fv[10] - mean).abs();
    for j in 0..10 {
        res_asc += WGK21[j] * ((fv[10 - j - 1] - mean).abs() + (fv[10 + j + 1] - mean).abs());
    }

    let err = ((kronrod - gauss) * half).abs();
    PanelEstimate {
        value: kronrod * half,
        error: rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
        aux: aux * half.abs(),
    }
}

const GK21_POINTS: u64 = 21;

// ── Adaptive 1D driver ──────────────────────────────────────────────────────

struct Cell1 {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    aux: f64,
    id: u64,
    splittable: bool,
}

struct HeapKey {
    error: f64,
    id: u64,
    slot: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on error; older cells win ties so the order is total.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Adaptive integration of a bivalued integrand over fixed panels.
///
/// `min_width` stops subdivision; cells at the floor keep their error in the
/// total. The auxiliary channel is accumulated with positive weights and
/// added to the reported bound.
fn adapt_1d<F: FnMut(f64) -> (f64, f64)>(
    f: &mut F,
    panels: &[(f64, f64)],
    cfg: &QuadratureConfig,
    min_width: f64,
) -> QuadratureResult {
    let mut cells: Vec<Cell1> = Vec::new();
    let mut heap: BinaryHeap<HeapKey> = BinaryHeap::new();
    let mut evaluations: u64 = 0;
    let mut next_id: u64 = 0;

    let push = |a: f64,
                    b: f64,
                    cells: &mut Vec<Cell1>,
                    heap: &mut BinaryHeap<HeapKey>,
                    evals: &mut u64,
                    next_id: &mut u64,
                    f: &mut F| {
        let est = gk21(f, a, b);
        *evals += GK21_POINTS;
        let splittable = (b - a) > min_width;
        let id = *next_id;
        *next_id += 1;
        let cell = Cell1 { a, b, value: est.value, error: est.error, aux: est.aux, id, splittable };
        if splittable {
            heap.push(HeapKey { error: est.error, id, slot: cells.len() });
        }
        cells.push(cell);
    };

    for &(a, b) in panels {
        if b > a {
            push(a, b, &mut cells, &mut heap, &mut evaluations, &mut next_id, f);
        }
    }
    if cells.is_empty() {
        return QuadratureResult::zero();
    }

    loop {
        let mut total_value = 0.0;
        let mut total_error = 0.0;
        // Inner-integral error and the error of width-floor cells cannot be
        // reduced by splitting; once they dominate, more work is wasted.
        let mut irreducible = 0.0;
        for c in &cells {
            total_value += c.value;
            total_error += c.error + c.aux;
            irreducible += c.aux;
            if !c.splittable {
                irreducible += c.error;
            }
        }
        let target = cfg.target(total_value);
        if total_error <= target {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: true,
            };
        }
        let stalled = irreducible > target && total_error - irreducible < 0.1 * irreducible;
        if stalled || evaluations + 2 * GK21_POINTS > cfg.max_evaluations {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: false,
            };
        }
        let worst = loop {
            match heap.pop() {
                // Stale keys (already-split cells) are skipped.
                Some(k) if cells[k.slot].id == k.id && cells[k.slot].splittable => break Some(k.slot),
                Some(_) => continue,
                None => break None,
            }
        };
        let Some(slot) = worst else {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: false,
            };
        };
        let (a, b) = (cells[slot].a, cells[slot].b);
        let mid = 0.5 * (a + b);
        // Replace the split cell in place with its left half.
        let est = gk21(f, a, mid);
        evaluations += GK21_POINTS;
        let left_splittable = (mid - a) > min_width;
        let left_id = next_id;
        next_id += 1;
        cells[slot] = Cell1 {
            a,
            b: mid,
            value: est.value,
            error: est.error,
            aux: est.aux,
            id: left_id,
            splittable: left_splittable,
        };
        if left_splittable {
            heap.push(HeapKey { error: est.error, id: left_id, slot });
        }
        push(mid, b, &mut cells, &mut heap, &mut evaluations, &mut next_id, f);
    }
}

/// Adaptive 1D integral of `f` over `[a, b]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    assert!(a.is_finite() && b.is_finite() && a <= b, "bad interval [{a}, {b}]");
    let width_floor = 4.0 * f64::EPSILON * (b - a).abs().max(1.0);
    adapt_1d(&mut |x| (f(x), 0.0), &[(a, b)], cfg, width_floor)
}

/// Adaptive 1D integral over `[a, b]` with interior breakpoints pinned onto
/// panel edges (for integrands with known kinks or jumps).
pub fn integrate_1d_split<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    assert!(a.is_finite() && b.is_finite() && a <= b, "bad interval [{a}, {b}]");
    let panels = build_panels(a, b, breakpoints);
    let width_floor = 4.0 * f64::EPSILON * (b - a).abs().max(1.0);
    adapt_1d(&mut |x| (f(x), 0.0), &panels, cfg, width_floor)
}

fn build_panels(a: f64, b: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut panels = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        panels.push((lo, c));
        lo = c;
    }
    panels.push((lo, b));
    panels
}

// ── Genz-Malik degree 7/5 cubature in 2D ────────────────────────────────────

const GM_L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const GM_L3: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const GM_L5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)

const GM_W1: f64 = -3816.0 / 19683.0;
const GM_W2: f64 = 980.0 / 6561.0;
const GM_W3: f64 = 1020.0 / 19683.0;
const GM_W4: f64 = 200.0 / 19683.0;
const GM_W5: f64 = 6859.0 / 19683.0 / 4.0;

const GM_E1: f64 = -971.0 / 729.0;
const GM_E2: f64 = 245.0 / 486.0;
const GM_E3: f64 = 65.0 / 1458.0;
const GM_E4: f64 = 25.0 / 729.0;

const GM_POINTS: u64 = 17;

struct CubatureEstimate {
    value: f64,
    error: f64,
    aux: f64,
    split_dim: usize,
}

/// Degree 7 rule with embedded degree 5 error estimate on the box
/// `center ± half`; the split dimension maximizes the scaled fourth
/// difference.
fn genz_malik_2d<F: FnMut(f64, f64) -> (f64, f64)>(
    f: &mut F,
    center: [f64; 2],
    half: [f64; 2],
) -> CubatureEstimate {
    let vol = 4.0 * half[0] * half[1];
    let at = |dx: f64, dy: f64, f: &mut F| f(center[0] + dx * half[0], center[1] + dy * half[1]);

    let (f0, a0) = at(0.0, 0.0, f);

    let mut sum2 = 0.0;
    let mut sum3 = 0.0;
    let mut aux_axis = 0.0;
    let mut divdiff = [0.0f64; 2];
    for dim in 0..2 {
        let (e0, e1) = if dim == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
        let (fp2, ap2) = at(GM_L2 * e0, GM_L2 * e1, f);
        let (fm2, am2) = at(-GM_L2 * e0, -GM_L2 * e1, f);
        let (fp3, ap3) = at(GM_L3 * e0, GM_L3 * e1, f);
        let (fm3, am3) = at(-GM_L3 * e0, -GM_L3 * e1, f);
        sum2 += fp2 + fm2;
        sum3 += fp3 + fm3;
        aux_axis += GM_W2.abs() * (ap2 + am2) + GM_W3.abs() * (ap3 + am3);
        let ratio = (GM_L2 * GM_L2) / (GM_L3 * GM_L3);
        divdiff[dim] = (fp2 + fm2 - 2.0 * f0 - ratio * (fp3 + fm3 - 2.0 * f0)).abs();
    }

    let mut sum4 = 0.0;
    let mut aux4 = 0.0;
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            let (v, a) = at(GM_L3 * sx, GM_L3 * sy, f);
            sum4 += v;
            aux4 += a;
        }
    }
    let mut sum5 = 0.0;
    let mut aux5 = 0.0;
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            let (v, a) = at(GM_L5 * sx, GM_L5 * sy, f);
            sum5 += v;
            aux5 += a;
        }
    }

    let res7 = vol * (GM_W1 * f0 + GM_W2 * sum2 + GM_W3 * sum3 + GM_W4 * sum4 + GM_W5 * sum5);
    let res5 = vol * (GM_E1 * f0 + GM_E2 * sum2 + GM_E3 * sum3 + GM_E4 * sum4);
    let res_abs = vol
        * (GM_W1.abs() * f0.abs()
            + GM_W2.abs() * sum2.abs()
            + GM_W3.abs() * sum3.abs()
            + GM_W4.abs() * sum4.abs()
            + GM_W5.abs() * sum5.abs());
    let aux = vol
        * (GM_E1.abs() * a0 + aux_axis + GM_W4.abs() * aux4 + GM_W5.abs() * aux5);

    let err = (res7 - res5).abs().max(50.0 * f64::EPSILON * res_abs);
    let split_dim = if divdiff[1] > divdiff[0]
        || (divdiff[1] == divdiff[0] && half[1] > half[0])
    {
        1
    } else {
        0
    };
    CubatureEstimate { value: res7, error: err, aux, split_dim }
}

struct Cell2 {
    center: [f64; 2],
    half: [f64; 2],
    value: f64,
    error: f64,
    aux: f64,
    split_dim: usize,
    id: u64,
    splittable: bool,
}

fn adapt_2d<F: FnMut(f64, f64) -> (f64, f64)>(
    f: &mut F,
    lo: [f64; 2],
    hi: [f64; 2],
    cfg: &QuadratureConfig,
    evals_used: u64,
) -> QuadratureResult {
    let min_half = [
        4.0 * f64::EPSILON * (hi[0] - lo[0]).max(1.0),
        4.0 * f64::EPSILON * (hi[1] - lo[1]).max(1.0),
    ];
    let mut cells: Vec<Cell2> = Vec::new();
    let mut heap: BinaryHeap<HeapKey> = BinaryHeap::new();
    let mut evaluations: u64 = evals_used;
    let mut next_id: u64 = 0;

    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])];
    if half[0] <= 0.0 || half[1] <= 0.0 {
        return QuadratureResult::zero();
    }
    let est = genz_malik_2d(f, center, half);
    evaluations += GM_POINTS;
    cells.push(Cell2 {
        center,
        half,
        value: est.value,
        error: est.error,
        aux: est.aux,
        split_dim: est.split_dim,
        id: 0,
        splittable: true,
    });
    heap.push(HeapKey { error: est.error, id: 0, slot: 0 });
    next_id += 1;

    loop {
        let mut total_value = 0.0;
        let mut total_error = 0.0;
        let mut irreducible = 0.0;
        for c in &cells {
            total_value += c.value;
            total_error += c.error + c.aux;
            irreducible += c.aux;
            if !c.splittable {
                irreducible += c.error;
            }
        }
        let target = cfg.target(total_value);
        if total_error <= target {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: true,
            };
        }
        let stalled = irreducible > target && total_error - irreducible < 0.1 * irreducible;
        if stalled || evaluations + 2 * GM_POINTS > cfg.max_evaluations {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: false,
            };
        }
        let worst = loop {
            match heap.pop() {
                Some(k) if cells[k.slot].id == k.id && cells[k.slot].splittable => break Some(k.slot),
                Some(_) => continue,
                None => break None,
            }
        };
        let Some(slot) = worst else {
            return QuadratureResult {
                value: total_value,
                error_bound: total_error,
                evaluations,
                converged: false,
            };
        };

        let parent_center = cells[slot].center;
        let parent_half = cells[slot].half;
        let dim = cells[slot].split_dim;
        let mut child_half = parent_half;
        child_half[dim] *= 0.5;
        let can_split_more = child_half[dim] > min_half[dim];

        for (child, sign) in [(0usize, -1.0f64), (1, 1.0)] {
            let mut c = parent_center;
            c[dim] += sign * child_half[dim];
            let est = genz_malik_2d(f, c, child_half);
            evaluations += GM_POINTS;
            let id = next_id;
            next_id += 1;
            let cell = Cell2 {
                center: c,
                half: child_half,
                value: est.value,
                error: est.error,
                aux: est.aux,
                split_dim: est.split_dim,
                id,
                splittable: can_split_more || est.split_dim != dim,
            };
            let slot_for = if child == 0 {
                cells[slot] = cell;
                slot
            } else {
                cells.push(cell);
                cells.len() - 1
            };
            if cells[slot_for].splittable {
                heap.push(HeapKey { error: cells[slot_for].error, id, slot: slot_for });
            }
        }
    }
}

// ── Pair and relative-ball reductions ───────────────────────────────────────

/// `∬ F(x, y) dx dy` over `{|x| <= r_max} × {|y| <= s_max}` for an `F`
/// depending only on the radii and the separation, called as `F(r, s, d)`.
///
/// The reduction runs over `(r, s)` outside and the separation `d` inside:
/// `∬ F dx dy = 8π² ∬ dr ds ∫ F(r, s, d) · r s d dd` with
/// `d ∈ [|r-s|, r+s]`. `distance_breakpoints` are pinned onto inner panel
/// edges, so integrand jumps at fixed separations cost no accuracy.
pub fn integrate_pair_radial<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    r_max: f64,
    s_max: f64,
    distance_breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    assert!(r_max > 0.0 && s_max > 0.0, "radial bounds must be positive");
    let inner_cfg = QuadratureConfig {
        abs_tol: 0.05 * cfg.abs_tol / (r_max * s_max),
        rel_tol: (0.1 * cfg.rel_tol).max(1e-14),
        max_evaluations: 100_000,
        tail_cut: cfg.tail_cut,
    };
    let mut inner_evals: u64 = 0;
    // The 8π² weight lives inside the integrand so the outer tolerances
    // refer to the full pair integral.
    let scale = 8.0 * PI * PI;
    let mut integrand = |r: f64, s: f64| -> (f64, f64) {
        let d_lo = (r - s).abs();
        let d_hi = r + s;
        if d_hi - d_lo < 1e-300 || r == 0.0 || s == 0.0 {
            return (0.0, 0.0);
        }
        let panels = build_panels(d_lo, d_hi, distance_breakpoints);
        let mut g = |d: f64| -> (f64, f64) { (scale * f(r, s, d) * r * s * d, 0.0) };
        // Separations below the diagonal floor are not resolved further.
        let res = adapt_1d(&mut g, &panels, &inner_cfg, 1e-6 * d_hi.max(1.0));
        inner_evals += res.evaluations;
        (res.value, res.error_bound)
    };
    let mut out = adapt_2d(&mut integrand, [0.0, 0.0], [r_max, s_max], cfg, 0);
    out.evaluations += inner_evals;
    out
}

/// Integral of `f` over `{|y| < 1} ∩ {|x - y| < sigma}` around a center at
/// radius `x_radius`, for an `f` depending only on the separation and `|y|`.
///
/// Bipolar reduction: `(2π/r) ∫₀^σ d dd ∫ s f(d, s) ds` with
/// `s ∈ [|r - d|, min(1, r + d)]`; at the origin the integrand is spherical
/// and collapses to one panel.
pub fn integrate_ball_relative<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    x_radius: f64,
    sigma: f64,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    assert!(x_radius >= 0.0, "center radius must be nonnegative");
    assert!(sigma > 0.0, "shell width must be positive");
    let r = x_radius;
    if r == 0.0 {
        let mut g = |d: f64| 4.0 * PI * d * d * f(d, d);
        let top = sigma.min(1.0);
        return integrate_1d(&mut g, 0.0, top, cfg);
    }
    let inner_cfg = QuadratureConfig {
        abs_tol: 0.05 * cfg.abs_tol / (2.0 * PI * sigma * 2.0),
        rel_tol: (0.1 * cfg.rel_tol).max(1e-14),
        max_evaluations: 100_000,
        tail_cut: cfg.tail_cut,
    };
    let mut inner_evals: u64 = 0;
    let mut outer = |d: f64| -> (f64, f64) {
        if d == 0.0 {
            return (0.0, 0.0);
        }
        let s_lo = (r - d).abs();
        let s_hi = (r + d).min(1.0);
        if s_hi <= s_lo {
            return (0.0, 0.0);
        }
        let res = if s_hi == 1.0 {
            // The shell clips at the unit sphere, where callers carry weights
            // like (1-s²)^{-1/2}; the substitution s = 1-v² makes that
            // endpoint regular.
            let v_hi = (1.0 - s_lo).sqrt();
            let mut g = |v: f64| {
                let s = 1.0 - v * v;
                (2.0 * v * s * f(d, s), 0.0)
            };
            adapt_1d(&mut g, &[(0.0, v_hi)], &inner_cfg, 4.0 * f64::EPSILON)
        } else {
            let mut g = |s: f64| (s * f(d, s), 0.0);
            adapt_1d(&mut g, &[(s_lo, s_hi)], &inner_cfg, 4.0 * f64::EPSILON)
        };
        inner_evals += res.evaluations;
        let w = 2.0 * PI * d / r;
        (w * res.value, w * res.error_bound)
    };
    let mut out = adapt_1d(&mut outer, &[(0.0, sigma)], cfg, 1e-9);
    out.evaluations += inner_evals;
    out
}
