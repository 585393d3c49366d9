//! The six subcommands. Each resolves its parameters, computes tables in memory and
//! hands them to the emitter.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use interlace::lattice::check_dim;
use interlace::noise::{bernoulli_bond, CoupledNoise};
use interlace::parallel::try_map_indexed;
use interlace::percolation::{
    components, crossing, diameter_filter, local_uniqueness_event, slab_restrict, Adjacency,
};
use interlace::renorm::{
    classify_blocks, eval_recursive, eval_seed_d, eval_seed_e, eval_seed_f, l_of_d, ln_decoupling_bound,
    decoupling_bound, SeedSpec,
};
use interlace::resistance::{lattice_profile, transience_profile, ProfileConfig, ResistanceLaw};
use interlace::seed::stream;
use interlace::stats::binomial_ci;
use interlace::thresholds::{density, EstimatorConfig, ThresholdEstimate};
use interlace::{
    Configuration, GreenFunction, InterlacementSample, LatticeWindow, Point, Potential, SamplingMode,
    ScaleHierarchy, SiteField, ThresholdEstimator, WindowSampler,
};

use crate::config::{pick, pick_opt, FileConfig};
use crate::error::{invalid, CliError};
use crate::output::{f, flag, opt, Emitter, RunOutput, Table};
use crate::{AnalyzeArgs, CapacityArgs, Cli, Command, EstimateArgs, RenormArgs, ResistanceArgs, SamplingArgs};

type R<T> = Result<T, CliError>;

/// Confidence level of every interval the binary reports.
const CONFIDENCE: f64 = 0.95;
/// Largest window `renorm-check` and `sample` will allocate.
const MAX_WINDOW: usize = 1 << 24;

pub fn dispatch(cli: &Cli, cmd: &Command, file: &FileConfig) -> R<Vec<PathBuf>> {
    let started = Instant::now();
    let threads = pick(&cli.threads, &file.threads, 1);
    if threads == 0 {
        return Err(invalid("`threads` must be at least 1"));
    }
    let out_dir = pick(&cli.out_dir, &file.out_dir, PathBuf::from("."));
    let seed = pick_opt(&cli.seed, &file.seed);
    let ctx = Ctx { seed, threads };
    let (name, (config, out)) = match cmd {
        Command::Capacity(a) => ("capacity", capacity(a, file)?),
        Command::Sample(a) => ("sample", sample(&ctx, a.sampling.clone(), file)?),
        Command::Analyze(a) => ("analyze", analyze(&ctx, a, file)?),
        Command::RenormCheck(a) => ("renorm-check", renorm(&ctx, a, file)?),
        Command::Estimate(a) => ("estimate", estimate(&ctx, a, file)?),
        Command::Resistance(a) => ("resistance", resistance(&ctx, a, file)?),
    };
    Emitter {
        command: name,
        out_dir: &out_dir,
        seed,
        threads,
        config,
        started,
    }
    .emit(out)
}

struct Ctx {
    seed: Option<u64>,
    threads: usize,
}

impl Ctx {
    fn seed(&self) -> R<u64> {
        self.seed
            .ok_or_else(|| invalid("`seed` is mandatory for stochastic commands (use --seed or the config key)"))
    }
}

fn dimension(flag: &Option<usize>, file: &FileConfig) -> R<usize> {
    let d = pick(flag, &file.d, 3);
    check_dim(d)?;
    Ok(d)
}

fn potential(d: usize, dense_cap: Option<usize>) -> R<Potential> {
    let green = Arc::new(GreenFunction::new(d)?);
    let p = Potential::new(green);
    Ok(match dense_cap {
        Some(c) => p.with_dense_cap(c),
        None => p,
    })
}

fn sampling_mode(name: &str, safety_radius: Option<usize>) -> R<SamplingMode> {
    match name {
        "exact" => {
            if safety_radius.is_some() {
                return Err(invalid("`safety-radius` only applies to truncated mode"));
            }
            Ok(SamplingMode::Exact)
        }
        "truncated" => Ok(SamplingMode::Truncated { safety_radius }),
        other => Err(invalid(format!("`mode`: `{other}` is not exact or truncated"))),
    }
}

fn resolve_mode(flag: &Option<String>, safety: &Option<usize>, file: &FileConfig) -> R<SamplingMode> {
    sampling_mode(&pick(flag, &file.mode, "exact".into()), pick_opt(safety, &file.safety_radius))
}

fn mode_json(mode: SamplingMode) -> Value {
    match mode {
        SamplingMode::Exact => json!({"mode": "exact"}),
        SamplingMode::Truncated { safety_radius } => json!({"mode": "truncated", "safety_radius": safety_radius}),
    }
}

fn positive(name: &str, x: f64) -> R<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("`{name}`: {x} must be positive and finite")))
    }
}

fn probability(name: &str, x: f64) -> R<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(invalid(format!("`{name}`: {x} is not in [0, 1]")))
    }
}

fn noise_strength(x: f64) -> R<f64> {
    if (0.0..=0.5).contains(&x) {
        Ok(x)
    } else {
        Err(invalid(format!("`eps`: {x} is not in [0, 1/2]")))
    }
}

fn at_least_one(name: &str, n: usize) -> R<usize> {
    if n == 0 {
        Err(invalid(format!("`{name}` must be at least 1")))
    } else {
        Ok(n)
    }
}

fn single_eps(flag: Option<f64>, file: &FileConfig) -> R<f64> {
    let v = match (flag, &file.eps) {
        (Some(e), _) => e,
        (None, Some(list)) => match list.to_vec().as_slice() {
            [e] => *e,
            _ => return Err(invalid("`eps` must be a single value for this command")),
        },
        (None, None) => 0.0,
    };
    noise_strength(v)
}

fn coords(p: &Point) -> Vec<String> {
    p.coords().iter().map(|c| c.to_string()).collect()
}

// ---------------------------------------------------------------- capacity

fn parse_points(text: &str, d: usize) -> R<Vec<Point>> {
    let mut pts = Vec::new();
    for chunk in text.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        let c = chunk
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| invalid(format!("`points`: `{chunk}` is not a list of integers")))?;
        if c.len() != d {
            return Err(invalid(format!("`points`: `{chunk}` has {} coordinates, expected {d}", c.len())));
        }
        pts.push(Point::new(&c));
    }
    if pts.is_empty() {
        return Err(invalid("`points` is empty"));
    }
    Ok(pts)
}

fn capacity(a: &CapacityArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let d = dimension(&a.d, file)?;
    let shape = pick(&a.shape, &file.shape, "cube".into());
    let dense_cap = pick_opt(&a.dense_cap, &file.dense_cap);
    let pot = potential(d, dense_cap)?;
    let o = Point::origin(d);
    let (profile, detail) = match shape.as_str() {
        "cube" => {
            let side = at_least_one("side", pick(&a.side, &file.side, 2))?;
            (pot.box_equilibrium(&LatticeWindow::cube(o, side)?)?, json!({"side": side}))
        }
        "ball" => {
            let radius = pick(&a.radius, &file.radius, 1);
            (pot.box_equilibrium(&LatticeWindow::ball(o, radius)?)?, json!({"radius": radius}))
        }
        "points" => {
            let text = pick_opt(&a.points, &file.points).ok_or_else(|| invalid("`points` is required for shape points"))?;
            let pts = parse_points(&text, d)?;
            (pot.equilibrium_measure(&pts)?, json!({"points": text}))
        }
        other => return Err(invalid(format!("`shape`: `{other}` is not cube, ball or points"))),
    };
    let mut out = RunOutput::new(0);
    let mut cap = Table::new("capacity")?;
    cap.row(&[
        shape.clone(),
        f(d),
        f(profile.len()),
        f(profile.capacity()),
        f(profile.residual()),
        f(pot.green().g0()),
    ])?;
    let mut eq = Table::with_coords("equilibrium", d)?;
    for ((x, w), n) in profile.support().iter().zip(profile.weights()).zip(profile.normalized()) {
        let mut row = coords(x);
        row.push(f(w));
        row.push(f(n));
        eq.row(&row)?;
    }
    out.tables = vec![cap, eq];
    out.summary = json!({"capacity": profile.capacity()});
    let config = json!({
        "d": d,
        "shape": shape,
        "shape_parameters": detail,
        "dense_cap": pot.dense_cap(),
    });
    Ok((config, out))
}

// ---------------------------------------------------------------- sample

const SAMPLE_TAG: &str = "cli/sample";

struct Sampling {
    d: usize,
    window: LatticeWindow,
    window_json: Value,
    u: f64,
    eps: f64,
    mode: SamplingMode,
    replicas: usize,
}

impl Sampling {
    fn resolve(a: &SamplingArgs, file: &FileConfig) -> R<Self> {
        let d = dimension(&a.d, file)?;
        let radius = pick_opt(&a.radius, &file.radius);
        let side = pick_opt(&a.side, &file.side);
        let (window, window_json) = match (radius, side) {
            (Some(_), Some(_)) => return Err(invalid("give either `radius` or `side`, not both")),
            (None, Some(s)) => {
                at_least_one("side", s)?;
                (LatticeWindow::cube(Point::origin(d), s)?, json!({"cube_side": s}))
            }
            (r, None) => {
                let r = r.unwrap_or(4);
                (LatticeWindow::ball(Point::origin(d), r)?, json!({"ball_radius": r}))
            }
        };
        if window.len() > MAX_WINDOW {
            return Err(invalid(format!("window of {} vertices exceeds the cap {MAX_WINDOW}", window.len())));
        }
        Ok(Self {
            d,
            window,
            window_json,
            u: positive("u", pick(&a.u, &file.u, 1.0))?,
            eps: single_eps(a.eps, file)?,
            mode: resolve_mode(&a.mode, &a.safety_radius, file)?,
            replicas: at_least_one("replicas", pick(&a.replicas, &file.replicas, 1))?,
        })
    }

    fn json(&self) -> Value {
        json!({
            "d": self.d,
            "window": self.window_json,
            "u": self.u,
            "eps": self.eps,
            "sampling": mode_json(self.mode),
            "replicas": self.replicas,
        })
    }

    fn sampler(&self) -> R<WindowSampler> {
        Ok(WindowSampler::new(&potential(self.d, None)?, &self.window, self.mode)?)
    }
}

fn draw(sampler: &WindowSampler, seed: u64, r: usize, u: f64) -> interlace::Result<(InterlacementSample, CoupledNoise)> {
    let mut rng = stream(seed, r as u64, SAMPLE_TAG);
    let s = sampler.sample(u, &mut rng)?;
    let noise = CoupledNoise::draw(sampler.window(), &mut rng);
    Ok((s, noise))
}

fn sample(ctx: &Ctx, a: SamplingArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let seed = ctx.seed()?;
    let sp = Sampling::resolve(&a, file)?;
    let sampler = sp.sampler()?;
    let g0 = sampler_g0(sp.d)?;
    let expected = (-sp.u / g0).exp();
    struct Rep {
        summary: Vec<String>,
        trajectories: Vec<Vec<String>>,
        fields: Option<(SiteField, SiteField)>,
    }
    let reps = try_map_indexed(sp.replicas, ctx.threads, |r| -> R<Rep> {
        let (s, noise) = draw(&sampler, seed, r, sp.u)?;
        let noisy = noise.apply(s.occupied(), sp.eps)?;
        let n = sp.window.len();
        let occ = s.occupied().count_ones();
        let summary = vec![
            f(r),
            f(s.n_trajectories()),
            f(occ),
            f(n - occ),
            f((n - occ) as f64 / n as f64),
            f(n - noisy.count_ones()),
            f(s.traversed().count_ones()),
            f(s.error_bound()),
            f(expected),
        ];
        let trajectories = s
            .trajectories()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                vec![
                    f(r),
                    f(i),
                    f(t.mark()),
                    f(t.anchor()),
                    f(t.forward().len()),
                    f(t.reentries().len()),
                    f(t.backward().len()),
                    flag(t.truncated_forward()),
                    flag(t.truncated_backward()),
                ]
            })
            .collect();
        let fields = (r == 0).then(|| (s.occupied().clone(), noisy));
        Ok(Rep {
            summary,
            trajectories,
            fields,
        })
    })?;
    let mut summary = Table::new("sample_summary")?;
    let mut traj = Table::new("trajectories")?;
    let mut sites = Table::with_coords("sites", sp.d)?;
    let mut vacant_total = 0.0;
    for rep in &reps {
        summary.row(&rep.summary)?;
        vacant_total += rep.summary[4].parse::<f64>().unwrap_or(0.0);
        for t in &rep.trajectories {
            traj.row(t)?;
        }
        if let Some((occ, noisy)) = &rep.fields {
            for (i, x) in sp.window.iter().enumerate() {
                let mut row = coords(&x);
                row.push(flag(occ.get(i)));
                row.push(flag(noisy.get(i)));
                sites.row(&row)?;
            }
        }
    }
    let mut out = RunOutput::new(sp.replicas);
    out.tables = vec![summary, sites, traj];
    out.seed_tags = vec![SAMPLE_TAG.into()];
    out.summary = json!({
        "mean_vacant_fraction": vacant_total / sp.replicas as f64,
        "expected_vacant_fraction": expected,
        "capacity": sampler.capacity(),
    });
    let mut config = sp.json();
    config["seed"] = json!(seed);
    Ok((config, out))
}

fn sampler_g0(d: usize) -> R<f64> {
    Ok(GreenFunction::new(d)?.g0())
}

// ---------------------------------------------------------------- analyze

fn read_sites(path: &Path) -> R<(LatticeWindow, SiteField, SiteField)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| invalid(format!("{}: {e}", path.display())))?.clone();
    let d = header.iter().take_while(|h| h.starts_with('x')).count();
    let cols: Vec<&str> = header.iter().skip(d).collect();
    if cols != ["occupied", "noisy_occupied"] {
        return Err(invalid(format!("{}: not a sites.csv file (header {:?})", path.display(), header)));
    }
    check_dim(d)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> R<i64> {
            rec.get(i)
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| invalid(format!("{}: bad field {i} in {:?}", path.display(), rec)))
        };
        let p: Vec<i64> = (0..d).map(&parse).collect::<R<_>>()?;
        let bit = |i: usize| -> R<bool> {
            match parse(i)? {
                0 => Ok(false),
                1 => Ok(true),
                v => Err(invalid(format!("{}: {v} is not 0 or 1", path.display()))),
            }
        };
        rows.push((Point::new(&p), bit(d)?, bit(d + 1)?));
    }
    if rows.is_empty() {
        return Err(invalid(format!("{} has no sites", path.display())));
    }
    let lo: Vec<i64> = (0..d).map(|a| rows.iter().map(|r| r.0.get(a)).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|a| rows.iter().map(|r| r.0.get(a)).max().unwrap()).collect();
    let sides: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
    let w = LatticeWindow::new(Point::new(&lo), &sides)?;
    if w.len() != rows.len() {
        return Err(invalid(format!("{}: sites do not fill their bounding box", path.display())));
    }
    let mut occ = SiteField::filled(&w, false);
    let mut noisy = SiteField::filled(&w, false);
    let mut seen = vec![false; w.len()];
    for (p, o, n) in rows {
        let i = w.index(&p).expect("inside bounding box");
        if std::mem::replace(&mut seen[i], true) {
            return Err(invalid(format!("{}: duplicate site {p}", path.display())));
        }
        occ.set(i, o);
        noisy.set(i, n);
    }
    Ok((w, occ, noisy))
}

/// Largest `r` with `B(center, r)` inside the window.
fn inscribed_radius(w: &LatticeWindow) -> usize {
    let c = w.center();
    let far = w.far_corner();
    (0..w.dim())
        .map(|a| (c.get(a) - w.corner().get(a)).min(far.get(a) - c.get(a)) as usize)
        .min()
        .unwrap_or(0)
}

fn analyze(ctx: &Ctx, a: &AnalyzeArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let field = pick(&a.field, &file.field, "vacant".into());
    if !["vacant", "occupied", "noisy_vacant"].contains(&field.as_str()) {
        return Err(invalid(format!("`field`: `{field}` is not vacant, occupied or noisy_vacant")));
    }
    let select = |occ: &SiteField, noisy: &SiteField| -> SiteField {
        match field.as_str() {
            "occupied" => occ.clone(),
            "noisy_vacant" => noisy.complement(),
            _ => occ.complement(),
        }
    };
    let input = pick_opt(&a.input, &file.input);
    let mut config;
    let mut seed_tags = Vec::new();
    let (window, fields): (LatticeWindow, Vec<SiteField>) = match &input {
        Some(path) => {
            let (w, occ, noisy) = read_sites(path)?;
            let bytes = std::fs::read(path)?;
            config = json!({"input": path.display().to_string(), "input_sha256": crate::output::sha256_hex(&bytes)});
            (w, vec![select(&occ, &noisy)])
        }
        None => {
            let seed = ctx.seed()?;
            let sp = Sampling::resolve(&a.sampling, file)?;
            let sampler = sp.sampler()?;
            let fields = try_map_indexed(sp.replicas, ctx.threads, |r| -> R<SiteField> {
                let (s, noise) = draw(&sampler, seed, r, sp.u)?;
                Ok(select(s.occupied(), &noise.apply(s.occupied(), sp.eps)?))
            })?;
            config = sp.json();
            config["seed"] = json!(seed);
            seed_tags.push(SAMPLE_TAG.to_string());
            (sp.window.clone(), fields)
        }
    };
    let rho = inscribed_radius(&window);
    let size = pick(&a.size, &file.sizes.as_ref().map(|s| s.to_vec()).and_then(|v| v.first().copied()), rho / 2);
    if size == 0 || 2 * size > rho {
        return Err(invalid(format!(
            "`L` = {size} needs 1 <= L and B(c, 2L) inside the window (inscribed radius {rho})"
        )));
    }
    let slab = at_least_one("slab", pick(&a.slab, &file.slab, 2))?;
    let diameter = pick(&a.diameter, &file.diameter, size);
    let center = window.center();
    let rows = try_map_indexed(fields.len(), ctx.threads, |r| -> R<Vec<String>> {
        let cfg = Configuration::sites(fields[r].clone());
        let lab = components(&cfg, Adjacency::Nearest);
        let star = components(&cfg, Adjacency::Star);
        let slab_cfg = slab_restrict(&cfg, slab)?;
        Ok(vec![
            f(r),
            field.clone(),
            f(cfg.active_count()),
            f(lab.count()),
            f(lab.max_size()),
            f(lab.max_diameter()),
            f(star.count()),
            flag(crossing(&cfg, &center, size, 2 * size)?),
            flag(local_uniqueness_event(&cfg, &center, size)?),
            f(components(&slab_cfg, Adjacency::Nearest).count()),
            f(diameter_filter(&cfg, diameter).count_ones()),
        ])
    })?;
    let mut t = Table::new("analysis")?;
    let mut crossings = 0u64;
    for row in &rows {
        crossings += (row[7] == "1") as u64;
        t.row(row)?;
    }
    let mut out = RunOutput::new(fields.len());
    out.tables = vec![t];
    out.seed_tags = seed_tags;
    out.summary = json!({"crossing_fraction": crossings as f64 / rows.len() as f64});
    config["field"] = json!(field);
    config["L"] = json!(size);
    config["slab"] = json!(slab);
    config["diameter"] = json!(diameter);
    Ok((config, out))
}

// ---------------------------------------------------------------- renorm-check

const RENORM_TAG: &str = "cli/renorm";

fn renorm(ctx: &Ctx, a: &RenormArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let seed = ctx.seed()?;
    let d = dimension(&a.d, file)?;
    let base = at_least_one("L0", pick(&a.base, &file.base, 2))?;
    let l0 = pick(&a.l0, &file.l0, 4);
    if l0 < 2 {
        return Err(invalid("`l0` must be at least 2"));
    }
    let n = pick(&a.n, &file.n, 1);
    let u = positive("u", pick(&a.u, &file.u, 1.0))?;
    let p = probability("p", pick(&a.p, &file.p, 1.0))?;
    let replicas = at_least_one("replicas", pick(&a.replicas, &file.replicas, 100))?;
    let mode = resolve_mode(&a.mode, &a.safety_radius, file)?;
    let allow = a.allow_override || file.allow_override.unwrap_or(false);
    let mut hier = ScaleHierarchy::new(d, base, l0)?;
    if let Some(l) = pick_opt(&a.separation, &file.separation) {
        if !allow {
            return Err(invalid(format!(
                "`separation` = {l} overrides l(d) = {}; pass --allow-override to run outside the proof regime",
                l_of_d(d)
            )));
        }
        hier = hier.with_separation(l)?;
    }
    let pot = potential(d, None)?;
    let m = match pick_opt(&a.m, &file.m) {
        Some(m) => m,
        None => density(pot.green(), u)?,
    };
    let spec = SeedSpec::new(base, m)?;
    let k = hier.blocks_per_side(n)? as usize;
    let side = (k + 1) * base;
    let cells = side.checked_pow(d as u32).unwrap_or(usize::MAX);
    if cells > MAX_WINDOW {
        return Err(invalid(format!("window side {side} in d = {d} exceeds the cap of {MAX_WINDOW} vertices")));
    }
    let o = Point::origin(d);
    let window = LatticeWindow::cube(o, side)?;
    let blocks = LatticeWindow::cube(o, k)?;
    let sampler = WindowSampler::new(&pot, &window, mode)?;
    struct Rep {
        e: bool,
        f: bool,
        dbar: bool,
        bad0: bool,
        recursive: bool,
        bad_blocks: usize,
    }
    let reps = try_map_indexed(replicas, ctx.threads, |r| -> R<Rep> {
        let mut rng = stream(seed, r as u64, RENORM_TAG);
        let s = sampler.sample(u, &mut rng)?;
        let dil = bernoulli_bond(&window, p, &mut rng)?;
        let int_cfg = Configuration::bonds(s.traversed().clone());
        let dil_cfg = Configuration::bonds(dil.clone());
        let bad = classify_blocks(s.traversed(), &dil, &spec, &blocks)?;
        Ok(Rep {
            e: eval_seed_e(&int_cfg, &o, &spec)?,
            f: eval_seed_f(&int_cfg, &o, &spec)?,
            dbar: eval_seed_d(&dil_cfg, &o, base)?,
            bad0: bad.get(0),
            recursive: eval_recursive(&bad, &hier, &o, n)?,
            bad_blocks: bad.count_ones(),
        })
    })?;
    let mut t = Table::new("renorm")?;
    let reps_u = replicas as u64;
    let mut event = |name: &str, hits: u64| -> R<()> {
        let (lo, hi) = binomial_ci(hits, reps_u, CONFIDENCE);
        t.row(&[name.into(), f(hits), f(reps_u), f(hits as f64 / reps_u as f64), f(lo), f(hi)])
    };
    let count = |pred: &dyn Fn(&Rep) -> bool| reps.iter().filter(|r| pred(r)).count() as u64;
    event("seed_e_good", count(&|r| r.e))?;
    event("seed_f_good", count(&|r| r.f))?;
    event("seed_d_bad", count(&|r| r.dbar))?;
    event("block_bad", count(&|r| r.bad0))?;
    event(&format!("recursive_bad_level_{n}"), count(&|r| r.recursive))?;
    let total_blocks = (replicas * blocks.len()) as u64;
    let bad_total: u64 = reps.iter().map(|r| r.bad_blocks as u64).sum();
    let (lo, hi) = binomial_ci(bad_total, total_blocks, CONFIDENCE);
    let p_seed = bad_total as f64 / total_blocks as f64;
    t.row(&["bad_block_fraction".into(), f(bad_total), f(total_blocks), f(p_seed), f(lo), f(hi)])?;
    let derived = [
        ("decoupling_bound", decoupling_bound(l0, d, n, p_seed)?),
        ("ln_decoupling_bound", ln_decoupling_bound(l0, d, n, p_seed)?),
        ("separation", hier.separation() as f64),
        ("proof_regime", if hier.proof_regime() { 1.0 } else { 0.0 }),
        ("m", m),
    ];
    for (name, v) in derived {
        t.row(&[name.into(), String::new(), f(reps_u), f(v), String::new(), String::new()])?;
    }
    let mut out = RunOutput::new(replicas);
    out.tables = vec![t];
    out.seed_tags = vec![RENORM_TAG.into()];
    out.summary = json!({"proof_regime": hier.proof_regime(), "bad_block_fraction": p_seed});
    let config = json!({
        "seed": seed,
        "d": d,
        "L0": base,
        "l0": l0,
        "n": n,
        "u": u,
        "p": p,
        "m": m,
        "separation": hier.separation(),
        "allow_override": allow,
        "replicas": replicas,
        "sampling": mode_json(mode),
        "window_side": side,
    });
    Ok((config, out))
}

// ---------------------------------------------------------------- estimate

fn estimate_row(t: &mut Table, e: &ThresholdEstimate) -> R<()> {
    let sizes: Vec<String> = e.sizes.iter().map(|s| s.to_string()).collect();
    t.row(&[
        e.parameter.name().into(),
        f(e.eps),
        f(e.size),
        sizes.join(";"),
        opt(e.value),
        opt(e.ci.map(|c| c.0)),
        opt(e.ci.map(|c| c.1)),
        f(e.target_probability),
        f(e.replicas),
        e.protocol.clone(),
        e.failure.clone().unwrap_or_default(),
    ])
}

fn curve_rows(t: &mut Table, pts: &[interlace::thresholds::CurvePoint]) -> R<()> {
    for c in pts {
        t.row(&[
            c.event.into(),
            f(c.size),
            f(c.eps),
            f(c.u),
            f(c.successes),
            f(c.replicas),
            f(c.probability),
            f(c.ci_low),
            f(c.ci_high),
        ])?;
    }
    Ok(())
}

fn estimate(ctx: &Ctx, a: &EstimateArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let seed = ctx.seed()?;
    let d = dimension(&a.d, file)?;
    let what = pick(&a.what, &file.what, "u-star-eps".into());
    if !["u-star-eps", "u-star-star", "u-bar", "curves", "all"].contains(&what.as_str()) {
        return Err(invalid(format!(
            "`what`: `{what}` is not u-star-eps, u-star-star, u-bar, curves or all"
        )));
    }
    let eps: Vec<f64> = match (&a.eps, &file.eps) {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => v.to_vec(),
        (None, None) => vec![0.0],
    };
    let sizes: Vec<usize> = match (&a.sizes, &file.sizes) {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => v.to_vec(),
        (None, None) => vec![4],
    };
    if eps.is_empty() || sizes.is_empty() {
        return Err(invalid("`eps` and `L` grids must be nonempty"));
    }
    for &e in &eps {
        noise_strength(e)?;
    }
    if sizes.contains(&0) {
        return Err(invalid("`L` values must be positive"));
    }
    let tol = positive("tol", pick(&a.tol, &file.tol, 1e-3))?;
    let mode = resolve_mode(&a.mode, &a.safety_radius, file)?;
    let cfg = EstimatorConfig {
        u_max: pick(&a.u_max, &file.u_max, 8.0),
        u_min: pick(&a.u_min, &file.u_min, 0.0),
        replicas: pick(&a.replicas, &file.replicas, 200),
        seed,
        threads: ctx.threads,
        mode,
        max_window: pick(&a.max_window, &file.max_window, 1 << 20),
        confidence: CONFIDENCE,
        curve_points: pick(&a.grid_points, &file.grid_points, 24),
    };
    at_least_one("replicas", cfg.replicas)?;
    at_least_one("grid-points", cfg.curve_points)?;
    let est = ThresholdEstimator::new(potential(d, None)?, cfg.clone())?;
    let mut est_t = Table::new("estimate")?;
    let mut curves_t = Table::new("curves")?;
    let mut estimates = Vec::new();
    let all = what == "all";
    if all || what == "u-star-eps" {
        for &e in &eps {
            estimates.push(est.estimate_u_star_eps(e, &sizes, tol)?);
        }
    }
    if all || what == "u-star-star" {
        estimates.push(est.estimate_u_star_star(&sizes, tol)?);
    }
    if all || what == "u-bar" {
        estimates.push(est.estimate_u_bar(&sizes)?);
    }
    for e in &estimates {
        estimate_row(&mut est_t, e)?;
        curve_rows(&mut curves_t, &e.curve)?;
    }
    if what == "curves" {
        let grid = cfg.grid();
        for &e in &eps {
            curve_rows(&mut curves_t, &est.crossing_curve(&grid, e, &sizes)?)?;
        }
    }
    let mut out = RunOutput::new(cfg.replicas);
    out.tables = vec![est_t, curves_t];
    out.seed_tags = sizes.iter().map(|l| format!("thresholds/ball/{}", 2 * l)).collect();
    out.summary = json!(estimates
        .iter()
        .map(|e| json!({"parameter": e.parameter.name(), "eps": e.eps, "value": e.value, "failure": e.failure}))
        .collect::<Vec<_>>());
    let config = json!({
        "seed": seed,
        "d": d,
        "what": what,
        "eps": eps,
        "L": sizes,
        "u_min": cfg.u_min,
        "u_max": cfg.u_max,
        "grid_points": cfg.curve_points,
        "replicas": cfg.replicas,
        "tol": tol,
        "max_window": cfg.max_window,
        "confidence": CONFIDENCE,
        "sampling": mode_json(mode),
    });
    Ok((config, out))
}

// ---------------------------------------------------------------- resistance

fn parse_law(text: &str) -> R<ResistanceLaw> {
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    let nums = args
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| invalid(format!("`law`: cannot parse `{text}`")))?;
    let law = match (kind, nums.as_slice()) {
        ("constant", [c]) => ResistanceLaw::Constant { c: *c },
        ("uniform", [a, b]) => ResistanceLaw::Uniform { a: *a, b: *b },
        ("exp", [lambda, floor]) => ResistanceLaw::ExponentialTruncated {
            lambda: *lambda,
            floor: *floor,
        },
        _ => {
            return Err(invalid(format!(
                "`law`: `{text}` is not constant:c, uniform:a,b or exp:lambda,floor"
            )))
        }
    };
    law.validate()?;
    Ok(law)
}

/// `N_min, 2 N_min, 4 N_min, ...` up to `N_max`, with `N_max` itself always included.
fn doubling(n_min: usize, n_max: usize) -> R<Vec<usize>> {
    if n_min == 0 || n_min > n_max {
        return Err(invalid(format!("need 1 <= N_min <= N_max, got {n_min} and {n_max}")));
    }
    let mut v = Vec::new();
    let mut n = n_min;
    while n < n_max {
        v.push(n);
        n *= 2;
    }
    v.push(n_max);
    Ok(v)
}

fn resistance(ctx: &Ctx, a: &ResistanceArgs, file: &FileConfig) -> R<(Value, RunOutput)> {
    let seed = ctx.seed()?;
    let d = dimension(&a.d, file)?;
    let u = positive("u", pick(&a.u, &file.u, 1.0))?;
    let law = parse_law(&pick(&a.law, &file.law, "constant:1".into()))?;
    let radii = match pick_opt(&a.radii, &file.radii) {
        Some(r) => {
            if r.is_empty() || r.contains(&0) {
                return Err(invalid("`radii` must be a nonempty list of positive integers"));
            }
            r
        }
        None => doubling(pick(&a.n_min, &file.n_min, 2), pick(&a.n_max, &file.n_max, 8))?,
    };
    let dilution = probability("dilution", pick(&a.dilution, &file.dilution, 1.0))?;
    let replicas = at_least_one("replicas", pick(&a.replicas, &file.replicas, 20))?;
    let mode = resolve_mode(&a.mode, &a.safety_radius, file)?;
    let lattice_reference = a.lattice_reference || file.lattice_reference.unwrap_or(false);
    let pcfg = ProfileConfig {
        level: u,
        radii: radii.clone(),
        law,
        dilution,
        replicas,
        seed,
        threads: ctx.threads,
        mode,
    };
    let prof = transience_profile(&potential(d, None)?, &pcfg)?;
    let reference = if lattice_reference {
        Some(lattice_profile(d, &prof.radii)?)
    } else {
        None
    };
    let mut t = Table::new("resistance")?;
    for (i, row) in prof.rows.iter().enumerate() {
        t.row(&[
            f(row.radius),
            f(row.median),
            f(row.lower_quartile),
            f(row.upper_quartile),
            f(row.infinite_fraction),
            opt(reference.as_ref().map(|v| v[i])),
        ])?;
    }
    let mut reps = Table::new("resistance_replicas")?;
    for (r, values) in prof.per_replica.iter().enumerate() {
        for (radius, v) in prof.radii.iter().zip(values) {
            reps.row(&[f(r), f(radius), f(v)])?;
        }
    }
    let mut out = RunOutput::new(replicas);
    out.tables = vec![t, reps];
    out.seed_tags = vec!["resistance/profile".into()];
    out.summary = json!({"note": prof.note});
    let config = json!({
        "seed": seed,
        "d": d,
        "u": u,
        "law": law.label(),
        "radii": prof.radii,
        "dilution": dilution,
        "replicas": replicas,
        "sampling": mode_json(mode),
        "lattice_reference": lattice_reference,
    });
    Ok((config, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_includes_both_ends() {
        assert_eq!(doubling(2, 24).unwrap(), vec![2, 4, 8, 16, 24]);
        assert_eq!(doubling(3, 3).unwrap(), vec![3]);
        assert!(doubling(0, 4).is_err());
        assert!(doubling(5, 4).is_err());
    }

    #[test]
    fn laws_parse() {
        assert_eq!(parse_law("constant:2").unwrap(), ResistanceLaw::Constant { c: 2.0 });
        assert_eq!(parse_law("uniform:0.5,2").unwrap(), ResistanceLaw::Uniform { a: 0.5, b: 2.0 });
        assert_eq!(
            parse_law("exp:1,0.1").unwrap(),
            ResistanceLaw::ExponentialTruncated { lambda: 1.0, floor: 0.1 }
        );
        for bad in ["constant", "uniform:1", "exp:1,0", "pareto:1", "constant:x"] {
            assert!(matches!(parse_law(bad), Err(CliError::Validation(_))), "{bad}");
        }
    }

    #[test]
    fn points_parse() {
        let p = parse_points("0,0,0; 1,0,0", 3).unwrap();
        assert_eq!(p, vec![Point::origin(3), Point::unit(3, 0)]);
        assert!(parse_points("0,0", 3).is_err());
        assert!(parse_points("", 3).is_err());
    }

    #[test]
    fn inscribed_radius_of_boxes() {
        let w = LatticeWindow::ball(Point::origin(3), 5).unwrap();
        assert_eq!(inscribed_radius(&w), 5);
        let w = LatticeWindow::new(Point::origin(3), &[10, 7, 9]).unwrap();
        assert_eq!(inscribed_radius(&w), 3);
    }
}
