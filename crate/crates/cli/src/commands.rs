use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};

use hofnet::composition::{compose_interpolate, param_interpolate, power_eval, CompositionPlan, KMapping};
use hofnet::funcnets::{complexity_lvc, count_params, lvc_forward, lvc_to_hof, mapping_forward, EncoderNet};
use hofnet::geometry::{
    chamfer_sym, chamfer_sym_with, default_f1_tau, f1_score, voxelize_clipped, Backend, CanonicalSampler, PointCloud,
    SamplerKind,
};
use hofnet::planning::{evaluate_with, report_csv, sample_episodes, PlanReport, Planner};
use hofnet::seeding::{item_seed, rng_for, Stream};
use hofnet::tensor::Array;
use hofnet::training::{
    eval_identity_baseline, gen_dataset_with, load_checkpoint, metrics_csv, reconstruct, save_checkpoint, Sample,
    TrainConfig, Trainer,
};

use crate::files::{load_dataset, parse_f64s, parse_lvc_spec, parse_raster, save_dataset, write_file};
use crate::plot::{chart_from_csv_grouped, emit_plot, render_svg};
use crate::*;

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Interpolate(a) => interpolate(a),
        Command::Eval(a) => eval(a),
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
        Command::ConvertLvc(a) => convert_lvc(a),
    }
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn effective(line: String) {
    println!("effective-config: hofnet {line}");
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    effective(format!(
        "gen-data --count {} --seed {} --gt-points {} --raster-side {} --out {}",
        a.count,
        a.seed,
        a.gt_points,
        a.raster_side,
        p(&a.out)
    ));
    let data = gen_dataset_with(a.count, a.seed, a.gt_points, a.raster_side)?;
    save_dataset(&a.out, &data, a.raster_side)?;
    info!("wrote {} shapes to {}", data.len(), a.out.display());
    Ok(())
}

/// Config file (or defaults) with `KEY=VALUE` overrides applied.
pub fn resolve_config(file: Option<&Path>, overrides: &[String]) -> Result<TrainConfig> {
    let base = match file {
        Some(f) => TrainConfig::parse(&fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?)
            .with_context(|| format!("parsing {}", f.display()))?,
        None => TrainConfig::default(),
    };
    let mut lines: Vec<(String, String)> =
        base.to_text().lines().filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string()))).collect();
    for o in overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("override {o:?} is not KEY=VALUE"))?;
        let slot = lines
            .iter_mut()
            .find(|(key, _)| key == k.trim())
            .with_context(|| format!("unknown config key {:?}", k.trim()))?;
        slot.1 = v.trim().to_string();
    }
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let cfg = TrainConfig::parse(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), &a.overrides)?;
    let mut line = format!("train --data {} --out {}", p(&a.data), p(&a.out));
    if let Some(m) = &a.metrics {
        let _ = write!(line, " --metrics {}", p(m));
    }
    if let Some(m) = &a.plot {
        let _ = write!(line, " --plot {}", p(m));
    }
    for l in cfg.to_text().lines() {
        let _ = write!(line, " --set {l}");
    }
    effective(line);
    let data = load_dataset(&a.data)?;
    let mut trainer = Trainer::new(cfg.clone())?;
    let started = Instant::now();
    let log = trainer.fit(&data, |m| {
        if m.step % 100 == 0 || m.step + 1 == cfg.steps {
            info!("step {} loss {:.6e}", m.step, m.loss.total);
        }
    })?;
    info!("trained {} steps in {:.1}s", log.len(), started.elapsed().as_secs_f64());
    save_checkpoint(&a.out, trainer.encoder(), &cfg).with_context(|| format!("writing {}", a.out.display()))?;
    let csv = metrics_csv(&log);
    if let Some(m) = &a.metrics {
        write_file(m, csv.as_bytes())?;
    }
    if let Some(svg) = &a.plot {
        let chart = emit_plot(&csv, "step", &["loss", "chamfer_fwd", "chamfer_bwd"], "training loss")?;
        write_file(svg, chart.as_bytes())?;
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(EncoderNet, TrainConfig)> {
    load_checkpoint(path).with_context(|| format!("loading {}", path.display()))
}

fn pick(data: &[Sample], i: usize) -> Result<&Sample> {
    data.get(i).with_context(|| format!("index {i} out of range for {} examples", data.len()))
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<()> {
    let (enc, cfg) = load_model(&a.model)?;
    let k = a.k.unwrap_or(cfg.k);
    let source = match (&a.data, &a.raster) {
        (Some(d), _) => format!("--data {} --index {}", p(d), a.index),
        (None, Some(r)) => format!("--raster {}", p(r)),
        (None, None) => bail!("need --data or --raster"),
    };
    effective(format!(
        "reconstruct --model {} {source} --n-points {} --k {k} --seed {} --out {}",
        p(&a.model),
        a.n_points,
        a.seed,
        p(&a.out)
    ));
    let raster = match (&a.data, &a.raster) {
        (Some(d), _) => pick(&load_dataset(d)?, a.index)?.raster.clone(),
        (None, Some(r)) => parse_raster(&fs::read_to_string(r).with_context(|| format!("reading {}", r.display()))?)?,
        _ => unreachable!(),
    };
    let cloud = reconstruct(&enc, &raster, a.n_points, k, cfg.sampler, a.seed)?;
    write_file(&a.out, cloud.to_text().as_bytes())
}

fn default_plan(k: usize) -> String {
    let a = k.div_ceil(2);
    "A".repeat(a) + &"B".repeat(k - a)
}

fn interpolate(a: &InterpolateArgs) -> Result<()> {
    let (enc, cfg) = load_model(&a.model)?;
    let plan_text = a.plan.clone().unwrap_or_else(|| default_plan(cfg.k));
    let mode = match a.mode {
        InterpMode::Compose => format!("compose --plan {plan_text}"),
        InterpMode::Param => "param".to_string(),
    };
    effective(format!(
        "interpolate --model {} --data {} --a {} --b {} --mode {mode} --n-points {} --seed {} --out {}",
        p(&a.model),
        p(&a.data),
        a.a,
        a.b,
        a.n_points,
        a.seed,
        p(&a.out)
    ));
    let data = load_dataset(&a.data)?;
    let theta_a = enc.forward(&pick(&data, a.a)?.raster)?;
    let theta_b = enc.forward(&pick(&data, a.b)?.raster)?;
    let x = CanonicalSampler::new(cfg.sampler, a.seed).sample(a.n_points).to_array()?;
    let y = match a.mode {
        InterpMode::Compose => {
            let plan: CompositionPlan = plan_text.parse()?;
            compose_interpolate(&theta_a, &theta_b, &plan, &x)?
        }
        InterpMode::Param => {
            let mixed = param_interpolate(&theta_a, &theta_b)?;
            if cfg.k == 1 {
                mapping_forward(&mixed, &x)?
            } else {
                power_eval(&KMapping::new(mixed, cfg.k)?, &x)?
            }
        }
    };
    write_file(&a.out, PointCloud::from_array(&y)?.to_text().as_bytes())
}

fn eval(a: &EvalArgs) -> Result<()> {
    ensure!(!a.n_points.is_empty(), "--n-points needs at least one value");
    let (enc, cfg) = load_model(&a.model)?;
    let counts: Vec<String> = a.n_points.iter().map(|n| n.to_string()).collect();
    let mut line = format!(
        "eval --model {} --data {} --n-points {} --seed {} --out {}",
        p(&a.model),
        p(&a.data),
        counts.join(","),
        a.seed,
        p(&a.out)
    );
    if let Some(svg) = &a.plot {
        let _ = write!(line, " --plot {}", p(svg));
    }
    effective(line);
    let data = load_dataset(&a.data)?;
    let mut csv = String::from("label,n_points,chamfer_sym,f1,baseline_chamfer\n");
    let mut summary = String::from("n_points,mean_chamfer\n");
    for &n in &a.n_points {
        let baseline = if cfg.sampler.dim() == 3 {
            eval_identity_baseline(&data, n, cfg.sampler, a.seed)?
        } else {
            vec![f64::NAN; data.len()]
        };
        let mut total = 0.0;
        for (i, s) in data.iter().enumerate() {
            let pred = reconstruct(&enc, &s.raster, n, cfg.k, cfg.sampler, item_seed(a.seed, Stream::Eval, i as u64))?;
            let cd = chamfer_sym(&pred, &s.gt)?;
            let f1 = f1_score(&pred, &s.gt, default_f1_tau(&s.gt))?.f1;
            total += cd;
            let label = s.gt.label.clone().unwrap_or_else(|| i.to_string());
            let _ = writeln!(csv, "{label},{n},{cd:e},{f1:.6},{:e}", baseline[i]);
        }
        let mean = total / data.len() as f64;
        info!("n_points {n}: mean chamfer_sym {mean:.6e}");
        let _ = writeln!(summary, "{n},{mean:e}");
    }
    write_file(&a.out, csv.as_bytes())?;
    if let Some(svg) = &a.plot {
        write_file(svg, emit_plot(&summary, "n_points", &["mean_chamfer"], "chamfer vs sample count")?.as_bytes())?;
    }
    Ok(())
}

fn plan(a: &PlanArgs) -> Result<()> {
    ensure!(a.grid >= 2, "--grid must be at least 2");
    let (enc, cfg) = load_model(&a.model)?;
    effective(format!(
        "plan --model {} --data {} --grid {} --episodes {} --n-points {} --seed {} --out {}",
        p(&a.model),
        p(&a.data),
        a.grid,
        a.episodes,
        a.n_points,
        a.seed,
        p(&a.out)
    ));
    let data = load_dataset(&a.data)?;
    let episodes = sample_episodes(a.grid, a.episodes, a.seed);
    let planners = [
        ("hof", Planner::AStar),
        ("shortest_l1", Planner::ShortestL1),
        ("sabb", Planner::Sabb),
        ("gt", Planner::AStar),
    ];
    let mut per: Vec<Vec<PlanReport>> = vec![Vec::new(); planners.len()];
    for (i, s) in data.iter().enumerate() {
        let (gt, dropped_gt) = voxelize_clipped(&s.gt, a.grid)?;
        let pred_cloud =
            reconstruct(&enc, &s.raster, a.n_points, cfg.k, cfg.sampler, item_seed(a.seed, Stream::Eval, i as u64))?;
        let (pred, dropped) = voxelize_clipped(&pred_cloud, a.grid)?;
        if dropped + dropped_gt > 0 {
            warn!("shape {i}: {dropped} predicted and {dropped_gt} true points outside the grid were dropped");
        }
        for (j, (_, planner)) in planners.iter().enumerate() {
            let grid = if j == 3 { &gt } else { &pred };
            per[j].push(evaluate_with(*planner, grid, &gt, &episodes)?);
        }
    }
    let reports: Vec<PlanReport> =
        planners.iter().zip(&per).map(|((name, _), parts)| PlanReport::combine(*name, parts)).collect();
    for r in &reports {
        info!("{}: success {:.3} optimality {:.3} skipped {}", r.model_id, r.success_rate, r.optimality, r.skipped);
    }
    write_file(&a.out, report_csv(&reports).as_bytes())
}

/// Timing table with header `metric,backend,n,seconds,value`; `seconds` is
/// the best of `reps` runs.
pub fn run_bench(ns: &[usize], backends: &[Backend], reps: usize, seed: u64) -> Result<String> {
    ensure!(reps > 0, "reps must be positive");
    let mut csv = String::from("metric,backend,n,seconds,value\n");
    for &n in ns {
        ensure!(n > 0, "bench sizes must be positive");
        let mut rng = rng_for(item_seed(seed, Stream::Bench, n as u64), Stream::Bench);
        let x = SamplerKind::Ball3Interior.sample_with(&mut rng, n);
        let y = SamplerKind::Sphere3Surface.sample_with(&mut rng, n);
        for &b in backends {
            let mut best = f64::INFINITY;
            let mut value = 0.0;
            for _ in 0..reps {
                let t = Instant::now();
                value = chamfer_sym_with(&x, &y, b)?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            let _ = writeln!(csv, "chamfer,{},{n},{best:.6e},{value:.17e}", b.name());
        }
    }
    Ok(csv)
}

pub fn bench_svg(csv: &str) -> hofnet::Result<String> {
    render_svg(&chart_from_csv_grouped(csv, "backend", "n", "seconds", "chamfer wall time")?)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let backends = a.backend.iter().map(|b| b.parse::<Backend>()).collect::<hofnet::Result<Vec<_>>>()?;
    let ns: Vec<String> = a.n.iter().map(|n| n.to_string()).collect();
    let mut line = format!(
        "bench --metric chamfer --n {} --backend {} --reps {} --seed {} --out {}",
        ns.join(","),
        a.backend.join(","),
        a.reps,
        a.seed,
        p(&a.out)
    );
    if let Some(svg) = &a.svg {
        let _ = write!(line, " --svg {}", p(svg));
    }
    effective(line);
    let csv = run_bench(&a.n, &backends, a.reps, a.seed)?;
    print!("{csv}");
    write_file(&a.out, csv.as_bytes())?;
    if let Some(svg) = &a.svg {
        write_file(svg, bench_svg(&csv)?.as_bytes())?;
    }
    Ok(())
}

fn convert_lvc(a: &ConvertLvcArgs) -> Result<()> {
    let mut line =
        format!("convert-lvc --spec {} --codeword {} --probes {} --seed {}", p(&a.spec), a.codeword, a.probes, a.seed);
    if a.check {
        line.push_str(" --check");
    }
    if let Some(o) = &a.out {
        let _ = write!(line, " --out {}", p(o));
    }
    effective(line);
    let spec = parse_lvc_spec(&fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?)?;
    let z = parse_f64s(&a.codeword)?;
    ensure!(z.len() == spec.codeword_len(), "codeword has {} values, spec expects {}", z.len(), spec.codeword_len());
    let hof = lvc_to_hof(&spec, &z)?;
    println!(
        "lvc complexity {} (decoder {} + codeword {}), converted mapping parameters {}",
        complexity_lvc(&spec),
        complexity_lvc(&spec) - spec.codeword_len(),
        spec.codeword_len(),
        count_params(hof.spec())
    );
    if let Some(o) = &a.out {
        let theta: Vec<String> = hof.theta().iter().map(|v| format!("{v:e}")).collect();
        let text =
            format!("layer_sizes={}\nactivation={}\ntheta={}\n", hof.spec(), hof.spec().activation(), theta.join(","));
        write_file(o, text.as_bytes())?;
    }
    if a.check {
        ensure!(a.probes > 0, "--probes must be positive");
        let d = spec.layer_sizes()[0];
        let mut rng = rng_for(a.seed, Stream::Probe);
        let pts = SamplerKind::Ball3Interior.sample_with(&mut rng, a.probes * d.div_ceil(3));
        let flat: Vec<f64> = pts.coords()[..a.probes * d].to_vec();
        let x = Array::matrix(a.probes, d, flat)?;
        let dev = lvc_forward(&spec, &z, &x)?.max_abs_diff(&mapping_forward(&hof, &x)?);
        println!("max deviation {dev:e}");
        ensure!(dev < 1e-10, "converted mapping deviates by {dev:e}");
    }
    Ok(())
}
