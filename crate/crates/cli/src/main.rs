use std::error::Error;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evas_core::clustering::{cluster_users, motion_vector, ClusterConfig, UserState};
use evas_core::geometry::{inverse_reproject, reproject_par};
use evas_core::imagery::{load_ppm, save_ppm, to_luma};
use evas_core::metrics::{psnr, ssim};
use evas_core::pipeline::{load_sim_config, run_simulation, write_outputs, format_summary};
use evas_core::prediction::{
    evaluate_predictor, load_models, load_trace, resample_trace, save_models, train_gru_predictor, Angle,
    GruPredictor, GruTrainConfig, HoldLast, LinearPredictor, PredictionConfig, Predictor, Trace, TraceFormat,
};
use evas_core::vbm::{make_vbm, reconstruct, unpack_vbm, VbmFrame};
use evas_core::{Sampling, Viewport};

type Res<T> = Result<T, Box<dyn Error>>;

/// Viewport-adaptive 360° video multicast toolkit.
#[derive(Parser)]
#[command(name = "evas", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rotate an equirectangular frame so the viewport sits at its center.
    #[command(allow_negative_numbers = true)]
    Reproject {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        vp: VpArgs,
        /// Undo a recentering instead of applying one.
        #[arg(long)]
        inverse: bool,
    },
    /// Pack a recentered frame into a VBM frame (writes a .vbm layout next to it).
    Pack { input: PathBuf, output: PathBuf },
    /// Split a VBM frame into fov.ppm, base.ppm and margin.ppm.
    Unpack { input: PathBuf, out_dir: PathBuf },
    /// Rebuild a full-size frame from a VBM frame.
    #[command(allow_negative_numbers = true)]
    Reconstruct {
        input: PathBuf,
        output: PathBuf,
        /// Rotate back from this recentering viewport after reconstruction.
        #[arg(long)]
        restore: bool,
        #[command(flatten)]
        vp: VpArgs,
    },
    /// Train or evaluate viewport predictors.
    #[command(subcommand)]
    Predict(PredictCmd),
    /// Cluster users at one instant of their traces.
    Cluster(ClusterArgs),
    /// Image quality between two frames of equal size.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Run the trace-driven simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct VpArgs {
    #[arg(long, default_value_t = 0.0)]
    yaw: f64,
    #[arg(long, default_value_t = 0.0)]
    pitch: f64,
    #[arg(long, default_value_t = 0.0)]
    roll: f64,
    /// Angles are in degrees.
    #[arg(long)]
    degrees: bool,
    #[arg(long)]
    nearest: bool,
}

impl VpArgs {
    fn viewport(&self) -> Viewport {
        if self.degrees {
            Viewport::degrees(self.yaw, self.pitch, self.roll)
        } else {
            Viewport::new(self.yaw, self.pitch, self.roll)
        }
    }

    fn sampling(&self) -> Sampling {
        if self.nearest {
            Sampling::Nearest
        } else {
            Sampling::Bilinear
        }
    }
}

#[derive(Args)]
struct TraceArgs {
    /// Trace files, one per user.
    #[arg(long, num_args = 1.., required = true)]
    traces: Vec<PathBuf>,
    /// Column mapping, e.g. t,q0,q1,q2,q3 or t,yaw,pitch,roll.
    #[arg(long, default_value = "t,yaw,pitch,roll")]
    cols: String,
    /// Euler columns are in degrees.
    #[arg(long)]
    degrees: bool,
    /// Resampling rate, Hz.
    #[arg(long, default_value_t = 30.0)]
    rate: f64,
}

impl TraceArgs {
    fn load(&self) -> Res<Vec<Trace>> {
        let fmt = TraceFormat::parse(&self.cols, self.degrees)?;
        self.traces
            .iter()
            .map(|p| Ok(resample_trace(&load_trace(p, &fmt)?, self.rate)?))
            .collect()
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PredArgs {
    #[command(flatten)]
    traces: TraceArgs,
    #[arg(long, default_value_t = 30)]
    history: usize,
    /// Seconds.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Accuracy threshold, radians.
    #[arg(long, default_value_t = std::f64::consts::PI / 6.0)]
    threshold: f64,
}

impl PredArgs {
    fn config(&self) -> Res<PredictionConfig> {
        let cfg = PredictionConfig {
            history: self.history,
            horizon: self.horizon,
            sample_rate: self.traces.rate,
            accuracy_threshold: self.threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum PredictCmd {
    /// Fit one GRU per angle and save them.
    Train {
        #[command(flatten)]
        pred: PredArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Score a predictor; prints accuracy and MAE per angle.
    Eval {
        #[command(flatten)]
        pred: PredArgs,
        /// GRU model file (with --gru).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["gru", "hold"])]
        lr: bool,
        #[arg(long, requires = "model", conflicts_with = "hold")]
        gru: bool,
        #[arg(long)]
        hold: bool,
    },
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ClusterArgs {
    #[command(flatten)]
    traces: TraceArgs,
    /// Instant, seconds from trace start.
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 0.15)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    minpts: usize,
    #[arg(long, default_value_t = 0.8)]
    omega: f64,
}

#[derive(Subcommand)]
enum MetricsCmd {
    Psnr { a: PathBuf, b: PathBuf },
    Ssim { a: PathBuf, b: PathBuf },
}

fn run(cmd: Cmd) -> Res<String> {
    let mut out = String::new();
    match cmd {
        Cmd::Reproject { input, output, vp, inverse } => {
            let f = load_ppm(&input)?;
            let g = if inverse {
                inverse_reproject(&f, &vp.viewport(), vp.sampling())
            } else {
                reproject_par(&f, &vp.viewport(), vp.sampling())
            };
            save_ppm(&g, &output)?;
        }
        Cmd::Pack { input, output } => {
            let vbm = make_vbm(&load_ppm(&input)?)?;
            vbm.save(&output)?;
            writeln!(out, "{}x{} -> {}x{}", vbm.layout.src_w, vbm.layout.src_h, vbm.layout.packed_w, vbm.layout.packed_h)?;
        }
        Cmd::Unpack { input, out_dir } => {
            let parts = unpack_vbm(&VbmFrame::load(&input)?)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
            save_ppm(&parts.fov, out_dir.join("fov.ppm"))?;
            save_ppm(&parts.base, out_dir.join("base.ppm"))?;
            save_ppm(&parts.margin, out_dir.join("margin.ppm"))?;
        }
        Cmd::Reconstruct { input, output, restore, vp } => {
            let mut f = reconstruct(&VbmFrame::load(&input)?)?;
            if restore {
                f = inverse_reproject(&f, &vp.viewport(), vp.sampling());
            }
            save_ppm(&f, &output)?;
        }
        Cmd::Predict(PredictCmd::Train { pred, model, hidden, epochs, learning_rate, batch, seed }) => {
            let cfg = pred.config()?;
            let traces = pred.traces.load()?;
            let train = GruTrainConfig {
                hidden,
                epochs,
                learning_rate,
                batch_size: batch,
                seed,
                ..GruTrainConfig::default()
            };
            let (gru, reports) = train_gru_predictor(&traces, &cfg, &train)?;
            save_models(&model, gru.models())?;
            for (angle, r) in Angle::ALL.iter().zip(&reports) {
                let last = r.epoch_losses.last().copied().unwrap_or(f64::NAN);
                writeln!(out, "{angle} final_loss {last:.6}")?;
            }
        }
        Cmd::Predict(PredictCmd::Eval { pred, model, lr: _, gru, hold }) => {
            let cfg = pred.config()?;
            let traces = pred.traces.load()?;
            let predictor: Box<dyn Predictor> = if gru {
                let path = model.expect("clap enforces --model with --gru");
                Box::new(GruPredictor::from_models(load_models(path)?)?)
            } else if hold {
                Box::new(HoldLast)
            } else {
                Box::new(LinearPredictor::new(&cfg))
            };
            let rep = evaluate_predictor(predictor.as_ref(), &traces, &cfg)?;
            writeln!(out, "predictor {} windows {} threshold {:.6}", rep.predictor, rep.windows, rep.threshold)?;
            for a in &rep.angles {
                writeln!(out, "{} accuracy {:.6} mae {:.6}", a.angle, a.accuracy, a.mae)?;
            }
        }
        Cmd::Cluster(args) => {
            let traces = args.traces.load()?;
            let cfg = ClusterConfig {
                eps: args.eps,
                min_pts: args.minpts,
                omega: args.omega,
                motion_dt: 1.0 / args.traces.rate,
            };
            let users = traces
                .iter()
                .map(|tr| {
                    let t = tr.start() + args.t;
                    let vp = tr
                        .viewport_at(t)
                        .ok_or_else(|| format!("{}: t={} outside the trace", tr.user_id, args.t))?;
                    Ok(UserState {
                        user_id: tr.user_id.clone(),
                        position: vp.direction(),
                        motion: motion_vector(tr, t, cfg.motion_dt)?,
                    })
                })
                .collect::<Res<Vec<_>>>()?;
            let asg = cluster_users(&users, &cfg)?;
            writeln!(out, "user_id,label,center_yaw,center_pitch")?;
            for (u, label) in users.iter().zip(&asg.labels) {
                match label.cluster() {
                    Some(c) => writeln!(out, "{},{label},{:.6},{:.6}", u.user_id, asg.centers[c].yaw, asg.centers[c].pitch)?,
                    None => writeln!(out, "{},{label},,", u.user_id)?,
                }
            }
        }
        Cmd::Metrics(m) => {
            let (a, b, f): (_, _, fn(_, _) -> _) = match &m {
                MetricsCmd::Psnr { a, b } => (a, b, psnr),
                MetricsCmd::Ssim { a, b } => (a, b, ssim),
            };
            let v = f(&to_luma(&load_ppm(a)?), &to_luma(&load_ppm(b)?))?;
            if v.is_infinite() {
                writeln!(out, "inf")?;
            } else {
                writeln!(out, "{v:.6}")?;
            }
        }
        Cmd::Simulate { config, output, seed } => {
            let mut cfg = load_sim_config(&config)?;
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = run_simulation(&cfg)?;
            write_outputs(&res, &cfg.output_dir)?;
            out.push_str(&format_summary(&res));
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
