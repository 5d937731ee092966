use crate::error::{CliError, CliResult};
use crate::Common;
use rep4ex::experiment::{self, dataset_table, Cell, ExperimentConfig, ExperimentId, LambdaSetting, ResultTable};
use rep4ex::models::AutoencoderModel;
use rep4ex::pipeline::{r_squared_affine, train_mmr_pair};
use rep4ex::prop1;
use rep4ex::DenseMatrix;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory JSON serializes");
    s.push('\n');
    write(path, &s)
}

/// Config file (or bare `--experiment`), then flag overrides, then resolved.
pub fn load_config(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.experiment) {
        (Some(path), _) => {
            serde_json::from_str::<ExperimentConfig>(&read(path)?).map_err(|source| CliError::ConfigFile { path: path.clone(), source })?
        }
        (None, Some(id)) => ExperimentConfig::new(id.parse::<ExperimentId>()?),
        (None, None) => return Err(CliError::Usage("either --config or --experiment is required".into())),
    };
    if let (Some(_), Some(id)) = (&c.config, &c.experiment) {
        cfg.experiment = id.parse()?;
    }
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = c.repetitions {
        cfg.repetitions = r;
    }
    if let Some(n) = c.n {
        cfg.n = Some(n);
    }
    if let Some(e) = c.epochs {
        cfg.autoencoder.epochs = e;
        cfg.regressor.epochs = e;
    }
    if let Some(l) = &c.lambda {
        cfg.lambda = l.parse::<LambdaSetting>()?;
    }
    if let Some(m) = &c.methods {
        cfg.methods = Some(m.clone());
    }
    if let Some(t) = c.threads {
        cfg.threads = Some(t);
    }
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    Ok(cfg.resolve()?)
}

fn grid_point(cfg: &ExperimentConfig, point: usize) -> CliResult<experiment::GridPoint> {
    let points = cfg.points();
    points.get(point).copied().ok_or_else(|| {
        CliError::Usage(format!("{} has {} grid points; --point {point} is out of range", cfg.experiment.as_str(), points.len()))
    })
}

pub fn gen_data(c: &Common, with_hidden: bool, point: usize, rep: usize, out: Option<PathBuf>) -> CliResult<()> {
    let cfg = load_config(c)?;
    let p = grid_point(&cfg, point)?;
    let data = cfg.training_data(&p, rep)?;
    let out = out.unwrap_or_else(|| Path::new(&cfg.output_dir).join("data.csv"));
    let table = dataset_table("data.csv", &data, with_hidden);
    write(&out, &table.to_csv())?;
    let side = json!({
        "config": cfg,
        "master_seed": cfg.master_seed,
        "point": p,
        "rep": rep,
        "seed": cfg.job_seed(p.index, rep),
        "with_hidden": with_hidden,
        "columns": table.header,
    });
    write_json(&out.with_extension("json"), &side)
}

pub fn run_experiment(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let out = experiment::run_experiment(&cfg)?;
    let dir = Path::new(&out.config.output_dir);
    for t in &out.tables {
        write(&dir.join(&t.name), &t.to_csv())?;
    }
    write_json(&dir.join(format!("{}.json", out.config.experiment.as_str())), &out.sidecar)
}

pub fn choose_lambda(c: &Common, point: usize) -> CliResult<()> {
    let cfg = load_config(c)?;
    let p = grid_point(&cfg, point)?;
    let choice = cfg.choose_lambda_at(&p)?;
    println!("{:>12}  {:>16}  {:>12}", "lambda", "reconstruction", "inflation");
    println!("{:>12}  {:>16.6}  {:>12}", "0 (vanilla)", choice.baseline_reconstruction, "-");
    let mut table = ResultTable::new("choose_lambda.csv", &["lambda", "reconstruction", "inflation", "selected"]);
    table.rows.push(vec![Cell::Float(0.0), Cell::Float(choice.baseline_reconstruction), Cell::Float(0.0), Cell::Int(0)]);
    for r in &choice.rows {
        let mark = if r.lambda == choice.selected { "  <- selected" } else { "" };
        println!("{:>12e}  {:>16.6}  {:>12.4}{mark}", r.lambda, r.reconstruction, r.inflation);
        let sel = (r.lambda == choice.selected) as u64;
        table.rows.push(vec![Cell::Float(r.lambda), Cell::Float(r.reconstruction), Cell::Float(r.inflation), Cell::Int(sel)]);
    }
    println!("selected lambda: {:e} (cutoff {})", choice.selected, cfg.cutoff);
    let dir = Path::new(&cfg.output_dir);
    write(&dir.join(&table.name), &table.to_csv())?;
    let side = json!({
        "config": cfg,
        "master_seed": cfg.master_seed,
        "point": p,
        "seed": cfg.job_seed(p.index, 0),
        "selected": choice.selected,
        "rows": choice.rows,
    });
    write_json(&dir.join("choose_lambda.json"), &side)
}

pub fn prop1_demo(seed: Option<u64>, samples: Option<usize>, output_dir: &Path) -> CliResult<()> {
    let mut cfg = ExperimentConfig::new(ExperimentId::Prop1);
    cfg.master_seed = seed.unwrap_or(0);
    if let Some(s) = samples {
        cfg.prop1_samples = s;
    }
    cfg.output_dir = output_dir.display().to_string();
    let out = experiment::run_experiment(&cfg)?;

    for t in &out.tables {
        println!("# {}", t.name);
        println!("{}", t.header.join("\t"));
        for row in &t.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Float(x) => format!("{x:.10}"),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => "-".into(),
                })
                .collect();
            println!("{}", cells.join("\t"));
        }
        println!();
    }
    let grid = &out.tables[0];
    let diff = |regime: &str| -> Vec<f64> {
        grid.rows.iter().filter(|r| r[0].as_str() == Some(regime)).map(|r| r[4].as_f64().unwrap().abs()).collect()
    };
    let obs = diff("observational").into_iter().fold(0.0, f64::max);
    let int = diff("interventional").into_iter().fold(f64::INFINITY, f64::min);
    println!("total mass (quadrature): S1 {} S2 {}", out.sidecar["total_mass_quadrature"][0], out.sidecar["total_mass_quadrature"][1]);
    println!("max |S1 - S2| observational on (0,1): {obs:.3e}");
    println!("min |S1 - S2| interventional on (-3,-2): {int:.10}");
    println!("{}", prop1::TAIL_BOUND_NOTE);

    for t in &out.tables {
        write(&output_dir.join(&t.name), &t.to_csv())?;
    }
    write_json(&output_dir.join("prop1.json"), &out.sidecar)
}

pub fn dump_model(c: &Common, point: usize, rep: usize, out: &Path) -> CliResult<()> {
    let cfg = load_config(c)?;
    let p = grid_point(&cfg, point)?;
    let model = match cfg.lambda {
        LambdaSetting::Auto(_) => {
            let choice = cfg.choose_lambda_at(&p)?;
            if rep == 0 {
                choice.selected_model().clone()
            } else {
                train_at(&cfg, &p, rep, choice.selected)?
            }
        }
        LambdaSetting::Fixed(l) => train_at(&cfg, &p, rep, l)?,
    };
    write(out, &model.to_json()?)
}

fn train_at(cfg: &ExperimentConfig, p: &experiment::GridPoint, rep: usize, lambda: f64) -> CliResult<AutoencoderModel> {
    let data = cfg.training_data(p, rep)?;
    let pair = train_mmr_pair(data.observed(), p.kind.latent_dim(), lambda, &cfg.autoencoder, cfg.job_seed(p.index, rep))?;
    Ok(pair.mmr)
}

/// Numeric CSV as named column blocks.
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Usage(format!("{}: empty file", path.display())))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 2)))?;
            if row.len() != header.len() {
                return Err(CliError::Usage(format!("{}:{}: expected {} fields, found {}", path.display(), i + 2, header.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    /// Columns named `{prefix}_1, {prefix}_2, …` in that order, if any.
    fn block(&self, prefix: &str) -> Option<DenseMatrix> {
        let idx: Vec<usize> = (1..)
            .map_while(|j| self.header.iter().position(|h| *h == format!("{prefix}_{j}")))
            .collect();
        if idx.is_empty() {
            return None;
        }
        Some(DenseMatrix::from_fn(self.rows.len(), idx.len(), |r, c| self.rows[r][idx[c]]))
    }
}

pub fn eval_model(model_path: &Path, data_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let model = AutoencoderModel::from_json(&read(model_path)?).map_err(|e| CliError::Usage(format!("{}: {e}", model_path.display())))?;
    let csv = Csv::parse(data_path, &read(data_path)?)?;
    let x = csv.block("x").ok_or_else(|| CliError::Usage(format!("{}: no x_1.. columns", data_path.display())))?;
    if x.cols() != model.input_dim() {
        return Err(CliError::Usage(format!(
            "{}: {} x columns but the model expects {}",
            data_path.display(),
            x.cols(),
            model.input_dim()
        )));
    }
    let phi = model.encode(&x);
    println!("reconstruction: {:.10e}", model.reconstruction_loss(&x));
    if let Some(a) = csv.block("a") {
        println!("mmr: {:.10e}", model.mmr_value(&a, &x)?);
    }
    if let Some(z) = csv.block("z") {
        println!("r_squared: {:.10}", r_squared_affine(&phi, &z)?.r_squared);
    }
    let header: Vec<String> = (1..=phi.cols()).map(|j| format!("phi_{j}")).collect();
    let mut table = ResultTable::new("phi.csv", &header);
    table.rows = (0..phi.rows()).map(|i| phi.row(i).iter().map(|&v| Cell::Float(v)).collect()).collect();
    let out = out.unwrap_or_else(|| data_path.with_extension("phi.csv"));
    write(&out, &table.to_csv())
}
