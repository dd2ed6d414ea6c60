use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::algebra::{aggregation_weights, compute_lambda, local_aggregate};
use super::server::{server_aggregate, ClientUpload, GlobalState};
use crate::dataset::PreparedCenter;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_both, CenterEval};
use crate::model::{
    local_train, pv_condition_embedding, IrradianceEmbedding, ModelConfig, ModelParams, ParamSet, SplitPolicy,
    DEFAULT_RECENT_DAYS,
};
use crate::seed::{derive_seed, rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "pfl")]
    Pfl,
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "local")]
    LocalOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Pfl, Strategy::FedAvg, Strategy::LocalOnly];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Pfl => "pfl",
            Strategy::FedAvg => "fedavg",
            Strategy::LocalOnly => "local",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (expected pfl, fedavg or local)")))
    }
}

/// How a personalized client picks its blending factor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    #[default]
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub lambda: LambdaMode,
    #[serde(default)]
    pub split: SplitPolicy,
    #[serde(default = "default_recent_days")]
    pub recent_days: usize,
    pub seed: u64,
    /// Train clients on the rayon pool. Results do not depend on it.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_recent_days() -> usize {
    DEFAULT_RECENT_DAYS
}

fn default_parallel() -> bool {
    true
}

impl FederationConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            lambda: LambdaMode::Adaptive,
            split: SplitPolicy::OutputHead,
            recent_days: DEFAULT_RECENT_DAYS,
            seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.recent_days == 0 {
            return Err(Error::Config("recent_days must be positive".into()));
        }
        if let LambdaMode::Fixed(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("fixed lambda {l} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Split actually used on the wire; full-model averaging shares everything.
    fn wire_split(&self) -> SplitPolicy {
        match self.strategy {
            Strategy::FedAvg => SplitPolicy::EmptyHead,
            _ => self.split,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    pub center_id: String,
    pub data: Arc<PreparedCenter>,
    pub params: ModelParams,
    pub lambda: f64,
    pub e_local: Option<IrradianceEmbedding>,
    pub rounds_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRound {
    pub center_id: String,
    /// Blending factor used this round (personalized strategy only).
    pub lambda: Option<f64>,
    pub train_loss: f64,
    pub eval: CenterEval,
}

/// Equality ignores `wall_time`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub strategy: Strategy,
    pub centers: Vec<CenterRound>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for RoundRecord {
    fn eq(&self, other: &Self) -> bool {
        self.round == other.round && self.strategy == other.strategy && self.centers == other.centers
    }
}

impl RoundRecord {
    pub fn center(&self, id: &str) -> Option<&CenterRound> {
        self.centers.iter().find(|c| c.center_id == id)
    }

    pub fn mean_mae(&self) -> f64 {
        self.centers.iter().map(|c| c.eval.raw.mae).sum::<f64>() / self.centers.len() as f64
    }
}

/// A federation of clients under one strategy, advanced round by round.
#[derive(Debug, Clone)]
pub struct Federation {
    pub model_config: ModelConfig,
    pub config: FederationConfig,
    pub clients: Vec<Client>,
    pub global: Option<GlobalState>,
    pub round: usize,
    pub records: Vec<RoundRecord>,
    /// Exactly what the server received in the latest round.
    pub last_uploads: Vec<ClientUpload>,
}

struct StepOutput {
    upload: Option<ClientUpload>,
    lambda: Option<f64>,
    train_loss: f64,
}

fn shared_init(model_config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    ModelParams::init(model_config, derive_seed(seed, &[tag("init")]))
}

fn wrap(center: &str, e: Error) -> Error {
    Error::Client {
        center: center.to_string(),
        source: Box::new(e),
    }
}

fn map_clients<T, F>(clients: &mut [Client], parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Client) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = if parallel {
        clients
            .par_iter_mut()
            .map(|c| f(c).map_err(|e| wrap(&c.center_id, e)))
            .collect()
    } else {
        clients
            .iter_mut()
            .map(|c| f(c).map_err(|e| wrap(&c.center_id, e)))
            .collect()
    };
    results.into_iter().collect()
}

impl Federation {
    /// Every client starts from the same initialization drawn from `config.seed`.
    pub fn new(
        model_config: &ModelConfig,
        config: FederationConfig,
        centers: Vec<Arc<PreparedCenter>>,
    ) -> Result<Self> {
        model_config.validate()?;
        config.validate()?;
        if centers.is_empty() {
            return Err(Error::Config("a federation needs at least one center".into()));
        }
        let init = shared_init(model_config, config.seed)?;
        let mut fed = Self {
            model_config: model_config.clone(),
            config,
            clients: Vec::with_capacity(centers.len()),
            global: None,
            round: 0,
            records: Vec::new(),
            last_uploads: Vec::new(),
        };
        for data in centers {
            fed.check_new_id(&data.center_id)?;
            fed.clients.push(Client {
                center_id: data.center_id.clone(),
                data,
                params: init.clone(),
                lambda: 0.5,
                e_local: None,
                rounds_trained: 0,
            });
        }
        Ok(fed)
    }

    fn check_new_id(&self, id: &str) -> Result<()> {
        if self.clients.iter().any(|c| c.center_id == id) {
            return Err(Error::Config(format!("duplicate center id {id:?}")));
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn client(&self, id: &str) -> Option<&Client> {
        self.clients.iter().find(|c| c.center_id == id)
    }

    /// `(center, |D_i| / |D|)` for the current membership.
    pub fn volume_shares(&self) -> Result<Vec<(String, f64)>> {
        let volumes: Vec<usize> = self.clients.iter().map(|c| c.data.volume()).collect();
        let weights = aggregation_weights(&volumes)?;
        Ok(self.clients.iter().map(|c| c.center_id.clone()).zip(weights).collect())
    }

    pub fn global_model(&self) -> Option<Result<ModelParams>> {
        let g = self.global.as_ref()?;
        Some(ModelParams::merge(
            &self.model_config,
            &g.base,
            &ParamSet::default(),
            SplitPolicy::EmptyHead,
        ))
    }

    /// The model a center is scored with: the broadcast model under full-model
    /// averaging, the client's own model otherwise.
    pub fn evaluation_model(&self, id: &str) -> Result<ModelParams> {
        let client = self
            .client(id)
            .ok_or_else(|| Error::Config(format!("unknown center {id:?}")))?;
        match (self.config.strategy, self.global_model()) {
            (Strategy::FedAvg, Some(g)) => g,
            _ => Ok(client.params.clone()),
        }
    }

    /// Scores every center with its evaluation model, without training.
    pub fn evaluate(&self) -> Result<Vec<(String, CenterEval)>> {
        self.clients
            .iter()
            .map(|c| {
                let model = self.evaluation_model(&c.center_id)?;
                let eval = evaluate_both(&model, &c.data.test, &c.data.stats).map_err(|e| wrap(&c.center_id, e))?;
                Ok((c.center_id.clone(), eval))
            })
            .collect()
    }

    /// Adds a center after earlier rounds: global base plus a fresh head,
    /// blending factor 0.5, no local aggregation in its first round.
    pub fn add_center(&mut self, data: Arc<PreparedCenter>) -> Result<()> {
        self.check_new_id(&data.center_id)?;
        let mut params = shared_init(&self.model_config, self.config.seed)?;
        if self.config.strategy == Strategy::Pfl {
            let global = self
                .global
                .as_ref()
                .ok_or_else(|| Error::State("onboarding needs at least one completed round".into()))?;
            params.head = ModelParams::fresh_head(
                &self.model_config,
                derive_seed(self.config.seed, &[tag("head"), tag(&data.center_id)]),
            );
            params.set_base(&global.base, self.config.split)?;
        }
        self.clients.push(Client {
            center_id: data.center_id.clone(),
            data,
            params,
            lambda: 0.5,
            e_local: None,
            rounds_trained: 0,
        });
        Ok(())
    }

    pub fn run(&mut self, rounds: usize) -> Result<()> {
        for _ in 0..rounds {
            self.run_round()?;
        }
        Ok(())
    }

    /// One synchronous round: client updates, server aggregation, evaluation.
    pub fn run_round(&mut self) -> Result<&RoundRecord> {
        let started = Instant::now();
        let round = self.round + 1;
        let cfg = self.config.clone();
        let global = self.global.clone();

        let steps = map_clients(&mut self.clients, cfg.parallel, |c| {
            client_step(&cfg, c, global.as_ref(), round)
        })?;

        let uploads: Vec<ClientUpload> = steps.iter().filter_map(|s| s.upload.clone()).collect();
        if !uploads.is_empty() {
            self.global = Some(server_aggregate(round, &uploads)?);
        }
        self.last_uploads = uploads;

        let broadcast = match (cfg.strategy, self.global_model()) {
            (Strategy::FedAvg, Some(g)) => Some(g?),
            _ => None,
        };
        let evals = map_clients(&mut self.clients, cfg.parallel, |c| {
            let model = broadcast.as_ref().unwrap_or(&c.params);
            evaluate_both(model, &c.data.test, &c.data.stats)
        })?;

        let centers = self
            .clients
            .iter()
            .zip(steps)
            .zip(evals)
            .map(|((c, s), eval)| CenterRound {
                center_id: c.center_id.clone(),
                lambda: s.lambda,
                train_loss: s.train_loss,
                eval,
            })
            .collect();
        self.round = round;
        self.records.push(RoundRecord {
            round,
            strategy: cfg.strategy,
            centers,
            wall_time: started.elapsed(),
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn snapshot(&self) -> FederationSnapshot {
        FederationSnapshot {
            model_config: self.model_config.clone(),
            config: self.config.clone(),
            round: self.round,
            clients: self
                .clients
                .iter()
                .map(|c| ClientSnapshot {
                    center_id: c.center_id.clone(),
                    params: c.params.split(SplitPolicy::EmptyHead).0,
                    lambda: c.lambda,
                    e_local: c.e_local.clone(),
                    rounds_trained: c.rounds_trained,
                })
                .collect(),
            global: self.global.clone(),
        }
    }

    /// Rebuilds a federation from a snapshot and the centers' prepared data.
    pub fn restore(snapshot: FederationSnapshot, centers: &[Arc<PreparedCenter>]) -> Result<Self> {
        let mut clients = Vec::with_capacity(snapshot.clients.len());
        for s in snapshot.clients {
            let data = centers
                .iter()
                .find(|c| c.center_id == s.center_id)
                .ok_or_else(|| Error::Config(format!("no data for center {:?} in snapshot", s.center_id)))?;
            clients.push(Client {
                params: ModelParams::merge(
                    &snapshot.model_config,
                    &s.params,
                    &ParamSet::default(),
                    SplitPolicy::EmptyHead,
                )?,
                center_id: s.center_id,
                data: Arc::clone(data),
                lambda: s.lambda,
                e_local: s.e_local,
                rounds_trained: s.rounds_trained,
            });
        }
        Ok(Self {
            model_config: snapshot.model_config,
            config: snapshot.config,
            clients,
            global: snapshot.global,
            round: snapshot.round,
            records: Vec::new(),
            last_uploads: Vec::new(),
        })
    }
}

fn client_step(
    cfg: &FederationConfig,
    c: &mut Client,
    global: Option<&GlobalState>,
    round: usize,
) -> Result<StepOutput> {
    let split = cfg.wire_split();
    match (cfg.strategy, global) {
        (Strategy::Pfl, Some(g)) if c.rounds_trained > 0 => {
            let lambda = match cfg.lambda {
                LambdaMode::Fixed(l) => l,
                LambdaMode::Adaptive => {
                    let (Some(local), Some(global)) = (&c.e_local, &g.embedding) else {
                        return Err(Error::State("adaptive lambda needs local and global embeddings".into()));
                    };
                    compute_lambda(local, global)?
                }
            };
            let (base, _) = c.params.split(split);
            let blended = local_aggregate(&base, &g.base, lambda)?;
            c.params.set_base(&blended, split)?;
            c.lambda = lambda;
        }
        (Strategy::FedAvg, Some(g)) => c.params.set_base(&g.base, split)?,
        _ => {}
    }

    let mut rng = rng_for(cfg.seed, &[tag("train"), tag(&c.center_id), round as u64]);
    let trace = local_train(&mut c.params, &c.data.train, &mut rng)?;
    let train_loss = trace.last().copied().unwrap_or(f64::NAN);
    c.rounds_trained += 1;

    let (upload, lambda) = match cfg.strategy {
        Strategy::Pfl => {
            let e = pv_condition_embedding(&c.params, &c.data.train, cfg.recent_days)?;
            c.e_local = Some(e.clone());
            let upload = ClientUpload {
                center_id: c.center_id.clone(),
                base: c.params.split(split).0,
                embedding: Some(e),
                volume: c.data.volume(),
            };
            (Some(upload), Some(c.lambda))
        }
        Strategy::FedAvg => {
            let upload = ClientUpload {
                center_id: c.center_id.clone(),
                base: c.params.split(split).0,
                embedding: None,
                volume: c.data.volume(),
            };
            (Some(upload), None)
        }
        Strategy::LocalOnly => (None, None),
    };
    Ok(StepOutput {
        upload,
        lambda,
        train_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSnapshot {
    pub center_id: String,
    /// Full model, head included.
    pub params: ParamSet,
    pub lambda: f64,
    pub e_local: Option<IrradianceEmbedding>,
    pub rounds_trained: usize,
}

/// Everything needed to continue a federation later, minus the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationSnapshot {
    pub model_config: ModelConfig,
    pub config: FederationConfig,
    pub round: usize,
    pub clients: Vec<ClientSnapshot>,
    pub global: Option<GlobalState>,
}

fn run_as(
    strategy: Strategy,
    model_config: &ModelConfig,
    mut config: FederationConfig,
    centers: Vec<Arc<PreparedCenter>>,
    rounds: usize,
) -> Result<Federation> {
    if rounds == 0 {
        return Err(Error::Config("at least one round is required".into()));
    }
    config.strategy = strategy;
    let mut fed = Federation::new(model_config, config, centers)?;
    fed.run(rounds)?;
    Ok(fed)
}

pub fn run_pfl(
    model_config: &ModelConfig,
    config: FederationConfig,
    centers: Vec<Arc<PreparedCenter>>,
    rounds: usize,
) -> Result<Federation> {
    run_as(Strategy::Pfl, model_config, config, centers, rounds)
}

pub fn run_fedavg(
    model_config: &ModelConfig,
    config: FederationConfig,
    centers: Vec<Arc<PreparedCenter>>,
    rounds: usize,
) -> Result<Federation> {
    run_as(Strategy::FedAvg, model_config, config, centers, rounds)
}

pub fn run_local_only(
    model_config: &ModelConfig,
    config: FederationConfig,
    centers: Vec<Arc<PreparedCenter>>,
    rounds: usize,
) -> Result<Federation> {
    run_as(Strategy::LocalOnly, model_config, config, centers, rounds)
}

/// Adds `new_center` to a trained federation and runs `rounds` more rounds.
pub fn onboard_new_center(fed: &mut Federation, new_center: Arc<PreparedCenter>, rounds: usize) -> Result<()> {
    fed.add_center(new_center)?;
    fed.run(rounds)
}
