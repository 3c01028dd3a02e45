//! One team episode: the world, the robots' controllers, online trust
//! inference and the template command protocol. The operator, synthetic or
//! live, stays outside and talks to the session through `submit`.

use crate::controller::{
    decide_compliance, select_repair, slots, AutonomyPolicy, Compliance, RepairContext, RobotController,
    Slots, TemplateId, TemplateSet,
};
use crate::error::{Error, Result};
use crate::rem::{ActorId, AttributeSet, Dyad, EventHistory};
use crate::sim::episode::{Condition, EpisodeSetup};
use crate::sim::log::{config_hash, EpisodeMetrics, LogHeader, LogRecord, LOG_VERSION};
use crate::sim::policy::{choose_gas_robot, directive_task, human_policy, next_action, robot_policy};
use crate::sim::protocol::{CommandMessage, HumanCommand, EVENT_TYPES};
use crate::sim::scenario::ScenarioConfig;
use crate::sim::world::{Action, Completion, SubTask, SubTaskKind, WorldState, HUMAN};
use crate::trust::{human_robot_dyads, TrustTracker};

/// Actor attribute marking the human.
pub const IS_HUMAN: &str = "is_human";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the n-th compliance draw of a robot.
pub fn compliance_seed(seed: u64, robot: usize, n: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ robot as u64) ^ n as u64)
}

/// Attributes that stay fixed through an episode.
pub fn base_attributes(n_robots: usize) -> Result<AttributeSet> {
    let mut a = AttributeSet::new();
    for i in 0..=n_robots {
        a.set_actor(ActorId(i), IS_HUMAN, if i == HUMAN { 1.0 } else { 0.0 })?;
    }
    Ok(a)
}

/// What closed during one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutcome {
    pub completions: Vec<Completion>,
    /// Windows closed before the step.
    pub windows_closed: usize,
    pub finished: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    scenario: ScenarioConfig,
    setup: EpisodeSetup,
    condition: Condition,
    seed: u64,
    world: WorldState,
    controllers: Vec<RobotController>,
    tracker: Option<TrustTracker>,
    history: EventHistory,
    attrs: AttributeSet,
    templates: TemplateSet,
    directives: Vec<Option<usize>>,
    gas_robot: Option<usize>,
    shared: bool,
    conflicts_per_robot: Vec<usize>,
    last_window_end: f64,
    windows: usize,
    human_task: Option<SubTask>,
    /// Greedy human when true; otherwise `human_task` or explicit actions.
    pub greedy_human: bool,
    log: Vec<LogRecord>,
    n_commands: usize,
    conflicts: usize,
    refusals: usize,
    repairs: usize,
    finished: bool,
}

impl Session {
    pub fn new(scenario: ScenarioConfig, condition: Condition, setup: EpisodeSetup, seed: u64) -> Result<Self> {
        let n = scenario.n_robots;
        condition.validate()?;
        setup.validate(n)?;
        let world = WorldState::new(&scenario)?;
        let attrs = base_attributes(n)?;
        let robots: Vec<ActorId> = (1..=n).map(ActorId).collect();
        let dyads = human_robot_dyads(ActorId(HUMAN), &robots)?;
        let (tracker, initial) = match condition {
            Condition::TrustPreservedSa => {
                let priors: Vec<(Dyad, Option<f64>)> =
                    dyads.iter().zip(&setup.priors).map(|(d, p)| (*d, Some(*p))).collect();
                let t = TrustTracker::new(setup.inference.clone(), setup.model.clone(), &priors, 0.0)?;
                let levels = dyads.iter().map(|d| t.level(*d).unwrap_or(0.5)).collect();
                (Some(t), levels)
            }
            Condition::BaselineSa { .. } => (None, setup.priors.clone()),
        };
        let policy = match condition {
            Condition::BaselineSa { l_alpha } => AutonomyPolicy::Fixed { l_alpha },
            Condition::TrustPreservedSa => AutonomyPolicy::TrustPreserved,
        };
        let controllers = (1..=n)
            .map(|r| RobotController::new(r, policy, setup.controller.clone(), initial[r - 1]))
            .collect::<Result<Vec<_>>>()?;
        let header = LogHeader {
            version: LOG_VERSION,
            config_hash: config_hash(&setup.model, &setup.inference)?,
            seed,
            condition,
            scenario: scenario.clone(),
            model: setup.model.clone(),
            inference: setup.inference.clone(),
            controller: setup.controller.clone(),
            share: setup.share.clone(),
            priors: setup.priors.clone(),
        };
        Ok(Self {
            history: EventHistory::new(n + 1, EVENT_TYPES.len())?,
            scenario,
            setup,
            condition,
            seed,
            world,
            controllers,
            tracker,
            attrs,
            templates: TemplateSet::default(),
            directives: vec![None; n],
            gas_robot: None,
            shared: false,
            conflicts_per_robot: vec![0; n],
            last_window_end: 0.0,
            windows: 0,
            human_task: None,
            greedy_human: true,
            log: vec![LogRecord::Header(Box::new(header))],
            n_commands: 0,
            conflicts: 0,
            refusals: 0,
            repairs: 0,
            finished: false,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn history(&self) -> &EventHistory {
        &self.history
    }

    pub fn attributes(&self) -> &AttributeSet {
        &self.attrs
    }

    pub fn controller(&self, robot: usize) -> Option<&RobotController> {
        robot.checked_sub(1).and_then(|i| self.controllers.get(i))
    }

    pub fn tracker(&self) -> Option<&TrustTracker> {
        self.tracker.as_ref()
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    /// Adds an outside record; a finished log keeps its metrics trailer last.
    pub fn push_record(&mut self, r: LogRecord) {
        match self.log.last() {
            Some(LogRecord::Metrics(_)) => {
                let at = self.log.len() - 1;
                self.log.insert(at, r);
            }
            _ => self.log.push(r),
        }
    }

    pub fn windows_closed(&self) -> usize {
        self.windows
    }

    pub fn gas_robot(&self) -> Option<usize> {
        self.gas_robot
    }

    pub fn directive(&self, robot: usize) -> Option<usize> {
        self.directives.get(robot.wrapping_sub(1)).copied().flatten()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn set_human_task(&mut self, task: Option<SubTask>) {
        self.human_task = task;
    }

    fn now(&self) -> f64 {
        self.world.tick as f64 * self.scenario.dt
    }

    fn message(&self, sender: usize, receiver: usize, template: TemplateId, fill: &Slots) -> Result<CommandMessage> {
        Ok(CommandMessage {
            tick: self.world.tick,
            sender,
            receiver,
            template,
            building: fill.get("building").and_then(|b| b.parse().ok()),
            probability: None,
            text: self.templates.render(template, fill)?,
            discloses_hazard: false,
        })
    }

    fn emit(&mut self, m: &CommandMessage) -> Result<()> {
        self.history.push(m.event(self.scenario.dt))?;
        self.log.push(LogRecord::Message(m.clone()));
        Ok(())
    }

    fn on_gas_duty(&self, robot: usize) -> bool {
        self.world.agents[robot]
            .current_subtask
            .is_some_and(|t| t.kind == SubTaskKind::ShutGas || self.is_leak(t.building))
    }

    fn is_leak(&self, building: usize) -> bool {
        self.world.building(building).is_some_and(|b| b.gas_leak) && self.world.leak_detected
    }

    fn status_reply(&self, robot: usize) -> Result<CommandMessage> {
        let a = &self.world.agents[robot];
        if a.carrying.is_some() {
            return self.message(robot, HUMAN, TemplateId::StatusReplyCarry, &Slots::new());
        }
        let Some(t) = a.current_subtask else {
            return self.message(robot, HUMAN, TemplateId::StatusReplyIdle, &Slots::new());
        };
        let fill = slots([
            ("building", t.building.to_string()),
            ("activity", t.kind.activity().to_string()),
        ]);
        let mut m = self.message(robot, HUMAN, TemplateId::StatusReply, &fill)?;
        m.discloses_hazard = t.kind == SubTaskKind::ShutGas;
        Ok(m)
    }

    fn hazard_message(&self, robot: usize, template: TemplateId) -> Result<Option<CommandMessage>> {
        let Some(leak) = self.world.leak().filter(|_| self.world.leak_detected && self.world.leak_active()) else {
            return Ok(None);
        };
        let p = self.world.danger_probability();
        let fill = slots([
            ("building", leak.id.to_string()),
            ("probability", format!("{:.0}%", 100.0 * p)),
        ]);
        let mut m = self.message(robot, HUMAN, template, &fill)?;
        m.probability = (template == TemplateId::InfoShare).then_some(p);
        m.discloses_hazard = true;
        Ok(Some(m))
    }

    /// Routes one operator command and returns the robot's reply messages.
    /// The command and every reply are appended to the event history.
    pub fn submit(&mut self, cmd: HumanCommand) -> Result<Vec<CommandMessage>> {
        if self.finished {
            return Err(Error::Protocol("episode is over".into()));
        }
        let robot = cmd.robot();
        if robot == HUMAN || robot > self.scenario.n_robots {
            return Err(Error::Protocol(format!("no robot {robot}")));
        }
        let request = match cmd {
            HumanCommand::StatusQuery { .. } => self.message(HUMAN, robot, TemplateId::StatusQuery, &Slots::new())?,
            HumanCommand::InstructGoto { building, .. } => {
                if self.world.building(building).is_none() {
                    return Err(Error::Protocol(format!("no building {building}")));
                }
                self.message(HUMAN, robot, TemplateId::InstructGoto, &slots([("building", building.to_string())]))?
            }
        };
        self.n_commands += 1;
        self.emit(&request)?;
        let replies = match cmd {
            HumanCommand::StatusQuery { .. } => vec![self.status_reply(robot)?],
            HumanCommand::InstructGoto { building, .. } => self.instruct(robot, building)?,
        };
        for m in &replies {
            self.emit(m)?;
        }
        Ok(replies)
    }

    fn instruct(&mut self, robot: usize, building: usize) -> Result<Vec<CommandMessage>> {
        let agent = &self.world.agents[robot];
        let current = agent.current_subtask;
        let carrying = agent.carrying.is_some();
        let conflict = carrying || current.is_some_and(|t| t.building != building);
        let obey = if conflict {
            self.conflicts += 1;
            let n = self.conflicts_per_robot[robot - 1];
            self.conflicts_per_robot[robot - 1] += 1;
            let l_alpha = self.controllers[robot - 1].l_alpha();
            decide_compliance(l_alpha, compliance_seed(self.seed, robot, n))?.outcome == Compliance::Obey
        } else {
            true
        };
        if obey {
            self.directives[robot - 1] = Some(building);
            return Ok(vec![self.message(robot, HUMAN, TemplateId::ObeyReply, &Slots::new())?]);
        }
        self.refusals += 1;
        let mut out = Vec::new();
        let target = current.map(|t| t.building);
        out.push(match (carrying, target) {
            (false, Some(b)) => self.message(robot, HUMAN, TemplateId::RefuseReply, &slots([("building", b.to_string())]))?,
            _ => self.message(robot, HUMAN, TemplateId::RefuseReplyCarry, &Slots::new())?,
        });
        if !self.controllers[robot - 1].repairing() {
            return Ok(out);
        }
        if self.setup.share.on_refusal && self.on_gas_duty(robot) {
            if let Some(m) = self.hazard_message(robot, TemplateId::ExplainDecision)? {
                out.push(m);
            }
        }
        let critical = self.world.leak_detected && self.world.leak_active();
        let leak = self.world.leak().map(|b| b.id);
        let ctx = RepairContext {
            has_uncertainty_estimate: self.world.leak_detected,
            robot_at_fault: false,
            critical_state_present: critical,
            building: if critical { leak } else { target },
            danger_probability: critical.then(|| self.world.danger_probability()),
            confidence: Some(self.controllers[robot - 1].l_alpha()),
            critical_state: leak.filter(|_| critical).map(|b| format!("gas leak in Building {b}")),
        };
        let cause = self.controllers[robot - 1]
            .current_cause()
            .unwrap_or(crate::controller::ViolationCause::TeamingOnset);
        let strategies = select_repair(cause, &ctx, &self.templates)?;
        if let Some(first) = strategies.first() {
            self.controllers[robot - 1].record_repair(first.kind);
            self.repairs += 1;
        }
        for s in strategies {
            let mut m = CommandMessage {
                tick: self.world.tick,
                sender: robot,
                receiver: HUMAN,
                template: s.template,
                building: ctx.building,
                probability: None,
                text: s.message,
                discloses_hazard: false,
            };
            if matches!(s.template, TemplateId::RepairControl | TemplateId::RepairShowCriticalStates) && critical {
                m.discloses_hazard = true;
                m.probability = ctx.danger_probability;
            }
            out.push(m);
        }
        Ok(out)
    }

    /// Unprompted hazard report by robots that share critical states, sent
    /// once when the leak is sensed and the danger estimate passes the
    /// configured threshold.
    pub fn share_critical_states(&mut self) -> Result<Vec<CommandMessage>> {
        if self.finished || self.shared || self.condition != Condition::TrustPreservedSa {
            return Ok(Vec::new());
        }
        let Some(threshold) = self.setup.share.threshold else {
            return Ok(Vec::new());
        };
        if !self.world.leak_detected || !self.world.leak_active() || self.world.danger_probability() < threshold {
            return Ok(Vec::new());
        }
        let sender = self.gas_robot.or_else(|| choose_gas_robot(&self.world)).unwrap_or(1);
        let Some(m) = self.hazard_message(sender, TemplateId::InfoShare)? else {
            return Ok(Vec::new());
        };
        self.shared = true;
        self.emit(&m)?;
        Ok(vec![m])
    }

    /// Closes every window that ends at or before the current time.
    fn close_windows(&mut self) -> Result<usize> {
        let step = self.setup.inference.window;
        let now = self.now();
        let mut closed = 0;
        while self.last_window_end + step <= now {
            let t_end = self.last_window_end + step;
            let levels: Vec<f64> = match self.tracker.as_mut() {
                Some(tr) => {
                    let tel = tr.advance(&self.history, &self.attrs, t_end)?;
                    let levels = tel.iter().map(|t| t.l_beta).collect();
                    self.log.extend(tel.into_iter().map(LogRecord::Trust));
                    levels
                }
                None => self.controllers.iter().map(|c| c.l_alpha()).collect(),
            };
            for (i, l_beta) in levels.into_iter().enumerate() {
                let critical = self.on_gas_duty(i + 1);
                let tel = self.controllers[i].on_window(l_beta, critical)?;
                self.log.push(LogRecord::Controller(tel));
            }
            self.last_window_end = t_end;
            self.windows += 1;
            closed += 1;
        }
        Ok(closed)
    }

    fn plan(&mut self) -> Vec<Action> {
        if self.world.leak_detected && self.gas_robot.is_none() && self.world.leak_active() {
            self.gas_robot = choose_gas_robot(&self.world);
        }
        let mut claims: Vec<Option<SubTask>> = self.world.agents.iter().map(|a| a.current_subtask).collect();
        let others = |claims: &[Option<SubTask>], me: usize| -> Vec<SubTask> {
            claims
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != me)
                .filter_map(|(_, c)| *c)
                .collect()
        };
        for i in 0..self.world.agents.len() {
            let a = &self.world.agents[i];
            let t = if i == HUMAN {
                if self.greedy_human {
                    human_policy(&self.world, a, &others(&claims, i))
                } else {
                    self.human_task
                }
            } else {
                let directive = self.directives[i - 1];
                robot_policy(&self.world, a, directive, self.gas_robot, &others(&claims, i))
            };
            claims[i] = t;
        }
        let mut actions = Vec::with_capacity(claims.len());
        for (i, t) in claims.iter().enumerate() {
            self.world.agents[i].current_subtask = *t;
            let mut act = next_action(&self.world, &self.world.agents[i], *t);
            if let Action::PickUp { victim } = act {
                if actions.contains(&Action::PickUp { victim }) {
                    act = Action::Stay;
                }
            }
            actions.push(act);
        }
        actions
    }

    fn clear_directives(&mut self, done: &[Completion]) {
        for r in 1..=self.scenario.n_robots {
            let Some(b) = self.directives[r - 1] else {
                continue;
            };
            let finished_here = done.iter().any(|c| match *c {
                Completion::Searched { agent, building }
                | Completion::Extinguished { agent, building }
                | Completion::GasShut { agent, building } => agent == r && building == b,
                Completion::PickedUp { agent, victim } => {
                    agent == r && self.world.victim_location(victim).is_some_and(|(vb, _)| vb == b)
                }
                _ => false,
            });
            let arrived_idle = directive_task(&self.world, b).kind == SubTaskKind::Goto
                && self.world.building(b).is_some_and(|bb| bb.cell == self.world.agents[r].cell);
            if finished_here || arrived_idle {
                self.directives[r - 1] = None;
            }
        }
    }

    /// Advances the episode by one tick. `human` overrides the human's action.
    pub fn tick(&mut self, human: Option<Action>) -> Result<TickOutcome> {
        if self.finished {
            return Err(Error::InvalidState("episode is over".into()));
        }
        let windows_closed = self.close_windows()?;
        let mut actions = self.plan();
        if let Some(h) = human {
            actions[HUMAN] = h;
        }
        let tick = self.world.tick;
        let done = self.world.step(&actions)?;
        for (agent, action) in actions.iter().enumerate() {
            if !matches!(action, Action::Stay | Action::MoveTo { .. }) {
                self.log.push(LogRecord::Action {
                    tick,
                    agent,
                    action: *action,
                });
            }
        }
        for c in &done {
            self.log.push(LogRecord::Completion { tick, completion: *c });
        }
        self.clear_directives(&done);
        if !self.world.leak_active() {
            self.gas_robot = None;
        }
        if self.world.terminated() || self.world.tick >= self.scenario.max_ticks {
            self.finish();
        }
        Ok(TickOutcome {
            completions: done,
            windows_closed,
            finished: self.finished,
        })
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let success = self.world.mission_complete();
        EpisodeMetrics {
            success,
            exploded: self.world.exploded,
            ticks: self.world.tick,
            duration: self.now(),
            n_commands: self.n_commands,
            conflicts: self.conflicts,
            refusals: self.refusals,
            repairs: self.repairs,
        }
    }

    fn finish(&mut self) {
        self.finished = true;
        let m = self.metrics();
        self.log.push(LogRecord::Metrics(m));
    }
}
