//! The command registry and helpers shared by the commands.

mod build;
mod continuum;
mod invariant;
mod levels;

use anyhow::{bail, Result};
use warpcone::actions::ActionCatalog;
use warpcone::spaces::build_net;
use warpcone::spectra::{EigenSolver, SolverRegistry};
use warpcone::warped::{build_warped_graph, WarpedGraph};

use crate::config::{Radius, RunConfig};
use crate::report::Run;

/// A named experiment driven by a [`RunConfig`].
pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()>;
}

/// Catalogs a command may draw on.
pub struct Context {
    pub actions: ActionCatalog,
    pub solvers: SolverRegistry,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            actions: ActionCatalog::builtin(),
            solvers: SolverRegistry::builtin(),
        }
    }
}

impl Context {
    pub fn solver(&self, config: &RunConfig) -> Result<&dyn EigenSolver> {
        Ok(self.solvers.get(config.solver.as_deref().unwrap_or("auto"))?)
    }

    /// Warped graph of the configured action at level `t`.
    pub fn graph(&self, config: &RunConfig, t: f64, default_epsilon: f64) -> Result<WarpedGraph> {
        let mut params = config.action_params();
        params.level = Some(t);
        let action = self.actions.build(config.action_name()?, &params)?;
        let net = build_net(
            &action.space,
            t,
            config.epsilon_or(default_epsilon),
            config.seed(),
            config.net.unwrap_or_default(),
        )?;
        Ok(build_warped_graph(&net, &action, config.cutoff, config.snap.unwrap_or_default())?)
    }
}

/// Scaled radius for `graphs`: the configured value, or the smallest admissible radius among them.
pub fn radius(config: &RunConfig, graphs: &[&WarpedGraph]) -> Result<f64> {
    match config.r {
        Some(Radius::Value(r)) => Ok(r),
        Some(Radius::Auto) | None => {
            let r = graphs.iter().map(|g| g.admissible_radius()).fold(f64::INFINITY, f64::min);
            if !(r.is_finite() && r > 0.0) {
                bail!("no admissible radius: the action has no free radius at these levels");
            }
            Ok(r)
        }
    }
}

/// Commands addressed by name.
pub struct CommandRegistry {
    commands: Vec<Box<dyn Command>>,
}

impl CommandRegistry {
    pub fn empty() -> Self {
        Self { commands: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(build::NetCommand));
        r.register(Box::new(build::GraphCommand));
        r.register(Box::new(levels::SpectrumCommand));
        r.register(Box::new(levels::SweepCommand));
        r.register(Box::new(continuum::SandwichCommand));
        r.register(Box::new(continuum::WeylCommand));
        r.register(Box::new(continuum::AccumulateCommand));
        r.register(Box::new(invariant::InvariantCommand));
        r.register(Box::new(invariant::BoxCompareCommand));
        r
    }

    /// Adds a command, replacing any command of the same name.
    pub fn register(&mut self, command: Box<dyn Command>) {
        self.commands.retain(|c| c.name() != command.name());
        self.commands.push(command);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Command> {
        self.commands.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Command> {
        self.commands.iter().map(|c| c.as_ref())
    }
}

/// Index and value of the largest entry.
pub(crate) fn worst<I: IntoIterator<Item = f64>>(values: I) -> Option<(usize, f64)> {
    values
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_holds_every_command() {
        let r = CommandRegistry::builtin();
        let names: Vec<_> = r.iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            ["net", "graph", "spectrum", "sweep", "sandwich", "weyl", "accumulate", "invariant", "boxcompare"]
        );
        assert!(r.get("plot").is_none());
    }

    #[test]
    fn worst_picks_the_largest() {
        assert_eq!(worst([0.1, 3.0, -2.0]), Some((1, 3.0)));
        assert_eq!(worst(Vec::<f64>::new()), None);
    }
}
