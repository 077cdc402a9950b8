use core::any::Any;

use super::{PlanCache, Situation, FOLLOW_LANE};
use crate::arbitration::Behavior;
use crate::mpcc::MpccConfig;
use crate::world::{Command, ScenarioParams};

/// Nominal driving along the route with the perceived corridor only.
#[derive(Debug, Clone)]
pub struct FollowLane {
    config: MpccConfig,
    replan_every: u32,
    cache: PlanCache,
}

impl FollowLane {
    pub fn new(params: &ScenarioParams) -> Self {
        Self {
            config: params.planner,
            replan_every: params.replan_every,
            cache: PlanCache::default(),
        }
    }
}

impl Behavior<Situation, Command> for FollowLane {
    fn name(&self) -> &str {
        FOLLOW_LANE
    }

    fn invocation(&self, _: &Situation) -> bool {
        true
    }

    fn commitment(&self, _: &Situation) -> bool {
        true
    }

    fn command(&mut self, s: &Situation) -> Command {
        self.cache
            .command(&self.config, self.replan_every, s, &s.environment.corridor)
            .unwrap_or(Command::Standstill)
    }

    fn gain_control(&mut self, _: &Situation) {
        self.cache.clear();
    }

    fn lose_control(&mut self, _: &Situation) {
        self.cache.clear();
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
