//! Reproducible Monte Carlo over potential outcomes.

mod accumulator;
mod engine;
mod population;

pub use accumulator::Accumulator;
pub use engine::{
    draw_exogenous, evaluate, unit_effects, EngineError, Intervention, Simulator, UnitDraw, UnitEffects, Workspace,
    SLOPE_EPSILON,
};
pub use population::{
    run_population, stat, AceConsumer, EffectsConsumer, Executor, McError, PopulationRun, RunSpec, Sequential,
    UnitConsumer, DEFAULT_CHUNK_SIZE,
};
