//! Planner, coder, reflexion and Stage-B agents behind a text backend, and
//! the episode loop that drives them.

mod backend;
mod clock;
mod episode;
mod log;
mod prompts;
mod task;

pub use backend::{
    reply_text, Backend, BackendError, HttpBackend, Request, Response, Role, Script, ScriptEntry,
    ScriptedBackend, TranscriptEntry, API_KEY_ENV, API_URL_ENV,
};
pub use clock::Clock;
pub use episode::{run_episode, run_episode_with_store, run_wrapped, Backends, EpisodeOutput};
pub use log::{
    AdapterFlags, AttemptLog, CandidateRecord, Counters, EpisodeLog, EpisodeSummary, Evaluation,
    LogError, Mode, OfficialSummary, PhaseTimes, RepairOutcome, RepairRecord, Stage, Verdict,
    LOG_SCHEMA,
};
pub use prompts::{
    coder_prompt, extract_module, failure_lines, format_slice, format_window, parse_plan,
    planner_prompt, reflexion_prompt, slice_lines, stage_b_prompt, Plan, RepairContext,
    ResponseError, SLICE_HEADING,
};
pub use task::{TaskBundle, TaskError};
