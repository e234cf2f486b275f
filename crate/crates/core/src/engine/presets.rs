use crate::engine::InitialProfile;
use crate::error::{Error, Result};
use crate::Kernel;

pub const PRESET_NAMES: [&str; 7] = [
    "tsrw",
    "third_derivative",
    "trap",
    "second_derivative",
    "log_walk",
    "ballistic",
    "fourth_derivative",
];

/// Kernel literal of a named preset, parseable into any scalar type.
pub fn preset_literal(name: &str) -> Result<&'static str> {
    Ok(match name {
        "tsrw" => "0,1",
        "third_derivative" => "-1,3",
        "trap" => "1,0",
        // -1/2 of l(-3/2) - l(-1/2) - l(1/2) + l(3/2)
        "second_derivative" => "-3/2:-1/2;-1/2:1/2;1/2:1/2;3/2:-1/2",
        // -(2 l(-3/2) - l(-1/2) - l(1/2))
        "log_walk" => "-3/2:-2;-1/2:1;1/2:1",
        // -(-l(3/2) - l(-1/2) + 2 l(1/2))
        "ballistic" => "-1/2:1;1/2:-2;3/2:1",
        // -1/2 of the discrete fourth derivative
        "fourth_derivative" => "-5/2:1/2;-3/2:-3/2;-1/2:1;1/2:1;3/2:-3/2;5/2:1/2",
        other => return Err(Error::UnknownPreset(other.to_string())),
    })
}

/// Kernel and initial profile of a named preset (walker at the origin).
pub fn preset(name: &str) -> Result<(Kernel, InitialProfile)> {
    let kernel: Kernel = preset_literal(name)?.parse()?;
    let profile = match name {
        // l(-1/2) = l(-3/2) = 1: the state after two forced right steps.
        "second_derivative" | "fourth_derivative" => InitialProfile::from_values([(-1, 1.0), (-2, 1.0)]),
        _ => InitialProfile::zero(),
    };
    Ok((kernel, profile))
}
