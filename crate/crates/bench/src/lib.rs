//! Fixtures shared by the benchmarks.

use adhocsim::scenario::{self, ScenarioSpec};

/// The built-in scenario with the given name.
pub fn builtin(name: &str) -> ScenarioSpec {
    scenario::builtin(name).expect("built-in scenario")
}

/// A static `side` x `side` grid, 200 m apart, with one flow corner to corner.
pub fn grid(side: u16, end_secs: f64) -> ScenarioSpec {
    let mut text = format!("area {0} {0}\nrange 250\n", f64::from(side) * 200.0);
    for i in 0..side * side {
        let (x, y) = (f64::from(i % side) * 200.0, f64::from(i / side) * 200.0);
        text.push_str(&format!("node {i} {x} {y}\n"));
    }
    text.push_str(&format!("flow 0 {} 10 512 1.0 {end_secs}\nend {end_secs}\n", side * side - 1));
    scenario::parse(&text).expect("grid scenario")
}
