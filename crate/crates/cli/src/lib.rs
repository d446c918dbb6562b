//! Scenario runner for `folideform`: TOML scenarios in, deterministic JSON or
//! CSV reports out.

pub mod config;
pub mod run;

pub use config::{ConfigError, ScenarioConfig};
pub use run::{run_scenario, Overrides, Report, Status};

/// Built-in scenarios as `(name, TOML source)`, in catalog order.
pub const BUILTINS: [(&str, &str); 6] = [
    ("flat-levi-torus", include_str!("../scenarios/flat-levi-torus.toml")),
    ("product-s1-t2", include_str!("../scenarios/product-s1-t2.toml")),
    ("contact-noninteg", include_str!("../scenarios/contact-noninteg.toml")),
    ("paper-example-obstructed", include_str!("../scenarios/paper-example-obstructed.toml")),
    ("paper-example-unobstructed", include_str!("../scenarios/paper-example-unobstructed.toml")),
    ("uniqueness-t2", include_str!("../scenarios/uniqueness-t2.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Exit code for a finished run: 0 on success, 3 when an analysis failed.
pub fn exit_code(report: &Report) -> i32 {
    match report.status {
        Status::Ok => 0,
        Status::Failed => 3,
    }
}

pub const EXIT_VALIDATION: i32 = 2;
