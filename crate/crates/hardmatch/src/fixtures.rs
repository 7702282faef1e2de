use crate::instance::{sample_instance, HardInstance};
use crate::params::{alpha_tilde, Config, LayoutStyle, Mode};
use crate::Result;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub config: Config,
    /// Too large for global enumeration; stream, count and sample only.
    pub streaming_only: bool,
}

impl Fixture {
    pub fn instance(&self, seed: u64) -> Result<HardInstance> {
        sample_instance(&self.config, seed)
    }
}

fn cfg(k: u32, l: u32, n: usize, slack: &[usize], mode: Mode, layout: LayoutStyle) -> Config {
    Config { k, l, n, slack: slack.to_vec(), seed: 0, mode, alpha_phases: None, layout }
}

/// K=2, one standalone gadget on [4]^3.
pub fn fix_a() -> Fixture {
    Fixture { name: "fix-a", config: cfg(2, 1, 3, &[2, 1], Mode::Standalone, LayoutStyle::Uniform), streaming_only: false }
}

pub fn fix_a_alpha() -> Fixture {
    let mut c = fix_a().config;
    c.alpha_phases = Some(alpha_tilde(2));
    Fixture { name: "fix-a-alpha", config: c, streaming_only: false }
}

/// K=2, L=2 on [4]^12.
pub fn fix_b() -> Fixture {
    Fixture { name: "fix-b", config: cfg(2, 2, 12, &[1], Mode::Glued, LayoutStyle::Uniform), streaming_only: false }
}

/// K=2, L=2 on [4]^14 with two free directions in every phase block.
pub fn fix_c() -> Fixture {
    Fixture { name: "fix-c", config: cfg(2, 2, 14, &[2, 1], Mode::Glued, LayoutStyle::Uniform), streaming_only: true }
}

/// K=2, L=2 on [4]^10, trimmed layout, |B̆^ℓ_0| = 2. Small enough for repeated full runs.
pub fn fix_d() -> Fixture {
    Fixture { name: "fix-d", config: cfg(2, 2, 10, &[2, 1], Mode::Glued, LayoutStyle::Trimmed), streaming_only: false }
}

pub const NAMES: [&str; 5] = ["fix-a", "fix-a-alpha", "fix-b", "fix-c", "fix-d"];

pub fn preset(name: &str) -> Option<Fixture> {
    Some(match name.to_ascii_lowercase().as_str() {
        "fix-a" => fix_a(),
        "fix-a-alpha" => fix_a_alpha(),
        "fix-b" => fix_b(),
        "fix-c" => fix_c(),
        "fix-d" => fix_d(),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in NAMES {
            let f = preset(name).unwrap();
            assert_eq!(f.name, name);
            f.config.build().unwrap();
        }
        assert!(preset("fix-z").is_none());
    }

    #[test]
    fn fix_c_has_two_free_directions() {
        let (_, layout) = fix_c().config.build().unwrap();
        for g in &layout.gadgets {
            assert_eq!(g.breve(0).len(), 2);
        }
    }
}
