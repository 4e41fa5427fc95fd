use super::{IntrinsicConfig, RewardMode};

/// Per-agent scalar reward for one step:
/// `team + V * intrinsic`, where intrinsic is CCL, OEM or `CCL + alpha * OEM`.
///
/// `team` is the sparse team reward; callers pass 0 on every step but the
/// last of an episode.
pub fn combine_rewards(team: f64, saliency: f64, ccl: f64, oem: f64, config: &IntrinsicConfig) -> f64 {
    let intrinsic = match config.mode {
        RewardMode::Ccl => ccl,
        RewardMode::Oem => oem,
        RewardMode::Mixture => ccl + config.alpha * oem,
        RewardMode::None => return team,
    };
    team + saliency * intrinsic
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: RewardMode) -> IntrinsicConfig {
        IntrinsicConfig {
            mode,
            ..Default::default()
        }
    }

    #[test]
    fn gate_closed_removes_intrinsic() {
        assert_eq!(combine_rewards(0.0, 0.0, 0.9, 0.4, &cfg(RewardMode::Ccl)), 0.0);
    }

    #[test]
    fn mixture_arithmetic() {
        let r = combine_rewards(0.0, 1.0, 0.5, 0.4, &cfg(RewardMode::Mixture));
        assert!((r - 0.7).abs() < 1e-15);
    }

    #[test]
    fn terminal_team_reward_adds() {
        let mut c = cfg(RewardMode::Oem);
        c.alpha = 123.0;
        assert_eq!(combine_rewards(1.0, 1.0, 9.0, 0.25, &c), 1.25);
        assert_eq!(combine_rewards(1.0, 1.0, 9.0, 0.25, &cfg(RewardMode::None)), 1.0);
    }
}
