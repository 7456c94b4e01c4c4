//! Rater personas and the rules they follow when rating and voting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{ParticipantId, ServiceId};
use crate::ledger::RandomBeacon;
use crate::review::{RefundVote, Vote};
use crate::wei::Wei;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterCategory {
    HappyHonest,
    UnhappyHonest,
    /// Pushes target services up regardless of quality.
    HappyDishonest,
    /// Pushes target services down regardless of quality.
    UnhappyDishonest,
}

impl RaterCategory {
    pub fn is_honest(self) -> bool {
        matches!(self, RaterCategory::HappyHonest | RaterCategory::UnhappyHonest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Good,
    Bad,
}

/// Ratings 4 and 5 read as positive, 1 and 2 as negative, 3 as neither.
pub fn rating_matches(rating: u8, quality: Quality) -> bool {
    match quality {
        Quality::Good => rating >= 4,
        Quality::Bad => rating <= 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterPersona {
    pub participant: ParticipantId,
    pub category: RaterCategory,
    pub attacker: bool,
    pub honest_vote_probability: f64,
    pub target_services: BTreeSet<ServiceId>,
    pub budget: Wei,
}

impl RaterPersona {
    /// Honest raters follow ground truth: Good draws 4 or 5, Bad draws 1
    /// or 2. Dishonest raters give 5 or 1 on their targets.
    pub fn rate(&self, quality: Quality, service: ServiceId, rng: &mut RandomBeacon) -> u8 {
        let pushing = !self.category.is_honest() && self.target_services.contains(&service);
        match self.category {
            RaterCategory::HappyDishonest if pushing => 5,
            RaterCategory::UnhappyDishonest if pushing => 1,
            _ => match quality {
                Quality::Good => rng.range_inclusive(4, 5) as u8,
                Quality::Bad => rng.range_inclusive(1, 2) as u8,
            },
        }
    }

    /// Endorsement vote on a review with `rating` of a service of `quality`.
    pub fn vote(&self, rating: u8, quality: Quality, service: ServiceId, rng: &mut RandomBeacon) -> Vote {
        let up = if !self.category.is_honest() && self.target_services.contains(&service) {
            match self.category {
                RaterCategory::HappyDishonest => rating >= 4,
                _ => rating <= 2,
            }
        } else {
            let truthful = rating_matches(rating, quality);
            if self.category.is_honest() && !rng.chance(self.honest_vote_probability) {
                !truthful
            } else {
                truthful
            }
        };
        if up {
            Vote::Up
        } else {
            Vote::Down
        }
    }

    /// Refund panel vote. Honest panelists approve claims against Bad
    /// services; attackers back fellow attackers and reject everyone else.
    pub fn refund_vote(&self, claimant_attacker: bool, quality: Quality, rng: &mut RandomBeacon) -> RefundVote {
        let approve = if self.category.is_honest() {
            let fair = quality == Quality::Bad;
            if rng.chance(self.honest_vote_probability) {
                fair
            } else {
                !fair
            }
        } else {
            claimant_attacker
        };
        if approve {
            RefundVote::Approve
        } else {
            RefundVote::Reject
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn persona(category: RaterCategory, targets: &[u64]) -> RaterPersona {
        RaterPersona {
            participant: ParticipantId(0),
            category,
            attacker: !category.is_honest(),
            honest_vote_probability: 1.0,
            target_services: targets.iter().map(|s| ServiceId(*s)).collect(),
            budget: Wei::ether(10),
        }
    }

    #[test]
    fn honest_ratings_stay_in_band() {
        let p = persona(RaterCategory::HappyHonest, &[]);
        let mut rng = RandomBeacon::new(3);
        for _ in 0..50 {
            assert!(rating_matches(p.rate(Quality::Good, ServiceId(0), &mut rng), Quality::Good));
            assert!(rating_matches(p.rate(Quality::Bad, ServiceId(0), &mut rng), Quality::Bad));
        }
    }

    #[test]
    fn dishonest_push_only_targets() {
        let mut rng = RandomBeacon::new(3);
        let bad_mouth = persona(RaterCategory::UnhappyDishonest, &[1]);
        assert_eq!(bad_mouth.rate(Quality::Good, ServiceId(1), &mut rng), 1);
        assert!(bad_mouth.rate(Quality::Good, ServiceId(2), &mut rng) >= 4);
        assert_eq!(bad_mouth.vote(5, Quality::Good, ServiceId(1), &mut rng), Vote::Down);
        assert_eq!(bad_mouth.vote(1, Quality::Good, ServiceId(1), &mut rng), Vote::Up);
        assert_eq!(bad_mouth.vote(5, Quality::Good, ServiceId(2), &mut rng), Vote::Up);
    }

    #[test]
    fn honest_vote_with_full_probability_is_truthful() {
        let p = persona(RaterCategory::UnhappyHonest, &[]);
        let mut rng = RandomBeacon::new(3);
        assert_eq!(p.vote(1, Quality::Good, ServiceId(0), &mut rng), Vote::Down);
        assert_eq!(p.vote(5, Quality::Good, ServiceId(0), &mut rng), Vote::Up);
        assert_eq!(p.vote(3, Quality::Bad, ServiceId(0), &mut rng), Vote::Down);
        assert_eq!(rng.counter(), 0);
        assert_eq!(p.refund_vote(true, Quality::Good, &mut rng), RefundVote::Reject);
        assert_eq!(p.refund_vote(false, Quality::Bad, &mut rng), RefundVote::Approve);
    }
}
